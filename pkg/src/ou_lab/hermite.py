"""Orthonormal Hermite chaos on the standard Gaussian measure.

Functions on (R^n, gamma_n) are stored as finite expansions in the tensor
basis ``h_alpha(x) = prod_i He_{alpha_i}(x_i) / sqrt(alpha_i!)`` where ``He_k``
are the probabilists' Hermite polynomials. The basis is orthonormal in
L^2(gamma_n), so L^2 norms are coefficient l^2 norms.

Gaussian integrals are realized by tensor Gauss-Hermite rules built with the
Golub-Welsch algorithm; weights are normalized to sum to one.
"""

from __future__ import annotations

import math
import os
from functools import lru_cache
from itertools import product
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "MultiIndex",
    "ChaosExpansion",
    "QuadratureGrid",
    "GridFunction",
    "NodeBudgetError",
    "DEFAULT_NODE_BUDGET",
    "PRUNE_THRESHOLD",
    "hermite_eval",
    "normalized_hermite_eval",
    "enumerate_multi_indices",
    "gauss_hermite_grid",
    "evaluate_expansion",
    "expansion_to_grid",
    "project_to_expansion",
    "node_budget",
]

DEFAULT_NODE_BUDGET = 2_000_000
PRUNE_THRESHOLD = 1e-15


class NodeBudgetError(ValueError):
    """Raised when a tensor grid would exceed the configured node budget."""


def node_budget() -> int:
    """Node budget, overridable through ``OU_LAB_NODE_BUDGET``."""
    raw = os.environ.get("OU_LAB_NODE_BUDGET")
    if raw is None or raw.strip() == "":
        return DEFAULT_NODE_BUDGET
    try:
        value = int(float(raw))
    except ValueError as exc:
        raise ValueError(f"OU_LAB_NODE_BUDGET must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"OU_LAB_NODE_BUDGET must be a positive integer, got {raw!r}")
    return value


class MultiIndex(tuple):
    """Exponent vector of a tensor Hermite basis element.

    Trailing zeros are significant: ``MultiIndex((1,))`` and
    ``MultiIndex((1, 0))`` live in different dimensions and compare unequal.
    """

    def __new__(cls, exponents: Iterable[int] = ()):
        values = tuple(int(e) for e in exponents)
        if any(e < 0 for e in values):
            raise ValueError(f"multi-index entries must be non-negative, got {values}")
        return super().__new__(cls, values)

    @property
    def dimension(self) -> int:
        return len(self)

    def order(self) -> int:
        return sum(self)

    def shifted(self, i: int, delta: int) -> "MultiIndex | None":
        """Index with entry ``i`` moved by ``delta``; None if it would go negative."""
        new = list(self)
        new[i] += delta
        if new[i] < 0:
            return None
        return MultiIndex(new)

    @classmethod
    def zero(cls, n: int) -> "MultiIndex":
        return cls((0,) * n)

    @classmethod
    def unit(cls, n: int, i: int, k: int = 1) -> "MultiIndex":
        e = [0] * n
        e[i] = k
        return cls(e)

    def __repr__(self) -> str:
        return f"MultiIndex({tuple(self)!r})"


def _grlex_key(alpha: Sequence[int]):
    # Graded order, then lexicographic with the first coordinate varying fastest
    # among equal total degree: (1,0) before (0,1).
    return (sum(alpha), tuple(-a for a in alpha))


def enumerate_multi_indices(n: int, d: int) -> list[MultiIndex]:
    """All multi-indices of dimension ``n`` with total degree at most ``d``.

    The result is in graded lexicographic order, e.g. for ``n=2, d=1``:
    ``(0,0), (1,0), (0,1)``. Its length is ``C(n+d, d)``.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if d < 0:
        raise ValueError(f"degree must be >= 0, got {d}")
    out: list[MultiIndex] = []

    def rec(prefix: list[int], remaining_dims: int, budget: int):
        if remaining_dims == 0:
            out.append(MultiIndex(prefix))
            return
        for k in range(budget + 1):
            rec(prefix + [k], remaining_dims - 1, budget - k)

    rec([], n, d)
    out.sort(key=_grlex_key)
    return out


# --------------------------------------------------------------------------
# one-dimensional polynomials
# --------------------------------------------------------------------------


def hermite_eval(k: int, x):
    """Probabilists' Hermite polynomial ``He_k`` at ``x`` (scalar or array).

    Uses ``He_{k+1} = x He_k - k He_{k-1}`` with ``He_0 = 1``, ``He_1 = x``.
    """
    if k < 0:
        raise ValueError(f"degree must be >= 0, got {k}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
    return cur if cur.ndim else float(cur)


def _normalized_table(x: np.ndarray, kmax: int) -> np.ndarray:
    """Rows ``h_0(x) .. h_kmax(x)`` of the orthonormal 1-D Hermite family."""
    table = np.empty((kmax + 1,) + x.shape)
    table[0] = 1.0
    if kmax >= 1:
        table[1] = x
    for k in range(1, kmax):
        table[k + 1] = (x * table[k] - math.sqrt(k) * table[k - 1]) / math.sqrt(k + 1)
    return table


def normalized_hermite_eval(alpha: Sequence[int], point: Sequence[float]) -> float:
    alpha = MultiIndex(alpha)
    point = np.asarray(point, dtype=float).reshape(-1)
    if point.shape[0] != len(alpha):
        raise ValueError(f"point has length {point.shape[0]}, multi-index has length {len(alpha)}")
    value = 1.0
    for a, xi in zip(alpha, point):
        value *= hermite_eval(a, xi) / math.sqrt(math.factorial(a))
    return float(value)


@lru_cache(maxsize=None)
def _linearization_1d(m: int, n: int) -> tuple[tuple[int, float], ...]:
    """``h_m h_n = sum_k c_k h_k`` for the orthonormal 1-D family."""
    terms = []
    for k in range(min(m, n) + 1):
        deg = m + n - 2 * k
        # He_m He_n = sum_k k! C(m,k) C(n,k) He_{m+n-2k}
        c = math.factorial(k) * math.comb(m, k) * math.comb(n, k)
        c *= math.sqrt(math.factorial(deg) / (math.factorial(m) * math.factorial(n)))
        terms.append((deg, c))
    return tuple(terms)


@lru_cache(maxsize=200_000)
def _basis_product(alpha: MultiIndex, beta: MultiIndex) -> tuple[tuple[MultiIndex, float], ...]:
    partial: list[tuple[tuple[int, ...], float]] = [((), 1.0)]
    for a, b in zip(alpha, beta):
        lin = _linearization_1d(a, b)
        partial = [(idx + (k,), c * ck) for idx, c in partial for k, ck in lin]
    return tuple((MultiIndex(idx), c) for idx, c in partial)


# --------------------------------------------------------------------------
# expansions
# --------------------------------------------------------------------------


class ChaosExpansion:
    """Finite Hermite-chaos expansion ``F = sum_alpha c_alpha h_alpha``.

    Instances are immutable. Arithmetic returns new expansions with
    coefficients below ``PRUNE_THRESHOLD`` in magnitude removed.

    Args:
        dimension: Number of Gaussian coordinates ``n``.
        coefficients: Mapping from exponent tuples of length ``n`` to reals.
    """

    __slots__ = ("_dimension", "_coefficients", "_max_degree")

    def __init__(self, dimension: int, coefficients: Mapping[Sequence[int], float] | None = None):
        if int(dimension) < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        dimension = int(dimension)
        clean: dict[MultiIndex, float] = {}
        for key, value in (coefficients or {}).items():
            alpha = MultiIndex(key)
            if len(alpha) != dimension:
                raise ValueError(f"multi-index {tuple(alpha)} does not have length {dimension}")
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"coefficient for {tuple(alpha)} is not finite")
            clean[alpha] = clean.get(alpha, 0.0) + value
        clean = {k: v for k, v in sorted(clean.items(), key=lambda kv: _grlex_key(kv[0]))
                 if abs(v) >= PRUNE_THRESHOLD}
        self._dimension = dimension
        self._coefficients = MappingProxyType(clean)
        self._max_degree = max((a.order() for a in clean), default=0)

    # construction helpers ------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "ChaosExpansion":
        return cls(n, {})

    @classmethod
    def constant(cls, n: int, value: float) -> "ChaosExpansion":
        return cls(n, {MultiIndex.zero(n): value})

    @classmethod
    def coordinate(cls, n: int, i: int) -> "ChaosExpansion":
        """The linear function ``x_i`` (0-based ``i``)."""
        return cls(n, {MultiIndex.unit(n, i): 1.0})

    @classmethod
    def from_hermite(cls, n: int, terms: Mapping[Sequence[int], float]) -> "ChaosExpansion":
        """Build from coefficients of the *unnormalized* products ``prod He_{alpha_i}``."""
        scaled = {}
        for key, value in terms.items():
            alpha = MultiIndex(key)
            norm = math.prod(math.sqrt(math.factorial(a)) for a in alpha)
            scaled[alpha] = scaled.get(alpha, 0.0) + value * norm
        return cls(n, scaled)

    # accessors -----------------------------------------------------------

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def coefficients(self) -> Mapping[MultiIndex, float]:
        return self._coefficients

    @property
    def max_degree(self) -> int:
        return self._max_degree

    def degree(self) -> int:
        return self._max_degree

    def coefficient(self, alpha: Sequence[int]) -> float:
        return self._coefficients.get(MultiIndex(alpha), 0.0)

    def is_zero(self) -> bool:
        return not self._coefficients

    def norm(self) -> float:
        """L^2(gamma_n) norm, i.e. the l^2 norm of the coefficients."""
        return math.sqrt(math.fsum(c * c for c in self._coefficients.values()))

    def __len__(self) -> int:
        return len(self._coefficients)

    def __iter__(self):
        return iter(self._coefficients.items())

    def map_coefficients(self, fn) -> "ChaosExpansion":
        """Apply ``fn(alpha, c) -> c'`` to every stored coefficient."""
        return ChaosExpansion(self._dimension, {a: fn(a, c) for a, c in self._coefficients.items()})

    def embed(self, n: int) -> "ChaosExpansion":
        """Same function viewed in ``n >= dimension`` coordinates."""
        if n < self._dimension:
            raise ValueError(f"cannot embed dimension {self._dimension} into {n}")
        pad = (0,) * (n - self._dimension)
        return ChaosExpansion(n, {tuple(a) + pad: c for a, c in self._coefficients.items()})

    def max_coefficient_difference(self, other: "ChaosExpansion") -> float:
        self._check_dim(other)
        keys = set(self._coefficients) | set(other._coefficients)
        return max((abs(self.coefficient(k) - other.coefficient(k)) for k in keys), default=0.0)

    def allclose(self, other: "ChaosExpansion", atol: float = 1e-12) -> bool:
        return self.max_coefficient_difference(other) <= atol

    # arithmetic ----------------------------------------------------------

    def _check_dim(self, other: "ChaosExpansion"):
        if not isinstance(other, ChaosExpansion):
            raise TypeError(f"expected ChaosExpansion, got {type(other).__name__}")
        if other._dimension != self._dimension:
            raise ValueError(f"dimension mismatch: {self._dimension} vs {other._dimension}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ChaosExpansion.constant(self._dimension, other)
        self._check_dim(other)
        out = dict(self._coefficients)
        for a, c in other._coefficients.items():
            out[a] = out.get(a, 0.0) + c
        return ChaosExpansion(self._dimension, out)

    __radd__ = __add__

    def __neg__(self):
        return self.map_coefficients(lambda a, c: -c)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            s = float(other)
            return self.map_coefficients(lambda a, c: s * c)
        self._check_dim(other)
        out: dict[MultiIndex, float] = {}
        for a, ca in self._coefficients.items():
            for b, cb in other._coefficients.items():
                for g, cg in _basis_product(a, b):
                    out[g] = out.get(g, 0.0) + ca * cb * cg
        return ChaosExpansion(self._dimension, out)

    def __rmul__(self, other):
        return self * other

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def __eq__(self, other):
        if not isinstance(other, ChaosExpansion):
            return NotImplemented
        return self._dimension == other._dimension and dict(self._coefficients) == dict(other._coefficients)

    def __hash__(self):
        return hash((self._dimension, tuple(self._coefficients.items())))

    def __call__(self, point):
        return evaluate_expansion(self, point)

    def __repr__(self) -> str:
        terms = ", ".join(f"{tuple(a)}: {c:.6g}" for a, c in self._coefficients.items())
        return f"ChaosExpansion(n={self._dimension}, {{{terms}}})"


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------


def _gauss_hermite_1d(m: int) -> tuple[np.ndarray, np.ndarray]:
    # Golub-Welsch: Jacobi matrix of the monic He recurrence has zero
    # diagonal and off-diagonal sqrt(k); weights are squared first components.
    if m == 1:
        return np.zeros(1), np.ones(1)
    off = np.sqrt(np.arange(1, m, dtype=float))
    nodes, vecs = eigh_tridiagonal(np.zeros(m), off)
    weights = vecs[0, :] ** 2
    # the rule is symmetric about 0; enforce it exactly
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    if m % 2 == 1:
        nodes[m // 2] = 0.0
    weights = weights / math.fsum(weights)
    return nodes, weights


class QuadratureGrid:
    """Tensor Gauss-Hermite rule for the standard Gaussian on R^n.

    Attributes:
        dimension: ``n``.
        order_per_dim: points per coordinate ``m``; exact for each coordinate
            up to degree ``2m - 1``.
        nodes: array of shape ``(m**n, n)``.
        weights: array of shape ``(m**n,)``, summing to one.
    """

    def __init__(self, dimension: int, order_per_dim: int, nodes: np.ndarray, weights: np.ndarray):
        self.dimension = int(dimension)
        self.order_per_dim = int(order_per_dim)
        self.nodes = np.asarray(nodes, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        if self.nodes.shape != (self.order_per_dim ** self.dimension, self.dimension):
            raise ValueError("node array does not match m**n x n")
        if self.weights.shape != (self.nodes.shape[0],):
            raise ValueError("weights length does not match node count")

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def exact_degree(self) -> int:
        """Per-coordinate polynomial degree integrated exactly."""
        return 2 * self.order_per_dim - 1

    def integrate(self, values) -> float:
        """Weighted sum of nodal values with compensated summation."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.weights.shape:
            raise ValueError(f"expected {self.weights.shape[0]} nodal values, got {values.shape}")
        return math.fsum((self.weights * values).tolist())

    def __eq__(self, other):
        if not isinstance(other, QuadratureGrid):
            return NotImplemented
        return self.dimension == other.dimension and self.order_per_dim == other.order_per_dim

    def __hash__(self):
        return hash((self.dimension, self.order_per_dim))

    def __repr__(self) -> str:
        return f"QuadratureGrid(n={self.dimension}, m={self.order_per_dim}, nodes={self.size})"


@lru_cache(maxsize=64)
def _cached_grid(n: int, m: int) -> QuadratureGrid:
    x, w = _gauss_hermite_1d(m)
    nodes = np.array(list(product(x, repeat=n))).reshape(m ** n, n)
    weights = np.prod(np.array(list(product(w, repeat=n))).reshape(m ** n, n), axis=1)
    return QuadratureGrid(n, m, nodes, weights)


def gauss_hermite_grid(n: int, m: int, budget: int | None = None) -> QuadratureGrid:
    """Tensor Gauss-Hermite grid with ``m`` points per coordinate.

    Raises:
        NodeBudgetError: if ``m**n`` exceeds the node budget (default
            2e6, or ``OU_LAB_NODE_BUDGET``). Use a smaller dimension or
            order; Monte-Carlo integration is not provided.
    """
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    budget = node_budget() if budget is None else budget
    # compare in log space, m**n overflows nothing in Python but may be huge
    if n * math.log(m) > math.log(budget) + 1e-12:
        raise NodeBudgetError(
            f"tensor grid with {m}^{n} nodes exceeds the node budget of {budget}; "
            "reduce the dimension or quadrature order (or raise OU_LAB_NODE_BUDGET); "
            "Monte-Carlo integration is not supported"
        )
    return _cached_grid(int(n), int(m))


class GridFunction:
    """Nodal values of a function on a quadrature grid."""

    def __init__(self, grid: QuadratureGrid, values):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.shape[0] != grid.size:
            raise ValueError(f"expected {grid.size} values, got {values.shape[0]}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def integrate(self) -> float:
        return self.grid.integrate(self.values)

    def min(self) -> float:
        return float(self.values.min())

    def __repr__(self) -> str:
        return f"GridFunction({self.grid!r})"


# --------------------------------------------------------------------------
# conversions
# --------------------------------------------------------------------------


def basis_matrix(indices: Sequence[MultiIndex], points: np.ndarray) -> np.ndarray:
    """Matrix ``B[p, j] = h_{indices[j]}(points[p])``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    if not indices:
        return np.zeros((points.shape[0], 0))
    kmax = max(max(a) if len(a) else 0 for a in indices)
    tables = [_normalized_table(points[:, i], kmax) for i in range(n)]
    out = np.ones((points.shape[0], len(indices)))
    for j, alpha in enumerate(indices):
        if len(alpha) != n:
            raise ValueError(f"multi-index {tuple(alpha)} does not match point dimension {n}")
        for i, a in enumerate(alpha):
            if a:
                out[:, j] *= tables[i][a]
    return out


def evaluate_expansion(F: ChaosExpansion, point):
    """Value of ``F`` at one point (length ``n``) or at each row of an array."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim <= 1
    pts = pts.reshape(1, -1) if single else pts
    if pts.shape[1] != F.dimension:
        raise ValueError(f"point has dimension {pts.shape[1]}, expansion has {F.dimension}")
    if F.is_zero():
        vals = np.zeros(pts.shape[0])
    else:
        keys = list(F.coefficients)
        coeffs = np.array([F.coefficients[k] for k in keys])
        vals = basis_matrix(keys, pts) @ coeffs
    return float(vals[0]) if single else vals


def expansion_to_grid(F: ChaosExpansion, grid: QuadratureGrid) -> GridFunction:
    if F.dimension != grid.dimension:
        raise ValueError(f"expansion dimension {F.dimension} does not match grid dimension {grid.dimension}")
    return GridFunction(grid, evaluate_expansion(F, grid.nodes))


def project_to_expansion(g: GridFunction, d: int) -> ChaosExpansion:
    """Discrete L^2 projection of nodal values onto chaos of degree <= d.

    Exact for a polynomial ``g`` of degree ``k`` when the grid integrates
    degree ``d + k`` exactly; otherwise an approximation.
    """
    grid = g.grid
    indices = enumerate_multi_indices(grid.dimension, d)
    B = basis_matrix(indices, grid.nodes)
    weighted = grid.weights * g.values
    coeffs = {}
    for j, alpha in enumerate(indices):
        coeffs[alpha] = math.fsum((weighted * B[:, j]).tolist())
    return ChaosExpansion(grid.dimension, coeffs)
