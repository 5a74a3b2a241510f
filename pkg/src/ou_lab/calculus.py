"""Ornstein-Uhlenbeck calculus on Hermite-chaos expansions.

Everything here acts exactly on finite expansions. The orthonormal basis
makes the elementary operators index shifts:

* ``d/dx_i h_alpha = sqrt(alpha_i) h_{alpha - e_i}``  (lowering)
* ``x_i h_alpha = sqrt(alpha_i + 1) h_{alpha + e_i} + sqrt(alpha_i) h_{alpha - e_i}``
* ``(x_i - d/dx_i) h_alpha = sqrt(alpha_i + 1) h_{alpha + e_i}``  (raising)

and the OU generator ``L = sum_i (d_ii - x_i d_i)`` is diagonal with
eigenvalue ``-|alpha|``.
"""

from __future__ import annotations

import math
from typing import Iterator, Sequence

import numpy as np

from .hermite import (
    ChaosExpansion,
    MultiIndex,
    evaluate_expansion,
    gauss_hermite_grid,
    GridFunction,
    project_to_expansion,
)

__all__ = [
    "VectorExpansion",
    "MatrixExpansion",
    "SemigroupBackend",
    "SPECTRAL",
    "partial",
    "multiply_by_coordinate",
    "gradient",
    "hessian",
    "divergence",
    "apply_generator",
    "apply_semigroup",
    "time_derivative",
    "project_dimensions",
    "mehler_scale",
]


class VectorExpansion:
    """An R^n-valued functional, one chaos expansion per coordinate direction."""

    def __init__(self, components: Sequence[ChaosExpansion]):
        components = tuple(components)
        if not components:
            raise ValueError("a vector expansion needs at least one component")
        n = components[0].dimension
        if any(c.dimension != n for c in components):
            raise ValueError("all components must share the same dimension")
        if len(components) != n:
            raise ValueError(f"expected {n} components, got {len(components)}")
        self.components = components

    @property
    def dimension(self) -> int:
        return len(self.components)

    def __getitem__(self, i: int) -> ChaosExpansion:
        return self.components[i]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[ChaosExpansion]:
        return iter(self.components)

    def __mul__(self, s: float) -> "VectorExpansion":
        return VectorExpansion([c * s for c in self.components])

    __rmul__ = __mul__

    def __sub__(self, other: "VectorExpansion") -> "VectorExpansion":
        return VectorExpansion([a - b for a, b in zip(self.components, other.components)])

    def map(self, fn) -> "VectorExpansion":
        return VectorExpansion([fn(c) for c in self.components])

    def dot(self, other: "VectorExpansion") -> ChaosExpansion:
        """Pointwise inner product, as an exact expansion."""
        out = ChaosExpansion.zero(self.dimension)
        for a, b in zip(self.components, other.components):
            out = out + a * b
        return out

    def norm_squared(self) -> ChaosExpansion:
        return self.dot(self)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def max_coefficient_difference(self, other: "VectorExpansion") -> float:
        return max(a.max_coefficient_difference(b) for a, b in zip(self.components, other.components))

    def evaluate(self, points) -> np.ndarray:
        """Array of shape ``(n_points, n)``."""
        return np.stack([np.atleast_1d(evaluate_expansion(c, points)) for c in self.components], axis=-1)


class MatrixExpansion:
    """An n x n array of chaos expansions (Hessians and similar tensors)."""

    def __init__(self, entries: Sequence[Sequence[ChaosExpansion]]):
        entries = tuple(tuple(row) for row in entries)
        n = len(entries)
        if n == 0 or any(len(row) != n for row in entries):
            raise ValueError("entries must form a non-empty square array")
        if any(e.dimension != n for row in entries for e in row):
            raise ValueError("entry dimensions must equal the matrix size")
        self.entries = entries

    @property
    def dimension(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij) -> ChaosExpansion:
        i, j = ij
        return self.entries[i][j]

    def is_symmetric(self, atol: float = 0.0) -> bool:
        n = self.dimension
        return all(
            self.entries[i][j].max_coefficient_difference(self.entries[j][i]) <= atol
            for i in range(n) for j in range(i + 1, n)
        )

    def frobenius_squared(self) -> ChaosExpansion:
        out = ChaosExpansion.zero(self.dimension)
        for row in self.entries:
            for e in row:
                out = out + e * e
        return out

    def evaluate(self, points) -> np.ndarray:
        """Array of shape ``(n_points, n, n)``."""
        n = self.dimension
        vals = [[np.atleast_1d(evaluate_expansion(self.entries[i][j], points)) for j in range(n)]
                for i in range(n)]
        return np.moveaxis(np.array(vals), -1, 0)


# --------------------------------------------------------------------------
# elementary operators
# --------------------------------------------------------------------------


def partial(F: ChaosExpansion, i: int) -> ChaosExpansion:
    """Exact derivative along coordinate ``i``."""
    if not 0 <= i < F.dimension:
        raise IndexError(f"coordinate {i} out of range for dimension {F.dimension}")
    out = {}
    for alpha, c in F:
        if alpha[i] > 0:
            out[alpha.shifted(i, -1)] = math.sqrt(alpha[i]) * c
    return ChaosExpansion(F.dimension, out)


def multiply_by_coordinate(F: ChaosExpansion, i: int) -> ChaosExpansion:
    """Exact product ``x_i F`` via the three-term recurrence."""
    out: dict[MultiIndex, float] = {}
    for alpha, c in F:
        up = alpha.shifted(i, 1)
        out[up] = out.get(up, 0.0) + math.sqrt(alpha[i] + 1) * c
        if alpha[i] > 0:
            down = alpha.shifted(i, -1)
            out[down] = out.get(down, 0.0) + math.sqrt(alpha[i]) * c
    return ChaosExpansion(F.dimension, out)


def _raise(F: ChaosExpansion, i: int) -> ChaosExpansion:
    out = {alpha.shifted(i, 1): math.sqrt(alpha[i] + 1) * c for alpha, c in F}
    return ChaosExpansion(F.dimension, out)


def gradient(F: ChaosExpansion) -> VectorExpansion:
    return VectorExpansion([partial(F, i) for i in range(F.dimension)])


def hessian(F: ChaosExpansion) -> MatrixExpansion:
    n = F.dimension
    first = [partial(F, i) for i in range(n)]
    entries = [[partial(first[i], j) for j in range(n)] for i in range(n)]
    return MatrixExpansion(entries)


def divergence(Z: VectorExpansion, path: str = "raising") -> ChaosExpansion:
    """Gaussian divergence ``delta(Z) = sum_i (x_i Z_i - d_i Z_i)``.

    ``path="raising"`` applies the raising operator to each component;
    ``path="formula"`` multiplies by ``x_i`` and subtracts the derivative.
    Both give the L^2(gamma_n) adjoint of :func:`gradient`.
    """
    n = Z.dimension
    out = ChaosExpansion.zero(n)
    if path == "raising":
        for i, Zi in enumerate(Z):
            out = out + _raise(Zi, i)
    elif path == "formula":
        for i, Zi in enumerate(Z):
            out = out + multiply_by_coordinate(Zi, i) - partial(Zi, i)
    else:
        raise ValueError(f"unknown divergence path {path!r}")
    return out


def apply_generator(F: ChaosExpansion, path: str = "spectral") -> ChaosExpansion:
    """OU generator ``L F``.

    The spectral path scales ``c_alpha`` by ``-|alpha|``; the direct path
    assembles ``sum_i (d_ii F - x_i d_i F)`` from index shifts.
    """
    if path == "spectral":
        return F.map_coefficients(lambda a, c: -a.order() * c)
    if path == "direct":
        out = ChaosExpansion.zero(F.dimension)
        for i in range(F.dimension):
            di = partial(F, i)
            out = out + partial(di, i) - multiply_by_coordinate(di, i)
        return out
    raise ValueError(f"unknown generator path {path!r}")


# --------------------------------------------------------------------------
# semigroup
# --------------------------------------------------------------------------


class SemigroupBackend:
    """Selects how ``P_t`` is computed.

    Args:
        tag: ``"spectral"`` (coefficient damping ``exp(-|alpha| t)``) or
            ``"mehler-quadrature"`` (nodal Mehler integral followed by an
            exact projection).
        inner_order: per-dimension order of the inner Gaussian rule for the
            Mehler backend. ``None`` picks ``ceil((deg F + 1) / 2) + 2``.
    """

    TAGS = ("spectral", "mehler-quadrature")

    def __init__(self, tag: str = "spectral", inner_order: int | None = None):
        if tag == "mehler":
            tag = "mehler-quadrature"
        if tag not in self.TAGS:
            raise ValueError(f"unknown semigroup backend {tag!r}; expected one of {self.TAGS}")
        if inner_order is not None and inner_order < 1:
            raise ValueError("inner_order must be >= 1")
        self.tag = tag
        self.inner_order = inner_order

    def __repr__(self) -> str:
        return f"SemigroupBackend({self.tag!r}, inner_order={self.inner_order})"


SPECTRAL = SemigroupBackend("spectral")


def mehler_scale(t: float) -> float:
    """``sqrt(1 - exp(-2t))`` without cancellation for small ``t``."""
    return math.sqrt(-math.expm1(-2.0 * t))


def _mehler(F: ChaosExpansion, t: float, inner_order: int | None) -> ChaosExpansion:
    n, deg = F.dimension, F.max_degree
    if deg == 0:
        return F
    m_inner = inner_order or (math.ceil((deg + 1) / 2) + 2)
    # outer rule must integrate degree 2*deg exactly for the projection
    outer = gauss_hermite_grid(n, deg + 1)
    inner = gauss_hermite_grid(n, m_inner)
    a, s = math.exp(-t), mehler_scale(t)
    pts = a * outer.nodes[:, None, :] + s * inner.nodes[None, :, :]
    vals = evaluate_expansion(F, pts.reshape(-1, n)).reshape(outer.size, inner.size)
    smoothed = vals @ inner.weights
    return project_to_expansion(GridFunction(outer, smoothed), deg)


def apply_semigroup(F: ChaosExpansion, t: float, backend: SemigroupBackend | str = SPECTRAL) -> ChaosExpansion:
    """OU semigroup ``P_t F``.

    Raises:
        ValueError: if ``t < 0``.
    """
    if isinstance(backend, str):
        backend = SemigroupBackend(backend)
    t = float(t)
    if not t >= 0.0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    if t == 0.0:
        return F
    if backend.tag == "spectral":
        return F.map_coefficients(lambda a, c: math.exp(-a.order() * t) * c)
    return _mehler(F, t, backend.inner_order)


def time_derivative(F: ChaosExpansion, t: float) -> ChaosExpansion:
    """``d/dt P_t F`` computed spectrally: ``c -> -|alpha| exp(-|alpha| t) c``."""
    t = float(t)
    if not t >= 0.0:
        raise ValueError(f"time must be >= 0, got {t}")
    return F.map_coefficients(lambda a, c: -a.order() * math.exp(-a.order() * t) * c)


def project_dimensions(F: ChaosExpansion, k: int) -> ChaosExpansion:
    """Gaussian conditional expectation onto the first ``k`` coordinates.

    Drops every term involving a coordinate beyond ``k``; the result keeps
    dimension ``n`` so it can be compared with ``F`` directly.
    """
    n = F.dimension
    if not 1 <= k <= n:
        raise ValueError(f"retained dimension must satisfy 1 <= k <= {n}, got {k}")
    return ChaosExpansion(n, {a: c for a, c in F if not any(a[k:])})
