"""Mass, entropy, Fisher information and L^p norms against gamma_n.

Positivity is only ever checked at quadrature nodes. A density such as
``1 + 0.1 x`` is negative somewhere on R, but every functional here is a
nodal sum, so a nodal lower bound is exactly what the computation needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import gradient
from .hermite import ChaosExpansion, MultiIndex, QuadratureGrid, evaluate_expansion, gauss_hermite_grid

__all__ = [
    "PositivityCertificate",
    "PositivityError",
    "FunctionalReport",
    "check_positivity",
    "mass",
    "entropy",
    "fisher",
    "lp_norm",
    "default_grid",
    "functional_report",
    "GRID_MARGIN",
]

GRID_MARGIN = 8


class PositivityError(ValueError):
    """A density is not certified positive on the grid being used."""


@dataclass(frozen=True)
class PositivityCertificate:
    """Record of a nodal lower-bound check.

    Attributes:
        floor: required lower bound ``eps0 > 0``.
        min_observed: smallest nodal value of the density.
        grid: grid on which the check ran.
        argmin: coordinates of the node attaining ``min_observed``.
        subject: the expansion that was checked.
    """

    floor: float
    min_observed: float
    grid: QuadratureGrid = field(repr=False)
    argmin: tuple[float, ...] = ()
    subject: ChaosExpansion | None = field(default=None, repr=False, compare=False)

    @property
    def valid(self) -> bool:
        return self.min_observed >= self.floor

    def require(self, u: ChaosExpansion, grid: QuadratureGrid) -> None:
        if not self.valid:
            raise PositivityError(
                f"density falls to {self.min_observed!r} at node {self.argmin}, below floor {self.floor!r}"
            )
        if self.grid != grid:
            raise PositivityError(f"certificate was issued for {self.grid!r}, not {grid!r}")
        if self.subject is not None and self.subject != u:
            raise PositivityError("certificate was issued for a different density")


@dataclass
class FunctionalReport:
    mass: float
    entropy: float
    fisher: float
    lp_norms: dict[float, float] = field(default_factory=dict)


def default_grid(u: ChaosExpansion) -> QuadratureGrid:
    """Grid of order ``deg(u) + 8`` per coordinate."""
    return gauss_hermite_grid(u.dimension, u.max_degree + GRID_MARGIN)


def check_positivity(u: ChaosExpansion, grid: QuadratureGrid, floor: float) -> PositivityCertificate:
    if not floor > 0:
        raise ValueError(f"positivity floor must be > 0, got {floor}")
    vals = np.atleast_1d(evaluate_expansion(u, grid.nodes))
    k = int(np.argmin(vals))
    return PositivityCertificate(
        floor=float(floor),
        min_observed=float(vals[k]),
        grid=grid,
        argmin=tuple(float(x) for x in grid.nodes[k]),
        subject=u,
    )


def mass(u: ChaosExpansion) -> float:
    """Gaussian mean, i.e. the constant coefficient."""
    return u.coefficient(MultiIndex.zero(u.dimension))


def _nodal(u: ChaosExpansion, grid: QuadratureGrid) -> np.ndarray:
    if u.dimension != grid.dimension:
        raise ValueError(f"density dimension {u.dimension} does not match grid dimension {grid.dimension}")
    return np.atleast_1d(evaluate_expansion(u, grid.nodes))


def entropy(u: ChaosExpansion, grid: QuadratureGrid, cert: PositivityCertificate) -> float:
    """``-int u log u d gamma`` by quadrature."""
    cert.require(u, grid)
    vals = _nodal(u, grid)
    return grid.integrate(-vals * np.log(vals))


def fisher_density(u: ChaosExpansion, grid: QuadratureGrid) -> np.ndarray:
    """Nodal values of ``|grad u|^2 / u``."""
    vals = _nodal(u, grid)
    grad = gradient(u).evaluate(grid.nodes)
    return np.sum(grad * grad, axis=1) / vals


def fisher(u: ChaosExpansion, grid: QuadratureGrid, cert: PositivityCertificate) -> float:
    """Fisher information ``int |grad u|^2 / u d gamma`` by quadrature."""
    cert.require(u, grid)
    return grid.integrate(fisher_density(u, grid))


def lp_norm(u: ChaosExpansion, p: float, grid: QuadratureGrid) -> float:
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vals = np.abs(_nodal(u, grid))
    return grid.integrate(vals ** p) ** (1.0 / p)


def functional_report(u: ChaosExpansion, grid: QuadratureGrid | None = None, floor: float = 1e-3,
                      ps=(2.0, 4.0)) -> FunctionalReport:
    grid = grid or default_grid(u)
    cert = check_positivity(u, grid, floor)
    return FunctionalReport(
        mass=mass(u),
        entropy=entropy(u, grid, cert),
        fisher=fisher(u, grid, cert),
        lp_norms={float(p): lp_norm(u, p, grid) for p in ps},
    )
