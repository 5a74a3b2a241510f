"""Residual checks for the exact identities of the OU calculus.

Each check returns an :class:`IdentityReport`. Relative residuals divide by
``max(1, max|lhs|, max|rhs|)`` so that ``0 = 0`` identities do not blow up.
Inequalities are one-sided: only a violation beyond the tolerance counts.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .calculus import (
    SemigroupBackend,
    VectorExpansion,
    apply_generator,
    apply_semigroup,
    divergence,
    gradient,
    hessian,
    project_dimensions,
    time_derivative,
)
from .functionals import PositivityCertificate, entropy, lp_norm, mass
from .hermite import ChaosExpansion, QuadratureGrid, enumerate_multi_indices, evaluate_expansion

__all__ = [
    "IdentityReport",
    "DEFAULT_TOLERANCES",
    "check_weitzenbock",
    "check_bochner_entropy",
    "check_integration_by_parts",
    "check_divergence_adjoint",
    "check_semigroup_symmetry",
    "check_contraction",
    "check_projection_commutes",
    "check_semigroup_law",
    "check_gradient_commutation",
    "check_generator_paths",
    "check_backend_agreement",
    "check_mass_invariance",
    "check_entropy_bound",
    "random_polynomial",
    "random_density",
]

DEFAULT_TOLERANCES = {
    "weitzenbock": 1e-10,
    "bochner_entropy": 1e-8,
    "integration_by_parts": 1e-10,
    "divergence_adjoint": 1e-10,
    "semigroup_symmetry": 1e-10,
    "contraction": 1e-12,
    "projection_commutes": 1e-14,
    "semigroup_law": 1e-12,
    "gradient_commutation": 1e-12,
    "generator_paths": 1e-12,
    "backend_agreement": 1e-10,
    "mass_invariance": 1e-12,
    "entropy_bound": 1e-10,
}


@dataclass
class IdentityReport:
    identity_name: str
    max_abs_residual: float
    max_rel_residual: float
    nodes_checked: int
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IdentityReport":
        d = dict(d)
        d["passed"] = d.pop("pass")
        return cls(**d)

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.identity_name}: rel={self.max_rel_residual:.3e} "
                f"abs={self.max_abs_residual:.3e} tol={self.tolerance:.1e} nodes={self.nodes_checked}")


def _tol(name: str, tolerance: float | None) -> float:
    return DEFAULT_TOLERANCES[name] if tolerance is None else float(tolerance)


def _pointwise(name, left, right, tolerance, **details) -> IdentityReport:
    lhs = np.atleast_1d(np.asarray(left, dtype=float))
    rhs = np.atleast_1d(np.asarray(right, dtype=float))
    diff = np.abs(lhs - rhs)
    scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    max_abs = float(diff.max())
    rel = max_abs / scale
    return IdentityReport(name, max_abs, rel, int(lhs.size), tolerance, bool(rel <= tolerance), details)


def _coefficientwise(name, A: ChaosExpansion, B: ChaosExpansion, tolerance, **details) -> IdentityReport:
    max_abs = A.max_coefficient_difference(B)
    scale = max([1.0] + [abs(c) for _, c in A] + [abs(c) for _, c in B])
    rel = max_abs / scale
    n_coeffs = len(set(A.coefficients) | set(B.coefficients))
    return IdentityReport(name, max_abs, rel, n_coeffs, tolerance, bool(rel <= tolerance), details)


def _one_sided(name, smaller, larger, tolerance, nodes, **details) -> IdentityReport:
    """Report for ``smaller <= larger``; residual is the size of any violation."""
    excess = max(0.0, float(smaller) - float(larger))
    scale = max(1.0, abs(float(smaller)), abs(float(larger)))
    rel = excess / scale
    details.setdefault("lhs", float(smaller))
    details.setdefault("rhs", float(larger))
    return IdentityReport(name, excess, rel, int(nodes), tolerance, bool(rel <= tolerance), details)


# --------------------------------------------------------------------------
# random test data
# --------------------------------------------------------------------------


def random_polynomial(rng: np.random.Generator, n: int, degree: int, low: float = -1.0,
                      high: float = 1.0) -> ChaosExpansion:
    """Chaos expansion with every coefficient up to ``degree`` drawn uniformly."""
    indices = enumerate_multi_indices(n, degree)
    values = rng.uniform(low, high, size=len(indices))
    return ChaosExpansion(n, dict(zip(indices, values)))


def random_density(rng: np.random.Generator, n: int, degree: int, grid: QuadratureGrid,
                   sup: float = 0.3) -> ChaosExpansion:
    """Constant in [1, 2] plus a polynomial whose nodal sup-norm is at most ``sup``."""
    base = float(rng.uniform(1.0, 2.0))
    pert = random_polynomial(rng, n, max(degree, 1))
    pert = pert - mass(pert)
    peak = float(np.max(np.abs(evaluate_expansion(pert, grid.nodes))))
    scale = float(rng.uniform(0.0, sup)) / peak if peak > 0 else 0.0
    return pert * scale + base


# --------------------------------------------------------------------------
# curvature identities
# --------------------------------------------------------------------------


def check_weitzenbock(F: ChaosExpansion, grid: QuadratureGrid, tolerance: float | None = None) -> IdentityReport:
    """``L|grad F|^2 = 2<grad F, grad LF> + 2|grad F|^2 + 2||Hess F||^2`` at every node.

    The left side is the exact expansion of ``|grad F|^2`` pushed through the
    spectral generator; the right side is assembled from nodal values.
    """
    tolerance = _tol("weitzenbock", tolerance)
    pts = grid.nodes
    gradF = gradient(F)
    lhs = evaluate_expansion(apply_generator(gradF.norm_squared()), pts)

    g = gradF.evaluate(pts)
    gL = gradient(apply_generator(F, "direct")).evaluate(pts)
    H = hessian(F).evaluate(pts)
    rhs = 2 * np.sum(g * gL, axis=1) + 2 * np.sum(g * g, axis=1) + 2 * np.sum(H * H, axis=(1, 2))
    return _pointwise("weitzenbock", lhs, rhs, tolerance, dimension=F.dimension, degree=F.max_degree)


def _ratio_field(u: ChaosExpansion, pts: np.ndarray) -> np.ndarray:
    U = np.atleast_1d(evaluate_expansion(u, pts))
    g = gradient(u).evaluate(pts)
    return np.sum(g * g, axis=1) / U


def check_bochner_entropy(u0: ChaosExpansion, t: float, grid: QuadratureGrid, cert: PositivityCertificate,
                          tolerance: float | None = None, fd_step: float = 1e-4) -> IdentityReport:
    """Heat-type identity for ``q = |grad u_t|^2 / u_t`` with ``u_t = P_t u0``:

    ``(L - d/dt) q = 2|grad u|^2 / u + (2/u) ||Hess u - grad u (x) grad u / u||^2``.

    ``L q`` is expanded by the product rule around ``1/u`` with every
    polynomial ingredient exact; ``d/dt`` uses the spectral time
    derivative. A central finite difference of ``q`` in ``t`` is reported
    in ``details`` as a secondary diagnostic.
    """
    tolerance = _tol("bochner_entropy", tolerance)
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    u = apply_semigroup(u0, t)
    cert.require(u, grid)
    pts = grid.nodes

    U = np.atleast_1d(evaluate_expansion(u, pts))
    grad_u_exp = gradient(u)
    Du = grad_u_exp.evaluate(pts)
    G = np.sum(Du * Du, axis=1)
    g_exp = grad_u_exp.norm_squared()
    Lg = evaluate_expansion(apply_generator(g_exp), pts)
    Dg = gradient(g_exp).evaluate(pts)
    Lu = evaluate_expansion(apply_generator(u, "direct"), pts)

    L_inv = -Lu / U**2 + 2 * G / U**3
    D_inv = -Du / U[:, None] ** 2
    L_q = Lg / U + G * L_inv + 2 * np.sum(D_inv * Dg, axis=1)

    ut = time_derivative(u0, t)
    Ut = evaluate_expansion(ut, pts)
    Dut = gradient(ut).evaluate(pts)
    dt_q = 2 / U * np.sum(Du * Dut, axis=1) - G / U**2 * Ut

    lhs = L_q - dt_q
    H = hessian(u).evaluate(pts)
    M = H - Du[:, :, None] * Du[:, None, :] / U[:, None, None]
    rhs = 2 * G / U + 2 / U * np.sum(M * M, axis=(1, 2))

    if t >= fd_step:
        fd = (_ratio_field(apply_semigroup(u0, t + fd_step), pts)
              - _ratio_field(apply_semigroup(u0, t - fd_step), pts)) / (2 * fd_step)
    else:
        q0, q1, q2 = (_ratio_field(apply_semigroup(u0, t + k * fd_step), pts) for k in range(3))
        fd = (-3 * q0 + 4 * q1 - q2) / (2 * fd_step)
    fd_scale = max(1.0, float(np.max(np.abs(dt_q))))
    details = {
        "t": float(t),
        "dimension": u0.dimension,
        "fd_step": fd_step,
        "fd_time_derivative_rel_residual": float(np.max(np.abs(fd - dt_q)) / fd_scale),
    }
    return _pointwise("bochner_entropy", lhs, rhs, tolerance, **details)


# --------------------------------------------------------------------------
# integration by parts and symmetry
# --------------------------------------------------------------------------


def check_integration_by_parts(F: ChaosExpansion, G: ChaosExpansion, grid: QuadratureGrid,
                               tolerance: float | None = None) -> IdentityReport:
    """``int (L F) G = -int <grad F, grad G>`` with both sides by quadrature."""
    tolerance = _tol("integration_by_parts", tolerance)
    pts = grid.nodes
    lhs = grid.integrate(evaluate_expansion(apply_generator(F), pts) * evaluate_expansion(G, pts))
    gF, gG = gradient(F).evaluate(pts), gradient(G).evaluate(pts)
    rhs = -grid.integrate(np.sum(gF * gG, axis=1))
    return _pointwise("integration_by_parts", lhs, rhs, tolerance, lhs=lhs, rhs=rhs)


def check_divergence_adjoint(Z: VectorExpansion, G: ChaosExpansion, grid: QuadratureGrid,
                             tolerance: float | None = None) -> IdentityReport:
    """``int delta(Z) G = int <Z, grad G>``, plus agreement of both divergence paths."""
    tolerance = _tol("divergence_adjoint", tolerance)
    pts = grid.nodes
    dz = divergence(Z, "raising")
    lhs = grid.integrate(evaluate_expansion(dz, pts) * evaluate_expansion(G, pts))
    rhs = grid.integrate(np.sum(Z.evaluate(pts) * gradient(G).evaluate(pts), axis=1))
    report = _pointwise("divergence_adjoint", lhs, rhs, tolerance, lhs=lhs, rhs=rhs)
    gap = _coefficientwise("divergence_adjoint", dz, divergence(Z, "formula"), tolerance)
    report.details["divergence_path_gap"] = gap.max_abs_residual
    # keep pass <=> max_rel_residual <= tolerance with the path gap folded in
    report.max_rel_residual = max(report.max_rel_residual, gap.max_rel_residual)
    report.passed = bool(report.max_rel_residual <= tolerance)
    return report


def check_semigroup_symmetry(u: ChaosExpansion, v: ChaosExpansion, t: float, grid: QuadratureGrid,
                             tolerance: float | None = None) -> IdentityReport:
    """``int u P_t v = int v P_t u``."""
    tolerance = _tol("semigroup_symmetry", tolerance)
    pts = grid.nodes
    lhs = grid.integrate(evaluate_expansion(u, pts) * evaluate_expansion(apply_semigroup(v, t), pts))
    rhs = grid.integrate(evaluate_expansion(v, pts) * evaluate_expansion(apply_semigroup(u, t), pts))
    return _pointwise("semigroup_symmetry", lhs, rhs, tolerance, t=float(t), lhs=lhs, rhs=rhs)


def check_contraction(u: ChaosExpansion, p: float, t: float, grid: QuadratureGrid,
                      tolerance: float | None = None) -> IdentityReport:
    """``||P_t u||_p <= ||u||_p``."""
    tolerance = _tol("contraction", tolerance)
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    smoothed = lp_norm(apply_semigroup(u, t), p, grid)
    original = lp_norm(u, p, grid)
    return _one_sided("contraction", smoothed, original, tolerance, grid.size, p=float(p), t=float(t))


def check_entropy_bound(u: ChaosExpansion, grid: QuadratureGrid, cert: PositivityCertificate,
                        tolerance: float | None = None) -> IdentityReport:
    """``Ent(u) <= 1 - mass(u)`` (from ``-x log x <= 1 - x``)."""
    tolerance = _tol("entropy_bound", tolerance)
    ent = entropy(u, grid, cert)
    return _one_sided("entropy_bound", ent, 1.0 - mass(u), tolerance, grid.size)


# --------------------------------------------------------------------------
# coefficient-wise semigroup identities
# --------------------------------------------------------------------------


def check_projection_commutes(u: ChaosExpansion, k: int, t: float,
                              tolerance: float | None = None) -> IdentityReport:
    """Conditional expectation onto the first ``k`` coordinates commutes with ``P_t``."""
    tolerance = _tol("projection_commutes", tolerance)
    a = project_dimensions(apply_semigroup(u, t), k)
    b = apply_semigroup(project_dimensions(u, k), t)
    return _coefficientwise("projection_commutes", a, b, tolerance, k=k, t=float(t))


def check_semigroup_law(F: ChaosExpansion, s: float, t: float,
                        tolerance: float | None = None) -> IdentityReport:
    tolerance = _tol("semigroup_law", tolerance)
    if s < 0 or t < 0:
        raise ValueError("semigroup times must be >= 0")
    a = apply_semigroup(apply_semigroup(F, s), t)
    b = apply_semigroup(F, s + t)
    return _coefficientwise("semigroup_law", a, b, tolerance, s=float(s), t=float(t))


def check_gradient_commutation(F: ChaosExpansion, t: float,
                               tolerance: float | None = None) -> IdentityReport:
    """``grad P_t F = exp(-t) P_t grad F`` component by component."""
    tolerance = _tol("gradient_commutation", tolerance)
    lhs = gradient(apply_semigroup(F, t))
    rhs = gradient(F).map(lambda c: apply_semigroup(c, t)) * math.exp(-t)
    reports = [_coefficientwise("gradient_commutation", a, b, tolerance) for a, b in zip(lhs, rhs)]
    worst = max(reports, key=lambda r: r.max_rel_residual)
    return IdentityReport("gradient_commutation", max(r.max_abs_residual for r in reports),
                          worst.max_rel_residual, sum(r.nodes_checked for r in reports), tolerance,
                          all(r.passed for r in reports), {"t": float(t)})


def check_generator_paths(F: ChaosExpansion, tolerance: float | None = None) -> IdentityReport:
    """Spectral ``L``, direct ``sum d_ii - x_i d_i`` and ``-delta(grad)`` agree."""
    tolerance = _tol("generator_paths", tolerance)
    spectral = apply_generator(F, "spectral")
    candidates = {
        "direct": apply_generator(F, "direct"),
        "minus_div_grad_raising": -divergence(gradient(F), "raising"),
        "minus_div_grad_formula": -divergence(gradient(F), "formula"),
    }
    reports = {k: _coefficientwise("generator_paths", spectral, v, tolerance) for k, v in candidates.items()}
    worst = max(reports.values(), key=lambda r: r.max_rel_residual)
    return IdentityReport("generator_paths", max(r.max_abs_residual for r in reports.values()),
                          worst.max_rel_residual, worst.nodes_checked, tolerance,
                          all(r.passed for r in reports.values()),
                          {k: r.max_abs_residual for k, r in reports.items()})


def check_backend_agreement(F: ChaosExpansion, t: float, tolerance: float | None = None) -> IdentityReport:
    """Spectral and Mehler-quadrature ``P_t F`` agree coefficient-wise."""
    tolerance = _tol("backend_agreement", tolerance)
    a = apply_semigroup(F, t, SemigroupBackend("spectral"))
    b = apply_semigroup(F, t, SemigroupBackend("mehler-quadrature"))
    return _coefficientwise("backend_agreement", a, b, tolerance, t=float(t), degree=F.max_degree)


def check_mass_invariance(F: ChaosExpansion, times: Sequence[float],
                          tolerance: float | None = None) -> IdentityReport:
    tolerance = _tol("mass_invariance", tolerance)
    m0 = mass(F)
    masses = [mass(apply_semigroup(F, t)) for t in times]
    return _pointwise("mass_invariance", np.full(len(masses), m0), masses, tolerance,
                      times=[float(t) for t in times])
