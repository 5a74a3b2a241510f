"""Seeded identity suite driven by a :class:`VerifyConfig`."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .calculus import VectorExpansion, apply_semigroup
from .config import PRESET_NAMES, VerifyConfig, parse_preset
from .functionals import PositivityError, check_positivity, default_grid
from .hermite import gauss_hermite_grid
from . import verifier as V

__all__ = ["PRESETS", "run_verify_suite", "effective_tolerances"]

PRESETS = {
    "uniform": "uniform",
    "first-chaos": "first-chaos(0.01)",
    "second-chaos": "second-chaos(0.01)",
    "mixed": "mixed(1.5,0.2,0.1)",
}
assert set(PRESETS) == set(PRESET_NAMES)


def effective_tolerances(cfg: VerifyConfig, scale: float = 1.0) -> dict[str, float]:
    tols = dict(V.DEFAULT_TOLERANCES)
    if cfg.tolerance > 0:
        tols = {k: cfg.tolerance for k in tols}
    tols.update(cfg.tolerances)
    return {k: v * scale for k, v in tols.items()}


def _failed(name: str, tol: float, exc: Exception, **details) -> V.IdentityReport:
    details["error"] = str(exc)
    return V.IdentityReport(name, math.inf, math.inf, 0, tol, False, details)


def run_verify_suite(cfg: VerifyConfig, tolerance_scale: float = 1.0) -> list[V.IdentityReport]:
    """Run every identity family; one report per individual check."""
    tol = effective_tolerances(cfg, tolerance_scale)
    rng = np.random.default_rng(cfg.seed)
    dims = itertools.cycle(cfg.dimensions)
    reports: list[V.IdentityReport] = []

    def tagged(report, case, n):
        report.details.setdefault("case", case)
        report.details.setdefault("dimension", n)
        return report

    d = cfg.max_degree
    for case in range(cfg.random_cases):
        n = next(dims)
        grid = gauss_hermite_grid(n, cfg.grid_order())
        F = V.random_polynomial(rng, n, int(rng.integers(0, d + 1)))
        G = V.random_polynomial(rng, n, int(rng.integers(0, d + 1)))
        Z = VectorExpansion([V.random_polynomial(rng, n, max(d - 1, 0)) for _ in range(n)])
        t = float(rng.choice([x for x in cfg.times if x > 0] or [0.5]))
        s = float(rng.uniform(0.0, 1.0))
        reports.append(tagged(V.check_weitzenbock(F, grid, tol["weitzenbock"]), case, n))
        reports.append(tagged(V.check_integration_by_parts(F, G, grid, tol["integration_by_parts"]), case, n))
        reports.append(tagged(V.check_divergence_adjoint(Z, G, grid, tol["divergence_adjoint"]), case, n))
        reports.append(tagged(V.check_generator_paths(F, tol["generator_paths"]), case, n))
        reports.append(tagged(V.check_semigroup_symmetry(F, G, t, grid, tol["semigroup_symmetry"]), case, n))
        reports.append(tagged(V.check_semigroup_law(F, s, t, tol["semigroup_law"]), case, n))
        reports.append(tagged(V.check_gradient_commutation(F, t, tol["gradient_commutation"]), case, n))
        reports.append(tagged(V.check_mass_invariance(F, cfg.times, tol["mass_invariance"]), case, n))
        k = int(rng.integers(1, n + 1))
        reports.append(tagged(V.check_projection_commutes(F, k, t, tol["projection_commutes"]), case, n))

    dims = itertools.cycle(cfg.dimensions)
    for case in range(cfg.density_cases):
        n = next(dims)
        grid = gauss_hermite_grid(n, cfg.density_degree + 3)
        u0 = V.random_density(rng, n, cfg.density_degree, grid, cfg.density_sup)
        for t in cfg.times:
            try:
                cert = check_positivity(apply_semigroup(u0, t), grid, cfg.floor)
                r = V.check_bochner_entropy(u0, t, grid, cert, tol["bochner_entropy"])
            except PositivityError as exc:
                r = _failed("bochner_entropy", tol["bochner_entropy"], exc, t=t)
            reports.append(tagged(r, case, n))

    bdims = itertools.cycle(cfg.backend_dimensions)
    for case, deg in enumerate(range(cfg.backend_max_degree + 1)):
        n = next(bdims)
        F = V.random_polynomial(rng, n, deg)
        for t in cfg.backend_times:
            reports.append(tagged(V.check_backend_agreement(F, t, tol["backend_agreement"]), case, n))

    for name, preset in PRESETS.items():
        u = parse_preset(preset)
        grid = default_grid(u)
        cert = check_positivity(u, grid, cfg.floor)
        reports.append(tagged(V.check_entropy_bound(u, grid, cert, tol["entropy_bound"]), name, 1))
        for p in cfg.contraction_p:
            order = max(grid.order_per_dim, math.ceil((p * u.max_degree + 1) / 2))
            pgrid = gauss_hermite_grid(1, order)
            for t in cfg.times:
                reports.append(tagged(V.check_contraction(u, p, t, pgrid, tol["contraction"]), name, 1))
    return reports
