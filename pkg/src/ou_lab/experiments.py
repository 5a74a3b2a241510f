"""Entropy and Fisher-information trajectories along the OU flow.

``u_t = P_t u_0`` is computed exactly (spectrally) from ``t = 0`` at every
sampled time; there is no time stepping.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .calculus import apply_generator, apply_semigroup
from .config import ExperimentConfig
from .functionals import PositivityError, check_positivity, entropy, fisher, mass
from .hermite import ChaosExpansion, QuadratureGrid, evaluate_expansion
from .verifier import IdentityReport

__all__ = [
    "TrajectoryRecord",
    "DecayFitError",
    "evolve_trajectory",
    "check_entropy_production",
    "check_decay_bound",
    "check_near_tightness",
    "check_trajectory_invariants",
    "check_interchange",
    "check_right_continuity",
    "fit_decay_rate",
]


class DecayFitError(ValueError):
    """Fisher information is not strictly positive, so no log-linear fit exists."""


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    mass: float
    entropy: float
    fisher: float
    bound: float
    ratio: float  # nan when fisher(u_0) == 0

    def to_dict(self) -> dict:
        return asdict(self)


def _certified(u: ChaosExpansion, grid: QuadratureGrid, floor: float, t: float):
    cert = check_positivity(u, grid, floor)
    if not cert.valid:
        raise PositivityError(
            f"u_t is not certified positive at t={t!r}: value {cert.min_observed!r} at node "
            f"{cert.argmin} is below floor {floor!r} (grid {grid.order_per_dim}^{grid.dimension}); "
            "increase the density margin or change the quadrature order"
        )
    return cert


def _entropy_at(u0, t, grid, floor) -> float:
    u = apply_semigroup(u0, t)
    return entropy(u, grid, _certified(u, grid, floor, t))


def evolve_trajectory(cfg: ExperimentConfig, u0: ChaosExpansion | None = None) -> list[TrajectoryRecord]:
    """Mass, entropy and Fisher information of ``P_t u0`` at each configured time.

    Raises:
        PositivityError: if any ``u_t`` dips below the floor at a grid node.
    """
    u0 = cfg.initial_density() if u0 is None else u0
    grid = cfg.grid()
    fisher0 = fisher(u0, grid, _certified(u0, grid, cfg.floor, 0.0))
    records = []
    for t in cfg.time_grid():
        t = float(t)
        u = apply_semigroup(u0, t)
        cert = _certified(u, grid, cfg.floor, t)
        fi = fisher(u, grid, cert)
        bound = math.exp(-2 * t) * fisher0
        records.append(TrajectoryRecord(
            t=t,
            mass=mass(u),
            entropy=entropy(u, grid, cert),
            fisher=fi,
            bound=bound,
            ratio=fi / fisher0 if fisher0 > 0 else math.nan,
        ))
    return records


def _fd(fn, t: float, h: float) -> float:
    """Central difference, or a second-order forward stencil near ``t = 0``."""
    if t >= h:
        return (fn(t + h) - fn(t - h)) / (2 * h)
    return (-3 * fn(t) + 4 * fn(t + h) - fn(t + 2 * h)) / (2 * h)


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def check_entropy_production(traj: Sequence[TrajectoryRecord], u0: ChaosExpansion,
                             cfg: ExperimentConfig, tolerance: float | None = None) -> IdentityReport:
    """``dEnt/dt = -int (log u) L u = int |grad u|^2 / u`` at each sampled time.

    The derivative is a finite difference of the quadrature entropy; the
    middle expression is an independent quadrature. Residuals are relative
    to the Fisher information itself.
    """
    if len(traj) < 3:
        raise ValueError(f"entropy production check needs at least 3 time points, got {len(traj)}")
    tolerance = cfg.tolerance("entropy_production") if tolerance is None else tolerance
    grid, h = cfg.grid(), cfg.step()
    fd_res, mid_res, worst_abs = [], [], 0.0
    for rec in traj:
        d_ent = _fd(lambda s: _entropy_at(u0, s, grid, cfg.floor), rec.t, h)
        u = apply_semigroup(u0, rec.t)
        vals = evaluate_expansion(u, grid.nodes)
        middle = -grid.integrate(np.log(vals) * evaluate_expansion(apply_generator(u), grid.nodes))
        fd_res.append(_relative(d_ent, rec.fisher))
        mid_res.append(_relative(middle, rec.fisher))
        worst_abs = max(worst_abs, abs(d_ent - rec.fisher), abs(middle - rec.fisher))
    rel = max(fd_res + mid_res)
    return IdentityReport("entropy_production", worst_abs, rel, len(traj) * grid.size, tolerance,
                          bool(rel <= tolerance),
                          {"fd_step": h, "times": [r.t for r in traj], "fd_rel_residuals": fd_res,
                           "middle_rel_residuals": mid_res})


def check_decay_bound(traj: Sequence[TrajectoryRecord], rel_tol: float = 1e-6) -> IdentityReport:
    """``I(u_t) <= exp(-2t) I(u_0) (1 + rel_tol)`` at every sampled time.

    ``details["worst_margin"]`` is the smallest ``(bound - fisher) / bound``
    over positive times with a positive bound (None when there are none);
    at ``t = 0`` the bound holds with equality by construction.
    """
    worst_abs, worst_rel, margins = 0.0, 0.0, []
    for rec in traj:
        excess = max(0.0, rec.fisher - rec.bound)
        worst_abs = max(worst_abs, excess)
        if rec.bound > 0:
            # fisher <= bound * (1 + rel_tol)  <=>  excess / bound <= rel_tol
            worst_rel = max(worst_rel, excess / rec.bound)
            if rec.t > 0:
                margins.append((rec.bound - rec.fisher) / rec.bound)
        elif excess > 0:
            worst_rel = math.inf
    return IdentityReport("decay_bound", worst_abs, worst_rel, len(traj), rel_tol, bool(worst_rel <= rel_tol),
                          {"worst_margin": min(margins) if margins else None})


def check_near_tightness(traj: Sequence[TrajectoryRecord], rel_tol: float = 1e-3) -> IdentityReport:
    """Fisher ratio within ``rel_tol`` (relative) of ``exp(-2t)`` at every time."""
    devs = []
    for rec in traj:
        target = math.exp(-2 * rec.t)
        devs.append(math.inf if math.isnan(rec.ratio) else abs(rec.ratio - target) / target)
    worst = max(devs)
    return IdentityReport("near_tightness", worst, worst, len(traj), rel_tol, bool(worst <= rel_tol))


def check_trajectory_invariants(traj: Sequence[TrajectoryRecord], mass_tol: float = 1e-12,
                                mono_tol: float = 1e-12) -> list[IdentityReport]:
    """Mass conservation, entropy non-decrease and Fisher non-increase."""
    m0 = traj[0].mass
    mass_dev = max(abs(r.mass - m0) for r in traj)
    ent_drop = max([0.0] + [a.entropy - b.entropy for a, b in zip(traj, traj[1:])])
    fis_rise = max([0.0] + [b.fisher - a.fisher for a, b in zip(traj, traj[1:])])
    n = len(traj)
    return [
        IdentityReport("mass_conservation", mass_dev, mass_dev, n, mass_tol, mass_dev <= mass_tol),
        IdentityReport("entropy_monotone", ent_drop, ent_drop, n, mono_tol, ent_drop <= mono_tol),
        IdentityReport("fisher_monotone", fis_rise, fis_rise, n, mono_tol, fis_rise <= mono_tol),
    ]


def fit_decay_rate(traj: Sequence[TrajectoryRecord]) -> float:
    """Negated least-squares slope of ``log fisher`` against ``t``.

    Raises:
        DecayFitError: if any Fisher value is not strictly positive.
    """
    ts = np.array([r.t for r in traj])
    fi = np.array([r.fisher for r in traj])
    if len(traj) < 2:
        raise DecayFitError("need at least two time points")
    if np.any(~(fi > 0)):
        raise DecayFitError("Fisher information must be strictly positive at every time to fit a rate")
    slope, _ = np.polyfit(ts, np.log(fi), 1)
    return float(-slope)


def check_interchange(u0: ChaosExpansion, t: float, cfg: ExperimentConfig,
                      tolerance: float | None = None) -> IdentityReport:
    """``d/dt int u log u = int [(log u) L u + L u]`` by difference vs quadrature."""
    tolerance = cfg.tolerance("interchange") if tolerance is None else tolerance
    grid, h = cfg.grid(), cfg.step()

    def neg_entropy(s):
        return -_entropy_at(u0, s, grid, cfg.floor)

    lhs = _fd(neg_entropy, t, h)
    u = apply_semigroup(u0, t)
    _certified(u, grid, cfg.floor, t)
    vals = evaluate_expansion(u, grid.nodes)
    Lu = evaluate_expansion(apply_generator(u), grid.nodes)
    rhs = grid.integrate(np.log(vals) * Lu + Lu)
    rel = _relative(lhs, rhs)
    return IdentityReport("interchange", abs(lhs - rhs), rel, grid.size, tolerance, bool(rel <= tolerance),
                          {"t": float(t), "fd_step": h, "lhs": lhs, "rhs": rhs})


def check_right_continuity(u0: ChaosExpansion, cfg: ExperimentConfig, t_small: float = 1e-4,
                           tolerance: float | None = None) -> IdentityReport:
    """Fisher information at a small positive time against its value at 0.

    Sampling-based only: ``|I(t_small) - I(0)| <= tol * I(0)``.
    """
    tolerance = cfg.tolerance("right_continuity") if tolerance is None else tolerance
    grid = cfg.grid()
    f0 = fisher(u0, grid, _certified(u0, grid, cfg.floor, 0.0))
    u = apply_semigroup(u0, t_small)
    f1 = fisher(u, grid, _certified(u, grid, cfg.floor, t_small))
    rel = _relative(f0, f1)
    return IdentityReport("right_continuity", abs(f1 - f0), rel, grid.size, tolerance, bool(rel <= tolerance),
                          {"t_small": t_small, "fisher_0": f0, "fisher_t": f1})
