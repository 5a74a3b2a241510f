"""Acceptance gate: one test per criterion, each at its stated tolerance.

Each test records a PASS/FAIL line through the ``acceptance`` fixture; the
lines are printed in the terminal summary. Run on its own with
``pytest tests/test_acceptance.py``.
"""

import itertools
import math
import time

import numpy as np
import pytest

from ou_lab import verifier as V
from ou_lab.calculus import VectorExpansion, apply_semigroup
from ou_lab.cli import main
from ou_lab.config import ExperimentConfig, parse_preset
from ou_lab.experiments import check_decay_bound, check_near_tightness, evolve_trajectory, fit_decay_rate
from ou_lab.functionals import check_positivity, default_grid, entropy, fisher
from ou_lab.hermite import gauss_hermite_grid

SEED = 20240601
PRESETS = ["uniform", "first-chaos(0.01)", "second-chaos(0.01)", "mixed(1.5,0.2,0.1)"]


def test_1_weitzenbock_suite(acceptance):
    rng = np.random.default_rng(SEED)
    dims = itertools.cycle([1, 2, 3])
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = next(dims)
        F = V.random_polynomial(rng, n, int(rng.integers(0, 5)))
        worst = max(worst, V.check_weitzenbock(F, gauss_hermite_grid(n, 5), 1e-10).max_rel_residual)
    elapsed = time.perf_counter() - start
    ok = acceptance("1 Weitzenbock suite", worst <= 1e-10 and elapsed <= 10,
                    f"worst rel residual {worst:.2e} (tol 1e-10), {elapsed:.2f} s (limit 10 s)")
    assert ok


def test_2_bochner_entropy_suite(acceptance):
    rng = np.random.default_rng(SEED)
    dims = itertools.cycle([1, 2, 3])
    start = time.perf_counter()
    worst = 0.0
    for _ in range(30):
        n = next(dims)
        grid = gauss_hermite_grid(n, 6)
        u0 = V.random_density(rng, n, 3, grid)
        for t in (0.0, 0.25, 1.0):
            cert = check_positivity(apply_semigroup(u0, t), grid, 1e-3)
            worst = max(worst, V.check_bochner_entropy(u0, t, grid, cert, 1e-8).max_rel_residual)
    elapsed = time.perf_counter() - start
    ok = acceptance("2 Bochner-entropy suite", worst <= 1e-8 and elapsed <= 30,
                    f"worst rel residual {worst:.2e} (tol 1e-8), {elapsed:.2f} s (limit 30 s)")
    assert ok


def test_3_entropy_production(acceptance):
    u0 = parse_preset("mixed(1.5,0.2,0.1)")
    grid = default_grid(u0)
    h = 1e-3

    def ent(t):
        u = apply_semigroup(u0, t)
        return entropy(u, grid, check_positivity(u, grid, 1e-3))

    worst = 0.0
    for t in (0.25, 0.5, 1.0):
        u = apply_semigroup(u0, t)
        fi = fisher(u, grid, check_positivity(u, grid, 1e-3))
        fd = (ent(t + h) - ent(t - h)) / (2 * h)
        worst = max(worst, abs(fd - fi) / fi)
    ok = acceptance("3 entropy production", worst <= 1e-4,
                    f"worst |FD - fisher| / fisher {worst:.2e} (tol 1e-4)")
    assert ok


def test_4_decay_bound(acceptance):
    worst, tight = -math.inf, None
    for preset in ("first-chaos(0.01)", "second-chaos(0.01)", "mixed(1.5,0.2,0.1)"):
        traj = evolve_trajectory(ExperimentConfig(initial=preset, t_start=0.0, t_stop=3.0, t_count=31))
        worst = max(worst, check_decay_bound(traj, 1e-6).max_rel_residual)
        if preset.startswith("first"):
            tight = check_near_tightness(traj, 1e-3).max_rel_residual
    ok = acceptance("4 decay bound", worst <= 1e-6 and tight <= 1e-3,
                    f"worst bound excess {worst:.2e} (tol 1e-6); first-chaos ratio deviation "
                    f"{tight:.2e} (tol 1e-3)")
    assert ok


def test_5_decay_rate_fit(acceptance):
    first = fit_decay_rate(evolve_trajectory(ExperimentConfig(initial="first-chaos(0.01)")))
    second = fit_decay_rate(evolve_trajectory(ExperimentConfig(initial="second-chaos(0.01)")))
    ok = acceptance("5 decay-rate fit", abs(first - 2.0) <= 0.01 and abs(second - 4.0) <= 0.05,
                    f"first-chaos {first:.4f} (2.00 +/- 0.01), second-chaos {second:.4f} (4.00 +/- 0.05)")
    assert ok


def test_6_operator_algebra(acceptance):
    rng = np.random.default_rng(SEED)
    dims = itertools.cycle([1, 2, 3])
    duality, coeffwise = 0.0, 0.0
    for _ in range(100):
        n = next(dims)
        d = int(rng.integers(0, 5))
        grid = gauss_hermite_grid(n, 5)
        F, G = V.random_polynomial(rng, n, d), V.random_polynomial(rng, n, d)
        Z = VectorExpansion([V.random_polynomial(rng, n, d) for _ in range(n)])
        s, t = rng.uniform(0, 2, size=2)
        k = int(rng.integers(1, n + 1))
        duality = max(duality,
                      V.check_generator_paths(F, 1e-10).max_rel_residual,
                      V.check_integration_by_parts(F, G, grid, 1e-10).max_rel_residual,
                      V.check_divergence_adjoint(Z, G, grid, 1e-10).max_rel_residual)
        coeffwise = max(coeffwise,
                        V.check_semigroup_law(F, s, t, 1e-12).max_rel_residual,
                        V.check_gradient_commutation(F, t, 1e-12).max_rel_residual,
                        V.check_projection_commutes(F, k, t, 1e-12).max_rel_residual,
                        V.check_mass_invariance(F, [0.0, s, t, 3.0], 1e-12).max_rel_residual)
    ok = acceptance("6 operator algebra", duality <= 1e-10 and coeffwise <= 1e-12,
                    f"L = -delta grad / adjointness {duality:.2e} (tol 1e-10); "
                    f"semigroup coefficient identities {coeffwise:.2e} (tol 1e-12)")
    assert ok


def test_7_backend_agreement(acceptance):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for n in (1, 2):
        for deg in range(7):
            F = V.random_polynomial(rng, n, deg)
            for t in (0.1, 0.5, 1.0):
                worst = max(worst, V.check_backend_agreement(F, t, 1e-10).max_rel_residual)
    ok = acceptance("7 backend cross-validation", worst <= 1e-10,
                    f"worst spectral vs Mehler gap {worst:.2e} (tol 1e-10)")
    assert ok


def test_8_contraction_and_entropy_bound(acceptance):
    contraction, ent_bound = 0.0, 0.0
    for preset in PRESETS:
        u = parse_preset(preset)
        grid = default_grid(u)
        ent_bound = max(ent_bound, V.check_entropy_bound(u, grid, check_positivity(u, grid, 1e-3),
                                                         1e-10).max_rel_residual)
        for p in (2, 4):
            for t in (0.0, 0.1, 0.25, 0.5, 1.0, 3.0):
                contraction = max(contraction, V.check_contraction(u, p, t, grid, 1e-12).max_rel_residual)
    ok = acceptance("8 contraction and entropy bounds", contraction <= 1e-12 and ent_bound <= 1e-10,
                    f"contraction violation {contraction:.2e} (tol 1e-12); "
                    f"entropy-bound violation {ent_bound:.2e} (tol 1e-10)")
    assert ok


def test_9_determinism(acceptance, tmp_path, capsys):
    cfg = tmp_path / "evolve.toml"
    cfg.write_text('seed = 7\n[experiment]\ninitial = "mixed(1.5,0.2,0.1)"\n')
    codes = [main(["evolve", str(cfg), "--out", str(tmp_path / name)]) for name in ("a", "b")]
    capsys.readouterr()
    a, b = ((tmp_path / name / "trajectory.csv").read_bytes() for name in ("a", "b"))
    ok = acceptance("9 determinism", codes == [0, 0] and a == b and len(a) > 0,
                    f"exit codes {codes}, CSV byte-identical: {a == b}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
