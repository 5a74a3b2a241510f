import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from ou_lab import verifier as V
from ou_lab.calculus import VectorExpansion, apply_generator, apply_semigroup, gradient
from ou_lab.config import parse_preset
from ou_lab.functionals import PositivityError, check_positivity, default_grid
from ou_lab.hermite import ChaosExpansion, gauss_hermite_grid

from oracles import ou_generator, to_sympy


def rng(seed=0):
    return np.random.default_rng(seed)


class TestReport:
    def test_round_trip_and_str(self):
        r = V.IdentityReport("weitzenbock", 1e-15, 2e-16, 9, 1e-10, True, {"dimension": 2})
        d = r.to_dict()
        assert d["pass"] is True and d["identity_name"] == "weitzenbock"
        back = V.IdentityReport.from_dict(json.loads(json.dumps(d)))
        assert back == r
        assert str(r).startswith("[PASS] weitzenbock")

    def test_failed_str(self):
        r = V.IdentityReport("x", 1.0, 1.0, 1, 1e-10, False)
        assert str(r).startswith("[FAIL]")


class TestWeitzenbock:
    def test_linear_function(self):
        # F = x: |grad F|^2 = 1 and both sides vanish except 2<grad F, grad LF> + 2|grad F|^2 = -2 + 2
        r = V.check_weitzenbock(ChaosExpansion.coordinate(1, 0), gauss_hermite_grid(1, 3))
        assert r.passed and r.max_abs_residual <= 1e-14

    def test_quadratic_2d(self):
        F = ChaosExpansion(2, {(1, 1): 1.0, (2, 0): 0.5})
        r = V.check_weitzenbock(F, gauss_hermite_grid(2, 5))
        assert r.passed and r.nodes_checked == 25

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(0, 4))
    def test_random(self, seed, n, d):
        F = V.random_polynomial(rng(seed), n, d)
        assert V.check_weitzenbock(F, gauss_hermite_grid(n, 5)).max_rel_residual <= 1e-10

    def test_detects_broken_generator(self, monkeypatch):
        real = V.apply_generator
        monkeypatch.setattr(V, "apply_generator", lambda F, path="spectral": real(F, path) * 1.001)
        F = V.random_polynomial(rng(3), 2, 3)
        assert not V.check_weitzenbock(F, gauss_hermite_grid(2, 5)).passed

    def test_symbolic_oracle(self):
        # both sides built by sympy from the polynomial, compared with the exact left side
        F = V.random_polynomial(rng(5), 2, 3)
        x, y = sp.symbols("x y")
        f = to_sympy(F, (x, y))
        g = sp.diff(f, x) ** 2 + sp.diff(f, y) ** 2
        Lf = ou_generator(f, (x, y))
        hess = sum(sp.diff(f, a, b) ** 2 for a in (x, y) for b in (x, y))
        rhs = 2 * (sp.diff(f, x) * sp.diff(Lf, x) + sp.diff(f, y) * sp.diff(Lf, y)) + 2 * g + 2 * hess
        lhs_fn = sp.lambdify((x, y), ou_generator(g, (x, y)))
        rhs_fn = sp.lambdify((x, y), rhs)
        pts = gauss_hermite_grid(2, 4).nodes
        exact = apply_generator(gradient(F).norm_squared())
        for p in pts:
            assert float(lhs_fn(*p)) == pytest.approx(float(rhs_fn(*p)), abs=1e-9)
            assert exact(p) == pytest.approx(float(lhs_fn(*p)), abs=1e-9)


class TestBochnerEntropy:
    def test_symbolic_identity_for_first_chaos(self):
        # q = |u'|^2 / u for u_t = 1 + a e^{-t} x; check (L - d/dt) q against the closed form
        x, t, a = sp.symbols("x t a", real=True)
        u = 1 + a * sp.exp(-t) * x
        q = sp.diff(u, x) ** 2 / u
        lhs = sp.diff(q, x, 2) - x * sp.diff(q, x) - sp.diff(q, t)
        rhs = 2 * sp.diff(u, x) ** 2 / u + 2 / u * (sp.diff(u, x, 2) - sp.diff(u, x) ** 2 / u) ** 2
        assert sp.simplify(lhs - rhs) == 0
        at0 = rhs.subs({t: 0, a: sp.Rational(1, 10), x: 1})
        closed = 2 * sp.Rational(1, 10) ** 4 / sp.Rational(11, 10) ** 3 + 2 * sp.Rational(1, 100) / sp.Rational(11, 10)
        assert sp.simplify(at0 - closed) == 0
        assert float(closed) == pytest.approx(0.018332, abs=1e-6)

    @pytest.mark.parametrize("t", [0.0, 0.25, 1.0])
    def test_first_chaos(self, t):
        u0 = parse_preset("first-chaos(0.1)")
        grid = gauss_hermite_grid(1, 6)
        cert = check_positivity(apply_semigroup(u0, t), grid, 1e-3)
        r = V.check_bochner_entropy(u0, t, grid, cert)
        assert r.passed, str(r)
        assert r.details["fd_time_derivative_rel_residual"] <= 1e-6

    def test_requires_matching_certificate(self):
        u0 = parse_preset("first-chaos(0.1)")
        grid = gauss_hermite_grid(1, 6)
        cert = check_positivity(u0, grid, 1e-3)  # issued for u0, not u_t
        with pytest.raises(PositivityError):
            V.check_bochner_entropy(u0, 0.5, grid, cert)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.sampled_from([0.0, 0.25, 1.0]))
    def test_random_densities(self, seed, n, t):
        grid = gauss_hermite_grid(n, 6)
        u0 = V.random_density(rng(seed), n, 3, grid)
        cert = check_positivity(apply_semigroup(u0, t), grid, 1e-3)
        assert V.check_bochner_entropy(u0, t, grid, cert).max_rel_residual <= 1e-8


    def test_detects_wrong_time_derivative(self, monkeypatch):
        real = V.time_derivative
        monkeypatch.setattr(V, "time_derivative", lambda F, t: real(F, t) * 1.01)
        grid = gauss_hermite_grid(2, 6)
        u0 = V.random_density(rng(1), 2, 3, grid)
        cert = check_positivity(apply_semigroup(u0, 0.25), grid, 1e-3)
        assert not V.check_bochner_entropy(u0, 0.25, grid, cert).passed


class TestDualityChecks:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(0, 4))
    def test_integration_by_parts_and_adjoint(self, seed, n, d):
        g = rng(seed)
        F, G = V.random_polynomial(g, n, d), V.random_polynomial(g, n, d)
        Z = VectorExpansion([V.random_polynomial(g, n, d) for _ in range(n)])
        grid = gauss_hermite_grid(n, d + 1)
        assert V.check_integration_by_parts(F, G, grid).passed
        r = V.check_divergence_adjoint(Z, G, grid)
        assert r.passed and r.details["divergence_path_gap"] <= 1e-12

    def test_integration_by_parts_example(self):
        # int (L x) x = -1 = -int 1
        X = ChaosExpansion.coordinate(1, 0)
        r = V.check_integration_by_parts(X, X, gauss_hermite_grid(1, 2))
        assert r.details["lhs"] == pytest.approx(-1.0) and r.passed

    def test_semigroup_symmetry(self):
        u, v = V.random_polynomial(rng(1), 2, 4), V.random_polynomial(rng(2), 2, 4)
        assert V.check_semigroup_symmetry(u, v, 0.7, gauss_hermite_grid(2, 5)).passed


class TestInequalities:
    @pytest.mark.parametrize("preset", ["uniform", "first-chaos(0.01)", "second-chaos(0.01)", "mixed(1.5,0.2,0.1)"])
    def test_entropy_bound(self, preset):
        u = parse_preset(preset)
        grid = default_grid(u)
        r = V.check_entropy_bound(u, grid, check_positivity(u, grid, 1e-3))
        assert r.passed and r.details["lhs"] <= r.details["rhs"]

    @pytest.mark.parametrize("p", [2, 4])
    @pytest.mark.parametrize("t", [0.0, 0.25, 1.0])
    def test_contraction(self, p, t):
        u = parse_preset("mixed(1.5,0.2,0.1)")
        assert V.check_contraction(u, p, t, gauss_hermite_grid(1, 10)).passed

    def test_contraction_rejects_p(self):
        with pytest.raises(ValueError):
            V.check_contraction(parse_preset("uniform"), 1.0, 0.5, gauss_hermite_grid(1, 3))

    def test_one_sided_failure(self):
        r = V._one_sided("demo", 2.0, 1.0, 1e-10, 1)
        assert not r.passed and r.max_abs_residual == 1.0


class TestSemigroupChecks:
    def test_semigroup_law(self):
        F = V.random_polynomial(rng(0), 3, 4)
        assert V.check_semigroup_law(F, 0.3, 0.9).passed
        with pytest.raises(ValueError):
            V.check_semigroup_law(F, -1.0, 0.1)

    def test_gradient_commutation(self):
        assert V.check_gradient_commutation(V.random_polynomial(rng(0), 2, 4), 0.5).passed

    def test_projection(self):
        r = V.check_projection_commutes(V.random_polynomial(rng(0), 3, 4), 2, 0.5)
        assert r.passed and r.tolerance == 1e-14

    def test_generator_paths(self):
        r = V.check_generator_paths(V.random_polynomial(rng(0), 3, 4))
        assert r.passed
        assert set(r.details) == {"direct", "minus_div_grad_raising", "minus_div_grad_formula"}

    @pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
    def test_backend_agreement(self, t):
        for n in (1, 2):
            assert V.check_backend_agreement(V.random_polynomial(rng(n), n, 6), t).passed

    def test_mass_invariance(self):
        r = V.check_mass_invariance(V.random_polynomial(rng(0), 2, 3), [0.0, 0.5, 3.0])
        assert r.passed and r.nodes_checked == 3

    def test_detects_broken_mass(self, monkeypatch):
        broken = lambda F, t, backend=None: F * math.exp(-t)
        monkeypatch.setattr(V, "apply_semigroup", broken)
        assert not V.check_mass_invariance(ChaosExpansion.constant(1, 1.0), [1.0]).passed


class TestRandomData:
    def test_random_density_bounds(self):
        grid = gauss_hermite_grid(2, 6)
        for seed in range(20):
            u = V.random_density(rng(seed), 2, 3, grid, sup=0.3)
            base = u.coefficient((0, 0))
            assert 1.0 <= base <= 2.0
            vals = np.array([u(p) for p in grid.nodes])
            assert np.max(np.abs(vals - base)) <= 0.3 + 1e-12

    def test_random_polynomial_degree(self):
        F = V.random_polynomial(rng(0), 2, 3)
        assert F.max_degree == 3 and len(F.coefficients) == 10

    def test_generator_identity_of_random_density(self):
        u = V.random_density(rng(0), 1, 3, gauss_hermite_grid(1, 6))
        assert apply_generator(u).coefficient((0,)) == 0.0
