import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from preyswitch.equilibria import (characteristic_cubic_smooth1, characteristic_quartic_smooth2,
                                   eigenvalues, jacobian_smooth1, jacobian_smooth1_steady,
                                   jacobian_smooth2, jacobian_smooth2_steady, k0_threshold,
                                   k1_curve, k1_threshold, routh_hurwitz_cubic, s_coefficients,
                                   stability_map, stability_smooth1, stability_smooth2,
                                   steady_state_smooth1, steady_state_smooth2, u_roots_smooth2)
from preyswitch.errors import InfeasibleSteadyState
from preyswitch.models import ModelParams, rhs_smooth1, rhs_smooth2

from .conftest import FIG1, random_params

# symbolic right-hand sides, written independently of the package
P1, P2, Z, Q = sp.symbols("p1 p2 z q", positive=True)
R1, R2, M, E, Q1, Q2, AQ, K = sp.symbols("r1 r2 m e q1 q2 aq k", positive=True)
W = (1 + sp.tanh(K * (P1 - AQ * P2))) / 2
RHS1 = sp.Matrix([R1 * P1 - P1 * Z * W,
                  R2 * P2 - P2 * Z * (1 - W),
                  E * Q1 * P1 * Z * W + E * Q2 * P2 * Z * (1 - W) - M * Z])
RHS2 = sp.Matrix([R1 * P1 - Q * P1 * Z,
                  R2 * P2 - (1 - Q) * P2 * Z,
                  E * Q * P1 * Z + E * (1 - Q) * Q2 * P2 * Z - M * Z,
                  Q * (1 - Q) * (P1 - AQ * P2)])
JAC1 = sp.lambdify((P1, P2, Z, R1, R2, M, E, Q1, Q2, AQ, K), RHS1.jacobian([P1, P2, Z]))
JAC2 = sp.lambdify((P1, P2, Z, Q, R1, R2, M, E, Q2, AQ), RHS2.jacobian([P1, P2, Z, Q]))


def sym_jac1(s, p):
    return np.array(JAC1(*s, p.r1, p.r2, p.m, p.e, p.q1, p.q2, p.aq, p.k), dtype=float)


def sym_jac2(s, p):
    return np.array(JAC2(*s, p.r1, p.r2, p.m, p.e, p.q2, p.aq), dtype=float)


def fd_jacobian(f, s, p, h=1e-6):
    s = np.asarray(s, dtype=float)
    cols = []
    for i in range(s.size):
        d = np.zeros_like(s)
        d[i] = h * max(1.0, abs(s[i]))
        cols.append((f(s + d, p) - f(s - d, p)) / (2 * d[i]))
    return np.column_stack(cols)


def feasible_params(rng):
    while True:
        p = random_params(rng)
        if p.k > k0_threshold(p) * (1 + 1e-6):
            return p


class TestThresholds:
    def test_k0_fig1(self):
        assert k0_threshold(FIG1) == pytest.approx(1.197, abs=5e-4)

    def test_k0_symmetric_prey(self):
        assert k0_threshold(FIG1.replace(r1=0.5, r2=0.5)) == 0.0

    def test_k0_via_arctanh(self):
        p = ModelParams(r1=2.0, r2=1.0, m=0.5, e=0.25, q1=1.0)
        assert k0_threshold(p) == pytest.approx(0.25 * 2 * 0.5 * math.log(2) / 1.5, rel=1e-15)
        assert k0_threshold(p) == pytest.approx(0.115525, abs=1e-6)
        assert k0_threshold(p) == pytest.approx(0.25 * 2 * math.atanh(1 / 3) / 1.5, rel=1e-14)

    def test_s_at_k0_positive(self, rng):
        for _ in range(500):
            p = random_params(rng)
            s0, s1, s2 = s_coefficients(p)
            k0 = k0_threshold(p)
            assert s2 * k0 ** 2 + s1 * k0 + s0 > 0

    def test_s_sign_matches_hurwitz_determinant(self, rng):
        for _ in range(500):
            p = feasible_params(rng)
            a, b, c = characteristic_cubic_smooth1(p)
            s0, s1, s2 = s_coefficients(p)
            s = s2 * p.k ** 2 + s1 * p.k + s0
            if abs(a * b - c) > 1e-9 * max(abs(a * b), abs(c)):
                assert np.sign(a * b - c) == np.sign(s)

    def test_k1_absent_above_q2(self):
        assert k1_threshold(FIG1.replace(aq=0.6)) is None
        assert k1_threshold(FIG1.replace(aq=0.5)) is None

    def test_k1_fig1_branch(self):
        k1 = k1_threshold(FIG1.replace(aq=0.3))
        assert k1 > k0_threshold(FIG1)

    def test_k1_is_stability_boundary(self, rng):
        checked = 0
        while checked < 100:
            p = random_params(rng, aq=rng.uniform(0.01, 0.49))
            k1 = k1_threshold(p)
            if k1 is None or k1 <= k0_threshold(p) * 1.01:
                continue
            below = stability_smooth1(p.replace(k=k1 * (1 - 1e-3)))
            above = stability_smooth1(p.replace(k=k1 * (1 + 1e-3)))
            assert below.max_real < 0 < above.max_real
            checked += 1

    def test_no_k1_means_stable_everywhere(self, rng):
        for _ in range(50):
            p = random_params(rng, aq=rng.uniform(0.5, 2.0))
            s0, s1, s2 = s_coefficients(p)
            k0 = k0_threshold(p)
            ks = np.logspace(math.log10(k0 * 1.0001), 6, 200)
            assert np.all(s2 * ks ** 2 + s1 * ks + s0 > 0)

    def test_fitted_1991_sets(self):
        left = ModelParams(r1=1.64, r2=0.62, m=0.11, aq=0.02)
        right = ModelParams(r1=2.54, r2=0.61, m=0.21, aq=0.04)
        # closed form versus the eigenvalue crossing
        for p in (left, right):
            k1 = k1_threshold(p)
            assert stability_smooth1(p.replace(k=k1 * 0.999)).max_real < 0
            assert stability_smooth1(p.replace(k=k1 * 1.001)).max_real > 0
        assert k1_threshold(right) == pytest.approx(1.3, abs=0.05)


class TestSteadyState1:
    def test_predator_density(self):
        for aq in (0.1, 0.5, 1.0, 1.9):
            for k in (1.5, 10, 100):
                assert steady_state_smooth1(FIG1.replace(aq=aq, k=k)).z == pytest.approx(1.56, abs=1e-15)

    def test_symmetric_prey_independent_of_k(self):
        p = FIG1.replace(r1=0.7, r2=0.7, aq=0.8)
        expected = p.aq * p.m * 1.4 / (p.e * (p.q1 * p.aq * 0.7 + p.q2 * 0.7))
        for k in (0.5, 5, 500):
            assert steady_state_smooth1(p.replace(k=k)).p1 == pytest.approx(expected, rel=1e-14)

    def test_steep_limit(self):
        ss = steady_state_smooth1(FIG1.replace(aq=0.5, k=1e6))
        assert ss.p1 == pytest.approx(0.56, abs=1e-4)
        assert ss.p2 == pytest.approx(1.12, abs=1e-4)

    def test_limit_matches_smooth2(self, rng):
        for _ in range(50):
            p = random_params(rng, k=1e10)
            a = steady_state_smooth1(p)
            b = steady_state_smooth2(p)
            np.testing.assert_allclose(a, b[:3], rtol=1e-8)

    def test_infeasible(self):
        with pytest.raises(InfeasibleSteadyState):
            steady_state_smooth1(FIG1.replace(aq=1.0, k=1.1))

    def test_residuals(self, rng):
        for _ in range(1000):
            p = feasible_params(rng)
            ss = np.array(steady_state_smooth1(p))
            assert np.linalg.norm(rhs_smooth1(ss, p)) < 1e-10 * (1 + np.linalg.norm(ss))


class TestJacobian1:
    def test_against_symbolic(self, rng):
        for _ in range(50):
            p = random_params(rng)
            s = rng.uniform(0.1, 3.0, size=3)
            np.testing.assert_allclose(jacobian_smooth1(s, p), sym_jac1(s, p), rtol=1e-11, atol=1e-11)

    def test_against_finite_differences(self):
        p = FIG1.replace(aq=0.7, k=4.0)
        s = (0.8, 1.1, 1.3)
        np.testing.assert_allclose(jacobian_smooth1(s, p), fd_jacobian(rhs_smooth1, s, p),
                                   rtol=1e-6, atol=1e-8)

    def test_steady_closed_form(self, rng):
        for _ in range(200):
            p = feasible_params(rng)
            J = jacobian_smooth1(steady_state_smooth1(p), p)
            np.testing.assert_allclose(jacobian_smooth1_steady(p), J, rtol=1e-9,
                                       atol=1e-11 * np.abs(J).max())

    def test_cubic_matches_characteristic_polynomial(self, rng):
        for _ in range(200):
            p = feasible_params(rng)
            poly = np.poly(jacobian_smooth1(steady_state_smooth1(p), p))
            a, b, c = characteristic_cubic_smooth1(p)
            np.testing.assert_allclose([a, b, c], poly[1:], rtol=1e-8, atol=1e-10 * abs(poly).max())


class TestRouthHurwitz:
    def test_triple_root(self):
        assert routh_hurwitz_cubic(3, 3, 1) == "stable"

    def test_marginal(self):
        assert routh_hurwitz_cubic(1, 1, 1) == "marginal"

    def test_unstable(self):
        assert routh_hurwitz_cubic(1, 1, 2) == "unstable"
        assert np.roots([1, 1, 1, 2]).real.max() > 0

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
    def test_agrees_with_roots(self, a, b, c):
        roots = np.roots([1.0, a, b, c])
        mr = roots.real.max()
        assume(abs(mr) > 1e-6)
        assume(abs(a) > 1e-9 and abs(c) > 1e-9 and abs(a * b - c) > 1e-9)
        assert routh_hurwitz_cubic(a, b, c) == ("stable" if mr < 0 else "unstable")

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_agrees_with_jacobian_eigenvalues(self, seed):
        p = feasible_params(np.random.default_rng(seed))
        rep = stability_smooth1(p)
        assume(abs(rep.max_real) > 1e-6)
        expected = "stable" if rep.max_real < 0 else "unstable"
        assert routh_hurwitz_cubic(*rep.char_coeffs) == expected


class TestEigenvalues:
    def test_identity(self):
        np.testing.assert_array_equal(eigenvalues(np.eye(3)), [1, 1, 1])

    def test_diagonal_sorted(self):
        np.testing.assert_array_equal(eigenvalues(np.diag([1.0, -2.0, 3.0])), [3, 1, -2])

    def test_non_square(self):
        with pytest.raises(ValueError):
            eigenvalues(np.ones((2, 3)))


class TestStability1:
    def test_fig1_stable_cell(self):
        rep = stability_smooth1(FIG1.replace(aq=1.0, k=2.0))
        assert rep.classification == "stable"
        assert rep.max_real < 0
        assert len(rep.eigenvalues) == 3

    def test_classification_matches_eigenvalues(self, rng):
        for _ in range(500):
            p = feasible_params(rng)
            rep = stability_smooth1(p)
            if abs(rep.max_real) > 1e-9:
                assert rep.classification == ("stable" if rep.max_real < 0 else "unstable")

    def test_report_dict(self):
        d = stability_smooth1(FIG1.replace(aq=0.3, k=5.0)).to_dict()
        assert d["k1"] > d["k0"]
        assert set(d) >= {"steady_state", "char_coeffs", "classification", "s0", "s1", "s2"}


class TestSmooth2:
    def test_steady_state_fig1(self):
        ss = steady_state_smooth2(FIG1)
        np.testing.assert_allclose(ss, (0.56, 1.12, 1.56, 1.3 / 1.56), rtol=1e-14)
        assert np.max(np.abs(rhs_smooth2(ss, FIG1))) < 1e-12

    def test_symmetric_trait(self):
        assert steady_state_smooth2(FIG1.replace(r1=0.4, r2=0.4)).q == 0.5

    def test_jacobian_against_symbolic(self, rng):
        for _ in range(50):
            p = random_params(rng)
            s = np.append(rng.uniform(0.1, 3.0, size=3), rng.uniform(0, 1))
            np.testing.assert_allclose(jacobian_smooth2(s, p), sym_jac2(s, p), rtol=1e-12, atol=1e-12)

    def test_jacobian_against_finite_differences(self):
        s = (0.6, 1.0, 1.4, 0.7)
        np.testing.assert_allclose(jacobian_smooth2(s, FIG1), fd_jacobian(rhs_smooth2, s, FIG1),
                                   rtol=1e-6, atol=1e-8)

    def test_steady_closed_form(self, rng):
        for _ in range(100):
            p = random_params(rng)
            J = jacobian_smooth2(steady_state_smooth2(p), p)
            np.testing.assert_allclose(jacobian_smooth2_steady(p), J, rtol=1e-10, atol=1e-12)

    def test_quartic_matches_characteristic_polynomial(self, rng):
        for _ in range(200):
            p = random_params(rng)
            poly = np.poly(jacobian_smooth2(steady_state_smooth2(p), p))
            c2, c1, c0 = characteristic_quartic_smooth2(p)
            scale = np.abs(poly).max()
            np.testing.assert_allclose(poly[1], 0.0, atol=1e-12 * scale)
            np.testing.assert_allclose([c2, c1, c0], poly[2:], rtol=1e-8, atol=1e-12 * scale)

    def test_linear_term_vanishes(self):
        assert characteristic_quartic_smooth2(FIG1.replace(aq=0.5))[1] == 0.0
        assert characteristic_quartic_smooth2(FIG1.replace(r1=0.3, r2=0.3, aq=0.9))[1] == 0.0

    def test_marginal_at_aq_q2(self):
        rep = stability_smooth2(FIG1)
        assert rep.classification == "marginal"
        assert np.max(np.abs(rep.eigenvalues.real)) < 1e-8
        assert rep.discriminant > 0

    def test_u_substitution_matches_eigensolver(self, rng):
        for _ in range(50):
            p = random_params(rng, aq=0.5)
            u1, u2, disc = u_roots_smooth2(p)
            assert disc > 0 and u1 < 0 and u2 < 0
            expected = np.sort(np.array([math.sqrt(-u1), math.sqrt(-u2)]))
            ev = eigenvalues(jacobian_smooth2(steady_state_smooth2(p), p))
            got = np.sort(np.abs(ev.imag))[::2]
            np.testing.assert_allclose(got, expected, rtol=1e-8)
            assert np.max(np.abs(ev.real)) < 1e-8 * (1 + expected.max())

    def test_discriminant_formula(self, rng):
        for _ in range(50):
            p = random_params(rng, aq=0.5)
            c2, _, c0 = characteristic_quartic_smooth2(p)
            _, _, disc = u_roots_smooth2(p)
            assert disc == pytest.approx(c2 ** 2 - 4 * c0, rel=1e-9)

    @pytest.mark.parametrize("aq", [0.1, 0.9, 0.3, 1.7])
    def test_unstable_off_q2(self, aq):
        rep = stability_smooth2(FIG1.replace(aq=aq))
        assert rep.classification == "unstable"
        assert rep.max_real > 0

    def test_zero_trace(self, rng):
        for _ in range(100):
            p = random_params(rng)
            rep = stability_smooth2(p)
            assert abs(rep.eigenvalues.sum()) < 1e-9
            assert len(rep.eigenvalues) == 4


class TestGrid:
    def test_row_count_and_flags(self):
        aq = np.linspace(0.1, 2.0, 6)
        k = np.linspace(1.0, 30.0, 7)
        rows = stability_map(FIG1, aq, k)
        assert len(rows) == 42
        assert all(r["z"] == pytest.approx(1.56) for r in rows if r["feasible"])
        assert all(not r["feasible"] for r in rows if r["k"] <= r["k0"])

    def test_fig1_cells(self):
        rows = {(r["aq"], r["k"]): r for r in stability_map(FIG1, [1.0], [1.1, 2.0])}
        assert rows[(1.0, 2.0)]["classification"] == "stable"
        assert not rows[(1.0, 1.1)]["feasible"]

    def test_k1_curve_only_below_q2(self):
        curve = k1_curve(FIG1, np.linspace(0.05, 1.0, 20))
        assert curve and all(r["aq"] < 0.5 for r in curve)
