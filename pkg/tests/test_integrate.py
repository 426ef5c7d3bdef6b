import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from preyswitch.equilibria import steady_state_smooth1, steady_state_smooth2
from preyswitch.errors import IntegrationError, ParameterError, StepFailure
from preyswitch.integrate import (IntegratorOptions, fixed_step_crossing_bracket,
                                  integrate_fixed, integrate_piecewise, integrate_smooth)
from preyswitch.models import switching_function

from .conftest import FIG1


class TestOptions:
    @pytest.mark.parametrize("kw", [dict(rel_tol=0), dict(abs_tol=-1), dict(event_tol=0),
                                    dict(max_steps=0), dict(max_step=0), dict(initial_step=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            IntegratorOptions(**kw)


class TestSmooth:
    def test_exponential_growth(self):
        traj = integrate_smooth("smooth1", (0.7, 0.0, 0.0), (0, 10), FIG1)
        t = np.linspace(0, 10, 41)
        exact = 0.7 * np.exp(FIG1.r1 * t)
        got = traj.sample(t)[:, 0]
        assert np.max(np.abs(got / exact - 1)) < 1e-7
        # components that start at zero stay exactly zero
        assert np.all(traj.states[:, 1:] == 0.0)

    def test_smooth2_steady_state_invariant(self):
        ss = np.array(steady_state_smooth2(FIG1))
        traj = integrate_smooth("smooth2", ss, (0, 100), FIG1)
        assert np.max(np.abs(traj.states - ss)) < 1e-6

    def test_smooth1_stable_regime_converges(self):
        p = FIG1.replace(aq=1.0, k=10.0)
        ss = np.array(steady_state_smooth1(p))
        traj = integrate_smooth("smooth1", (1.0, 1.0, 1.0), (0, 400), p)
        windows = []
        for a in range(0, 400, 50):
            t = np.linspace(a, a + 50, 201)
            windows.append(np.max(np.linalg.norm(traj.sample(t) - ss, axis=1)))
        assert all(b < a for a, b in zip(windows, windows[1:]))

    def test_dense_output_against_rk4(self):
        p = FIG1.replace(aq=0.3, k=5.0)
        traj = integrate_smooth("smooth1", (1.0, 1.0, 1.0), (0, 30), p)
        ref = integrate_fixed("smooth1", (1.0, 1.0, 1.0), (0, 30), p, dt=1e-3, stride=100)
        np.testing.assert_allclose(traj.sample(ref.times), ref.states, rtol=1e-7, atol=1e-9)

    def test_self_convergence(self):
        p = FIG1.replace(aq=0.3, k=5.0)
        tight = 5e-10
        a = integrate_smooth("smooth1", (1, 1, 1), (0, 20), p, IntegratorOptions(1e-9, 1e-9))
        b = integrate_smooth("smooth1", (1, 1, 1), (0, 20), p, IntegratorOptions(tight, tight))
        assert np.max(np.abs(a.states[-1] - b.states[-1])) < 10 * tight * (1 + np.max(np.abs(b.states[-1])))

    def test_trait_stays_in_unit_interval(self):
        p = FIG1.replace(aq=0.9, nu=3.0)
        ss = steady_state_smooth2(p)
        y0 = (ss.p1, ss.p2, 3.0 * ss.z, ss.q)
        opts = IntegratorOptions()
        traj = integrate_smooth("smooth2", y0, (0, 200), p, opts)
        q = traj.states[:, 3]
        assert q.min() >= -10 * opts.abs_tol and q.max() <= 1 + 10 * opts.abs_tol

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.05, 1.5), st.floats(1.5, 50), st.floats(0.2, 3), st.floats(0.2, 3),
           st.floats(0.1, 3))
    def test_non_negative(self, aq, k, p1, p2, z):
        p = FIG1.replace(aq=aq, k=k)
        opts = IntegratorOptions()
        traj = integrate_smooth("smooth1", (p1, p2, z), (0, 100), p, opts)
        assert traj.states.min() >= -10 * opts.abs_tol
        assert np.all(np.diff(traj.times) > 0)

    def test_nonfinite_detected(self):
        # unchecked exponential growth overflows
        with pytest.raises(IntegrationError):
            integrate_smooth("smooth1", (1.0, 1.0, 0.0), (0, 1000), FIG1)

    def test_step_budget(self):
        with pytest.raises(StepFailure):
            integrate_smooth("smooth1", (1, 1, 1), (0, 100), FIG1, IntegratorOptions(max_steps=5))

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            integrate_smooth("smooth3", (1, 1, 1), (0, 1), FIG1)


class TestPiecewise:
    def test_single_plus_segment(self):
        p = FIG1.replace(aq=0.5)
        y0 = (3.0, 1.0, 0.05)
        traj = integrate_piecewise(y0, (0, 2), p)
        assert [s.label for s in traj.segments] == ["plus"]
        ref = integrate_fixed("plus", y0, (0, 2), p, dt=1e-4, stride=1000)
        assert np.all([switching_function(s, p) > 0 for s in ref.states])
        np.testing.assert_allclose(traj.sample(ref.times), ref.states, rtol=1e-7, atol=1e-9)

    def test_sliding_approaches_pseudoequilibrium(self):
        p = FIG1.replace(aq=1.0)
        den = p.e * (p.r1 * p.aq + p.r2 * p.q2)
        pseudo = np.array([p.aq * p.m * (p.r1 + p.r2) / den, p.m * (p.r1 + p.r2) / den, p.r1 + p.r2])
        traj = integrate_piecewise((1.0, 1.0, 1.0), (0, 600), p)
        assert "sliding" in [s.label for s in traj.segments]
        assert traj.segments[-1].label == "sliding"
        assert np.max(np.abs(traj.states[-1] - pseudo)) < 1e-3

    def test_crossing_time_against_brute_force(self):
        p = FIG1.replace(aq=1.0)
        y0 = (0.5, 1.0, 0.2)
        traj = integrate_piecewise(y0, (0, 3), p)
        assert traj.segments[0].label == "minus"
        assert traj.segments[1].label == "plus"
        t_event = traj.transition_times()[0]
        ta, tb = fixed_step_crossing_bracket(y0, (0, 3), p, dt=1e-6)
        assert ta - 1e-5 <= t_event <= tb + 1e-5

    def test_boundaries_on_manifold(self):
        p = FIG1.replace(aq=1.0)
        opts = IntegratorOptions()
        traj = integrate_piecewise((1.0, 1.5, 1.0), (0, 200), p, opts)
        for t in traj.transition_times():
            s = traj.states[np.searchsorted(traj.times, t)]
            scale = 1 + abs(s[0]) + abs(p.aq * s[1])
            assert abs(switching_function(s, p)) <= 1e-9 * scale

    @pytest.mark.parametrize("aq", [0.3, 1.0, 1.7])
    def test_segment_labels_match_sign(self, aq):
        p = FIG1.replace(aq=aq)
        traj = integrate_piecewise((1.0, 1.5, 1.0), (0, 150), p)
        for seg in traj.segments:
            if seg.label == "sliding":
                continue
            inner = (traj.times > seg.t_start) & (traj.times < seg.t_end)
            h = np.array([switching_function(s, p) for s in traj.states[inner]])
            tol = 1e-9 * (1 + np.abs(traj.states[inner, :2]).sum(axis=1))
            if seg.label == "plus":
                assert np.all(h > -tol)
            else:
                assert np.all(h < tol)

    def test_times_increasing_and_finite(self):
        traj = integrate_piecewise((1.0, 1.5, 1.0), (0, 100), FIG1.replace(aq=0.8))
        assert np.all(np.diff(traj.times) > 0)
        assert np.all(np.isfinite(traj.states))


class TestFixed:
    def test_rk4_order(self):
        # global error of RK4 drops ~16x when dt halves
        exact = 0.7 * math.exp(FIG1.r1 * 2.0)
        errs = []
        for dt in (0.1, 0.05):
            tr = integrate_fixed("smooth1", (0.7, 0, 0), (0, 2), FIG1, dt=dt)
            errs.append(abs(tr.states[-1, 0] - exact))
        assert 12 < errs[0] / errs[1] < 20

    def test_linear_sampling(self):
        tr = integrate_fixed("plus", (1, 1, 0), (0, 1), FIG1, dt=0.01)
        mid = tr.sample(0.005)
        np.testing.assert_allclose(mid, 0.5 * (tr.states[0] + tr.states[1]))
