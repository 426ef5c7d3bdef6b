"""Adaptive Runge-Kutta integration for the smooth and piecewise-smooth models.

The workhorse is a Dormand-Prince 5(4) pair with a proportional-integral step
controller and the usual fourth-order continuous extension, compiled with
numba. One call of :func:`_dopri_segment` integrates a single vector field
until the end of the span or until an event function changes sign; the
piecewise driver strings such segments together and decides, at each manifold
hit, whether the flow crosses or slides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from . import models
from .errors import (EventLocalizationFailure, NonFiniteState, ParameterError,
                     StepFailure)
from .models import (MINUS, NAIVE_PIECEWISE, PLUS, SLIDING, SMOOTH1, SMOOTH2,
                     ModelParams, _manifold_scale, _normal_components, _rhs,
                     _switch)

__all__ = [
    "IntegratorOptions",
    "Segment",
    "Trajectory",
    "integrate_smooth",
    "integrate_piecewise",
    "integrate_fixed",
    "fixed_step_crossing_bracket",
]

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)
D1, D3, D4, D5, D6, D7 = (-12715105075 / 11282082432, 87487479700 / 32700410799,
                          -10690763975 / 1880347072, 701980252875 / 199316789632,
                          -1453857185 / 822651844, 69997945 / 29380423)

# PI controller constants
SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA_PI = 0.04
EXPO = 0.2 - 0.75 * BETA_PI

# event kinds
EV_NONE, EV_LEAVE_PLUS, EV_LEAVE_MINUS, EV_LEAVE_SLIDING = range(4)

# return codes of the kernel
ST_DONE, ST_EVENT, ST_UNDERFLOW, ST_NONFINITE, ST_MAXSTEPS = range(5)

LABELS = {PLUS: "plus", MINUS: "minus", SLIDING: "sliding"}


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and limits; ``initial_step=0`` selects the step automatically."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-9
    max_step: float = math.inf
    initial_step: float = 0.0
    event_tol: float = 1e-12
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.event_tol > 0):
            raise ParameterError("integrator tolerances must be positive")
        if not self.max_step > 0:
            raise ParameterError("max_step must be positive")
        if self.initial_step < 0:
            raise ParameterError("initial_step must be non-negative")
        if self.max_steps <= 0:
            raise ParameterError("max_steps must be positive")


@dataclass(frozen=True)
class Segment:
    label: str
    t_start: float
    t_end: float


@dataclass
class Trajectory:
    """Accepted step nodes plus the dense-output polynomials between them.

    ``states`` has one row per entry of ``times``. Use :meth:`sample` to
    evaluate the solution at arbitrary interior times.
    """

    model: str
    times: np.ndarray
    states: np.ndarray
    segments: list[Segment]
    step_t0: np.ndarray = field(repr=False)
    step_h: np.ndarray = field(repr=False)
    dense: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def columns(self) -> tuple[str, ...]:
        return ("p1", "p2", "z", "q")[: self.dim]

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.columns.index(name)]

    def sample(self, t) -> np.ndarray:
        """Interpolated state(s) at time(s) ``t`` inside the integrated span."""
        tq = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if tq.size and (tq.min() < self.times[0] - 1e-12 or tq.max() > self.times[-1] + 1e-12):
            raise ValueError("sample time outside the integrated span")
        if self.dense.shape[0] == 0:
            # fixed-step runs keep no polynomials; interpolate linearly
            out = np.column_stack([np.interp(tq, self.times, self.states[:, j])
                                   for j in range(self.dim)])
        else:
            out = _dense_eval(self.step_t0, self.step_h, self.dense, tq)
        return out[0] if np.ndim(t) == 0 else out

    def label_at(self, t: float) -> str:
        for seg in self.segments:
            if seg.t_start <= t <= seg.t_end:
                return seg.label
        raise ValueError(f"time {t} outside the trajectory")

    def transition_times(self) -> list[float]:
        return [seg.t_start for seg in self.segments[1:]]


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, nogil=True)
def _wrms(v, y0, y1, rtol, atol):
    acc = 0.0
    n = v.shape[0]
    for i in range(n):
        sk = atol + rtol * max(abs(y0[i]), abs(y1[i]))
        acc += (v[i] / sk) ** 2
    return math.sqrt(acc / n)


@njit(cache=True, nogil=True)
def _initial_step(model, t0, y0, f0, p, rtol, atol, hmax, direction_span):
    n = y0.shape[0]
    dnf = 0.0
    dny = 0.0
    for i in range(n):
        sk = atol + rtol * abs(y0[i])
        dnf += (f0[i] / sk) ** 2
        dny += (y0[i] / sk) ** 2
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1e-6
    else:
        h = 0.01 * math.sqrt(dny / dnf)
    h = min(h, hmax, direction_span)
    y1 = y0 + h * f0
    f1 = np.empty(n)
    _rhs(model, y1, p, f1)
    der2 = 0.0
    for i in range(n):
        sk = atol + rtol * abs(y0[i])
        der2 += ((f1[i] - f0[i]) / sk) ** 2
    der2 = math.sqrt(der2) / h
    der12 = max(der2, math.sqrt(dnf))
    if der12 <= 1e-15:
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    return min(100.0 * h, h1, hmax, direction_span)


@njit(cache=True, nogil=True)
def _dense_point(rc, theta, out):
    th1 = 1.0 - theta
    for i in range(out.shape[0]):
        out[i] = rc[0, i] + theta * (rc[1, i] + th1 * (rc[2, i] + theta * (rc[3, i] + th1 * rc[4, i])))


@njit(cache=True, nogil=True)
def _dense_eval(step_t0, step_h, dense, tq):
    n = step_t0.shape[0]
    d = dense.shape[2]
    out = np.empty((tq.shape[0], d))
    buf = np.empty(d)
    for j in range(tq.shape[0]):
        idx = np.searchsorted(step_t0, tq[j], side="right") - 1
        if idx < 0:
            idx = 0
        elif idx > n - 1:
            idx = n - 1
        theta = (tq[j] - step_t0[idx]) / step_h[idx]
        _dense_point(dense[idx], theta, buf)
        out[j, :] = buf
    return out


@njit(cache=True, nogil=True)
def _event_value(kind, y, p):
    if kind == EV_LEAVE_PLUS:
        return _switch(y, p) / _manifold_scale(y, p)
    if kind == EV_LEAVE_MINUS:
        return -_switch(y, p) / _manifold_scale(y, p)
    if kind == EV_LEAVE_SLIDING:
        sp, sm = _normal_components(y, p)
        scale = _manifold_scale(y, p) * (1.0 + abs(p[0]) + abs(p[1]) + abs(y[2]))
        return min(-sp, sm) / scale
    return 1.0


@njit(cache=True, nogil=True)
def _project_to_manifold(y, p):
    b1 = p[7]
    ab2 = p[6] * p[8]
    h = _switch(y, p)
    g2 = b1 * b1 + ab2 * ab2
    y[0] -= h * b1 / g2
    y[1] += h * ab2 / g2


@njit(cache=True, nogil=True)
def _grow2(a, n):
    b = np.empty((n, a.shape[1]))
    b[: a.shape[0]] = a
    return b


@njit(cache=True, nogil=True)
def _grow3(a, n):
    b = np.empty((n, a.shape[1], a.shape[2]))
    b[: a.shape[0]] = a
    return b


@njit(cache=True, nogil=True)
def _grow1(a, n):
    b = np.empty(n)
    b[: a.shape[0]] = a
    return b


@njit(cache=True, nogil=True)
def _dopri_segment(model, y0, t0, t1, p, rtol, atol, h_init, hmax, max_steps,
                   event_kind, event_tol):
    """Integrate one vector field from ``t0`` towards ``t1``.

    Returns ``(ts, ys, step_t0, step_h, dense, status)``; when ``status`` is
    ``ST_EVENT`` the last node is the located event point.
    """
    d = y0.shape[0]
    cap = 256
    ts = np.empty(cap)
    ys = np.empty((cap, d))
    st0 = np.empty(cap)
    sh = np.empty(cap)
    dn = np.empty((cap, 5, d))
    ts[0] = t0
    ys[0] = y0
    n = 0  # accepted steps

    span = t1 - t0
    if span <= 0.0:
        return ts[:1], ys[:1], st0[:0], sh[:0], dn[:0], ST_DONE

    y = y0.copy()
    t = t0
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    k5 = np.empty(d)
    k6 = np.empty(d)
    k7 = np.empty(d)
    ytmp = np.empty(d)
    ynew = np.empty(d)
    errv = np.empty(d)
    rc = np.empty((5, d))
    ybuf = np.empty(d)

    _rhs(model, y, p, k1)
    if h_init > 0.0:
        h = min(h_init, hmax, span)
    else:
        h = _initial_step(model, t, y, k1, p, rtol, atol, hmax, span)

    facold = 1e-4
    reject = False
    attempts = 0
    status = ST_DONE
    while True:
        if attempts >= max_steps:
            status = ST_MAXSTEPS
            break
        attempts += 1
        if h < 1e-14 * max(1.0, abs(t)):
            status = ST_UNDERFLOW
            break
        last = False
        if t + 1.01 * h >= t1:
            h = t1 - t
            last = True

        for i in range(d):
            ytmp[i] = y[i] + h * A21 * k1[i]
        _rhs(model, ytmp, p, k2)
        for i in range(d):
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        _rhs(model, ytmp, p, k3)
        for i in range(d):
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs(model, ytmp, p, k4)
        for i in range(d):
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _rhs(model, ytmp, p, k5)
        for i in range(d):
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                  + A64 * k4[i] + A65 * k5[i])
        _rhs(model, ytmp, p, k6)
        for i in range(d):
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                  + A75 * k5[i] + A76 * k6[i])
        _rhs(model, ynew, p, k7)
        for i in range(d):
            errv[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                           + E6 * k6[i] + E7 * k7[i])
        err = _wrms(errv, y, ynew, rtol, atol)

        if not math.isfinite(err):
            finite = True
            for i in range(d):
                if not math.isfinite(ynew[i]):
                    finite = False
            if not finite and h <= 1e-12 * max(1.0, abs(t)):
                status = ST_NONFINITE
                break
            h *= 0.1
            reject = True
            continue

        fac11 = err ** EXPO
        if err <= 1.0:
            fac = fac11 / facold ** BETA_PI
            fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFETY))
            hnew = h / fac
            facold = max(err, 1e-4)

            for i in range(d):
                ydiff = ynew[i] - y[i]
                bspl = h * k1[i] - ydiff
                rc[0, i] = y[i]
                rc[1, i] = ydiff
                rc[2, i] = bspl
                rc[3, i] = ydiff - h * k7[i] - bspl
                rc[4, i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i]
                                + D6 * k6[i] + D7 * k7[i])

            t_end = t + h
            hit = False
            if event_kind != EV_NONE and _event_value(event_kind, ynew, p) <= 0.0:
                hit = True
                lo = 0.0
                hi = 1.0
                theta = 1.0
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    _dense_point(rc, mid, ybuf)
                    g = _event_value(event_kind, ybuf, p)
                    if g > 0.0:
                        lo = mid
                    else:
                        hi = mid
                    if abs(g) <= event_tol or (hi - lo) * h <= 1e-15 * max(1.0, abs(t)):
                        break
                theta = hi
                _dense_point(rc, theta, ynew)
                t_end = t + theta * h

            if n + 1 >= cap:
                cap *= 2
                ts = _grow1(ts, cap)
                ys = _grow2(ys, cap)
                st0 = _grow1(st0, cap)
                sh = _grow1(sh, cap)
                dn = _grow3(dn, cap)
            st0[n] = t
            sh[n] = h
            dn[n] = rc
            if event_kind == EV_LEAVE_SLIDING and not hit:
                _project_to_manifold(ynew, p)
            n += 1
            ts[n] = t_end
            ys[n] = ynew

            finite = True
            for i in range(d):
                if not math.isfinite(ynew[i]):
                    finite = False
            if not finite:
                status = ST_NONFINITE
                break
            if hit:
                status = ST_EVENT
                break
            t = t_end
            for i in range(d):
                y[i] = ynew[i]
            if last:
                status = ST_DONE
                break
            _rhs(model, y, p, k1)
            if reject:
                hnew = min(hnew, h)
            reject = False
            h = min(hnew, hmax)
        else:
            h = h / min(1.0 / FAC_MIN, fac11 / SAFETY)
            reject = True
    return ts[: n + 1], ys[: n + 1], st0[:n], sh[:n], dn[:n], status


@njit(cache=True, nogil=True)
def _rk4_run(model, y0, t0, t1, dt, p, stride, stop_on_crossing):
    """Classical RK4 with a fixed step; returns every ``stride``-th node.

    With ``stop_on_crossing`` the run stops at the first step across which
    ``h`` changes sign and reports that step's end points as a bracket.
    """
    d = y0.shape[0]
    nsteps = int(math.ceil((t1 - t0) / dt - 1e-9))
    nout = nsteps // stride + 2
    ts = np.empty(nout)
    ys = np.empty((nout, d))
    ts[0] = t0
    ys[0] = y0
    m = 1
    y = y0.copy()
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    ta = np.nan
    tb = np.nan
    t = t0
    for s in range(nsteps):
        hs = min(dt, t1 - t)
        h_old = _switch(y, p)
        _rhs(model, y, p, k1)
        for i in range(d):
            tmp[i] = y[i] + 0.5 * hs * k1[i]
        _rhs(model, tmp, p, k2)
        for i in range(d):
            tmp[i] = y[i] + 0.5 * hs * k2[i]
        _rhs(model, tmp, p, k3)
        for i in range(d):
            tmp[i] = y[i] + hs * k3[i]
        _rhs(model, tmp, p, k4)
        for i in range(d):
            y[i] += hs * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
        t_new = t0 + (s + 1) * dt if s < nsteps - 1 else t1
        if stop_on_crossing and (h_old > 0.0) != (_switch(y, p) > 0.0):
            ta = t
            tb = t_new
            ts[m] = t_new
            ys[m] = y
            m += 1
            break
        t = t_new
        if (s + 1) % stride == 0 or s == nsteps - 1:
            ts[m] = t
            ys[m] = y
            m += 1
    return ts[:m], ys[:m], ta, tb


# ---------------------------------------------------------------------------
# drivers


def _check_y0(y0, dim: int) -> np.ndarray:
    y = np.array(y0, dtype=np.float64)
    if y.shape != (dim,):
        raise ValueError(f"initial state must have length {dim}")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise ValueError("initial state must be finite and non-negative")
    if dim == 4 and not 0.0 <= y[3] <= 1.0:
        raise ValueError("initial trait q must lie in [0, 1]")
    return y


def _raise_for(status: int, t: float) -> None:
    if status == ST_UNDERFLOW:
        raise StepFailure(f"step size underflow at t={t:.6g}")
    if status == ST_MAXSTEPS:
        raise StepFailure(f"maximum number of steps exceeded at t={t:.6g}")
    if status == ST_NONFINITE:
        raise NonFiniteState(f"non-finite state at t={t:.6g}")


def _run(model_id, y0, t0, t1, parr, opts, event_kind):
    return _dopri_segment(model_id, y0, float(t0), float(t1), parr, opts.rel_tol,
                          opts.abs_tol, opts.initial_step, opts.max_step,
                          opts.max_steps, event_kind, opts.event_tol)


def integrate_smooth(model: str, y0: Sequence[float], t_span: tuple[float, float],
                     p: ModelParams, opts: IntegratorOptions | None = None) -> Trajectory:
    """Integrate smooth model I (``"smooth1"``) or II (``"smooth2"``).

    Raises
    ------
    StepFailure
        On step-size underflow or when ``opts.max_steps`` is exhausted.
    NonFiniteState
        When the state becomes NaN or infinite.
    """
    opts = opts or IntegratorOptions()
    if model == "smooth1":
        model_id, dim = SMOOTH1, 3
    elif model == "smooth2":
        model_id, dim = SMOOTH2, 4
    else:
        raise ValueError(f"unknown smooth model {model!r}")
    t0, t1 = map(float, t_span)
    if not t1 >= t0:
        raise ValueError("t_span must be ascending")
    y = _check_y0(y0, dim)
    ts, ys, st0, sh, dn, status = _run(model_id, y, t0, t1, p.as_array(), opts, EV_NONE)
    _raise_for(status, ts[-1])
    return Trajectory(model, ts, ys, [Segment("smooth", t0, float(ts[-1]))], st0, sh, dn)


def _choose_branch(y: np.ndarray, parr: np.ndarray, came_from: int | None) -> int:
    """Pick the vector field to follow from a point on the switching manifold."""
    sp, sm = _normal_components(y, parr)
    eps = 1e-12 * _manifold_scale(y, parr) * (1.0 + abs(y[2]) + parr[0] + parr[1])
    if came_from == SLIDING:
        return PLUS if abs(sp) <= abs(sm) else MINUS
    if came_from == PLUS:
        if sm <= eps:
            return MINUS
        return SLIDING if sp < -eps else PLUS
    if came_from == MINUS:
        if sp >= -eps:
            return PLUS
        return SLIDING if sm > eps else MINUS
    if sp < 0 < sm:
        return SLIDING
    if sp < 0 and sm < 0:
        return MINUS
    # crossing upwards, or a repelling sliding region where the Filippov
    # solution is not unique; the plus branch is taken by convention
    return PLUS


_EVENT_FOR = {PLUS: EV_LEAVE_PLUS, MINUS: EV_LEAVE_MINUS, SLIDING: EV_LEAVE_SLIDING}


def integrate_piecewise(y0: Sequence[float], t_span: tuple[float, float], p: ModelParams,
                        opts: IntegratorOptions | None = None,
                        max_transitions: int = 100_000) -> Trajectory:
    """Integrate the Filippov system with crossing and sliding segments.

    Each segment follows one of ``f_plus``, ``f_minus`` or the sliding field.
    Manifold hits are located on the dense output to ``|h| <= event_tol *
    scale``; sliding ends when the Filippov weight reaches 0 (exit to minus)
    or 1 (exit to plus).

    Raises
    ------
    EventLocalizationFailure
        If the driver keeps producing zero-length segments.
    """
    opts = opts or IntegratorOptions()
    parr = p.as_array()
    t0, t1 = map(float, t_span)
    if not t1 >= t0:
        raise ValueError("t_span must be ascending")
    y = _check_y0(y0, 3)

    if abs(models._switch(y, parr)) <= opts.event_tol * _manifold_scale(y, parr):
        _project_to_manifold(y, parr)
        mode = _choose_branch(y, parr, None)
    else:
        mode = PLUS if models._switch(y, parr) > 0 else MINUS

    times = [np.array([t0])]
    states = [y[None, :].copy()]
    st0s, shs, dns = [], [], []
    segments: list[Segment] = []
    t = t0
    stalls = 0
    for _ in range(max_transitions):
        ts, ys, st0, sh, dn, status = _run(mode, y, t, t1, parr, opts, _EVENT_FOR[mode])
        if status not in (ST_DONE, ST_EVENT):
            _raise_for(status, ts[-1])
        keep = ts[1:] > times[-1][-1]
        times.append(ts[1:][keep])
        states.append(ys[1:][keep])
        st0s.append(st0)
        shs.append(sh)
        dns.append(dn)
        t_end = float(ts[-1])
        if t_end > t or not segments:
            segments.append(Segment(LABELS[mode], t, t_end))
            stalls = 0
        else:
            stalls += 1
            if stalls > 50:
                raise EventLocalizationFailure(
                    f"no progress past the switching manifold at t={t:.6g}")
        if status == ST_DONE:
            break
        y = ys[-1].copy()
        t = t_end
        # the event point comes from the dense output; put it back on h = 0
        _project_to_manifold(y, parr)
        if states[-1].shape[0]:
            states[-1][-1] = y
        mode = _choose_branch(y, parr, mode)
    else:
        raise EventLocalizationFailure("too many switching events")

    # merge consecutive segments that ended up with the same label
    merged: list[Segment] = []
    for seg in segments:
        if merged and merged[-1].label == seg.label:
            merged[-1] = Segment(seg.label, merged[-1].t_start, seg.t_end)
        else:
            merged.append(seg)
    d = np.concatenate(dns) if dns else np.empty((0, 5, 3))
    return Trajectory("piecewise", np.concatenate(times), np.concatenate(states), merged,
                      np.concatenate(st0s), np.concatenate(shs), d)


def integrate_fixed(model: str, y0: Sequence[float], t_span: tuple[float, float],
                    p: ModelParams, dt: float, stride: int = 1) -> Trajectory:
    """Plain RK4 with step ``dt``, keeping every ``stride``-th node.

    ``model`` may also be ``"plus"``, ``"minus"`` or ``"piecewise"``; the
    latter picks the branch from ``sign(h)`` at every stage and is meant only
    as a brute-force reference for transversal crossings.
    """
    ids = {"smooth1": (SMOOTH1, 3), "smooth2": (SMOOTH2, 4), "plus": (PLUS, 3),
           "minus": (MINUS, 3), "piecewise": (NAIVE_PIECEWISE, 3)}
    if model not in ids:
        raise ValueError(f"unknown model {model!r}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    model_id, dim = ids[model]
    t0, t1 = map(float, t_span)
    ts, ys, _, _ = _rk4_run(model_id, _check_y0(y0, dim), t0, t1, float(dt),
                            p.as_array(), int(stride), False)
    return Trajectory(model, ts, ys, [Segment("fixed", t0, t1)],
                      np.empty(0), np.empty(0), np.empty((0, 5, dim)))


def fixed_step_crossing_bracket(y0: Sequence[float], t_span: tuple[float, float],
                                p: ModelParams, dt: float) -> tuple[float, float]:
    """First fixed-step interval over which ``h`` changes sign (brute force)."""
    _, _, ta, tb = _rk4_run(NAIVE_PIECEWISE, _check_y0(y0, 3), float(t_span[0]),
                            float(t_span[1]), float(dt), p.as_array(), 1 << 30, True)
    if math.isnan(ta):
        raise ValueError("no sign change of h within the span")
    return float(ta), float(tb)
