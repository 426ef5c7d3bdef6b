"""Coexistence steady states and their linear stability.

Smooth model I reduces to a cubic characteristic polynomial whose Routh-Hurwitz
condition ``ab - c > 0`` factors into a positive prefactor times a quadratic
``s(k)`` in the switch steepness. Smooth model II has a trace-free quartic that
collapses to a quadratic in ``u = lambda**2`` when ``aq = q2``.

All formulas assume ``beta1 = beta2 = 1``. The identity
``arctanh((r1 - r2)/(r1 + r2)) = log(r1/r2)/2`` is used throughout because it
stays accurate when ``r1`` is close to ``r2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConvergenceFailure, InfeasibleSteadyState, ParameterError
from .models import ModelParams, State3, State4

__all__ = [
    "StabilityReport",
    "k0_threshold",
    "k1_threshold",
    "steady_state_smooth1",
    "jacobian_smooth1",
    "jacobian_smooth1_steady",
    "characteristic_cubic_smooth1",
    "s_coefficients",
    "stability_smooth1",
    "steady_state_smooth2",
    "jacobian_smooth2",
    "jacobian_smooth2_steady",
    "characteristic_quartic_smooth2",
    "u_roots_smooth2",
    "stability_smooth2",
    "routh_hurwitz_cubic",
    "eigenvalues",
    "stability_map",
    "k1_curve",
]

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"

MARGINAL_RTOL = 1e-12


@dataclass
class StabilityReport:
    model: str
    steady_state: tuple
    jacobian: np.ndarray
    char_coeffs: tuple
    eigenvalues: np.ndarray
    classification: str
    thresholds: tuple | None = None
    s_coeffs: tuple | None = None
    discriminant: float | None = None

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "steady_state": [float(v) for v in self.steady_state],
            "char_coeffs": [float(v) for v in self.char_coeffs],
            "eigenvalues_real": [float(v) for v in self.eigenvalues.real],
            "eigenvalues_imag": [float(v) for v in self.eigenvalues.imag],
            "classification": self.classification,
            "max_real": self.max_real,
        }
        if self.thresholds is not None:
            d["k0"], d["k1"] = self.thresholds
        if self.s_coeffs is not None:
            d["s0"], d["s1"], d["s2"] = self.s_coeffs
        if self.discriminant is not None:
            d["discriminant"] = self.discriminant
        return d


def _half_log_ratio(p: ModelParams) -> float:
    # arctanh((r1 - r2) / (r1 + r2))
    return 0.5 * math.log(p.r1 / p.r2)


def _require_unit_betas(p: ModelParams) -> None:
    if p.beta1 != 1.0 or p.beta2 != 1.0:
        raise ParameterError("steady-state formulas require beta1 = beta2 = 1")


# ---------------------------------------------------------------------------
# smooth model I


def k0_threshold(p: ModelParams) -> float:
    """Smallest switch steepness for which all three densities are positive."""
    return p.e * p.q1 * p.r1 * _half_log_ratio(p) / (p.m * (p.r1 + p.r2))


def steady_state_smooth1(p: ModelParams) -> State3:
    """Unique coexistence steady state of smooth model I.

    Raises
    ------
    InfeasibleSteadyState
        If ``k <= k0`` so that a prey density is not positive.
    """
    _require_unit_betas(p)
    big_r = p.r1 + p.r2
    lr = _half_log_ratio(p)
    den = p.e * (p.q1 * p.aq * p.r1 + p.q2 * p.r2)
    p1 = (p.aq * p.m * big_r + p.e * p.q2 * p.r2 * lr / p.k) / den
    p2 = (p.m * big_r - p.e * p.q1 * p.r1 * lr / p.k) / den
    if not (p1 > 0 and p2 > 0):
        raise InfeasibleSteadyState(
            f"coexistence state infeasible for k={p.k:g} (k0={k0_threshold(p):.6g})")
    return State3(p1, p2, big_r)


def jacobian_smooth1(s: Sequence[float], p: ModelParams) -> np.ndarray:
    """Jacobian of smooth model I at an arbitrary state (``beta = 1``).

    Written with ``A = tanh(k (p1 - aq p2))``, ``B = 1 + A``, ``C = 1 - A``.
    """
    _require_unit_betas(p)
    p1, p2, z = map(float, s)
    k, aq, e, q1, q2 = p.k, p.aq, p.e, p.q1, p.q2
    A = math.tanh(k * (p1 - aq * p2))
    B = 1.0 + A
    C = 1.0 - A
    return np.array([
        [p.r1 - 0.5 * z * B * (1 + p1 * k * C), 0.5 * z * p1 * k * aq * B * C, -0.5 * p1 * B],
        [0.5 * z * p2 * k * B * C, p.r2 - 0.5 * z * C * (1 + p2 * k * aq * B), -0.5 * p2 * C],
        [0.5 * e * q1 * z * B * (1 + p1 * k * C) - 0.5 * e * q2 * p2 * z * k * B * C,
         0.5 * e * q2 * z * C * (1 + p2 * k * aq * B) - 0.5 * e * q1 * p1 * z * k * aq * B * C,
         0.5 * e * q1 * p1 * B + 0.5 * e * q2 * p2 * C - p.m],
    ])


def jacobian_smooth1_steady(p: ModelParams) -> np.ndarray:
    """Closed-form Jacobian of smooth model I at its coexistence state."""
    p1, p2, _ = steady_state_smooth1(p)
    r1, r2, k, aq, e, q1, q2 = p.r1, p.r2, p.k, p.aq, p.e, p.q1, p.q2
    big_r = r1 + r2
    rr = 2 * r1 * r2 * k
    return np.array([
        [-rr * p1, rr * aq * p1, -r1 * p1],
        [rr * p2, -rr * aq * p2, -r2 * p2],
        [e * q1 * r1 * big_r + e * rr * (q1 * p1 - q2 * p2),
         e * q2 * r2 * big_r + e * rr * aq * (q2 * p2 - q1 * p1), 0.0],
    ]) / big_r


def characteristic_cubic_smooth1(p: ModelParams) -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` of ``lambda^3 + a lambda^2 + b lambda + c``."""
    p1, p2, _ = steady_state_smooth1(p)
    r1, r2, k, aq, e, q1, q2 = p.r1, p.r2, p.k, p.aq, p.e, p.q1, p.q2
    big_r = r1 + r2
    a = 2 * k * (p1 + aq * p2) * r1 * r2 / big_r
    b = e * (2 * k * p1 ** 2 * q1 * r1 ** 2 * r2
             + p2 * q2 * r2 ** 2 * (r1 + 2 * aq * k * p2 * r1 + r2)
             + p1 * r1 * (-2 * k * p2 * q2 * r1 * r2
                          + q1 * (r1 ** 2 + r1 * r2 - 2 * aq * k * p2 * r2 ** 2))) / big_r ** 2
    c = 2 * e * k * p1 * p2 * r1 * r2 * (aq * q1 * r1 + q2 * r2) / big_r
    return a, b, c


def s_coefficients(p: ModelParams) -> tuple[float, float, float]:
    """Coefficients of ``s(k) = s2 k^2 + s1 k + s0`` with ``sign(ab - c) = sign(s)``."""
    r1, r2, m, aq, e, q1, q2 = p.r1, p.r2, p.m, p.aq, p.e, p.q1, p.q2
    lg = math.log(r1 / r2)
    s0 = 0.5 * e ** 2 * q1 * q2 * r1 * r2 * lg * (
        2 * aq * q1 * r1 + 2 * q2 * r2 + (-aq * q1 * r1 + q2 * r2) * lg)
    s1 = e * m * ((r1 + r2) * (aq ** 2 * q1 ** 2 * r1 ** 2 - q2 ** 2 * r2 ** 2)
                  - r1 * r2 * (aq ** 2 * q1 ** 2 * r1 + q2 ** 2 * r2
                               - 3 * aq * q1 * q2 * (r1 + r2)) * lg)
    s2 = 4 * aq * m ** 2 * (aq * q1 - q2) * r1 * r2 * (r1 + r2)
    return s0, s1, s2


def k1_threshold(p: ModelParams) -> float | None:
    """Upper stability threshold in ``k``; ``None`` when ``aq >= q2/q1``.

    ``s`` is a downward parabola for ``aq < q2/q1`` and is positive at ``k0``,
    so exactly one root lies above ``k0``. With ``s2 < 0`` that root is
    ``(-s1 - sqrt(s1^2 - 4 s2 s0)) / (2 s2)``.
    """
    s0, s1, s2 = s_coefficients(p)
    if not s2 < 0:
        return None
    disc = s1 * s1 - 4 * s2 * s0
    if disc < 0:
        return None
    # cancellation-free pair of roots
    qq = -0.5 * (s1 + math.copysign(math.sqrt(disc), s1))
    roots = [qq / s2]
    if qq != 0:
        roots.append(s0 / qq)
    return max(roots)


def routh_hurwitz_cubic(a: float, b: float, c: float) -> str:
    """Classify ``lambda^3 + a lambda^2 + b lambda + c`` by Routh-Hurwitz."""
    coef_scale = max(abs(a), abs(b), abs(c), 1e-300)
    det_scale = max(abs(a * b), abs(c), 1e-300)
    if (abs(a) <= MARGINAL_RTOL * coef_scale or abs(c) <= MARGINAL_RTOL * coef_scale
            or abs(a * b - c) <= MARGINAL_RTOL * det_scale):
        return MARGINAL
    if a > 0 and c > 0 and a * b - c > 0:
        return STABLE
    return UNSTABLE


def eigenvalues(matrix) -> np.ndarray:
    """All eigenvalues of a small dense matrix, sorted by descending real part."""
    J = np.asarray(matrix, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(J)):
        raise ConvergenceFailure("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(J)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = np.lexsort((-ev.imag, -ev.real))
    return ev[order].astype(np.complex128)


def _classify_smooth1(p: ModelParams, k0: float, k1: float | None) -> str:
    if p.aq >= p.q2 / p.q1 or k1 is None:
        return STABLE
    if abs(p.k - k1) <= MARGINAL_RTOL * k1:
        return MARGINAL
    return STABLE if p.k < k1 else UNSTABLE


def stability_smooth1(p: ModelParams) -> StabilityReport:
    """Closed-form stability of smooth model I's coexistence state.

    Stable iff ``aq >= q2/q1`` and ``k > k0``, or ``aq < q2/q1`` and
    ``k0 < k < k1``. Eigenvalues of the assembled Jacobian are computed
    independently and reported alongside.
    """
    ss = steady_state_smooth1(p)
    k0 = k0_threshold(p)
    k1 = k1_threshold(p)
    J = jacobian_smooth1(ss, p)
    coeffs = characteristic_cubic_smooth1(p)
    cls = _classify_smooth1(p, k0, k1)
    if routh_hurwitz_cubic(*coeffs) == MARGINAL:
        cls = MARGINAL
    return StabilityReport("smooth1", ss, J, coeffs, eigenvalues(J), cls,
                           thresholds=(k0, k1), s_coeffs=s_coefficients(p))


# ---------------------------------------------------------------------------
# smooth model II


def steady_state_smooth2(p: ModelParams) -> State4:
    big_r = p.r1 + p.r2
    den = p.e * (p.r1 * p.aq + p.r2 * p.q2)
    return State4(p.aq * p.m * big_r / den, p.m * big_r / den, big_r, p.r1 / big_r)


def jacobian_smooth2(s: Sequence[float], p: ModelParams) -> np.ndarray:
    p1, p2, z, q = map(float, s)
    e, q2, aq = p.e, p.q2, p.aq
    return np.array([
        [p.r1 - q * z, 0.0, -q * p1, -p1 * z],
        [0.0, p.r2 - (1 - q) * z, -(1 - q) * p2, p2 * z],
        [e * q * z, e * (1 - q) * q2 * z, e * q * p1 + e * (1 - q) * q2 * p2 - p.m,
         e * p1 * z - e * q2 * p2 * z],
        [q * (1 - q), -aq * q * (1 - q), 0.0, (1 - 2 * q) * (p1 - aq * p2)],
    ])


def jacobian_smooth2_steady(p: ModelParams) -> np.ndarray:
    r1, r2, m, e, q2, aq = p.r1, p.r2, p.m, p.e, p.q2, p.aq
    big_r = r1 + r2
    den = e * (r1 * aq + r2 * q2)
    w = r1 * r2 / big_r ** 2
    return np.array([
        [0.0, 0.0, -r1 * aq * m / den, -aq * m * big_r ** 2 / den],
        [0.0, 0.0, -r2 * m / den, m * big_r ** 2 / den],
        [e * r1, e * r2 * q2, 0.0, e * (aq - q2) * m * big_r ** 2 / den],
        [w, -aq * w, 0.0, 0.0],
    ])


def characteristic_quartic_smooth2(p: ModelParams) -> tuple[float, float, float]:
    """``(c2, c1, c0)`` of ``lambda^4 + c2 lambda^2 + c1 lambda + c0``."""
    r1, r2, m, e, q2, aq = p.r1, p.r2, p.m, p.e, p.q2, p.aq
    den = aq * r1 + q2 * r2
    c2 = m * (e * q2 * r2 ** 2 + aq * r1 * (e * r1 + 2 * r2)) / (e * den)
    c1 = aq * r1 * r2 * m ** 2 * (aq - q2) * (r1 - r2) / (e * den ** 2)
    c0 = aq * r1 * r2 * m ** 2 * (r1 + r2) / (e * den)
    return c2, c1, c0


def u_roots_smooth2(p: ModelParams) -> tuple[float, float, float]:
    """Roots ``u1 <= u2`` of the quadratic in ``u = lambda^2`` and its discriminant.

    Only meaningful for ``aq = q2``, where the linear term of the quartic
    vanishes.
    """
    r1, r2, m, e = p.r1, p.r2, p.m, p.e
    big_r = r1 + r2
    bu = m * (2 * r1 * r2 + e * (r1 ** 2 + r2 ** 2)) / (e * big_r)
    cu = m ** 2 * r1 * r2 / e
    ss = r1 ** 2 + r2 ** 2
    disc = m ** 2 / (e ** 2 * big_r ** 2) * (
        ss ** 2 * (e - 4 * r1 ** 2 * r2 ** 2 / ss ** 2) ** 2
        + 4 * r1 ** 2 * r2 ** 2 * (r1 ** 2 - r2 ** 2) ** 2 / ss ** 2)
    # both roots negative: avoid cancellation in -bu + sqrt(disc)
    u1 = -0.5 * (bu + math.sqrt(disc))
    u2 = cu / u1
    return u1, u2, disc


def stability_smooth2(p: ModelParams) -> StabilityReport:
    """Linear stability of smooth model II's coexistence state.

    ``aq = q2`` gives two purely imaginary pairs (reported ``marginal``, the
    linearisation does not decide); any other ``aq`` is unstable.
    """
    ss = steady_state_smooth2(p)
    J = jacobian_smooth2(ss, p)
    coeffs = characteristic_quartic_smooth2(p)
    if abs(p.aq - p.q2) <= MARGINAL_RTOL * max(1.0, abs(p.q2)):
        u1, u2, disc = u_roots_smooth2(p)
        if not (disc > 0 and u1 < 0 and u2 < 0):
            raise ConvergenceFailure("u-quadratic does not have two negative roots")
        w1, w2 = math.sqrt(-u1), math.sqrt(-u2)
        ev = np.array([1j * w1, -1j * w1, 1j * w2, -1j * w2])
        ev = ev[np.lexsort((-ev.imag, -ev.real))]
        return StabilityReport("smooth2", ss, J, coeffs, ev, MARGINAL, discriminant=disc)
    c2, c1, c0 = coeffs
    ev = np.roots([1.0, 0.0, c2, c1, c0]).astype(np.complex128)
    ev = ev[np.lexsort((-ev.imag, -ev.real))]
    cls = UNSTABLE if ev.real.max() > 0 else MARGINAL
    return StabilityReport("smooth2", ss, J, coeffs, ev, cls)


# ---------------------------------------------------------------------------
# grids


def stability_map(p: ModelParams, aq_values, k_values) -> list[dict]:
    """Steady-state densities and stability of smooth model I on an (aq, k) grid.

    Cells with ``k <= k0`` are returned with ``feasible=False`` rather than
    raising.
    """
    rows = []
    for aq in aq_values:
        for k in k_values:
            q = p.replace(aq=float(aq), k=float(k))
            k0 = k0_threshold(q)
            k1 = k1_threshold(q)
            row = {"aq": float(aq), "k": float(k), "k0": k0,
                   "k1": math.nan if k1 is None else k1}
            try:
                rep = stability_smooth1(q)
            except InfeasibleSteadyState:
                row.update(p1=math.nan, p2=math.nan, z=math.nan, feasible=False,
                           classification="infeasible", max_real=math.nan)
            else:
                p1, p2, z = rep.steady_state
                row.update(p1=p1, p2=p2, z=z, feasible=True,
                           classification=rep.classification, max_real=rep.max_real)
            rows.append(row)
    return rows


def k1_curve(p: ModelParams, aq_values) -> list[dict]:
    """Upper stability boundary ``k1(aq)`` for the grid's ``aq < q2/q1`` rows."""
    out = []
    for aq in aq_values:
        if aq < p.q2 / p.q1:
            k1 = k1_threshold(p.replace(aq=float(aq)))
            if k1 is not None:
                out.append({"aq": float(aq), "k1": k1})
    return out
