"""Vector fields of the one-predator / two-prey prey-switching models.

Three models share one parameter record:

* ``piecewise`` -- Filippov system with branches ``f_plus`` (predator eats only
  the preferred prey, ``h > 0``) and ``f_minus`` (only the alternative prey,
  ``h < 0``) separated by the switching manifold ``h = b1*p1 - aq*b2*p2 = 0``.
* ``smooth1`` -- the switch replaced by ``(1 +/- tanh(k*h)) / 2``.
* ``smooth2`` -- the preference ``q`` promoted to a state variable with
  ``dq/dt = q (1 - q) (p1 - aq p2)``.

The numba kernels prefixed with ``_`` write into caller-supplied buffers and are
shared with :mod:`preyswitch.integrate`; the public functions wrap them for
ordinary numpy use.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from .errors import DegenerateSliding, NotSliding, ParameterError

__all__ = [
    "ModelParams",
    "State3",
    "State4",
    "switching_function",
    "switching_gradient",
    "manifold_tolerance",
    "normal_components",
    "rhs_piecewise",
    "rhs_smooth1",
    "rhs_smooth2",
    "sliding_coefficient",
    "filippov_sliding_rhs",
]

# layout of the packed parameter vector consumed by the kernels
P_R1, P_R2, P_M, P_E, P_Q1, P_Q2, P_AQ, P_B1, P_B2, P_K = range(10)
N_PACKED = 10

# model / branch identifiers understood by the kernels
PLUS, MINUS, SLIDING, SMOOTH1, SMOOTH2, NAIVE_PIECEWISE = range(6)

MODEL_IDS = {"plus": PLUS, "minus": MINUS, "sliding": SLIDING,
             "smooth1": SMOOTH1, "smooth2": SMOOTH2}

# beyond this |k*h| the tanh switch is replaced by an exact 0/1
TANH_SATURATION = 350.0
MANIFOLD_RTOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Rate and preference constants of all three models.

    Defaults are the parameter set used for the steady-state maps in the
    reference study, ``(e, b1, b2, r1, r2, m, q1, q2) = (0.25, 1, 1, 1.3,
    0.26, 0.14, 1, 0.5)``, with ``aq = q2`` and a moderately steep switch.
    """

    r1: float = 1.3
    r2: float = 0.26
    m: float = 0.14
    e: float = 0.25
    q1: float = 1.0
    q2: float = 0.5
    aq: float = 0.5
    beta1: float = 1.0
    beta2: float = 1.0
    k: float = 10.0
    nu: float = 2.0
    sigma: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.m, self.e, self.q1, self.q2,
                         self.aq, self.beta1, self.beta2, self.k], dtype=np.float64)

    def replace(self, **changes) -> "ModelParams":
        unknown = set(changes) - set(self.names())
        if unknown:
            raise ParameterError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: float(v) for k, v in changes.items()})

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def names() -> tuple[str, ...]:
        return tuple(f.name for f in fields(ModelParams))

    def validate(self, smooth: bool = False) -> "ModelParams":
        """Check the modelling assumptions; returns ``self`` for chaining."""
        for name, value in self.to_dict().items():
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
        if not self.r1 > self.r2 > 0:
            raise ParameterError("growth rates must satisfy r1 > r2 > 0")
        if not 0 < self.q2 < self.q1 <= 1:
            raise ParameterError("preferences must satisfy 0 < q2 < q1 <= 1")
        if self.m <= 0:
            raise ParameterError("predator death rate m must be positive")
        if not 0 < self.e < 1:
            raise ParameterError("conversion efficiency e must lie in (0, 1)")
        if self.aq <= 0:
            raise ParameterError("tradeoff slope aq must be positive")
        if self.beta1 <= 0 or self.beta2 <= 0:
            raise ParameterError("predation coefficients must be positive")
        if self.k <= 0:
            raise ParameterError("switch steepness k must be positive")
        if self.nu <= 1:
            raise ParameterError("perturbation factor nu must exceed 1")
        if self.sigma < 0:
            raise ParameterError("noise scale sigma must be non-negative")
        if smooth and (self.beta1 != 1 or self.beta2 != 1):
            raise ParameterError("the smooth models take beta1 = beta2 = 1")
        return self


class State3(NamedTuple):
    p1: float
    p2: float
    z: float


class State4(NamedTuple):
    p1: float
    p2: float
    z: float
    q: float


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _switch(y, p):
    return p[P_B1] * y[0] - p[P_AQ] * p[P_B2] * y[1]


@njit(cache=True)
def _manifold_scale(y, p):
    return 1.0 + abs(p[P_B1] * y[0]) + abs(p[P_AQ] * p[P_B2] * y[1])


@njit(cache=True)
def _f_plus(y, p, out):
    out[0] = (p[P_R1] - p[P_B1] * y[2]) * y[0]
    out[1] = p[P_R2] * y[1]
    out[2] = (p[P_E] * p[P_Q1] * p[P_B1] * y[0] - p[P_M]) * y[2]


@njit(cache=True)
def _f_minus(y, p, out):
    out[0] = p[P_R1] * y[0]
    out[1] = (p[P_R2] - p[P_B2] * y[2]) * y[1]
    out[2] = (p[P_E] * p[P_Q2] * p[P_B2] * y[1] - p[P_M]) * y[2]


@njit(cache=True)
def _normal_components(y, p):
    """Return (grad h . f_plus, grad h . f_minus)."""
    b1 = p[P_B1]
    ab2 = p[P_AQ] * p[P_B2]
    sp = b1 * (p[P_R1] - b1 * y[2]) * y[0] - ab2 * p[P_R2] * y[1]
    sm = b1 * p[P_R1] * y[0] - ab2 * (p[P_R2] - p[P_B2] * y[2]) * y[1]
    return sp, sm


@njit(cache=True)
def _sliding_lambda(y, p):
    sp, sm = _normal_components(y, p)
    den = sm - sp
    if den == 0.0:
        return 0.5
    lam = sm / den
    if lam < 0.0:
        return 0.0
    if lam > 1.0:
        return 1.0
    return lam


@njit(cache=True)
def _f_sliding(y, p, out):
    lam = _sliding_lambda(y, p)
    # convex combination written out to avoid temporaries
    b1 = p[P_B1]
    b2 = p[P_B2]
    out[0] = (p[P_R1] - lam * b1 * y[2]) * y[0]
    out[1] = (p[P_R2] - (1.0 - lam) * b2 * y[2]) * y[1]
    out[2] = (lam * p[P_E] * p[P_Q1] * b1 * y[0]
              + (1.0 - lam) * p[P_E] * p[P_Q2] * b2 * y[1] - p[P_M]) * y[2]


@njit(cache=True)
def _tanh_switch(x):
    """(1 + tanh(x)) / 2 with exact saturation for large |x|."""
    if x > TANH_SATURATION:
        return 1.0
    if x < -TANH_SATURATION:
        return 0.0
    return 0.5 * (1.0 + math.tanh(x))


@njit(cache=True)
def _f_smooth1(y, p, out):
    b1 = p[P_B1]
    b2 = p[P_B2]
    w = _tanh_switch(p[P_K] * (b1 * y[0] - p[P_AQ] * b2 * y[1]))
    out[0] = p[P_R1] * y[0] - b1 * y[0] * y[2] * w
    out[1] = p[P_R2] * y[1] - b2 * y[1] * y[2] * (1.0 - w)
    out[2] = (p[P_E] * p[P_Q1] * b1 * y[0] * w
              + p[P_E] * p[P_Q2] * b2 * y[1] * (1.0 - w) - p[P_M]) * y[2]


@njit(cache=True)
def _f_smooth2(y, p, out):
    q = y[3]
    # factored like f_plus / f_minus so that q = 1 and q = 0 reproduce them exactly
    out[0] = (p[P_R1] - q * y[2]) * y[0]
    out[1] = (p[P_R2] - (1.0 - q) * y[2]) * y[1]
    out[2] = (p[P_E] * q * y[0] + p[P_E] * (1.0 - q) * p[P_Q2] * y[1] - p[P_M]) * y[2]
    out[3] = q * (1.0 - q) * (y[0] - p[P_AQ] * y[1])


@njit(cache=True)
def _rhs(model, y, p, out):
    if model == PLUS:
        _f_plus(y, p, out)
    elif model == MINUS:
        _f_minus(y, p, out)
    elif model == SLIDING:
        _f_sliding(y, p, out)
    elif model == SMOOTH1:
        _f_smooth1(y, p, out)
    elif model == SMOOTH2:
        _f_smooth2(y, p, out)
    else:
        # branch chosen pointwise; only used by brute-force reference runs
        if _switch(y, p) >= 0.0:
            _f_plus(y, p, out)
        else:
            _f_minus(y, p, out)


# ---------------------------------------------------------------------------
# public wrappers


def _state(s: Sequence[float], dim: int) -> np.ndarray:
    y = np.asarray(s, dtype=np.float64)
    if y.shape != (dim,):
        raise ValueError(f"expected a state of length {dim}, got shape {y.shape}")
    return y


def switching_function(s: Sequence[float], p: ModelParams) -> float:
    """``h = beta1*p1 - aq*beta2*p2``; positive on the preferred-prey side."""
    y = np.asarray(s, dtype=np.float64)
    return float(p.beta1 * y[0] - p.aq * p.beta2 * y[1])


def switching_gradient(p: ModelParams, dim: int = 3) -> np.ndarray:
    g = np.zeros(dim)
    g[0] = p.beta1
    g[1] = -p.aq * p.beta2
    return g


def manifold_tolerance(s: Sequence[float], p: ModelParams) -> float:
    y = np.asarray(s, dtype=np.float64)
    return MANIFOLD_RTOL * (1.0 + abs(p.beta1 * y[0]) + abs(p.aq * p.beta2 * y[1]))


def normal_components(s: Sequence[float], p: ModelParams) -> tuple[float, float]:
    """Rates of change of ``h`` under ``f_plus`` and ``f_minus``."""
    sp, sm = _normal_components(_state(s, 3), p.as_array())
    return float(sp), float(sm)


def rhs_piecewise(s: Sequence[float], p: ModelParams, side: str) -> np.ndarray:
    """Evaluate ``f_plus`` (``side="plus"``) or ``f_minus`` (``side="minus"``).

    The branch is never inferred from ``sign(h)``; callers that need the
    discontinuous field resolve the side themselves.
    """
    y = _state(s, 3)
    out = np.empty(3)
    if side == "plus":
        _f_plus(y, p.as_array(), out)
    elif side == "minus":
        _f_minus(y, p.as_array(), out)
    else:
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    return out


def rhs_smooth1(s: Sequence[float], p: ModelParams) -> np.ndarray:
    out = np.empty(3)
    _f_smooth1(_state(s, 3), p.as_array(), out)
    return out


def rhs_smooth2(s: Sequence[float], p: ModelParams) -> np.ndarray:
    out = np.empty(4)
    _f_smooth2(_state(s, 4), p.as_array(), out)
    return out


def sliding_coefficient(s: Sequence[float], p: ModelParams) -> float:
    """Weight ``lam`` of ``f_plus`` in the Filippov sliding field.

    Raises
    ------
    NotSliding
        If the state is off the manifold or the normal components do not have
        the attracting pattern ``grad h . f_plus < 0 < grad h . f_minus``.
    DegenerateSliding
        If both normal components coincide.
    """
    y = _state(s, 3)
    h = switching_function(y, p)
    if abs(h) > manifold_tolerance(y, p):
        raise NotSliding(f"state is off the switching manifold (h={h:.3e})")
    sp, sm = normal_components(y, p)
    if sp == sm:
        raise DegenerateSliding("f_plus and f_minus have equal normal components")
    if not sp < 0.0 < sm:
        raise NotSliding(f"flow crosses the manifold (dh+={sp:.3e}, dh-={sm:.3e})")
    return sm / (sm - sp)


def filippov_sliding_rhs(s: Sequence[float], p: ModelParams) -> np.ndarray:
    """Convex combination ``lam*f_plus + (1-lam)*f_minus`` tangent to ``h = 0``."""
    lam = sliding_coefficient(s, p)
    return lam * rhs_piecewise(s, p, "plus") + (1.0 - lam) * rhs_piecewise(s, p, "minus")
