"""ABC-PMC parameter estimation against normalised predator time series.

A candidate parameter vector is simulated for ``sim_horizon`` days, the
first ``transient`` days are dropped, the model's highest post-transient
predator peak is shifted onto the highest data point, the shifted model is
sampled at the data times and Gaussian noise with standard deviation
``sigma * (1 + P_max)`` is added. The discrepancy is the mean squared
difference of the two L2-normalised vectors.

Sampling follows population Monte Carlo ABC: the first population comes
straight from the uniform prior; later ones resample the previous weighted
population, perturb with a Gaussian kernel of twice the weighted variance
and reweight by prior density over the kernel mixture. Every particle slot
of every iteration has its own random stream derived from the master seed,
so results do not depend on how the work is scheduled.
"""
from __future__ import annotations

import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .dataio import TimeSeries, normalize_l2
from .equilibria import steady_state_smooth2
from .errors import (IntegrationError, ParameterError, RejectCandidate,
                     StarvedAcceptance, ZeroVector)
from .integrate import IntegratorOptions, Trajectory, integrate_smooth
from .models import ModelParams

__all__ = [
    "PriorSpec",
    "FitConfig",
    "ParticlePopulation",
    "distance",
    "initial_state",
    "model_trajectory",
    "post_transient_max",
    "peak_align",
    "predict",
    "noise_scale",
    "simulate_candidate",
    "abc_pmc",
    "sample_posterior",
    "weighted_quantile",
    "progress_to_stderr",
]

log = logging.getLogger(__name__)

DEFAULT_BOUNDS = {
    "smooth1": {"sigma": (0.0, 0.1), "r1": (1.0, 3.0), "r2": (0.01, 0.8),
                "m": (0.1, 1.0), "aq": (0.01, 2.0), "k": (1.0, 100.0)},
    "smooth2": {"sigma": (0.0, 0.1), "r1": (1.0, 3.0), "r2": (0.01, 0.8),
                "m": (0.05, 1.0), "nu": (1.1, 5.0)},
}

# first-iteration tolerances used for the selective 1991 series
DEFAULT_TOLERANCE = {"smooth1": 0.022, "smooth2": 0.02}

# integration settings used for every candidate simulation
FIT_INTEGRATOR = IntegratorOptions(rel_tol=1e-7, abs_tol=1e-12, max_step=1.0,
                                   max_steps=2_000_000)


@dataclass(frozen=True)
class PriorSpec:
    """Independent uniform priors; ``lo == hi`` pins a parameter to a point."""

    names: tuple[str, ...]
    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def __post_init__(self):
        if not len(self.names) == len(self.lows) == len(self.highs):
            raise ParameterError("prior names and bounds differ in length")
        for n, lo, hi in zip(self.names, self.lows, self.highs):
            if not lo <= hi:
                raise ParameterError(f"prior bounds for {n} must satisfy lo <= hi")

    @classmethod
    def default(cls, model: str) -> "PriorSpec":
        if model not in DEFAULT_BOUNDS:
            raise ParameterError(f"no prior for model {model!r}")
        b = DEFAULT_BOUNDS[model]
        return cls(tuple(b), tuple(v[0] for v in b.values()), tuple(v[1] for v in b.values()))

    def with_bounds(self, **bounds: tuple[float, float]) -> "PriorSpec":
        lows, highs = list(self.lows), list(self.highs)
        for name, (lo, hi) in bounds.items():
            if name not in self.names:
                raise ParameterError(f"{name} is not a fitted parameter")
            i = self.names.index(name)
            lows[i], highs[i] = float(lo), float(hi)
        return PriorSpec(self.names, tuple(lows), tuple(highs))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lows)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.highs)

    @property
    def free(self) -> np.ndarray:
        return self.hi > self.lo

    def contains(self, theta) -> bool:
        theta = np.asarray(theta)
        return bool(np.all(theta >= self.lo) and np.all(theta <= self.hi))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random(len(self.names))

    def log_density(self, theta) -> float:
        if not self.contains(theta):
            return -math.inf
        width = (self.hi - self.lo)[self.free]
        return float(-np.sum(np.log(width)))


@dataclass(frozen=True)
class FitConfig:
    model: str = "smooth1"
    n_particles: int = 2000
    n_iterations: int = 10
    initial_tolerance: float | None = None
    quantile: float = 0.10
    sim_horizon: float = 400.0
    transient: float = 60.0
    seed: int = 0
    threads: int | None = None
    acceptance_floor: float = 1e-5
    steady_amplitude: float = 1e-3
    fixed: dict = field(default_factory=lambda: {"e": 0.25, "q1": 1.0, "q2": 0.5,
                                                 "beta1": 1.0, "beta2": 1.0})
    integrator: IntegratorOptions = FIT_INTEGRATOR

    def __post_init__(self):
        if self.model not in ("smooth1", "smooth2"):
            raise ParameterError("fitting supports models 'smooth1' and 'smooth2'")
        if not 0 < self.quantile < 1:
            raise ParameterError("quantile must lie in (0, 1)")
        if not 0 <= self.transient < self.sim_horizon:
            raise ParameterError("transient must be shorter than the simulation horizon")
        if self.n_particles < 1 or self.n_iterations < 1:
            raise ParameterError("need at least one particle and one iteration")
        if self.initial_tolerance is None:
            object.__setattr__(self, "initial_tolerance", DEFAULT_TOLERANCE[self.model])
        if not self.initial_tolerance > 0:
            raise ParameterError("initial tolerance must be positive")
        if not 0 < self.acceptance_floor < 1:
            raise ParameterError("acceptance floor must lie in (0, 1)")

    @property
    def base_params(self) -> ModelParams:
        p = ModelParams().replace(**self.fixed)
        if self.model == "smooth2":
            # the trait model is fitted at the nonhyperbolic point aq = q2
            p = p.replace(aq=p.q2)
        return p

    def params_for(self, names: Sequence[str], theta) -> ModelParams:
        return self.base_params.replace(**dict(zip(names, map(float, theta))))


@dataclass
class ParticlePopulation:
    names: tuple[str, ...]
    particles: np.ndarray
    weights: np.ndarray
    distances: np.ndarray
    tolerance: float
    iteration: int
    simulations: int = 0

    def __len__(self) -> int:
        return self.particles.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return len(self) / self.simulations if self.simulations else math.nan

    def check(self, prior: PriorSpec | None = None) -> None:
        """Assert the population invariants."""
        if len(self):
            assert np.all(self.weights >= 0)
            assert abs(self.weights.sum() - 1.0) <= 1e-12
            assert np.all(self.distances <= self.tolerance)
        if prior is not None:
            assert all(prior.contains(th) for th in self.particles)

    def best(self) -> tuple[np.ndarray, float]:
        i = int(np.argmin(self.distances))
        return self.particles[i], float(self.distances[i])

    def weighted_median(self, name: str) -> float:
        return weighted_quantile(self.particles[:, self.names.index(name)], self.weights, 0.5)


def weighted_quantile(values, weights, q: float) -> float:
    """Inverse of the weighted empirical CDF (lower interpolation)."""
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    cw = np.cumsum(w[order])
    idx = int(np.searchsorted(cw, q * cw[-1], side="left"))
    return float(v[order][min(idx, v.size - 1)])


# ---------------------------------------------------------------------------
# discrepancy and simulation


def distance(model_pred: Sequence[float], data: Sequence[float]) -> float:
    """Mean squared difference of the two L2-normalised vectors.

    Raises
    ------
    ZeroVector
        If either vector has zero norm.
    """
    a = np.asarray(model_pred, dtype=np.float64)
    b = np.asarray(data, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("distance needs two non-empty vectors of equal length")
    diff = normalize_l2(a) - normalize_l2(b)
    return float(np.dot(diff, diff) / a.size)


def initial_state(model: str, p: ModelParams) -> np.ndarray:
    """Fitting initial condition: ``(1, 1, 1)`` for model I; for model II the
    coexistence state with the predator scaled by ``nu``."""
    if model == "smooth1":
        return np.ones(3)
    if model == "smooth2":
        p1, p2, z, q = steady_state_smooth2(p)
        return np.array([p1, p2, p.nu * z, q])
    raise ParameterError(f"unknown model {model!r}")


def model_trajectory(model: str, p: ModelParams, horizon: float,
                     opts: IntegratorOptions | None = None) -> Trajectory:
    return integrate_smooth(model, initial_state(model, p), (0.0, horizon), p,
                            opts or FIT_INTEGRATOR)


def post_transient_max(traj: Trajectory, transient: float) -> float:
    z = traj.states[:, 2][traj.times >= transient]
    return float(z.max()) if z.size else float(traj.sample(transient)[2])


def _refine_max(traj: Trajectory, a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    """Golden-section search for the predator maximum on ``[a, b]``."""
    g = (math.sqrt(5.0) - 1.0) / 2.0

    def z(t):
        return float(traj.sample(t)[2])

    c = b - g * (b - a)
    d = a + g * (b - a)
    zc, zd = z(c), z(d)
    while b - a > tol * max(1.0, abs(a)):
        if zc >= zd:
            b, d, zd = d, c, zc
            c = b - g * (b - a)
            zc = z(c)
        else:
            a, c, zc = c, d, zd
            d = a + g * (b - a)
            zd = z(d)
    t = 0.5 * (a + b)
    return t, z(t)


def _top_maxima(traj: Trajectory, transient: float, count: int = 4) -> list[tuple[float, float]]:
    """The ``count`` highest local predator maxima on ``[transient, end]``
    that rise above the mid-range, refined on the dense output and sorted
    by height."""
    t = traj.times
    z = traj.states[:, 2]
    i0 = max(int(np.searchsorted(t, transient, side="left")), 1)
    inner = z[i0:-1]
    is_max = (inner > z[i0 - 1:-2]) & (inner >= z[i0 + 1:])
    # ripples on a flat stretch are not oscillation peaks
    tail = z[i0 - 1:]
    is_max &= inner > 0.5 * (tail.min() + tail.max())
    idx = np.nonzero(is_max)[0] + i0
    if idx.size == 0:
        return []
    idx = idx[np.argsort(z[idx], kind="stable")[::-1][:count]]
    out = [_refine_max(traj, max(t[i - 1], transient), t[i + 1]) for i in idx]
    return sorted(out, key=lambda m: m[1], reverse=True)


def peak_align(model_series: Trajectory, data: TimeSeries, transient: float = 60.0) -> np.ndarray:
    """Model predator values at the data times after aligning the two peaks.

    The sampling origin is ``t_model_peak - t_data_peak``, where the model
    peak is the highest post-transient predator maximum. Shifted times that
    leave ``[transient, end]`` are moved back inside by whole oscillation
    periods, the period being the gap between the two highest maxima.

    Raises
    ------
    RejectCandidate
        No interior maximum, or shifted times outside the run of a
        trajectory with a single maximum.
    """
    t_end = float(model_series.times[-1])
    if t_end - transient < data.times[-1] - data.times[0]:
        raise RejectCandidate("model run shorter than the data window")
    maxima = _top_maxima(model_series, transient)
    if not maxima:
        raise RejectCandidate("no predator peak after the transient")
    t_peak = maxima[0][0]
    s = t_peak - data.peak_time + data.times
    slack = 1e-9 * (1.0 + t_end)
    low = s < transient - slack
    high = s > t_end + slack
    if np.any(low | high):
        period = abs(maxima[0][0] - maxima[1][0]) if len(maxima) >= 2 else 0.0
        if not period > 0 or period > t_end - transient:
            raise RejectCandidate("data window falls outside an aperiodic model run")
        s = np.where(low, s + np.ceil((transient - s) / period) * period, s)
        s = np.where(high, s - np.ceil((s - t_end) / period) * period, s)
    s = np.clip(s, transient, t_end)
    return model_series.sample(s)[:, 2]


def predict(model: str, p: ModelParams, data: TimeSeries, cfg: FitConfig
            ) -> tuple[np.ndarray, float, Trajectory]:
    """Noise-free aligned prediction, ``P_max`` and the underlying trajectory."""
    try:
        traj = model_trajectory(model, p, cfg.sim_horizon, cfg.integrator)
    except IntegrationError as exc:
        raise RejectCandidate(f"integration failed: {exc}") from exc
    z = traj.states[:, 2][traj.times >= cfg.transient]
    mean = float(z.mean())
    if not mean > 0 or z.max() - z.min() < cfg.steady_amplitude * mean:
        raise RejectCandidate("prediction is (numerically) at steady state")
    values = peak_align(traj, data, cfg.transient)
    return values, float(z.max()), traj


def noise_scale(sigma: float, pmax: float) -> float:
    """Standard deviation of the observation noise, ``sigma * (1 + P_max)``."""
    return sigma * (1.0 + pmax)


def simulate_candidate(model: str, p: ModelParams, data: TimeSeries, cfg: FitConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """Noisy, peak-aligned model prediction at the data times."""
    values, pmax, _ = predict(model, p, data, cfg)
    if p.sigma > 0:
        values = values + rng.normal(0.0, noise_scale(p.sigma, pmax), size=values.size)
    return values


# ---------------------------------------------------------------------------
# ABC-PMC


def _stream(seed: int, iteration: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(iteration, index))))


MAX_PRIOR_REDRAWS = 10**6


def _evaluate(theta, names, data, cfg, rng) -> float:
    p = cfg.params_for(names, theta)
    try:
        x = simulate_candidate(cfg.model, p, data, cfg, rng)
        return distance(x, data.values)
    except (RejectCandidate, ZeroVector):
        return math.inf


def _kernel_logpdf(x: np.ndarray, centers: np.ndarray, sd: np.ndarray) -> np.ndarray:
    """Log density of a diagonal Gaussian centred at each row of ``centers``."""
    act = sd > 0
    if not np.any(act):
        return np.zeros(centers.shape[0])
    u = (x[act] - centers[:, act]) / sd[act]
    return -0.5 * np.sum(u * u, axis=1) - np.sum(np.log(sd[act])) - 0.5 * act.sum() * math.log(2 * math.pi)


def abc_pmc(data: TimeSeries, prior: PriorSpec, cfg: FitConfig,
            progress: Callable[[ParticlePopulation], None] | None = None
            ) -> list[ParticlePopulation]:
    """Run ``cfg.n_iterations`` rounds of ABC population Monte Carlo.

    Raises
    ------
    StarvedAcceptance
        When a particle slot needs more than ``1 / acceptance_floor``
        simulations. The populations completed so far are attached.
    """
    if len(data) == 0:
        raise ParameterError("data series is empty")
    names = prior.names
    n = cfg.n_particles
    max_attempts = int(math.ceil(1.0 / cfg.acceptance_floor))
    threads = cfg.threads or os.cpu_count() or 1
    populations: list[ParticlePopulation] = []
    tol = cfg.initial_tolerance
    prev = None
    sd = None

    for it in range(cfg.n_iterations):
        if prev is not None:
            q = float(np.quantile(prev.distances, cfg.quantile))
            tol = min(prev.tolerance, q)
            mean = prev.weights @ prev.particles
            var = prev.weights @ (prev.particles - mean) ** 2
            sd = np.sqrt(2.0 * var)
            cum = np.cumsum(prev.weights)
            cum /= cum[-1]

        def draw(i: int, it=it, tol=tol, prev=prev, sd=sd):
            rng = _stream(cfg.seed, it, i)
            sims = 0
            redraws = 0
            while sims < max_attempts:
                if prev is None:
                    theta = prior.sample(rng)
                else:
                    j = min(int(np.searchsorted(cum, rng.random(), side="right")), n - 1)
                    theta = prev.particles[j] + sd * rng.standard_normal(len(names))
                    if not prior.contains(theta):
                        # redraws cost no simulation; bounded against a kernel
                        # that has left the prior support altogether
                        redraws += 1
                        if redraws > MAX_PRIOR_REDRAWS:
                            break
                        continue
                sims += 1
                d = _evaluate(theta, names, data, cfg, rng)
                if d <= tol:
                    return theta, d, sims
            return None, math.inf, sims

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(draw, range(n)))
        else:
            results = [draw(i) for i in range(n)]

        sims = sum(r[2] for r in results)
        if any(r[0] is None for r in results):
            raise StarvedAcceptance(
                f"iteration {it + 1}: acceptance rate fell below {cfg.acceptance_floor:g} "
                f"at tolerance {tol:.6g}", populations)
        particles = np.array([r[0] for r in results])
        dists = np.array([r[1] for r in results])

        if prev is None:
            weights = np.full(n, 1.0 / n)
        else:
            logw_prev = np.log(prev.weights)
            logw = np.empty(n)
            for i in range(n):
                lk = logw_prev + _kernel_logpdf(particles[i], prev.particles, sd)
                top = lk.max()
                logw[i] = prior.log_density(particles[i]) - (top + math.log(np.exp(lk - top).sum()))
            logw -= logw.max()
            weights = np.exp(logw)
            weights /= weights.sum()

        pop = ParticlePopulation(names, particles, weights, dists, tol, it + 1, sims)
        populations.append(pop)
        log.info("iteration %d: tolerance %.6g, acceptance %.4g, min distance %.6g",
                 it + 1, tol, pop.acceptance_rate, dists.min())
        if progress is not None:
            progress(pop)
        prev = pop
    return populations


def sample_posterior(pop: ParticlePopulation, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws with replacement, probability proportional to weight."""
    if n < 1:
        raise ValueError("n must be positive")
    idx = rng.choice(len(pop), size=n, replace=True, p=pop.weights)
    return pop.particles[idx]


def progress_to_stderr(pop: ParticlePopulation) -> None:
    print(f"[abc-pmc] iteration {pop.iteration}: tolerance={pop.tolerance:.6g} "
          f"simulations={pop.simulations} acceptance={pop.acceptance_rate:.4g} "
          f"min distance={pop.distances.min():.6g}", file=sys.stderr, flush=True)
