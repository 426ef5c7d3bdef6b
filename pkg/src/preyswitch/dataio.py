"""CSV ingestion and export, L2 normalisation and synthetic observations.

All files are UTF-8 CSV with a header row, ``,`` separators, ``.`` decimals
and LF line endings. Floats are written with 17 significant digits so that
every export round-trips exactly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NonMonotonicTimes, ParseError, ZeroVector

__all__ = [
    "TimeSeries",
    "load_timeseries",
    "save_timeseries",
    "normalize_l2",
    "generate_synthetic",
    "export_population",
    "import_population",
    "export_trajectory",
    "write_rows",
    "fmt",
]


def fmt(x) -> str:
    """Format a number with 17 significant digits (exact round trip)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


@dataclass
class TimeSeries:
    """Predator observations; ``times`` are days since the window start."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.values))):
            raise ValueError("times and values must be finite")
        if np.any(np.diff(self.times) <= 0):
            raise NonMonotonicTimes("times must be strictly increasing")
        if np.any(self.values < 0):
            raise ValueError("biomass values must be non-negative")

    def __len__(self) -> int:
        return self.times.size

    @property
    def normalized(self) -> np.ndarray:
        return normalize_l2(self.values)

    @property
    def peak_time(self) -> float:
        return float(self.times[int(np.argmax(self.values))])


def normalize_l2(v: Sequence[float]) -> np.ndarray:
    """``v / ||v||_2``.

    Raises
    ------
    ZeroVector
        If the norm is zero.
    """
    a = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(a)
    if norm == 0 or not math.isfinite(norm):
        raise ZeroVector("cannot normalise a zero (or non-finite) vector")
    return a / norm


def load_timeseries(path, label: str | None = None) -> TimeSeries:
    """Read a two-column ``t,value`` CSV file.

    Raises
    ------
    ParseError
        Malformed rows, non-finite or negative values; carries the line number.
    NonMonotonicTimes
        If times are not strictly increasing.
    """
    path = Path(path)
    times: list[float] = []
    values: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if len(header) != 2:
            raise ParseError("header must have exactly two columns (t,value)", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", line=line)
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                raise ParseError(f"non-numeric entry {row!r}", line=line) from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ParseError("non-finite entry", line=line)
            if v < 0:
                raise ParseError(f"negative biomass {v}", line=line)
            if times and t <= times[-1]:
                raise NonMonotonicTimes(f"time {t} does not exceed {times[-1]}", line=line)
            times.append(t)
            values.append(v)
    if not times:
        raise ParseError("no data rows", line=2)
    return TimeSeries(np.array(times), np.array(values), label or path.stem)


def save_timeseries(ts: TimeSeries, path) -> None:
    write_rows(path, ["t", "value"], zip(ts.times, ts.values))


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])


def export_population(pop, path) -> None:
    """One row per particle: parameters, weight, distance, tolerance, iteration."""
    header = [*pop.names, "weight", "distance", "tolerance", "iteration"]
    rows = (
        [*theta, w, d, pop.tolerance, pop.iteration]
        for theta, w, d in zip(pop.particles, pop.weights, pop.distances)
    )
    write_rows(path, header, rows)


def import_population(path):
    from .fitting import ParticlePopulation

    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    names = tuple(header[:-4])
    data = np.array([[float(x) for x in r] for r in rows]).reshape(-1, len(header))
    ncol = len(names)
    tol = float(data[0, ncol + 2]) if len(rows) else math.nan
    it = int(data[0, ncol + 3]) if len(rows) else 0
    return ParticlePopulation(names=names, particles=data[:, :ncol].copy(),
                              weights=data[:, ncol].copy(), distances=data[:, ncol + 1].copy(),
                              tolerance=tol, iteration=it)


def export_trajectory(traj, path, times: Sequence[float] | None = None) -> None:
    """Write ``t, <state columns>, segment``; ``times`` resamples via dense output."""
    if times is None:
        t = traj.times
        states = traj.states
    else:
        t = np.asarray(times, dtype=np.float64)
        states = traj.sample(t)
    labels = [traj.label_at(float(ti)) for ti in t]
    write_rows(path, ["t", *traj.columns, "segment"],
               ([ti, *yi, lab] for ti, yi, lab in zip(t, states, labels)))


def generate_synthetic(model: str, p, times: Sequence[float], sigma: float, seed: int,
                       phase: float = 0.0, transient: float = 60.0,
                       horizon: float = 400.0, opts=None) -> TimeSeries:
    """Noisy predator observations from a model run with a recorded phase.

    The model is started from the same initial condition used during fitting;
    observation ``i`` is ``z(transient + phase + times[i])`` plus Gaussian
    noise with standard deviation ``sigma * (1 + P_max)``, where ``P_max`` is
    the largest post-transient predator density. Negative values are clamped
    to zero.
    """
    from .fitting import model_trajectory, noise_scale, post_transient_max

    times = np.asarray(times, dtype=np.float64)
    end = transient + phase + float(times[-1])
    traj = model_trajectory(model, p, max(horizon, end), opts)
    clean = traj.sample(transient + phase + times)[:, 2]
    pmax = post_transient_max(traj, transient)
    rng = np.random.default_rng(seed)
    noisy = clean + rng.normal(0.0, noise_scale(sigma, pmax), size=clean.size)
    return TimeSeries(times, np.clip(noisy, 0.0, None), f"synthetic-{model}")
