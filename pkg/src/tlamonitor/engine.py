"""Shared trajectory driver: step-grid validation, exact-time event
splitting, reproducible seed derivation, and ensemble aggregation.

Seeding scheme (documented contract): trajectory i of an ensemble draws its
noise from numpy's PCG64 seeded with SeedSequence(master_seed, spawn_key=(i,)).
Bit-exact stream reproduction is promised only within this implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from joblib import Parallel, delayed

from . import tla


@dataclass(frozen=True)
class EngineConfig:
    """Time stepping, sampling, and ensemble bookkeeping."""

    dt: float
    t_final: float
    sample_stride: int = 1
    master_seed: int = 0
    n_trajectories: int = 1
    burn_in: float = 10.0
    n_jobs: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt={self.dt} violates dt > 0")
        if self.t_final < self.dt:
            raise ValueError(f"t_final={self.t_final} violates t_final >= dt")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        validate_step_grid(self.dt, self.t_final, self.sample_stride)

    @property
    def n_steps(self) -> int:
        return validate_step_grid(self.dt, self.t_final, self.sample_stride)[0]

    @property
    def n_samples(self) -> int:
        return validate_step_grid(self.dt, self.t_final, self.sample_stride)[1]

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * (self.sample_stride * self.dt)


def validate_step_grid(dt: float, t_final: float, stride: int) -> tuple[int, int]:
    """t_final must be an integer number of steps and of sample strides.

    Returns (n_steps, n_samples) with n_samples counting the t = 0 row.
    """
    steps = t_final / dt
    n_steps = int(round(steps))
    if abs(steps - n_steps) > 1e-6 or n_steps < 1:
        raise ValueError(
            f"t_final={t_final} is not an integer multiple of dt={dt}")
    if n_steps % stride != 0:
        raise ValueError(
            f"step count {n_steps} is not a multiple of sample_stride={stride}")
    return n_steps, n_steps // stride + 1


def trajectory_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Per-trajectory seed: SeedSequence(master_seed, spawn_key=(index,))."""
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def split_step_at_events(
    t: float, dt: float, event_queue: Sequence[float]
) -> list[tuple[float, float]]:
    """Partition (t, t+dt] so that every queued event time is a boundary.

    Events outside (t, t+dt] are ignored; an event exactly at t+dt ends the
    final subinterval (processed at interval end).  The queue must be sorted.
    """
    t_end = t + dt
    eps = 1e-12 * max(dt, 1.0)
    bounds = [t]
    for ev in event_queue:
        if bounds and abs(ev - bounds[-1]) <= eps:
            continue
        if t + eps < ev < t_end - eps:
            bounds.append(ev)
    bounds.append(t_end)
    return [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]


@dataclass
class TrajectoryRecord:
    """Sampled conditional-state series for one trajectory."""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    purity: np.ndarray
    mode: str
    seed: int | None = None
    counts: np.ndarray | None = None        # cumulative avalanches (APD)
    v_out: np.ndarray | None = None         # stride-averaged record (homodyne)
    truth: "TrajectoryRecord | None" = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        for name in ("x", "y", "z", "purity"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"series {name} length != times length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def window_purity(self, burn_in: float) -> float:
        """Time-averaged purity over times >= burn_in."""
        mask = self.times >= burn_in - 1e-12
        if not mask.any():
            raise ValueError(f"no samples at or after burn_in={burn_in}")
        return float(self.purity[mask].mean())


@dataclass
class DetectionRecord:
    """Measured output: avalanche times (APD) or sampled voltages (receiver)."""

    kind: str                      # "apd" | "homodyne" | "ideal"
    times: np.ndarray
    values: np.ndarray | None = None


@dataclass
class EnsembleResult:
    """Per-time ensemble means and standard errors, plus stationary-purity
    ingredients (per-trajectory window averages)."""

    times: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    mean_z: np.ndarray
    se_x: np.ndarray
    se_y: np.ndarray
    se_z: np.ndarray
    mean_purity: np.ndarray
    se_purity: np.ndarray
    window_purity: np.ndarray
    n_trajectories: int
    master_seed: int
    mode: str
    mean_counts: np.ndarray | None = None

    def mean_rho(self, i: int) -> np.ndarray:
        return tla.bloch_to_rho(self.mean_x[i], self.mean_y[i], self.mean_z[i])


class _Accumulator:
    def __init__(self, n_samples: int, burn_in: float):
        self.n = 0
        self.burn_in = burn_in
        self.sums = np.zeros((4, n_samples))
        self.sumsq = np.zeros((4, n_samples))
        self.window = []
        self.counts = None
        self.times = None

    def add(self, rec: TrajectoryRecord) -> None:
        if self.times is None:
            self.times = rec.times
        series = np.stack([rec.x, rec.y, rec.z, rec.purity])
        self.sums += series
        self.sumsq += series ** 2
        self.window.append(rec.window_purity(self.burn_in))
        if rec.counts is not None:
            if self.counts is None:
                self.counts = np.zeros_like(rec.counts, dtype=float)
            self.counts += rec.counts
        self.n += 1


def _finalize(acc: _Accumulator, master_seed: int, mode: str) -> EnsembleResult:
    n = acc.n
    means = acc.sums / n
    if n > 1:
        var = np.maximum(acc.sumsq - n * means ** 2, 0.0) / (n - 1)
        se = np.sqrt(var / n)
    else:
        se = np.zeros_like(means)
    return EnsembleResult(
        times=acc.times,
        mean_x=means[0], mean_y=means[1], mean_z=means[2],
        se_x=se[0], se_y=se[1], se_z=se[2],
        mean_purity=means[3], se_purity=se[3],
        window_purity=np.array(acc.window),
        n_trajectories=n,
        master_seed=master_seed,
        mode=mode,
        mean_counts=None if acc.counts is None else acc.counts / n,
    )


def run_ensemble(
    model: Callable[[np.random.SeedSequence], TrajectoryRecord],
    config: EngineConfig,
    collect_records: bool = False,
):
    """Run config.n_trajectories independent trajectories of `model`.

    Aggregation is a fixed-order reduction over trajectory index, so results
    are identical for any n_jobs.  Set collect_records to also get the raw
    per-trajectory records (memory permitting).
    """
    n = config.n_trajectories
    acc = _Accumulator(config.n_samples, config.burn_in)
    collected = [] if collect_records else None
    mode = ""
    batch = 64 if config.n_jobs != 1 else n
    idx = 0
    while idx < n:
        seeds = [trajectory_seed(config.master_seed, i)
                 for i in range(idx, min(idx + batch, n))]
        if config.n_jobs != 1:
            records = Parallel(n_jobs=config.n_jobs)(
                delayed(model)(s) for s in seeds)
        else:
            records = [model(s) for s in seeds]
        for rec in records:
            acc.add(rec)
            mode = rec.mode
            if collected is not None:
                collected.append(rec)
        idx += batch
    result = _finalize(acc, config.master_seed, mode)
    if collect_records:
        return result, collected
    return result
