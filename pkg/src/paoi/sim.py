"""Discrete-event simulation of the three priority disciplines.

The event loop lives in a compiled kernel; this module owns the
randomness, the replication bookkeeping and the statistics.  All draws
come from counter-based generators jumped to per-(replication, class,
purpose) offsets, so replications are provably non-overlapping and a
rerun with larger draw blocks replays the same experiment.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .dist import ServiceDistribution
from .errors import (
    DivergenceError,
    InternalConsistencyError,
    ParameterError,
    StabilityError,
)
from .exact_mm import SystemSpec

__all__ = [
    "Discipline",
    "SimConfig",
    "ClassEstimate",
    "SimEstimate",
    "SimulationRun",
    "run_simulation",
    "estimate_from_run",
    "simulate",
    "occupancy_probe",
]

_INITIAL_BLOCK_CAP = 1 << 25


class Discipline(enum.Enum):
    BUFFER1_REPLACE = "buffer1_replace"
    FCFS_INFINITE = "fcfs_infinite"
    LCFS_INFINITE = "lcfs_infinite"

    @property
    def _mode(self) -> int:
        return {
            Discipline.BUFFER1_REPLACE: _kernels.MODE_BUFFER1,
            Discipline.FCFS_INFINITE: _kernels.MODE_FCFS,
            Discipline.LCFS_INFINITE: _kernels.MODE_LCFS,
        }[self]


@dataclass(frozen=True)
class SimConfig:
    seed: int
    replications: int = 10
    completions_per_replication: int = 100_000
    warmup_completions: int = 1_000
    confidence_level: float = 0.99
    queue_cap: int = 1_000_000

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ParameterError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.replications < 2:
            raise ParameterError(f"replications must be >= 2, got {self.replications}")
        if self.warmup_completions < 0:
            raise ParameterError(
                f"warmup_completions must be >= 0, got {self.warmup_completions}"
            )
        # the first peak needs a prior completion, so demand strictly
        # more completions than max(warmup, 1)
        if self.completions_per_replication <= max(self.warmup_completions, 1):
            raise ParameterError(
                "completions_per_replication must exceed max(warmup_completions, 1), "
                f"got {self.completions_per_replication} with warmup "
                f"{self.warmup_completions}"
            )
        if not 0.0 < self.confidence_level < 1.0:
            raise ParameterError(
                f"confidence_level must be in (0, 1), got {self.confidence_level}"
            )
        if self.queue_cap < 1:
            raise ParameterError(f"queue_cap must be >= 1, got {self.queue_cap}")


@dataclass(frozen=True)
class ClassEstimate:
    paoi_mean: float
    ci_halfwidth: float
    buffer_full_fraction: float
    wait_mean: float
    completions: int
    drops: int | None


@dataclass(frozen=True)
class SimEstimate:
    per_class: tuple[ClassEstimate, ...]


@dataclass(frozen=True)
class SimulationRun:
    """Raw per-replication results; rows are replications, columns classes."""

    spec: SystemSpec
    discipline: Discipline
    config: SimConfig
    peak_means: np.ndarray
    wait_means: np.ndarray
    occupancy: np.ndarray
    completions: np.ndarray
    drops: np.ndarray


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(index))


def _arrival_block(seed: int, rep: int, k: int, c: int, lam: float, n: int) -> np.ndarray:
    rng = _stream(seed, 2 * k * rep + 2 * c)
    return np.cumsum(rng.exponential(1.0 / lam, n))


def _service_block(seed: int, rep: int, k: int, c: int,
                   dist: ServiceDistribution, n: int) -> np.ndarray:
    rng = _stream(seed, 2 * k * rep + 2 * c + 1)
    return np.ascontiguousarray(dist.sample(rng, n), dtype=np.float64)


def _initial_sizes(spec: SystemSpec, cfg: SimConfig) -> list[int]:
    """Rough per-class draw counts; the kernel reruns with doubled
    blocks when it runs out, so this only needs to be in the right
    ballpark."""
    need = cfg.completions_per_replication + cfg.warmup_completions
    lam_min = min(spec.arrival_rate(j) for j in range(1, spec.k + 1))
    mean_max = max(spec.service(j).mean() for j in range(1, spec.k + 1))
    horizon = 2.0 * need * (1.0 / lam_min + spec.k * mean_max)
    sizes = []
    for j in range(1, spec.k + 1):
        guess = int(1.25 * spec.arrival_rate(j) * horizon) + 256
        sizes.append(min(max(guess, 2 * need), _INITIAL_BLOCK_CAP))
    return sizes


def run_simulation(spec: SystemSpec, discipline: Discipline,
                   cfg: SimConfig) -> SimulationRun:
    if discipline is not Discipline.BUFFER1_REPLACE:
        total = spec.total_rho()
        if total >= 1.0:
            raise StabilityError(
                f"total utilization is {total:.6g} >= 1; the infinite-buffer "
                "simulation would not reach steady state"
            )
    k = spec.k
    mode = discipline._mode
    cap = cfg.queue_cap if mode != _kernels.MODE_BUFFER1 else 1
    queue_buf = np.zeros((k, cap), dtype=np.float64)
    reps = cfg.replications
    peak_means = np.zeros((reps, k))
    wait_means = np.zeros((reps, k))
    occupancy = np.zeros((reps, k))
    completions = np.zeros((reps, k), dtype=np.int64)
    drops = np.zeros((reps, k), dtype=np.int64)

    base_sizes = _initial_sizes(spec, cfg)
    for rep in range(reps):
        arr_sizes = list(base_sizes)
        srv_sizes = list(base_sizes)
        arr_blocks = [
            _arrival_block(cfg.seed, rep, k, c, spec.arrival_rate(c + 1), arr_sizes[c])
            for c in range(k)
        ]
        srv_blocks = [
            _service_block(cfg.seed, rep, k, c, spec.service(c + 1), srv_sizes[c])
            for c in range(k)
        ]
        while True:
            arr_off = np.zeros(k + 1, dtype=np.int64)
            srv_off = np.zeros(k + 1, dtype=np.int64)
            np.cumsum(arr_sizes, out=arr_off[1:])
            np.cumsum(srv_sizes, out=srv_off[1:])
            arr_flat = np.concatenate(arr_blocks)
            srv_flat = np.concatenate(srv_blocks)
            comp = np.zeros(k, dtype=np.int64)
            peak_sum = np.zeros(k)
            peak_count = np.zeros(k, dtype=np.int64)
            wait_sum = np.zeros(k)
            wait_count = np.zeros(k, dtype=np.int64)
            occ_time = np.zeros(k)
            drop_cnt = np.zeros(k, dtype=np.int64)
            out_times = np.zeros(2)
            status, which = _kernels.run_replication(
                mode, k, arr_flat, arr_off, srv_flat, srv_off,
                cfg.completions_per_replication, cfg.warmup_completions,
                cap, queue_buf,
                comp, peak_sum, peak_count, wait_sum, wait_count,
                occ_time, drop_cnt, out_times,
            )
            if status == _kernels.STATUS_OK:
                break
            if status == _kernels.STATUS_EXHAUST_ARRIVALS:
                arr_sizes[which] *= 2
                arr_blocks[which] = _arrival_block(
                    cfg.seed, rep, k, which, spec.arrival_rate(which + 1),
                    arr_sizes[which])
            elif status == _kernels.STATUS_EXHAUST_SERVICES:
                srv_sizes[which] *= 2
                srv_blocks[which] = _service_block(
                    cfg.seed, rep, k, which, spec.service(which + 1),
                    srv_sizes[which])
            elif status == _kernels.STATUS_DIVERGED:
                raise DivergenceError(
                    f"class {which + 1} queue exceeded {cap} waiting packets "
                    f"in replication {rep}; the system looks unstable for "
                    f"{discipline.value}"
                )
            else:
                raise InternalConsistencyError(
                    f"event calendar dispatched out of order in replication {rep}"
                )
        if np.any(peak_count == 0):
            raise InternalConsistencyError(
                f"replication {rep} recorded no peaks for some class"
            )
        meas_time = out_times[0]
        if meas_time <= 0.0:
            raise InternalConsistencyError(
                f"replication {rep} measured an empty occupancy window"
            )
        peak_means[rep] = peak_sum / peak_count
        wait_means[rep] = wait_sum / np.maximum(wait_count, 1)
        occupancy[rep] = occ_time / meas_time
        completions[rep] = comp
        drops[rep] = drop_cnt
    return SimulationRun(
        spec=spec,
        discipline=discipline,
        config=cfg,
        peak_means=peak_means,
        wait_means=wait_means,
        occupancy=occupancy,
        completions=completions,
        drops=drops,
    )


def estimate_from_run(run: SimulationRun) -> SimEstimate:
    """Student-t interval on the replication means, per class."""
    cfg = run.config
    reps = cfg.replications
    quantile = stats.t.ppf(0.5 * (1.0 + cfg.confidence_level), reps - 1)
    out = []
    is_b1 = run.discipline is Discipline.BUFFER1_REPLACE
    for c in range(run.spec.k):
        means = run.peak_means[:, c]
        spread = means.std(ddof=1) / math.sqrt(reps)
        out.append(
            ClassEstimate(
                paoi_mean=float(means.mean()),
                ci_halfwidth=float(quantile * spread),
                buffer_full_fraction=float(run.occupancy[:, c].mean()),
                wait_mean=float(run.wait_means[:, c].mean()),
                completions=int(run.completions[:, c].sum()),
                drops=int(run.drops[:, c].sum()) if is_b1 else None,
            )
        )
    return SimEstimate(per_class=tuple(out))


def simulate(spec: SystemSpec, d: Discipline, cfg: SimConfig) -> SimEstimate:
    return estimate_from_run(run_simulation(spec, d, cfg))


def occupancy_probe(run: SimulationRun) -> tuple[float, ...]:
    """Time-average (initial-)buffer occupancy per class."""
    return tuple(float(x) for x in run.occupancy.mean(axis=0))
