"""Simulation oracle: kernel cross-check against a pure-Python
reference, reproducibility, and agreement with the analytic values."""

import math
from collections import deque

import numpy as np
import pytest
from scipy import stats as sps

from paoi import (
    ClassSpec,
    Discipline,
    Exponential,
    Gamma,
    ParameterError,
    SimConfig,
    StabilityError,
    SystemSpec,
    paoi_exact,
    simulate,
)
from paoi import _kernels
from paoi.errors import DivergenceError
from paoi.infinite import fcfs_paoi, lcfs_initial_buffer_probs
from paoi.sim import _arrival_block, _service_block, occupancy_probe, run_simulation


def reference_replication(mode, k, arrs, srvs, target, warmup):
    """Plain-Python replay of one replication.

    Independent re-implementation of the discipline rules: one-slot
    buffers with replacement, per-class FIFO rings, or per-class LIFO
    stacks whose top models the freshest-packet buffer.  A peak is
    logged at a completion only when the completed release is fresher
    than every release completed before it.
    """
    ai = [0] * k
    si = [0] * k
    slot_r: list[float | None] = [None] * k
    slot_start = [0.0] * k
    fifo = [deque() for _ in range(k)]
    stack = [[] for _ in range(k)]
    fresh_waiting = [False] * k
    r_max = [-math.inf] * k
    serving = None
    serving_r = 0.0
    end = math.inf
    t_last = 0.0
    comp = [0] * k
    peaks = [0] * k
    peak_sum = [0.0] * k
    wait_sum = [0.0] * k
    wait_count = [0] * k
    occ = [0.0] * k
    drops = [0] * k
    warm_eff = max(warmup, 1)
    measuring = warmup == 0
    done_warm = 0
    done_target = 0
    while True:
        a_c = min(range(k), key=lambda c: arrs[c][ai[c]])
        a_t = arrs[a_c][ai[a_c]]
        if serving is not None and end <= a_t:
            t, is_completion = end, True
        else:
            t, is_completion = a_t, False
        if measuring:
            dt = t - t_last
            for c in range(k):
                if mode == "lcfs":
                    occupied = fresh_waiting[c]
                elif mode == "fcfs":
                    occupied = len(fifo[c]) > 0
                else:
                    occupied = slot_r[c] is not None
                if occupied:
                    occ[c] += dt
        t_last = t
        if is_completion:
            c = serving
            comp[c] += 1
            n = comp[c]
            if serving_r > r_max[c]:
                if n > warm_eff:
                    peak_sum[c] += t - r_max[c]
                    peaks[c] += 1
                r_max[c] = serving_r
            if n == warmup:
                done_warm += 1
                if done_warm == k:
                    measuring = True
            if n == target:
                done_target += 1
                if done_target == k:
                    return comp, peaks, peak_sum, wait_sum, wait_count, occ, drops
            serving = None
            end = math.inf
            for c2 in range(k):
                if mode == "b1r" and slot_r[c2] is not None:
                    serving_r = slot_r[c2]
                    slot_r[c2] = None
                    wait_sum[c2] += t - slot_start[c2]
                elif mode == "fcfs" and fifo[c2]:
                    serving_r = fifo[c2].popleft()
                    wait_sum[c2] += t - serving_r
                elif mode == "lcfs" and stack[c2]:
                    serving_r = stack[c2].pop()
                    fresh_waiting[c2] = False
                    wait_sum[c2] += t - serving_r
                else:
                    continue
                serving = c2
                wait_count[c2] += 1
                end = t + srvs[c2][si[c2]]
                si[c2] += 1
                break
        else:
            c = a_c
            ai[c] += 1
            if serving is None:
                serving = c
                serving_r = t
                wait_count[c] += 1
                end = t + srvs[c][si[c]]
                si[c] += 1
            elif mode == "b1r":
                if slot_r[c] is not None:
                    drops[c] += 1
                else:
                    slot_start[c] = t
                slot_r[c] = t
            elif mode == "fcfs":
                fifo[c].append(t)
            else:
                stack[c].append(t)
                fresh_waiting[c] = True


def kernel_replication(mode_int, k, arrs, srvs, target, warmup, cap):
    arr_off = np.zeros(k + 1, dtype=np.int64)
    srv_off = np.zeros(k + 1, dtype=np.int64)
    np.cumsum([len(a) for a in arrs], out=arr_off[1:])
    np.cumsum([len(s) for s in srvs], out=srv_off[1:])
    comp = np.zeros(k, dtype=np.int64)
    peak_sum = np.zeros(k)
    peaks = np.zeros(k, dtype=np.int64)
    wait_sum = np.zeros(k)
    wait_count = np.zeros(k, dtype=np.int64)
    occ = np.zeros(k)
    drops = np.zeros(k, dtype=np.int64)
    out_times = np.zeros(2)
    status, which = _kernels.run_replication(
        mode_int, k, np.concatenate(arrs), arr_off, np.concatenate(srvs), srv_off,
        target, warmup, cap, np.zeros((k, cap)),
        comp, peak_sum, peaks, wait_sum, wait_count, occ, drops, out_times,
    )
    assert status == _kernels.STATUS_OK, f"kernel status {status} for class {which}"
    return comp, peaks, peak_sum, wait_sum, wait_count, occ, drops


@pytest.mark.parametrize("warmup", [0, 37])
@pytest.mark.parametrize("mode,mode_int,cap", [
    ("b1r", _kernels.MODE_BUFFER1, 1),
    ("fcfs", _kernels.MODE_FCFS, 4096),
    ("lcfs", _kernels.MODE_LCFS, 4096),
])
def test_kernel_matches_the_reference_replay(mode, mode_int, cap, warmup):
    spec = SystemSpec((
        ClassSpec(0.5, Exponential(1.2)),
        ClassSpec(0.3, Gamma(3.0, 6.0)),
    ))
    k, seed, n = spec.k, 555, 60_000
    for rep in (0, 1):
        arrs = [
            _arrival_block(seed, rep, k, c, spec.arrival_rate(c + 1), n)
            for c in range(k)
        ]
        srvs = [
            _service_block(seed, rep, k, c, spec.service(c + 1), n)
            for c in range(k)
        ]
        ref = reference_replication(mode, k, arrs, srvs, 3000, warmup)
        ker = kernel_replication(mode_int, k, arrs, srvs, 3000, warmup, cap)
        for label, a, b in zip(
            ("completions", "peaks", "peak_sum", "wait_sum", "wait_count",
             "occupancy", "drops"),
            ref, ker,
        ):
            np.testing.assert_allclose(
                np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64),
                rtol=1e-9, atol=1e-9,
                err_msg=f"{mode} warmup={warmup} rep={rep}: {label} diverged",
            )


def test_same_seed_reproduces_every_statistic():
    spec = SystemSpec((ClassSpec(0.4, Exponential(1.0)), ClassSpec(0.3, Gamma(2.0, 3.0))))
    cfg = SimConfig(seed=99, replications=5, completions_per_replication=5_000,
                    warmup_completions=100)
    first = simulate(spec, Discipline.FCFS_INFINITE, cfg)
    second = simulate(spec, Discipline.FCFS_INFINITE, cfg)
    assert first == second
    shifted = simulate(spec, Discipline.FCFS_INFINITE,
                       SimConfig(seed=100, replications=5,
                                 completions_per_replication=5_000,
                                 warmup_completions=100))
    assert shifted.per_class[0].paoi_mean != first.per_class[0].paoi_mean


@pytest.fixture(scope="module")
def single_class_runs():
    spec = SystemSpec((ClassSpec(1.0, Exponential(2.0)),))
    cfg = SimConfig(seed=777, replications=10, completions_per_replication=30_000)
    return {d: simulate(spec, d, cfg) for d in Discipline}


def test_one_slot_estimate_covers_the_chain_value(single_class_runs):
    est = single_class_runs[Discipline.BUFFER1_REPLACE].per_class[0]
    exact = paoi_exact(SystemSpec((ClassSpec(1.0, Exponential(2.0)),)), 1).total
    assert abs(est.paoi_mean - exact) <= est.ci_halfwidth
    assert est.drops > 0


def test_oldest_first_estimate_covers_the_formula(single_class_runs):
    est = single_class_runs[Discipline.FCFS_INFINITE].per_class[0]
    exact = fcfs_paoi(SystemSpec((ClassSpec(1.0, Exponential(2.0)),)))[0].total
    assert abs(est.paoi_mean - exact) <= est.ci_halfwidth
    assert est.drops is None


def test_disciplines_order_as_expected_for_one_class(single_class_runs):
    one_slot = single_class_runs[Discipline.BUFFER1_REPLACE].per_class[0].paoi_mean
    newest = single_class_runs[Discipline.LCFS_INFINITE].per_class[0].paoi_mean
    oldest = single_class_runs[Discipline.FCFS_INFINITE].per_class[0].paoi_mean
    assert one_slot <= newest <= oldest


def test_one_slot_occupancy_sees_the_time_average():
    # Poisson arrivals observe the stationary buffer occupancy, so the
    # time fraction must match the chain probability 1/3
    spec = SystemSpec((ClassSpec(1.0, Exponential(1.0)),))
    run = run_simulation(spec, Discipline.BUFFER1_REPLACE,
                         SimConfig(seed=888, replications=10,
                                   completions_per_replication=30_000))
    column = run.occupancy[:, 0]
    halfwidth = sps.t.ppf(0.995, 9) * column.std(ddof=1) / math.sqrt(10)
    assert abs(column.mean() - 1 / 3) <= halfwidth
    assert occupancy_probe(run)[0] == pytest.approx(column.mean())


def test_newest_first_occupancy_matches_the_analytic_probabilities():
    spec = SystemSpec((
        ClassSpec(0.3, Exponential(1.0)),
        ClassSpec(0.4, Gamma(4.0, 4.0)),
    ))
    probs = lcfs_initial_buffer_probs(spec)
    run = run_simulation(spec, Discipline.LCFS_INFINITE,
                         SimConfig(seed=611, replications=10,
                                   completions_per_replication=40_000))
    quantile = sps.t.ppf(0.995, 9)
    for i in range(spec.k):
        column = run.occupancy[:, i]
        halfwidth = quantile * column.std(ddof=1) / math.sqrt(10)
        assert abs(column.mean() - probs[i]) <= halfwidth


def test_every_class_reaches_the_completion_target():
    spec = SystemSpec((ClassSpec(0.5, Exponential(1.0)), ClassSpec(0.1, Exponential(1.0))))
    run = run_simulation(spec, Discipline.BUFFER1_REPLACE,
                         SimConfig(seed=3, replications=3,
                                   completions_per_replication=2_000,
                                   warmup_completions=0))
    assert np.all(run.completions >= 2_000)
    assert np.all(run.peak_means > 0.0)


def test_overloaded_one_slot_system_still_runs():
    spec = SystemSpec((ClassSpec(2.0, Exponential(1.0)),))
    est = simulate(spec, Discipline.BUFFER1_REPLACE,
                   SimConfig(seed=12, replications=3,
                             completions_per_replication=2_000,
                             warmup_completions=0))
    assert est.per_class[0].paoi_mean > 0.0
    assert est.per_class[0].drops > 0


def test_infinite_buffer_disciplines_require_stability():
    spec = SystemSpec((ClassSpec(2.0, Exponential(1.0)),))
    cfg = SimConfig(seed=12, replications=2, completions_per_replication=1_000,
                    warmup_completions=0)
    for d in (Discipline.FCFS_INFINITE, Discipline.LCFS_INFINITE):
        with pytest.raises(StabilityError):
            run_simulation(spec, d, cfg)


def test_a_tiny_queue_cap_reports_divergence():
    spec = SystemSpec((ClassSpec(0.9, Exponential(1.0)),))
    with pytest.raises(DivergenceError):
        run_simulation(spec, Discipline.FCFS_INFINITE,
                       SimConfig(seed=5, replications=2,
                                 completions_per_replication=50_000, queue_cap=8))


def test_config_validation():
    with pytest.raises(ParameterError):
        SimConfig(seed=-1)
    with pytest.raises(ParameterError):
        SimConfig(seed=1, replications=1)
    with pytest.raises(ParameterError):
        SimConfig(seed=1, completions_per_replication=100, warmup_completions=100)
    with pytest.raises(ParameterError):
        SimConfig(seed=1, confidence_level=1.0)
    with pytest.raises(ParameterError):
        SimConfig(seed=1, queue_cap=0)
