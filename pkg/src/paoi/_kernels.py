"""Compiled event loop for the queue simulator.

One kernel drives all three disciplines; the host pre-draws every
random number, so the kernel is a pure deterministic replay.  All
per-class draw arrays arrive flattened with offset tables because the
classes may need very different amounts of randomness.
"""

import numpy as np
from numba import njit

MODE_BUFFER1 = 0
MODE_FCFS = 1
MODE_LCFS = 2

STATUS_OK = 0
STATUS_EXHAUST_ARRIVALS = 1
STATUS_EXHAUST_SERVICES = 2
STATUS_DIVERGED = 3
STATUS_TIME_ORDER = 4


@njit(cache=True)
def run_replication(mode, k, arr_flat, arr_off, srv_flat, srv_off,
                    target, warmup, cap, queue_buf,
                    completions, peak_sum, peak_count,
                    wait_sum, wait_count, occ_time, drops, out_times):
    """Run one replication until every class logs `target` completions.

    queue_buf rows hold per-class waiting-packet release times: a ring
    buffer under FCFS, a stack under LCFS, unused for the one-slot
    buffer.  qa counts waiting packets (or marks the slot), qb is the
    FCFS ring head or the LCFS initial-buffer flag.  Age peaks are
    recorded per class at age-reducing completions after the first
    max(warmup, 1) completions; occupancy accumulates only once every
    class has passed warmup completions.
    Returns (status, class) where class identifies the exhausted or
    diverged class, -1 otherwise.
    """
    arr_idx = arr_off[:k].copy()
    srv_idx = srv_off[:k].copy()
    buf_r = np.zeros(k, np.float64)
    episode_start = np.zeros(k, np.float64)
    qa = np.zeros(k, np.int64)
    qb = np.zeros(k, np.int64)
    r_max = np.full(k, -np.inf)
    serving = -1
    serving_r = 0.0
    end_time = np.inf
    t_last = 0.0
    warm_eff = max(warmup, 1)
    measuring = warmup == 0
    meas_start = 0.0
    done_warm = 0
    done_target = 0

    while True:
        a_t = np.inf
        a_c = -1
        for c in range(k):
            if arr_idx[c] >= arr_off[c + 1]:
                # next arrival of c unknown, cannot order events safely
                return STATUS_EXHAUST_ARRIVALS, c
            ta = arr_flat[arr_idx[c]]
            if ta < a_t:
                a_t = ta
                a_c = c
        # completion wins a tie with an arrival
        is_completion = serving >= 0 and end_time <= a_t
        t = end_time if is_completion else a_t
        if t < t_last:
            return STATUS_TIME_ORDER, -1
        if measuring:
            dt = t - t_last
            for c in range(k):
                occupied = qb[c] == 1 if mode == MODE_LCFS else qa[c] > 0
                if occupied:
                    occ_time[c] += dt
        t_last = t

        if is_completion:
            c = serving
            completions[c] += 1
            n = completions[c]
            # the age has a local maximum just before a completion only
            # when the completed release is fresher than everything
            # completed before; under LCFS stale packets complete late
            # without reducing the age and record nothing
            if serving_r > r_max[c]:
                if n > warm_eff:
                    peak_sum[c] += t - r_max[c]
                    peak_count[c] += 1
                r_max[c] = serving_r
            if n == warmup:
                done_warm += 1
                if done_warm == k:
                    measuring = True
                    meas_start = t
            if n == target:
                done_target += 1
                if done_target == k:
                    out_times[0] = t - meas_start
                    out_times[1] = t
                    return STATUS_OK, -1
            serving = -1
            end_time = np.inf
            for c2 in range(k):
                if qa[c2] == 0:
                    continue
                if mode == MODE_BUFFER1:
                    qa[c2] = 0
                    serving_r = buf_r[c2]
                    wait_sum[c2] += t - episode_start[c2]
                elif mode == MODE_FCFS:
                    serving_r = queue_buf[c2, qb[c2]]
                    qb[c2] = (qb[c2] + 1) % cap
                    qa[c2] -= 1
                    wait_sum[c2] += t - serving_r
                else:
                    qa[c2] -= 1
                    serving_r = queue_buf[c2, qa[c2]]
                    qb[c2] = 0
                    wait_sum[c2] += t - serving_r
                serving = c2
                wait_count[c2] += 1
                break
            if serving >= 0:
                if srv_idx[serving] >= srv_off[serving + 1]:
                    return STATUS_EXHAUST_SERVICES, serving
                end_time = t + srv_flat[srv_idx[serving]]
                srv_idx[serving] += 1
        else:
            c = a_c
            arr_idx[c] += 1
            if serving < 0:
                serving = c
                serving_r = t
                wait_count[c] += 1
                if srv_idx[c] >= srv_off[c + 1]:
                    return STATUS_EXHAUST_SERVICES, c
                end_time = t + srv_flat[srv_idx[c]]
                srv_idx[c] += 1
            elif mode == MODE_BUFFER1:
                if qa[c] == 1:
                    drops[c] += 1
                else:
                    qa[c] = 1
                    episode_start[c] = t
                buf_r[c] = t
            elif mode == MODE_FCFS:
                if qa[c] >= cap:
                    return STATUS_DIVERGED, c
                queue_buf[c, (qb[c] + qa[c]) % cap] = t
                qa[c] += 1
            else:
                if qa[c] >= cap:
                    return STATUS_DIVERGED, c
                queue_buf[c, qa[c]] = t
                qa[c] += 1
                qb[c] = 1
