"""Infinite-buffer analysis: exact FCFS peak age and LCFS bounds.

FCFS peak age decomposes into the classic non-preemptive priority
waiting time plus the interarrival and service means, so it is exact
for any service laws.  For LCFS the freshest waiting packet of a class
can be viewed as sitting in a virtual one-slot initial buffer; the
occupancy probability of that buffer feeds the same convexity bound on
the gap term as in the one-slot-buffer system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

from .dist import MixtureDistribution, ServiceDistribution
from .errors import (
    DivergenceError,
    InternalConsistencyError,
    NumericalError,
    StabilityError,
    ValidationError,
)
from .exact_mm import PAoIComponents, SystemSpec

__all__ = [
    "MergedClassView",
    "BusyPeriodStats",
    "ensure_stable",
    "fcfs_paoi",
    "fcfs_average_paoi",
    "fcfs_average_for_order",
    "optimal_priority_order",
    "merged_class_view",
    "busy_period_stats",
    "lcfs_initial_buffer_probs",
    "lcfs_paoi_upper_bound",
]


def ensure_stable(spec: SystemSpec) -> None:
    """Raise unless every utilization prefix sum stays below one."""
    acc = 0.0
    for i in range(1, spec.k + 1):
        acc += spec.rho(i)
        if acc >= 1.0:
            raise StabilityError(
                f"utilization of classes 1..{i} is {acc:.6g} >= 1; "
                "the infinite-buffer system is unstable"
            )


def _ensure_lcfs_feasible(spec: SystemSpec) -> None:
    """Stability check for the occupancy formulas, boundary allowed.

    The occupancy expressions stay finite at total utilization exactly
    one (they evaluate to the heavy-traffic limit there), so only a
    strictly overloaded system is rejected; the merged higher-priority
    block of each pivot must still be strictly stable because its busy
    period mean carries a 1/(1 - rho_a) factor.
    """
    total = math.fsum(spec.rho(j) for j in range(1, spec.k + 1))
    if total > 1.0:
        raise StabilityError(
            f"total utilization is {total:.6g} > 1; the infinite-buffer system is overloaded"
        )
    acc = 0.0
    for i in range(1, spec.k):
        acc += spec.rho(i)
        if acc >= 1.0:
            raise StabilityError(
                f"utilization of classes 1..{i} is {acc:.6g} >= 1; "
                "busy periods of the merged high-priority block diverge"
            )


def fcfs_paoi(spec: SystemSpec) -> tuple[PAoIComponents, ...]:
    """Exact per-class peak age under FCFS within each class.

    The peak equals sojourn time plus interarrival time, so there is
    no gap term; the wait term is the stationary non-preemptive
    priority queueing delay.
    """
    ensure_stable(spec)
    half_load = 0.5 * math.fsum(
        spec.arrival_rate(j) * spec.service(j).second_moment() for j in range(1, spec.k + 1)
    )
    out = []
    before = 0.0
    for i in range(1, spec.k + 1):
        upto = before + spec.rho(i)
        wait = half_load / ((1.0 - upto) * (1.0 - before))
        out.append(
            PAoIComponents(
                service=spec.service(i).mean(),
                buffer_busy=wait,
                interarrival=1.0 / spec.arrival_rate(i),
                gap=0.0,
            )
        )
        before = upto
    return tuple(out)


def fcfs_average_paoi(spec: SystemSpec) -> float:
    """Mean of the per-class FCFS peak ages."""
    comps = fcfs_paoi(spec)
    return math.fsum(c.total for c in comps) / len(comps)


def fcfs_average_for_order(spec: SystemSpec, order: tuple[int, ...]) -> float:
    """Average FCFS peak age after re-prioritizing classes in the given order.

    The order lists original 1-based class indices from highest to
    lowest new priority.
    """
    if sorted(order) != list(range(1, spec.k + 1)):
        raise ValidationError(f"order must be a permutation of 1..{spec.k}, got {order}")
    reordered = SystemSpec(tuple(spec.classes[i - 1] for i in order))
    return fcfs_average_paoi(reordered)


def optimal_priority_order(spec: SystemSpec) -> tuple[int, ...]:
    """Priority order minimizing the average FCFS peak age.

    Sorting classes by ascending utilization is optimal; ties keep the
    original relative order.
    """
    ensure_stable(spec)
    return tuple(sorted(range(1, spec.k + 1), key=lambda i: spec.rho(i)))


def brute_force_priority_order(spec: SystemSpec) -> tuple[int, ...]:
    """Exhaustive argmin over all priority permutations (small k only)."""
    ensure_stable(spec)
    best = None
    best_value = math.inf
    for order in permutations(range(1, spec.k + 1)):
        value = fcfs_average_for_order(spec, order)
        if value < best_value - 0.0:
            best, best_value = order, value
    return best


@dataclass(frozen=True)
class MergedClassView:
    """Two-class collapse around a pivot class for LCFS analysis.

    Class a merges everything of strictly higher priority than the
    pivot, class b the pivot and everything below; service laws are
    arrival-rate-weighted mixtures.
    """

    pivot: int
    lam_a: float
    lam_b: float
    rho_a: float
    rho_b: float
    service_a: ServiceDistribution
    service_b: ServiceDistribution
    mean_service_a: float
    mean_service_b: float


def merged_class_view(spec: SystemSpec, i: int) -> MergedClassView:
    spec._check_class_index(i)
    if i < 2:
        raise ValidationError("the merged view needs at least one higher-priority class")
    lam_a = math.fsum(spec.arrival_rate(j) for j in range(1, i))
    lam_b = math.fsum(spec.arrival_rate(j) for j in range(i, spec.k + 1))
    rho_a = math.fsum(spec.rho(j) for j in range(1, i))
    rho_b = math.fsum(spec.rho(j) for j in range(i, spec.k + 1))
    service_a = MixtureDistribution(
        tuple((spec.arrival_rate(j) / lam_a, spec.service(j)) for j in range(1, i))
    )
    service_b = MixtureDistribution(
        tuple((spec.arrival_rate(j) / lam_b, spec.service(j)) for j in range(i, spec.k + 1))
    )
    return MergedClassView(
        pivot=i,
        lam_a=lam_a,
        lam_b=lam_b,
        rho_a=rho_a,
        rho_b=rho_b,
        service_a=service_a,
        service_b=service_b,
        mean_service_a=service_a.mean(),
        mean_service_b=service_b.mean(),
    )


@dataclass(frozen=True)
class BusyPeriodStats:
    """Server busy-period split around a pivot class.

    A busy period belongs to type a when it starts with a packet of
    priority above the pivot and to type b otherwise; both end when no
    above-pivot work remains.  The time fractions spent in the two
    types add up to the total utilization.
    """

    mean_Va: float
    mean_Vb: float
    rate_hat_a: float
    frac_in_Va: float
    frac_in_Vb: float


def busy_period_stats(spec: SystemSpec, i: int) -> BusyPeriodStats:
    _ensure_lcfs_feasible(spec)
    view = merged_class_view(spec, i)
    total_rho = spec.total_rho()
    mean_va = view.mean_service_a / (1.0 - view.rho_a)
    mean_vb = view.mean_service_b / (1.0 - view.rho_a)
    frac_vb = view.lam_b * mean_vb
    frac_va = total_rho - frac_vb
    if frac_va < -1e-12:
        raise InternalConsistencyError(
            f"type-a busy fraction computed negative ({frac_va}) for class {i}"
        )
    frac_va = max(frac_va, 0.0)
    return BusyPeriodStats(
        mean_Va=mean_va,
        mean_Vb=mean_vb,
        rate_hat_a=frac_va / mean_va,
        frac_in_Va=frac_va,
        frac_in_Vb=frac_vb,
    )


def _initial_buffer_busy_mean(service: ServiceDistribution, lam: float) -> float:
    """Mean occupied spell of a one-slot buffer during one service.

    Integrates (u - 1/lam + exp(-lam u)/lam) over the service law; this
    is the expected time from the first arrival in a service of length
    u until the service ends, zero when no arrival lands.
    """
    return service.mean() - 1.0 / lam + service.lst(lam) / lam


def _busy_period_lst(service: ServiceDistribution, lam: float, s: float) -> float:
    """Transform value of a busy period fed by rate-lam arrivals.

    Solves eta = psi(s + lam (1 - eta)) by fixed-point iteration; the
    map contracts with modulus below lam * E[P] < 1, so the iteration
    converges for any strictly stable arrival block.
    """
    eta = service.lst(s + lam)
    for _ in range(500_000):
        nxt = service.lst(s + lam * (1.0 - eta))
        if abs(nxt - eta) <= 1e-15:
            return nxt
        eta = nxt
    raise NumericalError(
        f"busy-period transform iteration did not converge (lam={lam}, s={s})"
    )


def lcfs_initial_buffer_probs(spec: SystemSpec) -> tuple[float, ...]:
    """Occupancy probability of each class's virtual initial buffer.

    For the top class the buffer drains at every service completion, so
    each service hosts at most one spell and the service law drives the
    spell mean.  A lower class is only reached when no higher-priority
    work remains, which happens exactly at busy-period boundaries of
    the merged classes; its spells therefore run from the first arrival
    inside a busy period to that period's end, and the two busy-period
    types are weighted by their occurrence rates.  Total utilization
    exactly one is accepted and yields the heavy-traffic limit values.
    """
    _ensure_lcfs_feasible(spec)
    lam1 = spec.arrival_rate(1)
    p1 = math.fsum(
        spec.arrival_rate(j) * _initial_buffer_busy_mean(spec.service(j), lam1)
        for j in range(1, spec.k + 1)
    )
    probs = [p1]
    for i in range(2, spec.k + 1):
        view = merged_class_view(spec, i)
        stats = busy_period_stats(spec, i)
        lam = spec.arrival_rate(i)
        va_lst = _busy_period_lst(view.service_a, view.lam_a, lam)
        vb_lst = view.service_b.lst(lam + view.lam_a * (1.0 - va_lst))
        w_a = stats.mean_Va - 1.0 / lam + va_lst / lam
        w_b = stats.mean_Vb - 1.0 / lam + vb_lst / lam
        probs.append(stats.rate_hat_a * w_a + view.lam_b * w_b)
    for n, p in enumerate(probs, start=1):
        if p < -1e-12 or p > 1.0 + 1e-12:
            raise InternalConsistencyError(
                f"initial-buffer probability of class {n} computed as {p}, outside [0, 1]"
            )
        probs[n - 1] = min(max(p, 0.0), 1.0)
    return tuple(probs)


def lcfs_paoi_upper_bound(spec: SystemSpec) -> tuple[PAoIComponents, ...]:
    """Peak-age upper bound per class under LCFS within each class.

    Same convexity step as the one-slot-buffer bound, with the
    initial-buffer occupancy probability in place of the rejection
    probability.  An upper bound and an approximation, never exact.
    """
    probs = lcfs_initial_buffer_probs(spec)
    out = []
    for i in range(1, spec.k + 1):
        p = probs[i - 1]
        if 1.0 - p <= 1e-12:
            raise DivergenceError(f"bound diverges for class {i} as p -> 1 (p={p})")
        lam = spec.arrival_rate(i)
        ratio = p / (1.0 - p)
        out.append(
            PAoIComponents(
                service=spec.service(i).mean(),
                buffer_busy=ratio / lam,
                interarrival=1.0 / lam,
                gap=(1.0 - math.exp(-ratio)) / lam,
            )
        )
    return tuple(out)
