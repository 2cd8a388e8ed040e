"""Peak-age upper bounds for one-slot buffers with general service.

With a common service law across classes, the buffer occupancies seen
at departure epochs form a finite embedded Markov chain.  Solving the
chains of the priority subsystems (classes 1..l standing alone) gives
the per-class rejection probabilities, which bound the peak age via a
convexity (Jensen) step on the gap term.  The bound values double as
good approximations when the service-time variance is small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import ServiceDistribution
from .errors import (
    DivergenceError,
    NumericalError,
    UnsupportedModelError,
    ValidationError,
)
from .exact_mm import MAX_CLASSES, PAoIComponents, SystemSpec

__all__ = [
    "DepartureChain",
    "RejectionProfile",
    "build_departure_chain",
    "zero_state_prob",
    "rejection_probs",
    "paoi_upper_bound",
    "limit_diagnostics",
    "LimitReport",
]


@dataclass(frozen=True)
class DepartureChain:
    """Embedded chain over the occupancy vectors of a priority subsystem."""

    subsystem_size: int
    states: tuple[tuple[int, ...], ...]
    transition: np.ndarray


@dataclass(frozen=True)
class RejectionProfile:
    """Per-class probability that an arrival finds its buffer occupied."""

    p: tuple[float, ...]

    def __post_init__(self) -> None:
        for n, value in enumerate(self.p, start=1):
            if not 0.0 <= value < 1.0:
                raise ValidationError(f"rejection probability of class {n} is {value}, not in [0, 1)")


def _common_service(spec: SystemSpec) -> ServiceDistribution:
    first = spec.classes[0].service
    for n, c in enumerate(spec.classes[1:], start=2):
        if c.service != first:
            raise UnsupportedModelError(
                f"class {n} service differs from class 1; the departure-chain "
                "analysis needs one service law shared by all classes"
            )
    return first


def build_departure_chain(spec: SystemSpec, l: int) -> DepartureChain:
    """Occupancy chain at departures of the subsystem with classes 1..l.

    From a departure state the served class is the highest-priority
    occupied one (for the empty state, the next arrival; the occupancy
    law is the same either way).  Buffers occupied besides the served
    one stay occupied, and every other buffer fills exactly when at
    least one arrival of its class lands during the service.  The joint
    filling probabilities expand by inclusion-exclusion into transform
    evaluations at sums of arrival rates.
    """
    if spec.k > MAX_CLASSES:
        raise UnsupportedModelError(f"class count {spec.k} exceeds the supported {MAX_CLASSES}")
    if not isinstance(l, int) or not 1 <= l <= spec.k:
        raise ValidationError(f"subsystem size must be in 1..{spec.k}, got {l!r}")
    service = _common_service(spec)
    lam = [spec.arrival_rate(i) for i in range(1, l + 1)]

    size = 2 ** l
    full = size - 1
    # bit l-1 of a mask is class 1 so that plain mask order matches the
    # lexicographic order of (b1, ..., bl) tuples
    rate_sum = [0.0] * size
    for mask in range(1, size):
        low = mask & -mask
        rate_sum[mask] = rate_sum[mask ^ low] + lam[l - low.bit_length()]
    psi = [service.lst(rate_sum[mask]) for mask in range(size)]

    def row_for_kept(kept: int) -> np.ndarray:
        fillable = full & ~kept
        row = np.zeros(size)
        new = fillable
        while True:
            rest = fillable & ~new
            total = 0.0
            m = new
            while True:
                total += (-1) ** bin(m).count("1") * psi[m | rest]
                if m == 0:
                    break
                m = (m - 1) & new
            row[kept | new] = total
            if new == 0:
                break
            new = (new - 1) & fillable
        return row

    rows_by_kept: dict[int, np.ndarray] = {}
    transition = np.zeros((size, size))
    for mask in range(size):
        if mask == 0:
            kept = 0
        else:
            served_bit = 1 << (l - _first_class(mask, l))
            kept = mask & ~served_bit
        if kept not in rows_by_kept:
            rows_by_kept[kept] = row_for_kept(kept)
        transition[mask] = rows_by_kept[kept]

    transition = np.clip(transition, 0.0, None)
    sums = transition.sum(axis=1)
    if float(np.max(np.abs(sums - 1.0))) > 1e-12:
        raise NumericalError("departure-chain rows failed to sum to 1 within 1e-12")
    transition /= sums[:, None]

    states = tuple(tuple((mask >> (l - 1 - b)) & 1 for b in range(l)) for mask in range(size))
    return DepartureChain(l, states, transition)


def _first_class(mask: int, l: int) -> int:
    """Highest-priority (lowest-index, 1-based) class present in mask."""
    for b in range(l):
        if mask & (1 << (l - 1 - b)):
            return b + 1
    raise ValidationError("empty mask has no occupied class")


def zero_state_prob(chain: DepartureChain) -> float:
    """All-buffers-empty probability of the chain's stationary vector."""
    p = chain.transition
    n = p.shape[0]
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"departure-chain solve failed: {exc}") from exc
    residual = float(np.max(np.abs(pi @ p - pi)))
    if residual > 1e-10:
        raise NumericalError(f"departure-chain residual {residual:.3e} exceeds 1e-10")
    if float(pi.min()) < -1e-12:
        raise NumericalError("departure-chain stationary vector has negative mass")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return float(pi[0])


def rejection_probs(spec: SystemSpec) -> RejectionProfile:
    """Per-class buffer-full probabilities from the subsystem chains.

    Uses the departure-epoch relation

        p_i = 1 - (z_{i-1} - z_i) / (lam_i / mu + lam_i / Lam * z_k)
                - z_k / (Lam / mu + z_k)

    where z_l is the all-empty probability of the l-class subsystem,
    z_0 = 1, mu is the common service rate and Lam the total arrival
    rate.  For exponential service this agrees with the Markov-chain
    route to machine precision.
    """
    service = _common_service(spec)
    mu = 1.0 / service.mean()
    total = math.fsum(spec.arrival_rate(i) for i in range(1, spec.k + 1))
    zeros = [1.0]
    for l in range(1, spec.k + 1):
        zeros.append(zero_state_prob(build_departure_chain(spec, l)))
    z_k = zeros[spec.k]

    values = []
    shared = z_k / (total / mu + z_k)
    for i in range(1, spec.k + 1):
        lam = spec.arrival_rate(i)
        p = 1.0 - (zeros[i - 1] - zeros[i]) / (lam / mu + lam / total * z_k) - shared
        if p < 0.0:
            if p < -1e-12:
                raise NumericalError(f"rejection probability of class {i} computed as {p}")
            p = 0.0
        if p >= 1.0:
            raise DivergenceError(f"rejection probability of class {i} reached {p}")
        values.append(p)
    return RejectionProfile(tuple(values))


def paoi_upper_bound(spec: SystemSpec, profile: RejectionProfile) -> tuple[PAoIComponents, ...]:
    """Peak-age upper bound per class from the rejection probabilities.

    The service, wait and idle terms are exact given p; only the gap
    term is bounded, replacing E[exp(-lam W)] by exp(-lam E[W]).  The
    result is therefore an upper bound that also serves as an
    approximation, never an exact value.
    """
    if len(profile.p) != spec.k:
        raise ValidationError(
            f"profile has {len(profile.p)} classes but the system has {spec.k}"
        )
    out = []
    for i in range(1, spec.k + 1):
        p = profile.p[i - 1]
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


@dataclass(frozen=True)
class LimitReport:
    """Bound behavior while one class's arrival rate is scaled up.

    For classes up to and including the scaled one the bounds stay
    bounded (their sup over the grid is reported); for lower-priority
    classes the bounds should diverge, so strict growth along the grid
    is reported instead.
    """

    scaled_class: int
    exponents: tuple[float, ...]
    bounds: tuple[tuple[float, ...], ...]
    bounded_sup: dict[int, float]
    strictly_increasing: dict[int, bool]


def limit_diagnostics(spec: SystemSpec, i: int, exponents: tuple[float, ...]) -> LimitReport:
    """Evaluate the bounds with class i's rate scaled by 10**t per grid point."""
    spec._check_class_index(i)
    exponents = tuple(float(t) for t in exponents)
    if not exponents:
        raise ValidationError("exponent grid must be nonempty")

    from .exact_mm import ClassSpec

    rows = []
    for t in exponents:
        classes = list(spec.classes)
        base = classes[i - 1]
        classes[i - 1] = ClassSpec(base.arrival_rate * 10.0 ** t, base.service)
        scaled = SystemSpec(tuple(classes))
        comps = paoi_upper_bound(scaled, rejection_probs(scaled))
        rows.append(tuple(c.total for c in comps))

    grid = tuple(rows)
    bounded = {j: max(row[j - 1] for row in grid) for j in range(1, i + 1)}
    increasing = {
        j: all(grid[t + 1][j - 1] > grid[t][j - 1] for t in range(len(grid) - 1))
        for j in range(i + 1, spec.k + 1)
    }
    return LimitReport(i, exponents, grid, bounded, increasing)
