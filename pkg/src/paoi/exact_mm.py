"""Exact peak-age analysis for exponential service and one-slot buffers.

The system has k Poisson sources, a single non-preemptive server that
always picks the highest-priority occupied buffer, and one buffer slot
per class in which a newer packet replaces the waiting one.  With
exponential service the pair (serving class, buffer occupancies) is a
finite continuous-time Markov chain; its stationary law yields the
buffer-full probabilities and, through busy-period transforms, the
exact per-class peak age of information.

Class indices are 1-based with class 1 the highest priority.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dist import Exponential, ServiceDistribution
from .errors import (
    DivergenceError,
    NumericalError,
    ParameterError,
    UnsupportedModelError,
    ValidationError,
)

__all__ = [
    "ClassSpec",
    "SystemSpec",
    "BufferState",
    "StationaryDistribution",
    "PAoIComponents",
    "enumerate_states",
    "build_rate_matrix",
    "stationary",
    "buffer_full_prob",
    "expected_buffer_busy",
    "replacement_busy_lst",
    "w_lst",
    "paoi_exact",
]

# Beyond this many classes the dense stationary solve stops being practical.
MAX_CLASSES = 12

_DEGENERATE_PROB = 1e-12


@dataclass(frozen=True)
class ClassSpec:
    """One source: Poisson arrival rate and a service-time law."""

    arrival_rate: float
    service: ServiceDistribution

    def __post_init__(self) -> None:
        try:
            rate = float(self.arrival_rate)
        except (TypeError, ValueError):
            raise ParameterError(
                f"arrival_rate must be a real number, got {self.arrival_rate!r}"
            ) from None
        if not math.isfinite(rate) or rate <= 0.0:
            raise ParameterError(f"arrival_rate must be finite and positive, got {rate}")
        if not isinstance(self.service, ServiceDistribution):
            raise ParameterError(f"service must be a ServiceDistribution, got {self.service!r}")
        object.__setattr__(self, "arrival_rate", rate)


@dataclass(frozen=True)
class SystemSpec:
    """Ordered class list; position 1 is the highest priority."""

    classes: tuple[ClassSpec, ...]

    def __post_init__(self) -> None:
        classes = tuple(self.classes)
        if not classes:
            raise ParameterError("a system needs at least one class")
        for c in classes:
            if not isinstance(c, ClassSpec):
                raise ParameterError(f"expected ClassSpec instances, got {c!r}")
        object.__setattr__(self, "classes", classes)

    @property
    def k(self) -> int:
        return len(self.classes)

    def arrival_rate(self, i: int) -> float:
        """Arrival rate of class i (1-based)."""
        self._check_class_index(i)
        return self.classes[i - 1].arrival_rate

    def service(self, i: int) -> ServiceDistribution:
        self._check_class_index(i)
        return self.classes[i - 1].service

    def rho(self, i: int) -> float:
        """Traffic intensity of class i."""
        self._check_class_index(i)
        c = self.classes[i - 1]
        return c.arrival_rate * c.service.mean()

    def total_rho(self) -> float:
        return math.fsum(self.rho(i) for i in range(1, self.k + 1))

    def all_exponential(self) -> bool:
        return all(isinstance(c.service, Exponential) for c in self.classes)

    def _check_class_index(self, i: int) -> None:
        if not isinstance(i, int) or not 1 <= i <= self.k:
            raise ValidationError(f"class index must be in 1..{self.k}, got {i!r}")


class BufferState(NamedTuple):
    """Serving class (0 means idle) plus one occupancy bit per class."""

    serving: int
    occupied: tuple[int, ...]


@dataclass
class StationaryDistribution:
    """Probability vector over an explicitly enumerated state list."""

    states: tuple[BufferState, ...]
    probs: np.ndarray
    _index: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._index = {s: n for n, s in enumerate(self.states)}

    def prob(self, serving: int, occupied: tuple[int, ...]) -> float:
        return float(self.probs[self._index[BufferState(serving, tuple(occupied))]])


@dataclass(frozen=True)
class PAoIComponents:
    """Per-class peak-age breakdown: service, buffer wait, gap terms.

    The total is the sum of the four parts by construction.
    """

    service: float
    buffer_busy: float
    interarrival: float
    gap: float

    @property
    def total(self) -> float:
        return math.fsum((self.service, self.buffer_busy, self.interarrival, self.gap))


def enumerate_states(k: int) -> tuple[BufferState, ...]:
    """All reachable states: the idle state plus k * 2**k busy states.

    Order is fixed (idle first, then lexicographic in serving class and
    occupancy bits) so downstream output files are stable.
    """
    if not isinstance(k, int) or k < 1:
        raise ValidationError(f"class count must be a positive integer, got {k!r}")
    if k > MAX_CLASSES:
        raise UnsupportedModelError(
            f"k={k} gives {k * 2 ** k + 1} states, beyond the dense-solve limit of k={MAX_CLASSES}"
        )
    states = [BufferState(0, (0,) * k)]
    for j in range(1, k + 1):
        for m in range(2 ** k):
            bits = tuple((m >> (k - 1 - b)) & 1 for b in range(k))
            states.append(BufferState(j, bits))
    return tuple(states)


def _service_rates(spec: SystemSpec) -> list[float]:
    rates = []
    for n, c in enumerate(spec.classes, start=1):
        if not isinstance(c.service, Exponential):
            raise UnsupportedModelError(
                f"class {n} service is {type(c.service).__name__}; "
                "the Markov-chain analysis needs exponential service "
                "(use the bound or simulation routes otherwise)"
            )
        rates.append(c.service.rate)
    return rates


def build_rate_matrix(spec: SystemSpec) -> np.ndarray:
    """Generator matrix of the (serving, occupancies) chain.

    Arrivals to an occupied buffer replace the waiting packet and do
    not change the state; completions hand the server to the highest
    priority occupied class.  Rows sum to zero exactly.
    """
    mu = _service_rates(spec)
    lam = [c.arrival_rate for c in spec.classes]
    k = spec.k
    states = enumerate_states(k)
    index = {s: n for n, s in enumerate(states)}
    q = np.zeros((len(states), len(states)))

    for row, (j, bits) in enumerate(states):
        if j == 0:
            for i in range(1, k + 1):
                q[row, index[BufferState(i, bits)]] += lam[i - 1]
        else:
            for i in range(1, k + 1):
                if bits[i - 1] == 0:
                    filled = bits[: i - 1] + (1,) + bits[i:]
                    q[row, index[BufferState(j, filled)]] += lam[i - 1]
            if any(bits):
                h = bits.index(1) + 1
                cleared = bits[: h - 1] + (0,) + bits[h:]
                target = BufferState(h, cleared)
            else:
                target = BufferState(0, bits)
            q[row, index[target]] += mu[j - 1]
        q[row, row] = -math.fsum(q[row, :row]) - math.fsum(q[row, row + 1 :])
    return q


def _class_count_from_states(n: int) -> int:
    for k in range(1, MAX_CLASSES + 1):
        if k * 2 ** k + 1 == n:
            return k
    raise ValidationError(f"{n} states does not match any class count up to {MAX_CLASSES}")


def stationary(q: np.ndarray) -> StationaryDistribution:
    """Solve pi Q = 0 with pi summing to one, by a dense direct solve.

    One balance equation is replaced by the normalization row; the
    residual of the full system is checked afterwards.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValidationError(f"rate matrix must be square, got shape {q.shape}")
    n = q.shape[0]
    k = _class_count_from_states(n)

    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"stationary solve failed (condition number {np.linalg.cond(a):.3e}): {exc}"
        ) from exc

    residual = float(np.max(np.abs(pi @ q)))
    if residual > 1e-9:
        raise NumericalError(
            f"stationary residual {residual:.3e} exceeds 1e-9 "
            f"(condition number {np.linalg.cond(a):.3e})"
        )
    if float(pi.min()) < -1e-12 or abs(float(pi.sum()) - 1.0) > 1e-10:
        raise NumericalError("stationary solve produced an invalid probability vector")
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    return StationaryDistribution(enumerate_states(k), pi)


def buffer_full_prob(spec: SystemSpec, pi: StationaryDistribution, i: int) -> float:
    """Stationary probability that buffer i holds a packet."""
    spec._check_class_index(i)
    mask = np.fromiter(
        (s.occupied[i - 1] == 1 for s in pi.states), dtype=bool, count=len(pi.states)
    )
    return float(pi.probs[mask].sum())


def expected_buffer_busy(spec: SystemSpec, p_i: float, i: int) -> float:
    """Mean buffer-busy period length, p / (lambda (1 - p)).

    This also equals the mean buffer time per accepted packet, counting
    a zero for packets that go straight into service.
    """
    spec._check_class_index(i)
    if not 0.0 <= p_i <= 1.0:
        raise ValidationError(f"p must be a probability, got {p_i}")
    if 1.0 - p_i <= _DEGENERATE_PROB:
        raise DivergenceError(f"buffer-busy mean diverges as p -> 1 (p={p_i})")
    lam = spec.arrival_rate(i)
    return p_i / (lam * (1.0 - p_i))


def replacement_busy_lst(lam: float, service: ServiceDistribution, s: float) -> float:
    """Transform of the busy period of one class with a one-slot buffer.

    The period starts with a service; it continues with another service
    whenever at least one arrival (rate lam) lands during the current
    one, because the buffer then holds a packet again.  Replacements do
    not change the occupancy, so the recursion closes in terms of the
    service transform psi alone:

        eta(s) = psi(s + lam) / (1 - psi(s) + psi(s + lam)).
    """
    if lam <= 0.0:
        raise ParameterError(f"arrival rate must be positive, got {lam}")
    psi_s = service.lst(s)
    psi_sl = service.lst(s + lam)
    return psi_sl / (1.0 - psi_s + psi_sl)


def _pair_busy_lsts(lam: float, service: ServiceDistribution, s: float) -> tuple[float, float]:
    """Transforms of the joint busy period of two symmetric top classes.

    Both classes share arrival rate lam and the same service law.  The
    returned pair is (H0, H1): the transform of the remaining period
    when a service starts with the other top buffer empty, and with it
    full.  H1 relates to H0 exactly as in the single-class recursion.
    """
    psi_s = service.lst(s)
    psi_1 = service.lst(s + lam)
    psi_2 = service.lst(s + 2.0 * lam)
    eta = psi_1 / (1.0 - psi_s + psi_1)
    h0 = psi_2 / (1.0 - 2.0 * (psi_1 - psi_2) - eta * (psi_s - 2.0 * psi_1 + psi_2))
    return h0, h0 * eta


def _require_top_two_symmetric(spec: SystemSpec) -> None:
    lam1, lam2 = spec.arrival_rate(1), spec.arrival_rate(2)
    mu1, mu2 = spec.classes[0].service, spec.classes[1].service
    same_rates = math.isclose(lam1, lam2, rel_tol=1e-12, abs_tol=0.0)
    same_service = isinstance(mu1, Exponential) and isinstance(mu2, Exponential) and math.isclose(
        mu1.rate, mu2.rate, rel_tol=1e-12, abs_tol=0.0
    )
    if not (same_rates and same_service):
        raise UnsupportedModelError(
            "class 3 analysis requires classes 1 and 2 to share one arrival "
            "rate and one exponential service rate"
        )


def w_lst(spec: SystemSpec, pi: StationaryDistribution, i: int, s: float) -> float:
    """Transform E[exp(-s W_i)] of the class-i buffer-busy period.

    Conditioned on buffer i being empty, the packet that opens the busy
    period sees the stationary chain (Poisson arrivals see time
    averages); the period is the remaining service plus the busy period
    of all strictly higher-priority classes.  Implemented for classes
    1 to 3; class 3 needs the top two classes symmetric.
    """
    spec._check_class_index(i)
    if s < 0.0 or not math.isfinite(s):
        raise ValidationError(f"transform argument must be finite and nonnegative, got {s}")
    mu = _service_rates(spec)
    if i > 3:
        raise UnsupportedModelError(
            f"busy-period transform implemented for classes 1..3 only, got {i} "
            "(buffer-full probabilities remain available for any class)"
        )

    def psi(j: int, x: float) -> float:
        return mu[j - 1] / (mu[j - 1] + x)

    p_i = buffer_full_prob(spec, pi, i)
    denom = 1.0 - p_i
    if denom <= _DEGENERATE_PROB:
        raise DivergenceError(
            f"conditional probabilities degenerate: buffer {i} is full with probability {p_i}"
        )

    lam1 = spec.arrival_rate(1)
    if i == 2:
        eta1 = replacement_busy_lst(lam1, spec.classes[0].service, s)
    if i == 3:
        _require_top_two_symmetric(spec)
        h0, h1 = _pair_busy_lsts(lam1, spec.classes[0].service, s)

    acc = 0.0
    for state, prob in zip(pi.states, pi.probs):
        j, bits = state.serving, state.occupied
        if bits[i - 1] == 1 or prob == 0.0:
            continue
        if j == 0:
            acc += prob
            continue
        if i == 1:
            acc += prob * psi(j, s)
        elif i == 2:
            if bits[0] == 1:
                acc += prob * psi(j, s) * eta1
            else:
                acc += prob * (psi(j, s + lam1) + (psi(j, s) - psi(j, s + lam1)) * eta1)
        else:
            top = bits[0] + bits[1]
            if top == 2:
                acc += prob * psi(j, s) * h1
            elif top == 1:
                acc += prob * (psi(j, s + lam1) * h0 + (psi(j, s) - psi(j, s + lam1)) * h1)
            else:
                acc += prob * (
                    psi(j, s + 2.0 * lam1)
                    + 2.0 * (psi(j, s + lam1) - psi(j, s + 2.0 * lam1)) * h0
                    + (psi(j, s) - 2.0 * psi(j, s + lam1) + psi(j, s + 2.0 * lam1)) * h1
                )
    return acc / denom


def paoi_exact(spec: SystemSpec, i: int) -> PAoIComponents:
    """Exact peak-age breakdown for class i under exponential service.

    The gap term comes from the buffer-busy transform evaluated at the
    class arrival rate: E[G] = (1 - E[exp(-lam W)]) / lam.
    """
    spec._check_class_index(i)
    mu = _service_rates(spec)
    pi = stationary(build_rate_matrix(spec))
    lam = spec.arrival_rate(i)
    p_i = buffer_full_prob(spec, pi, i)
    wait = expected_buffer_busy(spec, p_i, i)
    gap = (1.0 - w_lst(spec, pi, i, lam)) / lam
    return PAoIComponents(
        service=1.0 / mu[i - 1],
        buffer_busy=wait,
        interarrival=1.0 / lam,
        gap=gap,
    )
