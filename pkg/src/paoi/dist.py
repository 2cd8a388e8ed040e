"""Service-time distributions with closed-form transforms.

Every distribution here exposes the Laplace-Stieltjes transform
E[exp(-s P)] in closed form together with its first two moments and a
sampler, which is exactly what the analytical formulas and the
simulation oracle need.  Only laws with exact transforms are provided;
an empirical variant would force numerical transform inversion and is
deliberately left out.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "ServiceDistribution",
    "Exponential",
    "Deterministic",
    "Uniform",
    "Gamma",
    "MixtureDistribution",
    "lst",
    "mean",
    "second_moment",
    "sample",
]

# Below this value of s * width the direct (1 - exp(-z)) / z expression
# loses digits to cancellation, so a short Taylor expansion is used.
_UNIFORM_TAYLOR_CUTOFF = 1e-8


def _check_positive(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value) or value <= 0.0:
        raise ParameterError(f"{name} must be finite and strictly positive, got {value}")
    return value


def _check_s(s: float) -> float:
    try:
        s = float(s)
    except (TypeError, ValueError):
        raise ParameterError(f"transform argument must be a real number, got {s!r}") from None
    if not math.isfinite(s) or s < 0.0:
        raise ParameterError(f"transform argument must be finite and nonnegative, got {s}")
    return s


class ServiceDistribution(ABC):
    """A nonnegative service-time law with an exact transform.

    Instances are immutable and safe to share between threads.
    """

    @abstractmethod
    def lst(self, s: float) -> float:
        """Return E[exp(-s P)] for s >= 0."""

    @abstractmethod
    def mean(self) -> float:
        """Return E[P]."""

    @abstractmethod
    def second_moment(self) -> float:
        """Return E[P^2]."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw one value (size None) or a float64 array of draws."""


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    """Exponential law with the given rate (mean 1 / rate)."""

    rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "rate", _check_positive("rate", self.rate))

    def lst(self, s: float) -> float:
        s = _check_s(s)
        return self.rate / (self.rate + s)

    def mean(self) -> float:
        return 1.0 / self.rate

    def second_moment(self) -> float:
        return 2.0 / (self.rate * self.rate)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return rng.exponential(1.0 / self.rate)
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class Deterministic(ServiceDistribution):
    """Degenerate law taking a single positive value."""

    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", _check_positive("value", self.value))

    def lst(self, s: float) -> float:
        s = _check_s(s)
        return math.exp(-s * self.value)

    def mean(self) -> float:
        return self.value

    def second_moment(self) -> float:
        return self.value * self.value

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return self.value
        return np.full(size, self.value, dtype=np.float64)


@dataclass(frozen=True)
class Uniform(ServiceDistribution):
    """Uniform law on [lower, upper] with 0 <= lower < upper."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        try:
            lo, hi = float(self.lower), float(self.upper)
        except (TypeError, ValueError):
            raise ParameterError("uniform bounds must be real numbers") from None
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0.0 or lo >= hi:
            raise ParameterError(f"uniform bounds require 0 <= lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def lst(self, s: float) -> float:
        s = _check_s(s)
        z = s * (self.upper - self.lower)
        if z < _UNIFORM_TAYLOR_CUTOFF:
            # (1 - exp(-z)) / z expanded to three terms
            scaled = 1.0 - z / 2.0 + z * z / 6.0
        else:
            scaled = -math.expm1(-z) / z
        return math.exp(-s * self.lower) * scaled

    def mean(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def second_moment(self) -> float:
        a, b = self.lower, self.upper
        return (a * a + a * b + b * b) / 3.0

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return rng.uniform(self.lower, self.upper)
        return rng.uniform(self.lower, self.upper, size)


@dataclass(frozen=True)
class Gamma(ServiceDistribution):
    """Gamma law with shape and rate (mean shape / rate)."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", _check_positive("shape", self.shape))
        object.__setattr__(self, "rate", _check_positive("rate", self.rate))

    def lst(self, s: float) -> float:
        s = _check_s(s)
        return math.exp(self.shape * (math.log(self.rate) - math.log(self.rate + s)))

    def mean(self) -> float:
        return self.shape / self.rate

    def second_moment(self) -> float:
        return self.shape * (self.shape + 1.0) / (self.rate * self.rate)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return rng.gamma(self.shape, 1.0 / self.rate)
        return rng.gamma(self.shape, 1.0 / self.rate, size)


@dataclass(frozen=True)
class MixtureDistribution(ServiceDistribution):
    """Finite mixture of service distributions.

    Components are (weight, distribution) pairs; weights must be
    strictly positive and sum to one.  The transform and the moments
    are the weight-weighted sums of the component values.
    """

    components: tuple[tuple[float, ServiceDistribution], ...]

    def __post_init__(self) -> None:
        comps = tuple((float(w), d) for w, d in self.components)
        if not comps:
            raise ParameterError("mixture requires at least one component")
        for w, d in comps:
            if not math.isfinite(w) or w <= 0.0:
                raise ParameterError(f"mixture weights must be strictly positive, got {w}")
            if not isinstance(d, ServiceDistribution):
                raise ParameterError(f"mixture component {d!r} is not a service distribution")
        total = math.fsum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"mixture weights must sum to 1 within 1e-12, got {total!r}")
        object.__setattr__(self, "components", comps)

    def lst(self, s: float) -> float:
        s = _check_s(s)
        return math.fsum(w * d.lst(s) for w, d in self.components)

    def mean(self) -> float:
        return math.fsum(w * d.mean() for w, d in self.components)

    def second_moment(self) -> float:
        return math.fsum(w * d.second_moment() for w, d in self.components)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        weights = np.array([w for w, _ in self.components])
        weights = weights / weights.sum()
        if size is None:
            idx = rng.choice(len(self.components), p=weights)
            return self.components[idx][1].sample(rng)
        idx = rng.choice(len(self.components), size=size, p=weights)
        out = np.empty(size, dtype=np.float64)
        for j, (_, d) in enumerate(self.components):
            mask = idx == j
            n = int(mask.sum())
            if n:
                out[mask] = d.sample(rng, n)
        return out


def lst(d: ServiceDistribution, s: float) -> float:
    """Evaluate the Laplace-Stieltjes transform of d at s >= 0."""
    return d.lst(s)


def mean(d: ServiceDistribution) -> float:
    """Expected service time of d."""
    return d.mean()


def second_moment(d: ServiceDistribution) -> float:
    """Second moment E[P^2] of d."""
    return d.second_moment()


def sample(d: ServiceDistribution, rng: np.random.Generator, size: int | None = None):
    """Draw from d using the supplied generator.

    Each generator must be owned by a single simulation replication;
    the draws are deterministic given the generator state.
    """
    return d.sample(rng, size)
