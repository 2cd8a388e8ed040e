"""Service-law transforms, moments and samplers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paoi import (
    Deterministic,
    Exponential,
    Gamma,
    MixtureDistribution,
    ParameterError,
    Uniform,
)

positive = st.floats(min_value=1e-3, max_value=1e3)
s_values = st.floats(min_value=0.0, max_value=50.0)


@st.composite
def distributions(draw):
    kind = draw(st.integers(0, 4))
    if kind == 0:
        return Exponential(draw(positive))
    if kind == 1:
        return Deterministic(draw(positive))
    if kind == 2:
        lo = draw(st.floats(min_value=0.0, max_value=10.0))
        return Uniform(lo, lo + draw(positive))
    if kind == 3:
        return Gamma(draw(st.floats(min_value=0.1, max_value=50.0)), draw(positive))
    parts = draw(st.lists(st.integers(0, 3), min_size=1, max_size=3))
    weights = np.full(len(parts), 1.0 / len(parts))
    comps = []
    for w, inner in zip(weights, parts):
        if inner == 0:
            comps.append((w, Exponential(draw(positive))))
        elif inner == 1:
            comps.append((w, Deterministic(draw(positive))))
        elif inner == 2:
            lo = draw(st.floats(min_value=0.0, max_value=10.0))
            comps.append((w, Uniform(lo, lo + draw(positive))))
        else:
            comps.append((w, Gamma(draw(st.floats(min_value=0.1, max_value=50.0)),
                                   draw(positive))))
    return MixtureDistribution(tuple(comps))


@given(distributions(), s_values)
@settings(max_examples=200)
def test_lst_is_a_probability_weight(d, s):
    # a deterministic transform may underflow to 0.0 for large s
    value = d.lst(s)
    assert 0.0 <= value <= 1.0
    assert d.lst(0.0) == pytest.approx(1.0)


@given(distributions(), s_values, s_values)
@settings(max_examples=200)
def test_lst_is_nonincreasing(d, s1, s2):
    lo, hi = sorted((s1, s2))
    assert d.lst(hi) <= d.lst(lo) + 1e-12


@given(distributions())
@settings(max_examples=200)
def test_moments_satisfy_jensen(d):
    assert d.mean() > 0.0
    assert d.second_moment() >= d.mean() ** 2 - 1e-9 * d.mean() ** 2


@given(distributions())
@settings(max_examples=100)
def test_lst_slope_at_zero_is_minus_mean(d):
    h = 1e-6 / max(d.mean(), 1.0)
    slope = (d.lst(h) - 1.0) / h
    assert slope == pytest.approx(-d.mean(), rel=1e-3)


def test_known_transform_values():
    assert Exponential(2.0).lst(2.0) == pytest.approx(0.5)
    assert Deterministic(3.0).lst(1.0) == pytest.approx(math.exp(-3.0))
    assert Uniform(0.0, 2.0).lst(1.0) == pytest.approx((1 - math.exp(-2.0)) / 2.0)
    assert Gamma(2.0, 1.0).lst(1.0) == pytest.approx(0.25)


def test_uniform_transform_is_smooth_through_the_taylor_cutoff():
    d = Uniform(0.0, 20.0)
    below = d.lst(4.9e-10)
    above = d.lst(5.1e-10)
    assert below == pytest.approx(above, rel=1e-9)


def test_known_moments():
    assert Exponential(0.1).mean() == pytest.approx(10.0)
    assert Exponential(0.1).second_moment() == pytest.approx(200.0)
    assert Uniform(0.0, 20.0).mean() == pytest.approx(10.0)
    assert Uniform(0.0, 20.0).second_moment() == pytest.approx(400.0 / 3.0)
    assert Gamma(10.0, 1.0).mean() == pytest.approx(10.0)
    assert Gamma(10.0, 1.0).second_moment() == pytest.approx(110.0)
    mix = MixtureDistribution(((0.25, Deterministic(2.0)), (0.75, Exponential(1.0))))
    assert mix.mean() == pytest.approx(0.25 * 2.0 + 0.75)
    assert mix.second_moment() == pytest.approx(0.25 * 4.0 + 0.75 * 2.0)


def test_sample_moments_track_the_analytic_ones():
    rng = np.random.default_rng(41)
    for d in (Exponential(0.5), Uniform(1.0, 5.0), Gamma(3.0, 2.0),
              MixtureDistribution(((0.5, Deterministic(1.0)), (0.5, Exponential(2.0))))):
        draws = d.sample(rng, 200_000)
        assert draws.shape == (200_000,)
        assert float(draws.mean()) == pytest.approx(d.mean(), rel=0.02)
        assert float((draws ** 2).mean()) == pytest.approx(d.second_moment(), rel=0.05)


def test_sampling_is_reproducible():
    d = Gamma(2.5, 1.5)
    a = d.sample(np.random.default_rng(7), 100)
    b = d.sample(np.random.default_rng(7), 100)
    assert np.array_equal(a, b)
    scalar = d.sample(np.random.default_rng(7))
    assert scalar == pytest.approx(a[0])


def test_deterministic_sampling_is_constant():
    d = Deterministic(4.2)
    assert d.sample(np.random.default_rng(0)) == 4.2
    assert np.all(d.sample(np.random.default_rng(0), 17) == 4.2)


@pytest.mark.parametrize("bad", [
    lambda: Exponential(0.0),
    lambda: Exponential(-1.0),
    lambda: Exponential(float("nan")),
    lambda: Deterministic(0.0),
    lambda: Uniform(2.0, 2.0),
    lambda: Uniform(-1.0, 2.0),
    lambda: Gamma(1.0, 0.0),
    lambda: MixtureDistribution(()),
    lambda: MixtureDistribution(((0.5, Exponential(1.0)),)),
    lambda: MixtureDistribution(((1.0, "not a distribution"),)),
    lambda: MixtureDistribution(((-0.5, Exponential(1.0)), (1.5, Exponential(2.0)))),
])
def test_invalid_parameters_are_rejected(bad):
    with pytest.raises(ParameterError):
        bad()


def test_negative_transform_argument_is_rejected():
    with pytest.raises(ParameterError):
        Exponential(1.0).lst(-0.1)
