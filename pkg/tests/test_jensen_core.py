from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jensen_chains.convex_catalog import ConvexFn
from jensen_chains.errors import ConfigError, DomainError, LengthMismatch
from jensen_chains.jensen_core import WeightVector, barycenter, exact_jensen, jensen, weighted_sum

SQ = ConvexFn("square", -100)


def test_barycenter_examples():
    assert barycenter((0, 1), (F(1, 4), F(3, 4))) == F(3, 4)
    assert barycenter((F(5, 2),) * 3, (F(1, 6), F(1, 2), F(1, 3))) == F(5, 2)
    assert barycenter((0, 1, 2), WeightVector.uniform(3)) == 1


def test_barycenter_float_points():
    assert barycenter((0.5, 1.5), (F(1, 2), F(1, 2))) == 1.0


def test_barycenter_length_mismatch():
    with pytest.raises(LengthMismatch):
        barycenter((0, 1), (F(1),))


def test_jensen_examples():
    assert jensen(SQ, (0, 1), (F(1, 2), F(1, 2))) == 0.25
    assert jensen(SQ, (F(7, 3),), (F(1),)) == 0
    assert jensen(SQ, (0, 1), (F(1, 4), F(3, 4))) == pytest.approx(3 / 16, abs=1e-15)
    assert exact_jensen(SQ, (0, 1), (F(1, 4), F(3, 4))) == F(3, 16)


def test_jensen_domain_error():
    with pytest.raises(DomainError):
        jensen(ConvexFn("square", 0), (-1, 1), (F(1, 2), F(1, 2)))


def test_signed_weights_need_opt_in():
    w = WeightVector((F(2), F(-1)), signed=True)
    with pytest.raises(ConfigError):
        jensen(SQ, (F(3, 4), 1), w)
    # 2*(9/16) - 1 - f(1/2)
    assert jensen(SQ, (F(3, 4), 1), w, allow_signed=True) == pytest.approx(-1 / 8)


class TestWeightVector:
    def test_sum_must_be_one(self):
        with pytest.raises(ConfigError):
            WeightVector.of(["1/3", "1/3"])

    def test_negative_rejected_unless_signed(self):
        with pytest.raises(ConfigError):
            WeightVector.of([2, -1])
        assert WeightVector.of([2, -1], signed=True).entries == (2, -1)

    def test_floats_rejected(self):
        with pytest.raises(ConfigError):
            WeightVector.of([0.5, 0.5])

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            WeightVector(())

    def test_normalized(self):
        assert WeightVector.normalized([1, 3]).entries == (F(1, 4), F(3, 4))
        assert WeightVector.of(["1/4", "3/4"]).to_json() == ["1/4", "3/4"]


rationals = st.fractions(min_value=-50, max_value=50, max_denominator=64)


@st.composite
def weighted_points(draw, min_size=1):
    n = draw(st.integers(min_size, 7))
    x = draw(st.lists(rationals, min_size=n, max_size=n))
    raw = draw(st.lists(st.integers(0, 20), min_size=n, max_size=n).filter(lambda r: sum(r) > 0))
    return tuple(x), WeightVector.normalized(raw)


@settings(max_examples=150, deadline=None)
@given(weighted_points(), st.sampled_from(["square", "abs", "fourth_power"]))
def test_jensen_nonnegative(xw, kind):
    x, w = xw
    f = ConvexFn(kind, -100)
    J = jensen(f, x, w)
    assert J >= -1e-9 * (1 + abs(weighted_sum(f, x, w)))


@settings(max_examples=150, deadline=None)
@given(weighted_points(), rationals)
def test_barycenter_translation_covariance(xw, c):
    x, w = xw
    shifted = tuple(v + c for v in x)
    assert barycenter(shifted, w) == barycenter(x, w) + c


@settings(max_examples=100, deadline=None)
@given(weighted_points(), rationals)
def test_jensen_zero_on_constant_points(xw, c):
    _, w = xw
    assert jensen(ConvexFn("exp", -60), (c,) * len(w), w) == 0


@settings(max_examples=100, deadline=None)
@given(weighted_points())
def test_barycenter_within_hull(xw):
    x, w = xw
    assert min(x) <= barycenter(x, w) <= max(x)
