from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bkpmoments.series import (
    Multidegree,
    Series,
    TruncationError,
    exp_truncated,
    format_fraction,
    parse_fraction,
)

W = 8
odd = st.sampled_from([1, 3, 5, 7])
alpha = st.sampled_from(["s", "t"])
monomial = st.lists(st.tuples(alpha, odd), max_size=3).map(
    lambda xs: Multidegree({k: xs.count(k) for k in set(xs)})
).filter(lambda m: m.weight <= W)
coeff = st.fractions(min_value=-5, max_value=5, max_denominator=7)
series = st.dictionaries(monomial, coeff, max_size=5).map(lambda d: Series(d, W))


@given(series, series, series)
def test_ring_laws(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    assert a + Series.constant(0, W) == a


@given(series)
def test_homogeneous_decomposition(a):
    total = Series({}, W)
    for w in range(W + 1):
        g = a.grade(w)
        assert all(m.weight == w for m in g.terms)
        total = total + g
    assert total == a


@given(series)
def test_exp_inverse(a):
    a = a - a.grade(0)  # exp needs a vanishing constant term
    assert exp_truncated(a) * exp_truncated(-a) == Series.constant(1, W)


def test_exp_known_coefficients():
    x = Series.var(1, W=6)
    e = exp_truncated(x.scale(2))
    assert e.coeff(Multidegree.var(1, exp=3)) == Fraction(8, 6)


def test_truncation():
    a = Series.var(3, W=4)
    assert (a * a).is_zero()
    with pytest.raises(TruncationError):
        a.coeff(Multidegree.var(5))
    with pytest.raises(TypeError):
        Series({Multidegree.one(): 0.5})


def test_multidegree_validation_and_order():
    with pytest.raises(ValueError):
        Multidegree.var(2)
    small, big = Multidegree.from_indices([1, 1, 1]), Multidegree.from_indices([3])
    assert small.weight == big.weight == 3
    assert sorted([small, big]) == [big, small]  # larger indices first at equal weight


@given(series)
def test_json_round_trip(a):
    assert Series.from_json(a.to_json(), W) == a


def test_fraction_text():
    assert format_fraction(parse_fraction("-8/2025")) == "-8/2025"
    assert format_fraction(Fraction(6, 3)) == "2"
