from fractions import Fraction
from math import prod

import pytest

from bkpmoments.schurq import (
    format_partition,
    odd_partitions,
    parse_partition,
    q_on_scaled_traces,
    q_on_traces,
    q_poly,
)
from bkpmoments.series import Multidegree, Series

W = 10


def test_odd_partition_counts():
    # number of partitions into odd parts equals number into distinct parts
    assert [len(odd_partitions(n)) for n in range(11)] == [1, 1, 1, 2, 2, 3, 4, 5, 6, 8, 10]
    assert odd_partitions(6) == ((5, 1), (3, 3), (3, 1, 1, 1), (1, 1, 1, 1, 1, 1))


def test_partition_text_round_trip():
    for n in range(1, 11):
        for pi in odd_partitions(n):
            assert parse_partition(format_partition(pi)) == pi
    assert format_partition((3, 3, 1, 1)) == "3^2,1^2"


@pytest.mark.parametrize("j", range(W + 1))
def test_q_homogeneous(j):
    assert q_poly(j, W).grade(j) == q_poly(j, W)


@pytest.mark.parametrize("m", range(W + 1))
def test_convolution_identity(m):
    total = Series({}, W)
    for i in range(m + 1):
        total = total + (q_poly(i, W) * q_poly(m - i, W)).scale((-1) ** (m - i))
    assert total == (Series.constant(1, W) if m == 0 else Series({}, W))


def test_low_q_functions():
    t1, t3 = Multidegree.var(1), Multidegree.var(3)
    assert q_poly(1, W).terms == {t1: 2}
    assert q_poly(3, W).terms == {t3: 2, Multidegree.var(1, exp=3): Fraction(4, 3)}
    assert q_poly(-1, W).is_zero()


@pytest.mark.parametrize("j", range(1, W + 1))
def test_traces_resubstitution(j):
    """Partition coefficients times prod(n_i) reproduce q_j's t-coefficients."""
    q = q_poly(j, W)
    tr = q_on_traces(j)
    for pi in odd_partitions(j):
        assert tr.coeff(pi) * prod(pi) == q.coeff(Multidegree.from_indices(pi))


@pytest.mark.parametrize("j", range(1, 9))
def test_scaled_traces(j):
    """At t_n = s_n Tr H^n / 2 each partition carries s^pi with weight 2^-len * q-coefficient."""
    q = q_poly(j, W)
    sc = q_on_scaled_traces(j, "s")
    for pi in odd_partitions(j):
        mono = Multidegree.from_indices(pi, "s")
        assert sc.coeff(pi, mono) == q.coeff(Multidegree.from_indices(pi)) / 2 ** len(pi)
