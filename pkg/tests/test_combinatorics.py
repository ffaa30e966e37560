import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dropout_taylor.combinatorics import (
    DomainError,
    StirlingTable,
    alternating_stirling_sum,
    bell,
    bernoulli_asymptotic,
    stirling2,
    stirling_table,
    triangle,
)

from oracles import bell_triangle, partition_counts


class TestStirling:
    @pytest.mark.parametrize("n,k,expected", [(5, 5, 1), (3, 2, 3), (4, 2, 7)])
    def test_examples(self, n, k, expected):
        assert stirling2(n, k) == expected

    def test_examples_match_enumeration(self):
        assert partition_counts(3)[2] == 3
        assert partition_counts(4)[2] == 7

    @pytest.mark.parametrize("n", range(1, 10))
    def test_against_enumeration(self, n):
        counts = partition_counts(n)
        assert [stirling2(n, k) for k in range(1, n + 1)] == counts[1:]

    def test_edges(self):
        table = StirlingTable.build(30)
        for n in range(1, 31):
            assert table.stirling2(n, 1) == 1
            assert table.stirling2(n, n) == 1

    @given(st.integers(1, 60), st.integers(2, 60))
    def test_recurrence(self, n, k):
        if k > n:
            return
        assert stirling2(n + 1, k) == k * stirling2(n, k) + stirling2(n, k - 1)

    def test_exceeds_int64(self):
        assert stirling2(40, 20) > 2**63

    @pytest.mark.parametrize("n,k", [(3, 4), (0, 0), (5, 0), (-1, 1)])
    def test_domain_errors(self, n, k):
        with pytest.raises(DomainError):
            stirling2(n, k)

    def test_table_bounds(self):
        table = StirlingTable.build(5)
        with pytest.raises(DomainError):
            table.stirling2(6, 2)

    def test_growth_returns_new_table(self):
        small = StirlingTable.build(8)
        big = small.grow(20)
        assert big is not small and small.max_n == 8 and big.max_n == 20
        assert big.stirling2(8, 3) == small.stirling2(8, 3)

    def test_on_demand_growth(self):
        assert stirling2(90, 2) == 2**89 - 1
        assert stirling_table().max_n >= 90


class TestTriangle:
    @pytest.mark.parametrize("n,k,expected", [(4, 4, 24), (3, 2, 6), (4, 3, 36)])
    def test_examples(self, n, k, expected):
        assert triangle(n, k) == expected

    def test_derived_from_enumeration(self):
        assert triangle(3, 2) == 2 * partition_counts(3)[2]
        assert triangle(4, 3) == 6 * partition_counts(4)[3]

    @given(st.integers(1, 40), st.integers(1, 40))
    def test_divisible_by_factorial(self, n, k):
        if k > n:
            return
        assert triangle(n, k) % math.factorial(k) == 0

    def test_diagonal_is_factorial(self):
        for n in range(1, 20):
            assert triangle(n, n) == math.factorial(n)


def test_bell_row_sums():
    expected = bell_triangle(20)
    assert [bell(n) for n in range(21)] == expected


class TestBernoulliAsymptotic:
    def test_two(self):
        # 2 * 2! * zeta(2) / (2 pi)^2 = 1/6
        assert float(bernoulli_asymptotic(2)) == pytest.approx(1 / 6, rel=1e-15)

    @pytest.mark.parametrize("two_k", [2, 4, 10, 20])
    def test_ratio_identity(self, two_k):
        a = bernoulli_asymptotic(two_k, prec=200)
        b = bernoulli_asymptotic(two_k + 2, prec=200)
        with mpmath.workprec(200):
            zr = mpmath.zeta(two_k) / mpmath.zeta(two_k + 2)
            expected = (2 * mpmath.pi) ** 2 / ((two_k + 1) * (two_k + 2)) * zr
        assert float(a / b) == pytest.approx(float(expected), rel=1e-14)

    def test_root_trend_towards_inverse_two_pi(self):
        target = 1 / (2 * math.pi)
        gaps = []
        for two_k in range(10, 61, 2):
            v = bernoulli_asymptotic(two_k)
            root = float((v / mpmath.factorial(two_k)) ** (mpmath.mpf(1) / two_k))
            gaps.append(abs(root - target))
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 0.02 * target

    @pytest.mark.parametrize("bad", [0, 3, -2, 7])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            bernoulli_asymptotic(bad)


class TestAlternatingSum:
    @pytest.mark.parametrize("n,p,expected", [(1, 0.5, -0.5), (2, 0.5, 0.0), (3, 0.25, 0.03125)])
    def test_examples(self, n, p, expected):
        assert float(alternating_stirling_sum(n, p)) == pytest.approx(expected, abs=1e-15)

    def test_high_order_matches_exact_rational(self):
        from fractions import Fraction
        n, p = 50, Fraction(3, 8)
        exact = sum((-p) ** j * triangle(n, j) for j in range(1, n + 1))
        got = alternating_stirling_sum(n, 0.375)
        assert float(got) == pytest.approx(float(exact), rel=1e-14)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            alternating_stirling_sum(0, 0.5)
