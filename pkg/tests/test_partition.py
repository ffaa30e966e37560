import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dropout_taylor.combinatorics import DomainError, triangle
from dropout_taylor.partition import (
    LOGISTIC,
    QUADRATIC,
    DerivativePoly,
    EvalPoint,
    PrecisionExhausted,
    derivative_poly,
    derivative_recurrence,
    derivative_theorem1,
    eval_derivative,
    log_partition,
    sigmoid,
)

from oracles import richardson_derivative


class TestLogPartition:
    def test_zero(self):
        assert log_partition(0.0) == pytest.approx(math.log(2), abs=1e-16)

    def test_one(self):
        assert log_partition(1.0) == pytest.approx(1.3132616875182228, rel=1e-15)

    def test_large(self):
        assert abs(log_partition(100.0) - 100.0) < 1e-12
        assert log_partition(-800.0) == 0.0

    def test_rejects_infinite(self):
        with pytest.raises(ValueError):
            log_partition(np.inf)

    def test_vectorised(self):
        z = np.linspace(-30, 30, 7)
        np.testing.assert_allclose(log_partition(z), [float(mpmath.log1p(mpmath.exp(v))) for v in z],
                                   rtol=1e-15)


class TestSigmoid:
    def test_values(self):
        assert sigmoid(0.0) == 0.5
        assert sigmoid(1.0) == pytest.approx(0.7310585786300049, rel=1e-15)

    @given(st.floats(-700, 700))
    def test_symmetry(self, z):
        assert sigmoid(z) + sigmoid(-z) == pytest.approx(1.0, abs=4.5e-16)

    def test_no_overflow(self):
        with np.errstate(over="raise", invalid="raise"):
            assert sigmoid(-1000.0) == 0.0
            assert sigmoid(1000.0) == 1.0


class TestClosedForm:
    def test_first_orders(self):
        assert derivative_theorem1(1) == DerivativePoly(2, (1, -1))
        assert derivative_theorem1(2) == DerivativePoly(3, (1, -3, 2))
        assert derivative_theorem1(3) == DerivativePoly(4, (1, -7, 12, -6))

    def test_order_two_is_p_prime_minus_two_p_p_prime(self):
        # p' - 2 p p' with p' = p - p^2
        assert derivative_theorem1(2).coeffs == (1, -1 - 2, 2)

    @pytest.mark.parametrize("k", range(1, 31))
    def test_matches_recurrence(self, k):
        assert derivative_theorem1(k) == derivative_recurrence(k + 1)

    @pytest.mark.parametrize("k", range(2, 20))
    def test_coefficient_pattern(self, k):
        # c_j = (-1)^(j-1) T(k, j) + (-1)^(j-1) T(k, j-1), T out of range = 0
        poly = derivative_theorem1(k)

        def t(j):
            return triangle(k, j) if 1 <= j <= k else 0

        expected = tuple((-1) ** (j - 1) * (t(j) + t(j - 1)) for j in range(1, k + 2))
        assert poly.coeffs == expected

    def test_domain(self):
        with pytest.raises(DomainError):
            derivative_theorem1(0)


class TestRecurrence:
    def test_examples(self):
        assert derivative_recurrence(1).coeffs == (1,)
        assert derivative_recurrence(2).coeffs == (1, -1)
        assert derivative_recurrence(5).coeffs == (1, -15, 50, -60, 24)

    @pytest.mark.parametrize("k", range(2, 25))
    def test_structure(self, k):
        poly = derivative_recurrence(k)
        assert sum(poly.coeffs) == 0
        assert poly.coeffs[0] == 1
        assert poly.coeffs[-1] == (-1) ** (k - 1) * math.factorial(k - 1)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            derivative_recurrence(0)


class TestEvalDerivative:
    def test_examples(self):
        at = EvalPoint.at(0.0)
        assert float(eval_derivative(derivative_poly(2), at).value) == 0.25
        assert float(eval_derivative(derivative_poly(3), at).value) == 0.0
        assert float(eval_derivative(derivative_poly(4), at).value) == -0.125

    def test_eval_point(self):
        at = EvalPoint.at(1.0)
        assert at.p == pytest.approx(sigmoid(1.0))
        with pytest.raises(ValueError):
            EvalPoint.at(math.nan)

    @pytest.mark.parametrize("order", range(1, 7))
    @pytest.mark.parametrize("z", [-3.0, -1.0, 0.0, 1.0, 3.0])
    def test_finite_differences(self, order, z):
        got = float(eval_derivative(derivative_poly(order), z).value)
        ref = richardson_derivative(order, z)
        assert abs(got - ref) <= 1e-6 * abs(ref) + 1e-12

    @pytest.mark.parametrize("order", [10, 40, 90])
    def test_against_mpmath_taylor(self, order):
        with mpmath.workdps(80):
            coeffs = mpmath.taylor(lambda t: mpmath.log1p(mpmath.exp(t)), mpmath.mpf(1.5), order)
            ref = coeffs[order] * mpmath.factorial(order)
        got = eval_derivative(derivative_poly(order), 1.5)
        assert float(got.value) == pytest.approx(float(ref), rel=1e-12)
        assert got.error_bound < 1e-15 * abs(got.value)

    @pytest.mark.parametrize("order", range(2, 12))
    def test_vanishes_far_out(self, order):
        for z in (-40.0, 40.0):
            assert abs(float(eval_derivative(derivative_poly(order), z).value)) < 1e-8

    def test_reflection(self):
        for order in range(2, 15):
            poly = derivative_poly(order)
            a = eval_derivative(poly, 2.5).value
            b = eval_derivative(poly, -2.5).value
            assert float(a) == pytest.approx((-1) ** order * float(b), rel=1e-14)

    def test_fixed_precision_exhausted(self):
        with pytest.raises(PrecisionExhausted):
            eval_derivative(derivative_poly(60), 1.0, prec=53)

    def test_fixed_precision_ok(self):
        ev = eval_derivative(derivative_poly(5), 1.0, prec=200)
        assert ev.prec == 200


class TestPartitionFamilies:
    @pytest.mark.parametrize("order", range(0, 12))
    def test_float_path_matches_high_precision(self, order):
        z = np.array([-7.0, -1.2, 0.3, 2.0, 9.0])
        got = LOGISTIC.derivative(order, z)
        ref = [float(LOGISTIC.derivative_mp(order, v)) for v in z]
        np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-15)

    def test_high_order_falls_back(self):
        z = np.array([0.5, -0.5])
        got = LOGISTIC.derivative(25, z)
        assert got[0] == pytest.approx(-got[1], rel=1e-13)

    def test_quadratic(self):
        z = np.array([-2.0, 3.0])
        np.testing.assert_array_equal(QUADRATIC.value(z), [2.0, 4.5])
        np.testing.assert_array_equal(QUADRATIC.derivative(1, z), z)
        np.testing.assert_array_equal(QUADRATIC.derivative(2, z), [1.0, 1.0])
        for order in range(3, 8):
            np.testing.assert_array_equal(QUADRATIC.derivative(order, z), [0.0, 0.0])
