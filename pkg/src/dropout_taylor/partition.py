"""Log-partition functions and their higher derivatives.

For the logistic model every derivative of A(z) = log(1 + e^z) is an integer
polynomial in the sigmoid p = A'(z).  Two independent routes build that
polynomial:

* :func:`derivative_theorem1` expands the closed form
  p' * sum_j (-1)^(j-1) p^(j-1) T(k, j) with p' = p - p^2;
* :func:`derivative_recurrence` differentiates formally, using only
  dA/dz = p and dp/dz = p - p^2.

Orders are always *true* derivative orders of A.  The closed form indexed by
``k`` yields A^(k+1); the accessor takes the closed-form index and returns a
polynomial labelled with the true order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import mpmath
import numpy as np

from .combinatorics import DomainError, stirling_table

__all__ = [
    "PrecisionExhausted",
    "DerivativePoly",
    "EvalPoint",
    "Evaluation",
    "log_partition",
    "sigmoid",
    "derivative_theorem1",
    "derivative_recurrence",
    "derivative_poly",
    "eval_derivative",
    "LogisticPartition",
    "QuadraticPartition",
    "LOGISTIC",
    "QUADRATIC",
]

FLOAT_ORDER_LIMIT = 20
_EPS = np.finfo(float).eps


class PrecisionExhausted(ArithmeticError):
    """The rounding-error bound swamps the computed value."""


@dataclass(frozen=True)
class DerivativePoly:
    """A^(order)(z) = sum_j coeffs[j-1] * p(z)**j, exact integer coefficients."""

    order: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if self.order < 1 or len(self.coeffs) != self.order:
            raise ValueError("a derivative of order k has exactly k coefficients")

    def abs_coeffs(self) -> tuple[int, ...]:
        return tuple(abs(c) for c in self.coeffs)

    def __call__(self, p):
        """Plain floating-point evaluation at ``p`` (scalar or array)."""
        p = np.asarray(p, dtype=float)
        acc = np.zeros_like(p)
        for c in reversed(self.coeffs):
            acc = (acc + float(c)) * p
        return acc


@dataclass(frozen=True)
class EvalPoint:
    """Evaluation point z = x . beta together with p = sigmoid(z).

    ``z`` is the source of truth; high-precision evaluation recomputes p from
    it at the working precision.
    """

    z: float
    p: float

    @classmethod
    def at(cls, z: float) -> "EvalPoint":
        z = float(z)
        if not math.isfinite(z):
            raise ValueError(f"evaluation point must be finite, got {z}")
        return cls(z=z, p=float(sigmoid(z)))


class Evaluation(NamedTuple):
    value: mpmath.mpf
    error_bound: mpmath.mpf
    prec: int


def log_partition(z):
    """log(1 + e^z), stable for either sign of z."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("log_partition needs finite input")
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return out[()] if out.ndim == 0 else out


def sigmoid(z):
    """1 / (1 + e^-z) with the usual two-branch evaluation."""
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out[()] if out.ndim == 0 else out


def _poly_mul(a: list[int], b: list[int]) -> list[int]:
    # dense coefficient lists, index = power of p
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


@lru_cache(maxsize=None)
def derivative_theorem1(k: int) -> DerivativePoly:
    """Closed-form A^(k+1) from the Triangle-number expansion.

    ``k`` is the closed-form index: k=1 gives A'' = p - p^2, k=2 gives
    A''' = p - 3p^2 + 2p^3.  The returned polynomial has ``order == k + 1``.
    """
    if k < 1:
        raise DomainError(f"closed form is defined for k >= 1, got {k}")
    tri = stirling_table(k).triangle_row(k)
    # sum_j (-1)^(j-1) T(k, j) p^(j-1), as a dense list indexed by power
    inner = [(-1) ** (j - 1) * t for j, t in enumerate(tri, start=1)]
    dense = _poly_mul([0, 1, -1], inner)  # times p' = p - p^2
    return DerivativePoly(order=k + 1, coeffs=tuple(dense[1:]))


@lru_cache(maxsize=None)
def derivative_recurrence(k: int) -> DerivativePoly:
    """A^(k) by repeated formal differentiation of a polynomial in p.

    D_1 = p and d/dz p^j = j p^j - j p^(j+1).
    """
    if k < 1:
        raise DomainError(f"derivative order must be >= 1, got {k}")
    coeffs = [1]
    for _ in range(k - 1):
        nxt = [0] * (len(coeffs) + 1)
        for j, c in enumerate(coeffs, start=1):
            nxt[j - 1] += j * c
            nxt[j] -= j * c
        coeffs = nxt
    return DerivativePoly(order=k, coeffs=tuple(coeffs))


def derivative_poly(order: int) -> DerivativePoly:
    """A^(order) as a polynomial in p, via the closed form when order >= 2."""
    if order == 1:
        return derivative_recurrence(1)
    return derivative_theorem1(order - 1)


def _horner_mp(coeffs, p):
    acc = mpmath.mpf(0)
    for c in reversed(coeffs):
        acc = (acc + c) * p
    return acc


def _mp_sigmoid(z):
    return 1 / (1 + mpmath.exp(-z))


def eval_derivative(poly: DerivativePoly, at, prec: int | None = None,
                    max_prec: int = 1 << 14) -> Evaluation:
    """Evaluate ``poly`` at an :class:`EvalPoint` (or raw z) in high precision.

    For order >= 2 the value is computed at -|z| and sign-corrected, using
    A^(k)(-z) = (-1)^k A^(k)(z); this keeps p <= 1/2 and avoids the worst
    cancellation.  The returned bound accounts for Horner rounding and the
    rounding of p itself.

    With ``prec`` given, that precision is used as is and
    :class:`PrecisionExhausted` is raised if the bound exceeds 1e-3 of the
    value.  Otherwise precision is doubled until the bound is below 2^-60
    of the value; a value that stays inside its bound up to ``max_prec``
    is a genuine zero and is returned as 0 with that bound.
    """
    z = at.z if isinstance(at, EvalPoint) else float(at)
    flip = poly.order >= 2 and z > 0
    z_eval = -z if flip else z
    sign = -1 if (flip and poly.order % 2) else 1
    abs_weighted = [j * c for j, c in enumerate(poly.abs_coeffs(), start=1)]
    n = poly.order

    def attempt(bits):
        with mpmath.workprec(bits):
            p = _mp_sigmoid(mpmath.mpf(z_eval))
            value = sign * _horner_mp(poly.coeffs, p)
            scale = _horner_mp(abs_weighted, p)
            u = mpmath.ldexp(1, -bits)
            bound = 4 * (n + 2) * u * scale
            return value, bound

    if prec is not None:
        value, bound = attempt(prec)
        if bound > mpmath.mpf("1e-3") * abs(value):
            raise PrecisionExhausted(
                f"order {n} at z={z}: bound {mpmath.nstr(bound, 3)} vs "
                f"value {mpmath.nstr(value, 3)} at {prec} bits")
        return Evaluation(value, bound, prec)

    bits = 64 + max(c.bit_length() for c in poly.abs_coeffs())
    while True:
        value, bound = attempt(bits)
        if value != 0 and bound <= mpmath.ldexp(abs(value), -60):
            return Evaluation(value, bound, bits)
        if bits >= max_prec:
            if abs(value) <= bound:
                return Evaluation(mpmath.mpf(0), bound, bits)
            raise PrecisionExhausted(
                f"order {n} at z={z}: no stable value below {max_prec} bits")
        bits = min(2 * bits, max_prec)


class LogisticPartition:
    """A(z) = log(1 + e^z), the Bernoulli/logistic log-partition."""

    name = "logistic"

    def value(self, z):
        return log_partition(z)

    def derivative(self, order: int, z):
        """Vectorised float A^(order)(z).

        Orders up to 20 use float Horner on the reflected argument; higher
        orders fall back to :func:`eval_derivative` element by element.
        """
        if order == 0:
            return log_partition(z)
        if order == 1:
            return sigmoid(z)
        z = np.asarray(z, dtype=float)
        poly = derivative_poly(order)
        if order > FLOAT_ORDER_LIMIT:
            flat = [float(eval_derivative(poly, zi).value) for zi in z.ravel()]
            out = np.array(flat).reshape(z.shape)
            return out[()] if out.ndim == 0 else out
        sign = np.where((z > 0) & (order % 2 == 1), -1.0, 1.0)
        out = sign * poly(sigmoid(-np.abs(z)))
        return out[()] if out.ndim == 0 else out

    def derivative_mp(self, order: int, z) -> mpmath.mpf:
        if order == 0:
            return mpmath.log1p(mpmath.exp(mpmath.mpf(z)))
        return eval_derivative(derivative_poly(order), float(z)).value


class QuadraticPartition:
    """A(z) = z^2 / 2, the Gaussian (linear regression) log-partition."""

    name = "quadratic"

    def value(self, z):
        z = np.asarray(z, dtype=float)
        out = 0.5 * z * z
        return out[()] if out.ndim == 0 else out

    def derivative(self, order: int, z):
        z = np.asarray(z, dtype=float)
        if order == 0:
            out = 0.5 * z * z
        elif order == 1:
            out = z.copy()
        elif order == 2:
            out = np.ones_like(z)
        else:
            out = np.zeros_like(z)
        return out[()] if out.ndim == 0 else out

    def derivative_mp(self, order: int, z) -> mpmath.mpf:
        z = mpmath.mpf(z)
        return [z * z / 2, z, mpmath.mpf(1)][order] if order <= 2 else mpmath.mpf(0)


LOGISTIC = LogisticPartition()
QUADRATIC = QuadraticPartition()


def get_partition(name):
    if isinstance(name, (LogisticPartition, QuadraticPartition)):
        return name
    table = {"logistic": LOGISTIC, "quadratic": QUADRATIC, "linear": QUADRATIC}
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown partition family {name!r}") from None
