"""Exact integer combinatorics for the sigmoid derivative expansion.

Stirling numbers of the second kind are kept as Python ints (they leave the
64-bit range around n = 25), and anything evaluated against a real argument
goes through mpmath at a precision wide enough to survive the alternating
cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

__all__ = [
    "DomainError",
    "StirlingTable",
    "stirling_table",
    "stirling2",
    "triangle",
    "bell",
    "zeta",
    "bernoulli_asymptotic",
    "alternating_stirling_sum",
]

DEFAULT_MAX_N = 64


class DomainError(ValueError):
    """Raised when a combinatorial index lies outside its defined range."""


def _check_indices(n: int, k: int) -> None:
    if not (isinstance(n, int) and isinstance(k, int)):
        raise DomainError(f"indices must be integers, got n={n!r}, k={k!r}")
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")


@dataclass(frozen=True)
class StirlingTable:
    """Triangular table of S2(n, k) for 1 <= k <= n <= max_n.

    ``rows[n][k]`` holds S2(n, k); row 0 and column 0 are padding so that
    indices read naturally.  Tables are immutable: :meth:`grow` returns a
    new, larger table and leaves this one untouched.
    """

    max_n: int
    rows: tuple[tuple[int, ...], ...]

    @classmethod
    def build(cls, max_n: int = DEFAULT_MAX_N) -> "StirlingTable":
        if max_n < 1:
            raise DomainError(f"max_n must be positive, got {max_n}")
        rows = [(1,)]  # S2(0, 0) = 1 seeds the recurrence
        for n in range(1, max_n + 1):
            prev = rows[-1]
            row = [0] * (n + 1)
            for k in range(1, n + 1):
                keep = k * prev[k] if k < len(prev) else 0
                row[k] = keep + prev[k - 1]
            rows.append(tuple(row))
        return cls(max_n=max_n, rows=tuple(rows))

    def grow(self, max_n: int) -> "StirlingTable":
        if max_n <= self.max_n:
            return self
        return StirlingTable.build(max_n)

    def stirling2(self, n: int, k: int) -> int:
        _check_indices(n, k)
        if n > self.max_n:
            raise DomainError(f"n={n} exceeds table size {self.max_n}")
        return self.rows[n][k]

    def triangle(self, n: int, k: int) -> int:
        return math.factorial(k) * self.stirling2(n, k)

    def row(self, n: int) -> tuple[int, ...]:
        """S2(n, 1..n) as a tuple."""
        if not 1 <= n <= self.max_n:
            raise DomainError(f"row {n} outside 1..{self.max_n}")
        return self.rows[n][1:]

    def triangle_row(self, n: int) -> tuple[int, ...]:
        """T(n, 1..n) = k! S2(n, k) as a tuple."""
        return tuple(math.factorial(k) * s for k, s in enumerate(self.row(n), start=1))


_TABLE = StirlingTable.build(DEFAULT_MAX_N)


def stirling_table(min_n: int = DEFAULT_MAX_N) -> StirlingTable:
    """Shared table covering at least ``min_n`` rows, grown on demand."""
    global _TABLE
    if min_n > _TABLE.max_n:
        # swap in a fresh object; readers holding the old table keep a valid one
        _TABLE = _TABLE.grow(max(min_n, 2 * _TABLE.max_n))
    return _TABLE


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind S2(n, k), exact."""
    _check_indices(n, k)
    return stirling_table(n).stirling2(n, k)


def triangle(n: int, k: int) -> int:
    """Ordered set-partition count T(n, k) = k! * S2(n, k)."""
    _check_indices(n, k)
    return stirling_table(n).triangle(n, k)


def bell(n: int) -> int:
    """Bell number as the row sum of S2(n, .)."""
    if n == 0:
        return 1
    return sum(stirling_table(n).row(n))


def zeta(s: int, prec: int = 128) -> mpmath.mpf:
    """Riemann zeta at an integer s >= 2."""
    if s < 2:
        raise DomainError(f"zeta needs s >= 2, got {s}")
    with mpmath.workprec(prec):
        return +mpmath.zeta(s)


def bernoulli_asymptotic(two_k: int, prec: int = 128) -> mpmath.mpf:
    """Leading asymptotic magnitude 2 (2k)! zeta(2k) / (2 pi)^(2k).

    This is the classical size of the even Bernoulli number |B_2k|.
    """
    if not isinstance(two_k, int) or two_k < 2 or two_k % 2:
        raise DomainError(f"two_k must be an even integer >= 2, got {two_k!r}")
    with mpmath.workprec(prec):
        return 2 * mpmath.factorial(two_k) * zeta(two_k, prec) / (2 * mpmath.pi) ** two_k


def alternating_stirling_sum(n: int, p: float, extra_bits: int = 100) -> mpmath.mpf:
    """Evaluate sum_{j=1..n} (-p)^j T(n, j) with exact integer coefficients.

    ``p`` is taken as an exact binary value; the working precision is the
    bit length of the largest coefficient plus ``extra_bits``.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    coeffs = stirling_table(n).triangle_row(n)
    prec = max(c.bit_length() for c in coeffs) + extra_bits
    with mpmath.workprec(prec):
        x = -mpmath.mpf(p)
        acc = mpmath.mpf(0)
        for c in reversed(coeffs):
            acc = (acc + c) * x
        return acc
