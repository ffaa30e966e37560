"""Truncated Taylor expansions of the dropout regulariser and their diagnostics.

R_k(beta) = sum_{j=2..k} A^(j)(x . beta) E[Delta^j] / j!

The sum starts at j = 2, so under a biased law (the plain ``scalar`` model,
E[Delta] != 0) R_k tends to R minus the linear term A'(x . beta) E[Delta].
:func:`diagnose_series` tracks the full series including that linear term,
so its partial sums approach R itself when the series converges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .noise import (
    DropoutConfig,
    NoiseModel,
    displacement,
    displacement_distribution,
    displacement_moment,
    exact_regularizer,
)
from .partition import FLOAT_ORDER_LIMIT, LOGISTIC, get_partition

__all__ = [
    "Verdict",
    "SeriesDiagnostics",
    "RadiusEstimate",
    "rk_penalty",
    "diagnose_series",
    "estimate_radius",
    "radius_report",
    "feature_scale_bound",
    "CLAIMED_RADIUS",
]

CLAIMED_RADIUS = 2 * math.pi
CONVERGENCE_TOL = 1e-9
GROWTH_RUN = 10


def _mp_moments(k: int, x, beta, cfg: DropoutConfig) -> list:
    """E[Delta^j] for j = 0..k as mpf (index = power)."""
    xb = mpmath.mpf(float(np.dot(x, beta)))
    d = mpmath.mpf(cfg.delta)
    if cfg.delta == 0.0:
        return [mpmath.mpf(1)] + [mpmath.mpf(0)] * k
    if cfg.model is NoiseModel.SCALAR:
        b = xb * d / (1 - d)
        return [mpmath.mpf(1)] + [(1 - d) * b**j for j in range(1, k + 1)]
    if cfg.model is NoiseModel.SCALAR_DROP_ALL:
        b = xb * d / (1 - d)
        return [mpmath.mpf(1)] + [d * (-xb) ** j + (1 - d) * b**j for j in range(1, k + 1)]
    values, weights = displacement_distribution(x, beta, cfg.delta)
    vals = [mpmath.mpf(float(v)) for v in values]
    ws = [mpmath.mpf(float(w)) for w in weights]
    out = [mpmath.mpf(1)]
    powers = list(ws)
    for _ in range(k):
        powers = [p * v for p, v in zip(powers, vals)]
        out.append(mpmath.fsum(powers))
    return out


def rk_penalty(k: int, x, beta, cfg: DropoutConfig, partition=LOGISTIC) -> float:
    """Order-k truncation of the dropout regulariser (terms j = 2..k)."""
    if k < 2:
        raise ValueError(f"truncation order must be >= 2, got {k}")
    A = get_partition(partition)
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    xb = float(np.dot(x, beta))
    if k <= FLOAT_ORDER_LIMIT:
        total = 0.0
        for j in range(2, k + 1):
            total += float(A.derivative(j, xb)) * displacement_moment(j, x, beta, cfg) \
                / math.factorial(j)
        return total
    moments = _mp_moments(k, x, beta, cfg)
    total = mpmath.mpf(0)
    for j in range(2, k + 1):
        if moments[j] != 0:
            total += A.derivative_mp(j, xb) * moments[j] / mpmath.factorial(j)
    return float(total)


@dataclass(frozen=True)
class Verdict:
    kind: str  # "Converged", "Diverging" or "Inconclusive"
    tolerance: float = CONVERGENCE_TOL
    at_order: int | None = None
    onset_order: int | None = None

    def __str__(self):
        return self.kind


@dataclass
class SeriesDiagnostics:
    """Per-order record of the Taylor series of R at one expansion point.

    ``terms[i]`` and ``partial_sums[i]`` belong to order ``orders[i]``
    (orders 2..K).  Partial sums include ``first_order``, the j = 1 term.
    """

    expansion_point: float
    delta: float
    displacement: float
    first_order: float
    orders: list[int]
    terms: list[float]
    partial_sums: list[float]
    root_test: list[float]
    verdict: Verdict
    exact: float | None = None
    terms_mp: list = field(default_factory=list, repr=False)

    @property
    def growth_ratio(self) -> float:
        """|B| times the tail maximum of the root-test sequence.

        This estimates |B| / radius: above 1 the terms grow geometrically even
        when their magnitudes oscillate and the strict-growth verdict cannot fire.
        """
        tail = self.root_test[-(len(self.root_test) // 2):]
        return abs(self.displacement) * max(tail)

    @property
    def limit_or_onset(self):
        if self.verdict.kind == "Diverging":
            return self.verdict.onset_order
        return self.partial_sums[-1]


def _classify(terms_abs: list, orders: list[int], tol: float) -> Verdict:
    run = 0
    for i in range(len(terms_abs) - 1, 0, -1):
        if terms_abs[i] > terms_abs[i - 1]:
            run += 1
        else:
            break
    if run >= GROWTH_RUN:
        return Verdict("Diverging", tol, onset_order=orders[len(terms_abs) - 1 - run])
    if len(terms_abs) >= 2 and terms_abs[-1] < tol and terms_abs[-2] < tol:
        i = len(terms_abs) - 1
        while i > 0 and terms_abs[i - 1] < tol:
            i -= 1
        # at_order: from here on every partial-sum step stays below tol
        return Verdict("Converged", tol, at_order=orders[max(i, 1)])
    return Verdict("Inconclusive", tol)


def diagnose_series(xb: float, cfg: DropoutConfig, max_order: int = 40,
                    partition=LOGISTIC, tolerance: float = CONVERGENCE_TOL) -> SeriesDiagnostics:
    """Expand R around x . beta = ``xb`` up to ``max_order`` and classify the series.

    Only the scalar laws are accepted (the displacement is then a function of
    x . beta alone).  All arithmetic is done in high precision.
    """
    if max_order < 12:
        raise ValueError("max_order must be >= 12")
    if not cfg.is_scalar:
        raise ValueError("series diagnostics need a scalar noise model")
    A = get_partition(partition)
    xb = float(xb)
    moments = _mp_moments(max_order, np.array([xb]), np.array([1.0]), cfg)
    terms, roots = [], []
    for j in range(1, max_order + 1):
        deriv = A.derivative_mp(j, xb)
        coeff = deriv / mpmath.factorial(j)
        terms.append(coeff * moments[j])
        if j >= 2:
            roots.append(abs(coeff) ** (mpmath.mpf(1) / j) if coeff != 0 else mpmath.mpf(0))
    sums, s = [], terms[0]
    for t in terms[1:]:
        s = s + t
        sums.append(s)
    orders = list(range(2, max_order + 1))
    verdict = _classify([abs(t) for t in terms[1:]], orders, tolerance)
    return SeriesDiagnostics(
        expansion_point=xb,
        delta=cfg.delta,
        displacement=displacement(xb, cfg).b,
        first_order=float(terms[0]),
        orders=orders,
        terms=[float(t) for t in terms[1:]],
        partial_sums=[float(v) for v in sums],
        root_test=[float(r) for r in roots],
        verdict=verdict,
        exact=float(exact_regularizer(np.array([xb]), np.array([1.0]), cfg, A)),
        terms_mp=terms,
    )


@dataclass
class RadiusEstimate:
    z: float
    max_order: int
    window: int
    orders: list[int]
    root_sequence: list[float]
    limsup: float
    radius: float

    @property
    def singularity_distance(self) -> float:
        """|z - i pi|, the distance to the nearest complex zero of 1 + e^z."""
        return math.hypot(self.z, math.pi)


def estimate_radius(xb: float, max_order: int = 60, window: int | None = None,
                    partition=LOGISTIC) -> RadiusEstimate:
    """Root-test estimate of the convergence radius of A's Taylor series at ``xb``.

    The limsup of |A^(k)(xb)/k!|^(1/k) is approximated by the maximum over the
    last ``window`` orders (default: the upper half), and the radius is its
    reciprocal.  Derivatives come from the adaptive high-precision evaluator,
    which raises :class:`~dropout_taylor.partition.PrecisionExhausted` if a
    tail term cannot be resolved.
    """
    if max_order < 30:
        raise ValueError("max_order must be >= 30")
    A = get_partition(partition)
    window = window or max_order // 2
    orders = list(range(1, max_order + 1))
    seq = []
    for k in orders:
        coeff = abs(A.derivative_mp(k, xb)) / mpmath.factorial(k)
        seq.append(float(coeff ** (mpmath.mpf(1) / k)) if coeff != 0 else 0.0)
    limsup = max(seq[-window:])
    radius = 1.0 / limsup if limsup > 0 else math.inf
    return RadiusEstimate(float(xb), max_order, window, orders, seq, limsup, radius)


def radius_report(points=(0.0, 1.0, 3.0, 10.0), max_order: int = 60) -> dict:
    """Measured radius per expansion point against the claimed 2 pi.

    Each point is estimated at ``max_order`` and at twice that; the relative
    change between the two is the stability figure.
    """
    rows = []
    for z in points:
        base = estimate_radius(z, max_order)
        doubled = estimate_radius(z, 2 * max_order)
        rows.append({
            "z": float(z),
            "max_order": max_order,
            "limsup": base.limsup,
            "radius": base.radius,
            "radius_doubled_order": doubled.radius,
            "relative_change_on_doubling": abs(doubled.radius - base.radius) / base.radius,
            "claimed_radius": CLAIMED_RADIUS,
            "signed_discrepancy": base.radius - CLAIMED_RADIUS,
            "singularity_distance": base.singularity_distance,
        })
    stable = all(r["relative_change_on_doubling"] <= 0.05 for r in rows)
    agrees = all(abs(r["signed_discrepancy"]) <= 0.05 * CLAIMED_RADIUS for r in rows)
    return {"claimed_radius": CLAIMED_RADIUS, "points": rows,
            "stable_under_doubling": stable, "agrees_with_claim": agrees}


def feature_scale_bound(x, cap: float, d: int | None = None, margin: float = 1.0):
    """Rescale features so that max |x_j| * cap = margin * 2 pi / d.

    ``x`` may be one vector or an (n, d) matrix; a matrix is scaled by one
    common factor.  With every |beta_j| <= cap this gives
    |x . beta| <= margin * 2 pi.  The zero vector is returned unchanged.
    """
    x = np.asarray(x, dtype=float)
    if not (cap > 0 and math.isfinite(cap)):
        raise ValueError(f"cap must be positive and finite, got {cap}")
    d = x.shape[-1] if d is None else d
    if x.shape[-1] != d:
        raise ValueError(f"d={d} does not match feature dimension {x.shape[-1]}")
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak == 0.0:
        return x.copy()
    # divide by the peak first: 1/peak overflows for subnormal features
    return (x / peak) * (margin * CLAIMED_RADIUS / d / cap)
