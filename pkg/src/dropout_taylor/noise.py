"""Dropout noise models, displacement moments and the exact regulariser.

The displacement is Delta = x~ . beta - x . beta.  Three laws are supported:

``scalar``
    Delta = B * Y with B = (x . beta) delta / (1 - delta) and Y ~ Bernoulli(1 - delta),
    so E[Delta^n] = (x . beta)^n delta^n / (1 - delta)^(n - 1).
``scalar-drop-all``
    the whole vector is dropped together: Delta = -x . beta with probability delta,
    otherwise B.  Unlike ``scalar`` this law is centred.
``independent``
    every coordinate is dropped on its own (ordinary dropout).  Moments are
    exact sums over all 2^d masks for d <= 22, seeded Monte Carlo beyond.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .partition import LOGISTIC, get_partition

__all__ = [
    "NoiseModel",
    "DropoutConfig",
    "NoiseDisplacement",
    "Example",
    "displacement",
    "scalar_moment",
    "coordinate_moment",
    "displacement_moment",
    "first_moment_term",
    "exact_regularizer",
    "variance_r2",
    "enumerate_masks",
    "displacement_distribution",
    "sample_masks",
    "mc_mean",
]

MAX_EXACT_DIM = 22
MC_CHUNK = 1 << 16
DEFAULT_MC_DRAWS = 1 << 20
DEFAULT_SEED = 20170


class NoiseModel(str, enum.Enum):
    SCALAR = "scalar"
    SCALAR_DROP_ALL = "scalar-drop-all"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class DropoutConfig:
    delta: float
    model: NoiseModel = NoiseModel.SCALAR

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"dropout probability must lie in [0, 1), got {self.delta}")
        object.__setattr__(self, "model", NoiseModel(self.model))

    @property
    def scale(self) -> float:
        return 1.0 / (1.0 - self.delta)

    @property
    def is_scalar(self) -> bool:
        return self.model is not NoiseModel.INDEPENDENT

    def scalar_coefficients(self, n: int) -> float:
        """a_n with E[Delta^n] = a_n (x . beta)^n under either scalar law."""
        d = self.delta
        ratio = d / (1.0 - d)
        if self.model is NoiseModel.SCALAR:
            return (1.0 - d) * ratio**n
        if self.model is NoiseModel.SCALAR_DROP_ALL:
            return d * (-1.0) ** n + (1.0 - d) * ratio**n
        raise ValueError("independent dropout has no scalar moment form")


@dataclass(frozen=True)
class NoiseDisplacement:
    """Two-point law of Z = B * Y: P(Z = b) = 1 - delta, P(Z = 0) = delta."""

    b: float
    delta: float

    @property
    def mean(self) -> float:
        return self.b * (1.0 - self.delta)

    def moment(self, n: int) -> float:
        return self.b**n * (1.0 - self.delta)


@dataclass(frozen=True)
class Example:
    x: np.ndarray
    y: object  # 0/1 label, or a one-hot vector for softmax

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 1 or not np.all(np.isfinite(x)):
            raise ValueError("x must be a finite, non-empty vector")
        object.__setattr__(self, "x", x)

    @property
    def d(self) -> int:
        return self.x.size


def displacement(xb: float, cfg: DropoutConfig) -> NoiseDisplacement:
    return NoiseDisplacement(b=float(xb) * cfg.delta / (1.0 - cfg.delta), delta=cfg.delta)


def scalar_moment(n: int, xb: float, cfg: DropoutConfig) -> float:
    """E[Delta^n] under a scalar law; for ``scalar`` this is (xb)^n d^n / (1-d)^(n-1)."""
    if n < 1:
        raise ValueError(f"moment order must be >= 1, got {n}")
    if not cfg.is_scalar:
        raise ValueError("scalar_moment needs a scalar noise model")
    if cfg.delta == 0.0:
        return 0.0
    if cfg.model is NoiseModel.SCALAR:
        return float(xb) ** n * cfg.delta**n / (1.0 - cfg.delta) ** (n - 1)
    return cfg.scalar_coefficients(n) * float(xb) ** n


@lru_cache(maxsize=32)
def enumerate_masks(d: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """All 2^d dropout multipliers (rows) and their probabilities."""
    if d > MAX_EXACT_DIM:
        raise ValueError(f"exact enumeration refused for d={d} > {MAX_EXACT_DIM}")
    bits = (np.arange(1 << d)[:, None] >> np.arange(d)[None, :]) & 1
    xi = bits / (1.0 - delta)
    kept = bits.sum(axis=1)
    weights = delta ** (d - kept) * (1.0 - delta) ** kept
    xi.flags.writeable = False
    weights.flags.writeable = False
    return xi, weights


def displacement_distribution(x, beta, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Support and probabilities of Delta under independent dropout.

    Built by doubling over coordinates so memory stays O(2^d) floats.
    """
    c = np.asarray(x, dtype=float) * np.asarray(beta, dtype=float)
    if c.size > MAX_EXACT_DIM:
        raise ValueError(f"exact enumeration refused for d={c.size} > {MAX_EXACT_DIM}")
    keep_shift = delta / (1.0 - delta)
    values = np.zeros(1)
    weights = np.ones(1)
    for cj in c:
        values = np.concatenate([values - cj, values + cj * keep_shift])
        weights = np.concatenate([weights * delta, weights * (1.0 - delta)])
    return values, weights


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    # stream identity depends on the chunk index only, never on the worker
    ss = np.random.SeedSequence(seed, spawn_key=(chunk,))
    return np.random.Generator(np.random.Philox(ss))


def mc_mean(draw_fn, n_draws: int, seed: int, workers: int = 1,
            chunk: int = MC_CHUNK) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``draw_fn(rng, size)``.

    Draws are split into fixed-size chunks with their own counter-based
    streams; partial sums are merged in chunk order, so the result does not
    depend on ``workers``.
    """
    if n_draws < 2:
        raise ValueError("need at least two draws for a standard error")
    sizes = [min(chunk, n_draws - s) for s in range(0, n_draws, chunk)]

    def run(i):
        v = np.asarray(draw_fn(_chunk_rng(seed, i), sizes[i]), dtype=float)
        return v.sum(), (v * v).sum()

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    s = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s / n_draws
    var = max(s2 / n_draws - mean * mean, 0.0) * n_draws / (n_draws - 1)
    return mean, math.sqrt(var / n_draws)


def sample_masks(rng: np.random.Generator, shape: tuple[int, ...], d: int,
                 cfg: DropoutConfig) -> np.ndarray:
    """Random multipliers xi of shape ``shape + (d,)`` for the given law.

    Scalar laws draw one Bernoulli per leading index and broadcast it over
    the d coordinates.
    """
    keep = 1.0 - cfg.delta
    if cfg.model is NoiseModel.INDEPENDENT:
        return (rng.random(shape + (d,)) < keep) / keep
    y = rng.random(shape + (1,)) < keep
    if cfg.model is NoiseModel.SCALAR:
        xi = np.where(y, cfg.scale, 1.0)
    else:
        xi = np.where(y, cfg.scale, 0.0)
    return np.broadcast_to(xi, shape + (d,)).copy()


def _resolve_method(d: int, method: str) -> str:
    if method == "auto":
        return "exact" if d <= MAX_EXACT_DIM else "mc"
    if method == "exact" and d > MAX_EXACT_DIM:
        raise ValueError(f"exact enumeration refused for d={d} > {MAX_EXACT_DIM}")
    if method not in ("exact", "mc"):
        raise ValueError(f"unknown method {method!r}")
    return method


def coordinate_moment(m: int, x, beta, cfg: DropoutConfig, *, method: str = "auto",
                      n_draws: int = DEFAULT_MC_DRAWS, seed: int = DEFAULT_SEED,
                      workers: int = 1, return_stderr: bool = False):
    """E[Delta^m] under independent per-coordinate dropout.

    Exact over all masks for d <= 22; otherwise (or with ``method="mc"``)
    a seeded Monte Carlo estimate.  With ``return_stderr`` the result is a
    ``(value, stderr)`` pair, stderr being 0 for exact results.
    """
    if m < 1:
        raise ValueError(f"moment order must be >= 1, got {m}")
    if cfg.model is not NoiseModel.INDEPENDENT:
        raise ValueError("coordinate_moment needs the independent noise model")
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if _resolve_method(x.size, method) == "exact":
        values, weights = displacement_distribution(x, beta, cfg.delta)
        out = (float(np.dot(weights, values**m)), 0.0)
    else:
        c = x * beta
        out = mc_mean(lambda rng, k: (((rng.random((k, c.size)) < 1 - cfg.delta)
                                       / (1 - cfg.delta) - 1.0) @ c) ** m,
                      n_draws, seed, workers)
    return out if return_stderr else out[0]


def displacement_moment(m: int, x, beta, cfg: DropoutConfig, **kw) -> float:
    """E[Delta^m] for whichever law ``cfg`` selects."""
    if cfg.is_scalar:
        return scalar_moment(m, float(np.dot(x, beta)), cfg)
    return coordinate_moment(m, x, beta, cfg, **kw)


def first_moment_term(x, beta, cfg: DropoutConfig, partition=LOGISTIC) -> float:
    """Linear Taylor term A'(x . beta) E[Delta]; zero for centred laws."""
    A = get_partition(partition)
    xb = float(np.dot(x, beta))
    return float(A.derivative(1, xb)) * displacement_moment(1, x, beta, cfg)


def exact_regularizer(x, beta, cfg: DropoutConfig, partition=LOGISTIC, *,
                      method: str = "auto", n_draws: int = DEFAULT_MC_DRAWS,
                      seed: int = DEFAULT_SEED, workers: int = 1,
                      return_stderr: bool = False):
    """R(beta) = E[A(x~ . beta)] - A(x . beta), without any Taylor expansion."""
    A = get_partition(partition)
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    xb = float(np.dot(x, beta))
    base = float(A.value(xb))
    d = cfg.delta
    if cfg.model is NoiseModel.SCALAR:
        out = ((1 - d) * (float(A.value(xb / (1 - d))) - base), 0.0)
    elif cfg.model is NoiseModel.SCALAR_DROP_ALL:
        out = (d * float(A.value(0.0)) + (1 - d) * float(A.value(xb / (1 - d))) - base, 0.0)
    elif _resolve_method(x.size, method) == "exact":
        values, weights = displacement_distribution(x, beta, d)
        out = (float(np.dot(weights, A.value(xb + values))) - base, 0.0)
    else:
        c = x * beta
        mean, se = mc_mean(lambda rng, k: A.value(((rng.random((k, c.size)) < 1 - d)
                                                   / (1 - d)) @ c),
                           n_draws, seed, workers)
        out = (mean - base, se)
    return out if return_stderr else out[0]


def variance_r2(x, beta, cfg: DropoutConfig, partition=LOGISTIC) -> float:
    """Quadratic approximation 1/2 A''(x . beta) E[Delta^2]."""
    A = get_partition(partition)
    xb = float(np.dot(x, beta))
    return 0.5 * float(A.derivative(2, xb)) * displacement_moment(2, x, beta, cfg)
