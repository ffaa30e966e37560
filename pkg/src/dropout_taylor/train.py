"""Full-batch gradient-descent training under dropout-derived penalties.

Binary models minimise  (1/n) sum_i [A(x_i . beta) - y_i x_i . beta] + penalty(beta)
for a log-partition A (logistic by default, quadratic for linear regression).
Multiclass models use a single softmax layer with weights of shape (d, q).

Penalties:

=============  =====================================================
``none``       nothing
``l2``         lam * ||beta||^2
``r2``         1/2 A''(x . beta) E[Delta^2] per example
``rk``         sum_{j=2..k} A^(j)(x . beta) E[Delta^j] / j! per example
``exact``      E[A(x~ . beta)] - A(x . beta) per example
``mc-dropout`` the loss is evaluated on freshly sampled dropout inputs
=============  =====================================================

Per-example penalties are summed and, like the data loss, divided by n
unless ``normalize=False``.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp, softmax

from .noise import (
    MAX_EXACT_DIM,
    DropoutConfig,
    Example,
    NoiseModel,
    enumerate_masks,
    sample_masks,
)
from .partition import LOGISTIC, get_partition
from .taylor import CLAIMED_RADIUS, feature_scale_bound

__all__ = [
    "Dataset",
    "make_synthetic",
    "Penalty",
    "TrainConfig",
    "EpochRecord",
    "TrainRun",
    "glm_loss",
    "data_loss_grad",
    "penalty_value_grad",
    "objective",
    "train",
    "compare_regimes",
    "Comparison",
    "bounded_weight_experiment",
    "BoundedWeightReport",
]

DEFAULT_SEED = 7
ABORT_OBJECTIVE = 1e12
MC_PENALTY_MASKS = 4096


@dataclass
class Dataset:
    """Design matrix ``X`` (n, d) and labels ``y``.

    ``y`` holds 0/1 labels for binary data, class indices 0..q-1 for
    multiclass data, and real responses when used with the quadratic
    partition.
    """

    X: np.ndarray
    y: np.ndarray
    kind: str = "binary"
    q: int = 2
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.X.shape[0] != self.y.shape[0] or self.X.shape[0] < 1:
            raise ValueError("X and y must have the same, non-zero number of rows")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features must be finite")
        if self.kind not in ("binary", "multiclass"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "multiclass" and not np.all(np.isin(self.y, np.arange(self.q))):
            raise ValueError(f"multiclass labels must be in 0..{self.q - 1}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def examples(self) -> list[Example]:
        if self.kind == "multiclass":
            onehot = np.eye(self.q)[self.y.astype(int)]
            return [Example(x, t) for x, t in zip(self.X, onehot)]
        return [Example(x, t) for x, t in zip(self.X, self.y)]

    def with_features(self, X, note: str | None = None) -> "Dataset":
        prov = dict(self.provenance)
        if note:
            prov["transform"] = note
        return replace(self, X=np.asarray(X, dtype=float), provenance=prov)

    def to_csv(self, path) -> None:
        """Write ``x1,...,xd,y`` with a header."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{j + 1}" for j in range(self.d)] + ["y"])
            for x, t in zip(self.X, self.y):
                label = str(int(t)) if float(t).is_integer() else f"{t:.17g}"
                w.writerow([f"{v:.17g}" for v in x] + [label])

    @classmethod
    def from_csv(cls, path, kind: str = "binary", q: int | None = None) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], [r for r in rows[1:] if r]
        if not header or header[-1] != "y":
            raise ValueError(f"{path}: header must be x1,...,xd,y")
        data = np.array([[float(v) for v in r] for r in body])
        y = data[:, -1]
        if kind == "multiclass" and q is None:
            q = int(y.max()) + 1
        return cls(data[:, :-1], y, kind=kind, q=q or 2, provenance={"csv": str(path)})


def make_synthetic(n: int = 200, d: int = 2, seed: int = DEFAULT_SEED, *,
                   separable: bool = False, margin: float = 0.0, signal: float = 2.0,
                   q: int | None = None) -> Dataset:
    """Standard-normal features with labels from a random ground-truth model.

    The ground truth is ``signal`` times a uniform draw from the unit sphere
    (one per class for ``q`` > 2).  Labels are sampled from the model, or
    for ``separable=True`` thresholded, dropping points closer than
    ``margin`` to the boundary.
    """
    rng = np.random.default_rng(seed)
    classes = q or 2
    multiclass = classes > 2
    cols = classes if multiclass else 1
    truth = rng.standard_normal((d, cols))
    truth *= signal / np.linalg.norm(truth, axis=0, keepdims=True)
    X_parts, y_parts, have = [], [], 0
    while have < n:
        X = rng.standard_normal((2 * n, d))
        logits = X @ truth
        if multiclass:
            if separable:
                top = np.sort(logits, axis=1)
                ok = top[:, -1] - top[:, -2] >= margin
                y = logits.argmax(axis=1)
            else:
                probs = softmax(logits, axis=1)
                u = rng.random((2 * n, 1))
                y = (u > probs.cumsum(axis=1)).sum(axis=1)
                ok = np.ones(2 * n, bool)
        else:
            z = logits[:, 0]
            if separable:
                ok = np.abs(z) >= margin
                y = (z > 0).astype(float)
            else:
                y = (rng.random(2 * n) < 1.0 / (1.0 + np.exp(-z))).astype(float)
                ok = np.ones(2 * n, bool)
        X_parts.append(X[ok])
        y_parts.append(y[ok])
        have += int(ok.sum())
    X = np.concatenate(X_parts)[:n]
    y = np.concatenate(y_parts)[:n]
    prov = {"generator": "synthetic", "seed": seed, "n": n, "d": d, "separable": separable,
            "margin": margin, "signal": signal, "beta_true": truth.squeeze().tolist()}
    if multiclass:
        return Dataset(X, y, kind="multiclass", q=classes, provenance=prov)
    return Dataset(X, y, provenance=prov)


PENALTY_KINDS = ("none", "l2", "r2", "rk", "exact", "mc-dropout")


@dataclass(frozen=True)
class Penalty:
    kind: str = "none"
    lam: float = 0.0
    k: int = 2
    samples: int = 8

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"unknown penalty {self.kind!r}; expected one of {PENALTY_KINDS}")
        if self.lam < 0 or self.k < 2 or self.samples < 1:
            raise ValueError("need lam >= 0, k >= 2 and samples >= 1")

    @property
    def label(self) -> str:
        if self.kind == "l2":
            return f"l2(lam={self.lam:g})"
        if self.kind == "rk":
            return f"rk(k={self.k})"
        if self.kind == "mc-dropout":
            return f"mc-dropout(samples={self.samples})"
        return self.kind


@dataclass(frozen=True)
class TrainConfig:
    penalty: Penalty = Penalty()
    dropout: DropoutConfig = DropoutConfig(0.5, NoiseModel.INDEPENDENT)
    lr: float = 0.5
    epochs: int = 200
    seed: int = DEFAULT_SEED
    cap: float | None = None
    normalize: bool = True
    partition: str = "logistic"
    shared_masks: bool = False


class EpochRecord(NamedTuple):
    epoch: int
    loss: float
    penalty: float
    beta_norm: float
    max_xb: float
    frac_B_gt_2pi: float


@dataclass
class TrainRun:
    config: TrainConfig
    dataset: Dataset
    trace: list[EpochRecord] = field(default_factory=list)
    beta: np.ndarray | None = None
    aborted: bool = False
    abort_reason: str = ""

    @property
    def final_loss(self) -> float:
        return self.trace[-1].loss if self.trace else math.nan


def _epoch_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def glm_loss(beta, ex: Example, partition=LOGISTIC) -> float:
    """Negative log-likelihood of one example.

    Binary: A(x . beta) - y x . beta.  Multiclass (``beta`` of shape (d, q),
    one-hot ``y``): softmax cross-entropy.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 2:
        z = ex.x @ beta
        return float(logsumexp(z) - np.dot(np.asarray(ex.y, dtype=float), z))
    A = get_partition(partition)
    z = float(np.dot(ex.x, beta))
    return float(A.value(z)) - float(ex.y) * z


def _norm(ds: Dataset, cfg: TrainConfig) -> float:
    return 1.0 / ds.n if cfg.normalize else 1.0


def data_loss_grad(beta, ds: Dataset, cfg: TrainConfig, X=None):
    """Clean data loss and its gradient (``X`` overrides the features)."""
    X = ds.X if X is None else X
    c = _norm(ds, cfg)
    if ds.kind == "multiclass":
        Z = X @ beta
        Y = np.eye(ds.q)[ds.y.astype(int)]
        loss = np.sum(logsumexp(Z, axis=1) - np.sum(Y * Z, axis=1))
        return c * loss, c * (X.T @ (softmax(Z, axis=1) - Y))
    A = get_partition(cfg.partition)
    z = X @ beta
    loss = np.sum(A.value(z) - ds.y * z)
    return c * loss, c * (X.T @ (A.derivative(1, z) - ds.y))


def _scalar_taylor(z, order: int, cfg: DropoutConfig, A):
    # per-example value and d/dz of sum_{j=2..order} A^(j)(z) a_j z^j / j!
    val = np.zeros_like(z)
    dz = np.zeros_like(z)
    nxt = A.derivative(2, z)
    for j in range(2, order + 1):
        cur, nxt = nxt, A.derivative(j + 1, z)
        a = cfg.scalar_coefficients(j) / math.factorial(j)
        val += cur * a * z**j
        dz += a * (nxt * z**j + cur * j * z ** (j - 1))
    return val, dz


def _mask_set(ds: Dataset, cfg: TrainConfig):
    d = ds.d
    if d <= min(MAX_EXACT_DIM, 12):
        return enumerate_masks(d, cfg.dropout.delta)
    # common random numbers: one fixed mask set per config seed
    rng = _epoch_rng(cfg.seed, 0xFFFFFFFF)
    xi = sample_masks(rng, (MC_PENALTY_MASKS,), d, cfg.dropout)
    return xi, np.full(MC_PENALTY_MASKS, 1.0 / MC_PENALTY_MASKS)


def _independent_taylor(beta, ds: Dataset, order: int, cfg: TrainConfig, A):
    X = ds.X
    xi, w = _mask_set(ds, cfg)
    shift = xi - 1.0                      # (m, d)
    U = (X * beta) @ shift.T              # (n, m) displacements
    z = X @ beta
    val = np.zeros(ds.n)
    grad = np.zeros_like(X)
    Upow = U.copy()                       # U^(j-1), starting at j = 2
    nxt = A.derivative(2, z)
    for j in range(2, order + 1):
        cur, nxt = nxt, A.derivative(j + 1, z)
        moment_grad = j * ((Upow * w) @ shift) * X   # d/dbeta E[U^j]
        Upow = Upow * U
        moment = Upow @ w
        f = 1.0 / math.factorial(j)
        val += f * cur * moment
        grad += f * (nxt[:, None] * moment[:, None] * X + cur[:, None] * moment_grad)
    return val, grad


def _exact_penalty(beta, ds: Dataset, cfg: TrainConfig, A):
    X = ds.X
    z = X @ beta
    drop = cfg.dropout
    if drop.is_scalar:
        keep = 1.0 - drop.delta
        zs = z / keep
        if drop.model is NoiseModel.SCALAR:
            val = keep * (A.value(zs) - A.value(z))
            dz = A.derivative(1, zs) - keep * A.derivative(1, z)
        else:
            val = drop.delta * float(A.value(0.0)) + keep * A.value(zs) - A.value(z)
            dz = A.derivative(1, zs) - A.derivative(1, z)
        return val, dz[:, None] * X
    xi, w = _mask_set(ds, cfg)
    Zt = (X * beta) @ xi.T                 # (n, m) noised inner products
    val = A.value(Zt) @ w - A.value(z)
    grad = ((A.derivative(1, Zt) * w) @ xi) * X - A.derivative(1, z)[:, None] * X
    return val, grad


def _mc_dropout(beta, ds: Dataset, cfg: TrainConfig, samples: int, rng):
    if cfg.dropout.delta == 0.0:
        # degenerate noise: every mask is all ones
        return data_loss_grad(beta, ds, cfg)
    X = ds.X
    if ds.kind == "multiclass":
        per_class = 1 if cfg.shared_masks else ds.q
        xi = sample_masks(rng, (samples, ds.n, per_class), ds.d, cfg.dropout)
        Xt = X[None, :, None, :] * xi                       # (s, n, q|1, d)
        Z = np.einsum("snqd,dq->snq", np.broadcast_to(Xt, (samples, ds.n, ds.q, ds.d)), beta)
        Y = np.eye(ds.q)[ds.y.astype(int)]
        loss = np.sum(logsumexp(Z, axis=2) - np.sum(Y * Z, axis=2)) / samples
        R = softmax(Z, axis=2) - Y
        grad = np.einsum("snq,snqd->dq", R, np.broadcast_to(Xt, (samples, ds.n, ds.q, ds.d)))
        c = _norm(ds, cfg)
        return c * loss, c * grad / samples
    A = get_partition(cfg.partition)
    xi = sample_masks(rng, (samples, ds.n), ds.d, cfg.dropout)
    Xt = X[None] * xi
    z = Xt @ beta
    loss = np.sum(A.value(z) - ds.y * z) / samples
    grad = np.einsum("sn,snd->d", A.derivative(1, z) - ds.y, Xt) / samples
    c = _norm(ds, cfg)
    return c * loss, c * grad


def penalty_value_grad(beta, ds: Dataset, cfg: TrainConfig, rng=None):
    """Penalty value and gradient at ``beta``.

    For ``mc-dropout`` the "penalty" is the sampled noisy loss minus the clean
    loss, so that loss + penalty is the Monte Carlo dropout objective.
    """
    pen = cfg.penalty
    beta = np.asarray(beta, dtype=float)
    if pen.kind == "none":
        return 0.0, np.zeros_like(beta)
    if pen.kind == "l2":
        return pen.lam * float(np.sum(beta * beta)), 2.0 * pen.lam * beta
    if pen.kind == "mc-dropout":
        rng = rng if rng is not None else _epoch_rng(cfg.seed, 0)
        noisy, g_noisy = _mc_dropout(beta, ds, cfg, pen.samples, rng)
        clean, g_clean = data_loss_grad(beta, ds, cfg)
        return noisy - clean, g_noisy - g_clean
    if ds.kind == "multiclass":
        raise ValueError(f"penalty {pen.kind!r} is defined for binary models only")
    A = get_partition(cfg.partition)
    c = _norm(ds, cfg)
    if pen.kind == "exact":
        val, grad = _exact_penalty(beta, ds, cfg, A)
    else:
        order = 2 if pen.kind == "r2" else pen.k
        if cfg.dropout.is_scalar:
            val, dz = _scalar_taylor(ds.X @ beta, order, cfg.dropout, A)
            grad = dz[:, None] * ds.X
        else:
            val, grad = _independent_taylor(beta, ds, order, cfg, A)
    return c * float(np.sum(val)), c * grad.sum(axis=0)


def objective(beta, ds: Dataset, cfg: TrainConfig, rng=None):
    """Training objective (data loss + penalty) and its gradient."""
    loss, g = data_loss_grad(beta, ds, cfg)
    pen, gp = penalty_value_grad(beta, ds, cfg, rng)
    return loss + pen, g + gp


def _record(epoch, beta, ds, cfg, loss, pen) -> EpochRecord:
    Z = ds.X @ beta
    max_xb = float(np.max(np.abs(Z)))
    delta = cfg.dropout.delta
    B = np.abs(Z) * delta / (1.0 - delta)
    if B.ndim == 2:
        B = B.max(axis=1)
    return EpochRecord(epoch, float(loss), float(pen), float(np.linalg.norm(beta)), max_xb,
                       float(np.mean(B > CLAIMED_RADIUS)))


def train(ds: Dataset, cfg: TrainConfig) -> TrainRun:
    """Run full-batch gradient descent from beta = 0.

    Trace entry ``e`` (1-based) describes the parameters after ``e``
    updates.  Randomness (only used by ``mc-dropout``) comes from one
    counter-based stream per evaluation index, derived from ``cfg.seed``.
    Runs whose objective leaves [-1e12, 1e12] or whose parameters turn
    non-finite are stopped and marked ``aborted``.
    """
    shape = (ds.d, ds.q) if ds.kind == "multiclass" else (ds.d,)
    beta = np.zeros(shape)
    run = TrainRun(cfg, ds)
    cap = cfg.cap if cfg.cap is not None and math.isfinite(cfg.cap) else None

    def evaluate(b, index):
        loss, g = data_loss_grad(b, ds, cfg)
        pen, gp = penalty_value_grad(b, ds, cfg, _epoch_rng(cfg.seed, index))
        return loss, pen, g + gp

    with np.errstate(over="ignore", invalid="ignore"):
        loss, pen, grad = evaluate(beta, 0)
        for epoch in range(1, cfg.epochs + 1):
            beta = beta - cfg.lr * grad
            if cap is not None:
                beta = np.clip(beta, -cap, cap)
            if not np.all(np.isfinite(beta)):
                run.aborted, run.abort_reason = True, f"non-finite parameters at epoch {epoch}"
                break
            loss, pen, grad = evaluate(beta, epoch)
            total = loss + pen
            if not math.isfinite(total) or abs(total) > ABORT_OBJECTIVE:
                run.aborted = True
                run.abort_reason = f"objective {total:.3g} out of range at epoch {epoch}"
                break
            run.trace.append(_record(epoch, beta, ds, cfg, loss, pen))
    run.beta = beta
    return run


@dataclass
class Comparison:
    regimes: list[str]
    runs: list[TrainRun]
    rows: list[dict]
    pairwise: list[dict]
    reference: str


def _cos(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0 if na == nb else 0.0
    return float(np.dot(a.ravel(), b.ravel()) / (na * nb))


DEFAULT_REGIMES = (
    Penalty("none"), Penalty("l2", lam=0.01), Penalty("r2"), Penalty("rk", k=8),
    Penalty("exact"), Penalty("mc-dropout", samples=8),
)


def compare_regimes(ds: Dataset, base: TrainConfig = TrainConfig(),
                    regimes=DEFAULT_REGIMES, reference: str = "exact",
                    workers: int = 1) -> Comparison:
    """Train one model per penalty and compare the final parameter vectors.

    Every run shares ``ds`` and the seed in ``base``; only the penalty
    differs.  Aborted runs stay in the table with ``aborted=True``.
    """
    cfgs = [replace(base, penalty=p) for p in regimes]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(lambda c: train(ds, c), cfgs))
    else:
        runs = [train(ds, c) for c in cfgs]
    names = [p.kind for p in regimes]
    ref = runs[names.index(reference)] if reference in names else None
    rows = []
    for name, run in zip(names, runs):
        ok = ref is not None and not ref.aborted and not run.aborted
        rows.append({
            "regime": name,
            "label": run.config.penalty.label,
            "final_loss": run.final_loss,
            "beta": np.asarray(run.beta).ravel().tolist(),
            "cos_sim_vs_exact": _cos(run.beta, ref.beta) if ok else math.nan,
            "l2_dist_vs_exact": float(np.linalg.norm(run.beta - ref.beta)) if ok else math.nan,
            "aborted": run.aborted,
            "frac_B_gt_2pi": run.trace[-1].frac_B_gt_2pi if run.trace else math.nan,
        })
    pairwise = []
    for i, a in enumerate(runs):
        for j in range(i + 1, len(runs)):
            b = runs[j]
            pairwise.append({
                "regime_a": names[i], "regime_b": names[j],
                "cos_sim": _cos(a.beta, b.beta),
                "l2_dist": float(np.linalg.norm(a.beta - b.beta)),
            })
    return Comparison(names, runs, rows, pairwise, reference)


@dataclass
class BoundedWeightReport:
    cap: float
    scale_factor: float
    constrained: TrainRun
    unconstrained: TrainRun

    @property
    def max_xb_per_epoch(self) -> list[float]:
        return [r.max_xb for r in self.constrained.trace]

    @property
    def bound_held(self) -> bool:
        return all(v < CLAIMED_RADIUS for v in self.max_xb_per_epoch)

    @property
    def loss_gap(self) -> float:
        return self.constrained.final_loss - self.unconstrained.final_loss

    def to_dict(self) -> dict:
        return {
            "cap": self.cap,
            "scale_factor": self.scale_factor,
            "epochs": self.constrained.config.epochs,
            "constrained_final_loss": self.constrained.final_loss,
            "unconstrained_final_loss": self.unconstrained.final_loss,
            "loss_gap": self.loss_gap,
            "unconstrained_strictly_lower": self.loss_gap > 0,
            "max_abs_xb_constrained": max(self.max_xb_per_epoch, default=0.0),
            "max_abs_xb_unconstrained": max((r.max_xb for r in self.unconstrained.trace),
                                            default=0.0),
            "bound": CLAIMED_RADIUS,
            "bound_held_every_epoch": self.bound_held,
            "constrained_beta": self.constrained.beta.tolist(),
            "unconstrained_beta": self.unconstrained.beta.tolist(),
        }


def bounded_weight_experiment(ds: Dataset, cap: float, base: TrainConfig = TrainConfig(),
                              prescale: bool = True) -> BoundedWeightReport:
    """Compare a hard-capped run (||beta||_inf <= cap) with an unconstrained one.

    With ``prescale`` the features are first scaled so that max |x_ij| * cap
    equals 2 pi / d, which keeps every |x_i . beta| below 2 pi once the cap
    holds.  Both runs see the same (scaled) data, seed and epochs; the
    penalty in ``base`` is used as is (normally ``none``).
    """
    if not cap > 0:
        raise ValueError(f"cap must be positive, got {cap}")
    factor = 1.0
    if prescale and math.isfinite(cap):
        scaled = feature_scale_bound(ds.X, cap)
        peak = np.max(np.abs(ds.X))
        factor = float(np.max(np.abs(scaled)) / peak) if peak else 1.0
        ds = ds.with_features(scaled, note=f"feature_scale_bound(cap={cap:g})")
    constrained = train(ds, replace(base, cap=cap))
    unconstrained = train(ds, replace(base, cap=None))
    return BoundedWeightReport(cap, factor, constrained, unconstrained)
