"""Command-line entry point: ``python -m dropout_taylor <subcommand>``.

Every subcommand writes its outputs to ``--out`` (default ``./out``) next to
a JSON manifest holding the resolved configuration and the SHA-256 of each
output.  ``rerun`` replays a manifest and checks the bytes match.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import mpmath
import numpy as np

from . import __version__
from .combinatorics import DomainError
from .noise import DropoutConfig, NoiseModel
from .partition import PrecisionExhausted, derivative_poly, derivative_recurrence, eval_derivative
from .taylor import CLAIMED_RADIUS, diagnose_series, radius_report
from .train import (
    PENALTY_KINDS,
    Dataset,
    Penalty,
    TrainConfig,
    bounded_weight_experiment,
    compare_regimes,
    make_synthetic,
    train,
)

DEFAULT_SEED = 7
TRACE_HEADER = ["epoch", "loss", "penalty", "beta_norm", "max_xb", "frac_B_gt_2pi"]


class VerificationFailed(Exception):
    pass


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))  # shortest string that round-trips


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


# --- subcommands -----------------------------------------------------------
# each returns ({filename: text}, exit_status)


def cmd_derivatives(args):
    rows, bad = [], False
    for k in args.k:
        if k < 1:
            raise DomainError(f"--k must be >= 1, got {k}")
        poly = derivative_poly(k)
        for z in args.z:
            value = eval_derivative(poly, z).value
            with mpmath.workprec(256 + 8 * k):
                oracle = mpmath.diff(lambda t: mpmath.log1p(mpmath.exp(t)), mpmath.mpf(z), k)
            diff = abs(value - oracle)
            if args.check_oracle:
                # closed form vs the polynomial recurrence, coefficient for coefficient
                if poly.coeffs != derivative_recurrence(k).coeffs:
                    bad = True
                # the oracle's own error floor sits far below 1e-30
                if diff > 1e-6 * abs(oracle) + 1e-30:
                    bad = True
            rows.append((k, z, float(value), float(oracle), float(diff)))
    text = csv_text(["k", "z", "value", "oracle_value", "abs_diff"], rows)
    return {"derivatives.csv": text}, 1 if bad else 0


def cmd_radius(args):
    rows = []
    for z in args.z_grid:
        for delta in args.delta_grid:
            cfg = DropoutConfig(delta, NoiseModel(args.noise_model))
            B = z * delta / (1 - delta)
            try:
                diag = diagnose_series(z, cfg, args.max_order)
            except PrecisionExhausted:
                rows.append((z, delta, B, "PrecisionExhausted", None, None, None))
                continue
            tail = diag.root_test[-(len(diag.root_test) // 2):]
            rows.append((z, delta, B, diag.verdict.kind, diag.limit_or_onset, max(tail),
                         diag.growth_ratio))
    summary = radius_report(tuple(args.z_grid), args.max_order)
    header = ["z", "delta", "B", "verdict", "limit_or_onset", "root_test_tail", "growth_ratio"]
    return {"radius.csv": csv_text(header, rows), "radius_summary.json": json_text(summary)}, 0


def _dataset(args) -> Dataset:
    if args.dataset:
        ds = Dataset.from_csv(args.dataset)
    else:
        d, n = args.synthetic
        ds = make_synthetic(n, d, seed=args.data_seed, separable=args.separable,
                            margin=args.margin)
    if args.feature_scale != 1.0:
        if not (args.feature_scale > 0 and math.isfinite(args.feature_scale)):
            raise ValueError(f"--feature-scale must be positive, got {args.feature_scale}")
        ds = ds.with_features(ds.X * args.feature_scale, note=f"scale={args.feature_scale:g}")
    return ds


def _config(args, penalty: Penalty) -> TrainConfig:
    return TrainConfig(penalty=penalty,
                       dropout=DropoutConfig(args.delta, NoiseModel(args.noise_model)),
                       lr=args.lr, epochs=args.epochs, seed=args.seed, cap=args.cap)


def _penalty(kind: str, args) -> Penalty:
    return Penalty(kind, lam=args.lam if kind == "l2" else 0.0, k=args.k, samples=args.samples)


def _trace_csv(run) -> str:
    return csv_text(TRACE_HEADER, run.trace)


def cmd_train(args):
    ds = _dataset(args)
    run = train(ds, _config(args, _penalty(args.penalty, args)))
    summary = {
        "penalty": run.config.penalty.label,
        "aborted": run.aborted,
        "abort_reason": run.abort_reason,
        "epochs_completed": len(run.trace),
        "final_loss": run.final_loss,
        "beta": np.asarray(run.beta).tolist(),
        "dataset": ds.provenance,
    }
    return {"train_trace.csv": _trace_csv(run), "train_summary.json": json_text(summary)}, 0


def cmd_compare(args):
    ds = _dataset(args)
    regimes = [_penalty(kind, args) for kind in args.regimes]
    comp = compare_regimes(ds, _config(args, Penalty()), regimes, workers=args.workers)
    width = max(len(r["beta"]) for r in comp.rows)
    header = (["regime", "final_loss"] + [f"beta{j + 1}" for j in range(width)]
              + ["cos_sim_vs_exact", "l2_dist_vs_exact", "aborted", "frac_B_gt_2pi"])
    rows = [[r["regime"], r["final_loss"], *r["beta"], r["cos_sim_vs_exact"],
             r["l2_dist_vs_exact"], r["aborted"], r["frac_B_gt_2pi"]] for r in comp.rows]
    pair_rows = [[p["regime_a"], p["regime_b"], p["cos_sim"], p["l2_dist"]] for p in comp.pairwise]
    files = {"compare.csv": csv_text(header, rows),
             "compare_pairwise.csv": csv_text(["regime_a", "regime_b", "cos_sim", "l2_dist"],
                                              pair_rows)}
    for kind, run in zip(comp.regimes, comp.runs):
        files[f"compare_trace_{kind}.csv"] = _trace_csv(run)
    return files, 0


def cmd_bounded(args):
    ds = _dataset(args)
    cap = args.cap if args.cap is not None else 1.0
    report = bounded_weight_experiment(ds, cap, _config(args, Penalty("none")))
    files = {
        "bounded_report.json": json_text(report.to_dict()),
        "bounded_trace_constrained.csv": _trace_csv(report.constrained),
        "bounded_trace_unconstrained.csv": _trace_csv(report.unconstrained),
    }
    return files, 0


COMMANDS = {
    "derivatives": cmd_derivatives,
    "radius": cmd_radius,
    "train": cmd_train,
    "compare": cmd_compare,
    "bounded": cmd_bounded,
}


# --- argument parsing ------------------------------------------------------


def _add_training_flags(p, penalty: bool):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", help="CSV with header x1,...,xd,y")
    src.add_argument("--synthetic", nargs=2, type=int, metavar=("D", "N"), default=[2, 200],
                     help="synthetic data of dimension D with N examples (default 2 200)")
    p.add_argument("--separable", action="store_true", help="threshold synthetic labels")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--data-seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--feature-scale", type=float, default=1.0,
                   help="multiply every feature by this factor before training")
    if penalty:
        p.add_argument("--penalty", choices=PENALTY_KINDS, default="none")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--noise-model", choices=[m.value for m in NoiseModel], default="independent")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--k", type=int, default=8, help="truncation order for the rk penalty")
    p.add_argument("--samples", type=int, default=8, help="masks per epoch for mc-dropout")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--cap", type=float, default=None, help="hard bound on max |beta_j|")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dropout-taylor", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory (default ./out)")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = sub.add_parser("derivatives", help="A^(k)(z) from the closed form vs a numeric oracle")
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--z", type=float, nargs="+", default=[0.0])
    p.add_argument("--check-oracle", action="store_true")
    common(p)

    p = sub.add_parser("radius", help="series diagnostics and root-test radius")
    p.add_argument("--z-grid", type=float, nargs="+", default=[0.0, 1.0, 3.0, 10.0])
    p.add_argument("--delta-grid", type=float, nargs="+", default=[0.0, 0.2, 0.5, 0.9])
    p.add_argument("--max-order", type=int, default=60)
    p.add_argument("--noise-model", choices=["scalar", "scalar-drop-all"], default="scalar")
    common(p)

    p = sub.add_parser("train", help="train one model and write its trace")
    _add_training_flags(p, penalty=True)
    common(p)

    p = sub.add_parser("compare", help="train every regime on one dataset")
    _add_training_flags(p, penalty=False)
    p.add_argument("--regimes", nargs="+", choices=PENALTY_KINDS, default=list(PENALTY_KINDS))
    p.add_argument("--workers", type=int, default=1)
    common(p)

    p = sub.add_parser("bounded", help="capped vs unconstrained training")
    _add_training_flags(p, penalty=False)
    common(p)

    p = sub.add_parser("rerun", help="replay a manifest and verify its outputs")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="output directory (default: a fresh ./out)")
    return parser


def _resolved_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "command")}
    return json.loads(json.dumps(cfg))


def run_command(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files, status = COMMANDS[args.command](args)
    digests = {}
    for name, text in files.items():
        data = text.encode()
        (out / name).write_bytes(data)
        digests[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "subcommand": args.command,
        "config": _resolved_config(args),
        "seed": args.seed,
        "tool_version": __version__,
        "outputs": digests,
        "duration_seconds": round(time.perf_counter() - start, 3),
    }
    (out / f"{args.command}.manifest.json").write_text(json_text(manifest))
    return status


def rerun(manifest_path, out=None) -> int:
    manifest = json.loads(Path(manifest_path).read_text())
    ns = argparse.Namespace(command=manifest["subcommand"], out=out or "out",
                            **manifest["config"])
    status = run_command(ns)
    fresh = json.loads((Path(ns.out) / f"{ns.command}.manifest.json").read_text())
    mismatched = [name for name, digest in manifest["outputs"].items()
                  if fresh["outputs"].get(name) != digest]
    for name in mismatched:
        print(f"mismatch: {name}", file=sys.stderr)
    return 1 if mismatched else status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            return rerun(args.manifest, args.out)
        return run_command(args)
    except (ValueError, DomainError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
