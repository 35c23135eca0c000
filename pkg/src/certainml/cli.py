"""Command-line front end: check | acm | oracle | impute.

Exit codes: 0 exists / acm_exists, 3 not_exists / not_found, 4 unknown,
2 usage or data error. Reports are JSON on stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time

import numpy as np

from . import __version__
from .acm import AcmConfig, learn_acm_linreg_exact, learn_acm_sampled
from .baselines import feature_means
from .certain_kernel_svm import (
    check_certain_arccos_svm,
    check_certain_poly_svm,
    check_certain_rbf_svm,
)
from .certain_linear_svm import check_certain_linear_svm
from .certain_linreg import check_certain_linreg
from .dataset import (
    DEFAULT_NULL_MARKERS,
    POLICIES,
    derive_bounds,
    load_csv,
    missing_factor,
    missing_sets,
)
from .oracle import GridSpec, oracle_certain
from .trainers import DualModel, LinearModel, SolverError, train_linear_svm, train_ols

log = logging.getLogger("certainml")

EXIT = {"exists": 0, "acm_exists": 0, "not_exists": 3, "not_found": 3, "unknown": 4}
USAGE_ERROR = 2
CHECK_MODELS = ("linreg", "linsvm", "poly-svm", "rbf-svm", "arccos-svm")
ORACLE_MODELS = {"linreg": "linreg", "linsvm": "linsvm", "poly-svm": "poly", "rbf-svm": "rbf",
                 "arccos-svm": "arccos"}


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser):
    p.add_argument("data", help="CSV file with a header row")
    p.add_argument("--label", required=True, help="label column name")
    p.add_argument("--task", choices=("regression", "classification"),
                   help="default: regression for linreg, classification otherwise")
    p.add_argument("--positive-label", help="label value mapped to +1 (others to -1)")
    p.add_argument("--null-markers", help="comma-separated null markers (default: '',na,null,?,nan)")
    p.add_argument("--bounds", help='JSON file {"feature": [lo, hi]} for repair intervals')
    p.add_argument("--bounds-policy", choices=POLICIES, help="how to bound features not in --bounds")
    p.add_argument("--C", type=float, default=1.0, dest="C")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--coef0", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-timings", action="store_true", help="omit timings (byte-stable output)")
    out = p.add_mutually_exclusive_group()
    out.add_argument("--json", action="store_true", help="print the JSON report (default)")
    out.add_argument("--quiet", action="store_true", help="print nothing; exit code only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="certainml",
                                     description="Decide whether imputation is needed before training.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="test for a certain model")
    p.add_argument("--model", choices=CHECK_MODELS, required=True)
    _common(p)

    p = sub.add_parser("acm", help="learn an approximately certain model")
    p.add_argument("--model", choices=("linreg", "linsvm"), required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--exact", action="store_true", help="per-example learner (linreg only)")
    _common(p)

    p = sub.add_parser("oracle", help="brute-force certain-model test on a repair grid")
    p.add_argument("--model", choices=CHECK_MODELS, required=True)
    p.add_argument("--grid-points", type=int, default=21)
    _common(p)

    p = sub.add_parser("impute", help="write a complete CSV by a simple strategy")
    p.add_argument("data")
    p.add_argument("--label", required=True)
    p.add_argument("--strategy", choices=("mean", "drop"), required=True)
    p.add_argument("--null-markers")
    p.add_argument("--output", "-o", help="output path (default stdout)")
    return parser


# --- helpers --------------------------------------------------------------------


def _markers(args):
    if args.null_markers is None:
        return DEFAULT_NULL_MARKERS
    return frozenset(m.strip().lower() for m in args.null_markers.split(","))


def _load(args):
    task = args.task or ("regression" if args.model == "linreg" else "classification")
    return load_csv(args.data, args.label, _markers(args), task, args.positive_label)


def _bounds(args, ds, default_policy):
    policy = args.bounds_policy or default_policy
    if args.bounds and policy == "unbounded" and args.bounds_policy is None:
        policy = "user-file"
    return derive_bounds(ds, policy, args.bounds)


def _profile(args, ds):
    rows, cols = missing_sets(ds)
    return {"path": args.data, "n": ds.n, "d": ds.d, "missing_factor": missing_factor(ds),
            "incomplete_examples": len(rows), "incomplete_features": len(cols),
            "missing_cells": ds.n_missing, "task": ds.task}


def _command(args, argv):
    params = {k: getattr(args, k) for k in ("model", "C", "gamma", "degree", "coef0", "seed", "epsilon",
                                            "samples", "grid_points", "exact") if hasattr(args, k)}
    return {"name": args.command, "argv": list(argv), "params": params}


def _linear_block(model: LinearModel, ds):
    return {"kind": "linear", "feature_names": list(ds.feature_names),
            "coefficients": [float(v) for v in model.w], "training_loss": float(model.training_loss)}


def _dual_block(model: DualModel, ds):
    rows = np.flatnonzero(~ds.mask.any(axis=1))
    sv = model.support
    return {"kind": "dual", "kernel": model.kernel.to_json(), "C": model.C,
            "support": [int(rows[s]) for s in sv], "alphas": [float(model.alphas[s]) for s in sv],
            "labels": [float(model.y[s]) for s in sv]}


def _reference_train_ms(args, ds):
    """Time to train one model of the same kind on the mean-imputed data."""
    X = ds.values.copy()
    r, c = np.nonzero(ds.mask)
    X[r, c] = feature_means(ds, fallback=0.0)[c]
    t0 = time.perf_counter()
    if args.model == "linreg":
        train_ols(X, ds.labels)
    else:
        train_linear_svm(X, ds.labels, args.C)
    return (time.perf_counter() - t0) * 1e3


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _report(args, argv, ds, verdict, details, model, train_ms, check_ms):
    timings = None
    if not args.no_timings:
        timings = {"train_ms": train_ms, "check_ms": check_ms}
    return _jsonable({
        "tool": "certainml", "version": __version__,
        "command": _command(args, argv),
        "dataset": _profile(args, ds),
        "verdict": {"value": verdict, **details},
        "model": model,
        "timings": timings,
    })


# --- commands --------------------------------------------------------------------


def cmd_check(args, argv):
    ds = _load(args)
    t0 = time.perf_counter()
    if args.model == "linreg":
        rep = check_certain_linreg(ds)
    elif args.model == "linsvm":
        rep = check_certain_linear_svm(ds, args.C)
    elif args.model == "poly-svm":
        rep = check_certain_poly_svm(ds, args.degree, args.coef0, args.C)
    elif args.model == "rbf-svm":
        rep = check_certain_rbf_svm(ds, args.gamma, args.C, _bounds(args, ds, "observed-min-max"))
    else:
        rep = check_certain_arccos_svm(ds, args.C, _bounds(args, ds, "unbounded"))
    check_ms = (time.perf_counter() - t0) * 1e3

    if args.model in ("linreg", "linsvm"):
        model = _linear_block(rep.model, ds) if rep.model is not None else None
        details = {"witness": rep.witness.to_json() if rep.witness else None, "diagnostics": rep.diagnostics}
        train_ms = _reference_train_ms(args, ds) if not args.no_timings else None
    else:
        model = _dual_block(rep.model, ds) if rep.model is not None else None
        details = {"witness": None, "lower_bounds": {str(k): v for k, v in rep.lwb.items()},
                   "diagnostics": rep.diagnostics}
        train_ms = None
    return rep.verdict, _report(args, argv, ds, rep.verdict, details, model, train_ms, check_ms)


def cmd_acm(args, argv):
    ds = _load(args)
    if args.exact and args.model != "linreg":
        raise UsageError("--exact is only available for --model linreg")
    bounds = _bounds(args, ds, "observed-min-max")
    cfg = AcmConfig(epsilon=args.epsilon, samples=args.samples, seed=args.seed, threads=args.threads)
    t0 = time.perf_counter()
    if args.exact:
        rep = learn_acm_linreg_exact(ds, bounds, cfg)
    else:
        rep = learn_acm_sampled(ds, bounds, args.model, args.C, cfg)
    check_ms = (time.perf_counter() - t0) * 1e3
    details = {"g_value": rep.g_value, "g_kind": rep.g_kind, "epsilon": rep.epsilon,
               "diagnostics": rep.diagnostics}
    train_ms = _reference_train_ms(args, ds) if not args.no_timings else None
    return rep.verdict, _report(args, argv, ds, rep.verdict, details, _linear_block(rep.model, ds),
                                train_ms, check_ms)


def cmd_oracle(args, argv):
    ds = _load(args)
    kind = ORACLE_MODELS[args.model]
    bounds = _bounds(args, ds, "observed-min-max")
    params = {"C": args.C, "gamma": args.gamma, "degree": args.degree, "coef0": args.coef0}
    t0 = time.perf_counter()
    res = oracle_certain(ds, kind, params, GridSpec(args.grid_points, bounds), threads=args.threads)
    check_ms = (time.perf_counter() - t0) * 1e3
    verdict = "exists" if res.exists else "not_exists"
    witness = None
    if res.witness is not None:
        witness = {"reason": "model optimal on the first grid repair is suboptimal on another",
                   "repairs": [r.to_json() for r in res.witness]}
    details = {"witness": witness, "worst_gap": res.worst_gap, "repairs_checked": res.repairs_checked,
               "diagnostics": res.diagnostics}
    return verdict, _report(args, argv, ds, verdict, details, None, None, check_ms)


def cmd_impute(args, out):
    """Rewrite the CSV with missing cells filled (mean) or incomplete rows removed (drop).

    Observed cells are copied through verbatim.
    """
    markers = _markers(args)
    ds = load_csv(args.data, args.label, markers)
    means = feature_means(ds) if args.strategy == "mean" else None
    with open(args.data, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        li = [h.strip() for h in header].index(args.label)
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            if rec[li].strip().lower() in markers:
                continue
            feats = [k for k in range(len(rec)) if k != li]
            null = [rec[k].strip().lower() in markers for k in feats]
            if args.strategy == "drop":
                if not any(null):
                    writer.writerow(rec)
                continue
            row = list(rec)
            for j, (k, is_null) in enumerate(zip(feats, null)):
                if is_null:
                    row[k] = repr(float(means[j]))
            writer.writerow(row)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.command == "impute":
            if args.output:
                with open(args.output, "w", newline="", encoding="utf-8") as fh:
                    return cmd_impute(args, fh)
            return cmd_impute(args, sys.stdout)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        handler = {"check": cmd_check, "acm": cmd_acm, "oracle": cmd_oracle}[args.command]
        verdict, report = handler(args, argv)
    except (UsageError, ValueError, OSError, SolverError) as exc:
        print(f"certainml: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if not args.quiet:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT[verdict]
