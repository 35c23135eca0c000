"""Certain models for the linear (intercept-free) soft-margin SVM.

Two routes to a certain model:

1. Train on complete examples only. If that model ignores every incomplete
   feature and every incomplete example sits strictly outside the margin on
   its observed part, it is optimal for every repair.
2. Otherwise train on one repair (mean imputation). If that model ignores
   every incomplete feature and no incomplete example is inside the margin,
   it is optimal for every repair.

If neither holds, no certain model exists.
"""

from __future__ import annotations

import numpy as np

from .baselines import feature_means
from .certain_linreg import CertainReport, Witness
from .dataset import IncompleteDataset, missing_sets
from .trainers import svm_primal_loss, train_linear_svm

MARGIN_TOL = 1e-6


def _coef_tol(w: np.ndarray) -> float:
    return 1e-6 * (1.0 + float(np.abs(w).max(initial=0.0)))


def observed_margins(ds: IncompleteDataset, w: np.ndarray, rows) -> np.ndarray:
    """y_i * sum over observed j of w_j x_ij, for each row in ``rows``."""
    rows = np.asarray(rows, dtype=int)
    X = np.where(ds.mask[rows], 0.0, ds.values[rows])
    return ds.labels[rows] * (X @ w)


def _conditions(ds, w, incomplete_rows, incomplete_cols, strict: bool):
    tau0 = _coef_tol(w)
    coef = np.abs(w[incomplete_cols]) if incomplete_cols else np.zeros(0)
    bad_features = [j for j, c in zip(incomplete_cols, coef) if c > tau0]
    margins = observed_margins(ds, w, incomplete_rows)
    if strict:
        bad_rows = [i for i, m in zip(incomplete_rows, margins) if not m > 1.0 + MARGIN_TOL]
    else:
        bad_rows = [i for i, m in zip(incomplete_rows, margins) if not m >= 1.0 - MARGIN_TOL]
    info = {
        "coef_tol": tau0,
        "max_incomplete_coef": float(coef.max(initial=0.0)),
        "min_margin": float(margins.min()) if margins.size else None,
        "margins": {int(i): float(m) for i, m in zip(incomplete_rows, margins)},
        "failing_features": bad_features,
        "failing_examples": bad_rows,
        "on_margin": [int(i) for i, m in zip(incomplete_rows, margins) if abs(m - 1.0) <= MARGIN_TOL],
    }
    return not bad_features and not bad_rows, info


def check_certain_linear_svm(ds: IncompleteDataset, C: float = 1.0, tol: float = 1e-8) -> CertainReport:
    if ds.task != "classification":
        raise ValueError("linear SVM needs a classification dataset (labels +-1)")
    rows, cols = missing_sets(ds)
    diagnostics: dict = {"C": C, "margin_tol": MARGIN_TOL, "incomplete_examples": rows, "incomplete_features": cols}
    complete = ~ds.mask.any(axis=1)

    if not rows:
        model = train_linear_svm(ds.values, ds.labels, C, tol)
        diagnostics["route"] = "complete data"
        return CertainReport("exists", model, diagnostics=diagnostics)

    if complete.any():
        w_c = train_linear_svm(ds.values[complete], ds.labels[complete], C, tol)
        ok, info = _conditions(ds, w_c.w, rows, cols, strict=True)
        diagnostics["set1"] = info
        if ok:
            diagnostics["route"] = "set1"
            return CertainReport("exists", w_c, diagnostics=diagnostics)
    else:
        diagnostics["set1"] = {"skipped": "no complete examples"}

    # any repair works here; mean imputation keeps it deterministic
    X = ds.values.copy()
    r, c = np.nonzero(ds.mask)
    X[r, c] = feature_means(ds, fallback=0.0)[c]
    w_r = train_linear_svm(X, ds.labels, C, tol)
    ok, info = _conditions(ds, w_r.w, rows, cols, strict=False)
    diagnostics["set2"] = info
    if ok and info["on_margin"]:
        # An incomplete example sitting on the margin may carry dual weight, and
        # then moving its missing cells moves the optimum. The model is safe only
        # if it is already optimal without the incomplete examples.
        Xc, yc = ds.values[complete], ds.labels[complete]
        base = svm_primal_loss(Xc, yc, w_c.w, C) if complete.any() else 0.0
        here = svm_primal_loss(Xc, yc, w_r.w, C) if complete.any() else 0.5 * float(w_r.w @ w_r.w)
        info["complete_only_gap"] = float(here - base)
        if here - base > 1e-6 * max(1.0, base):
            ok = False
            info["failing_examples"] = list(info["on_margin"])
    if ok:
        diagnostics["route"] = "set2"
        if info["on_margin"]:
            diagnostics["boundary_case"] = True
        return CertainReport("exists", w_r, diagnostics=diagnostics)

    if info["failing_features"]:
        reason = "model trained on a repair uses an incomplete feature"
    elif "complete_only_gap" in info:
        reason = "an incomplete example on the margin supports the model"
    else:
        reason = "an incomplete example is a support vector"
    if not complete.any():
        reason = "no complete examples; " + reason
    diagnostics["violation"] = max(
        info["max_incomplete_coef"] - info["coef_tol"],
        (1.0 - MARGIN_TOL - info["min_margin"]) if info["min_margin"] is not None else 0.0,
    )
    witness = Witness(reason, None, info["failing_features"], info["failing_examples"])
    return CertainReport("not_exists", None, witness, diagnostics)
