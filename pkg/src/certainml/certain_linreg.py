"""Certain models for least-squares regression.

A model that is optimal for every repair exists exactly when the residue of
the fit on complete features is orthogonal to every incomplete feature,
whatever values its missing cells take. That model is the complete-feature fit
padded with zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dataset import IncompleteDataset, Repair, complete_columns, missing_sets
from .trainers import LinearModel, ols_loss, train_ols

VERDICTS = ("exists", "not_exists", "unknown")


@dataclass
class Witness:
    reason: str
    repair: Repair | None = None
    features: list[int] = field(default_factory=list)
    examples: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"reason": self.reason, "features": self.features, "examples": self.examples}
        out["repair"] = self.repair.to_json() if self.repair is not None else None
        return out


@dataclass
class CertainReport:
    verdict: str
    model: Any = None
    witness: Witness | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "exists" and self.model is None:
            raise ValueError("an 'exists' report needs a model")
        if self.verdict == "not_exists" and self.witness is None:
            raise ValueError("a 'not_exists' report needs a witness")


def _witness_repair(ds: IncompleteDataset, e: np.ndarray, j: int, inner: float, thresh: float) -> Repair:
    """Repair under which feature ``j`` is visibly correlated with the residue.

    Missing cells of other features are set to 0; they cannot make the padded
    model optimal again since extra columns only lower the optimum.
    """
    vals = {}
    null_rows = np.flatnonzero(ds.mask[:, j])
    big = null_rows[np.abs(e[null_rows]) > thresh]
    sign = 1.0 if inner >= 0 else -1.0
    probe = 0.0
    if big.size:
        probe = (1.0 + np.abs(e).max()) / np.abs(e[big]).min()
    for i, jj in ds.missing_cells:
        i, jj = int(i), int(jj)
        v = 0.0
        if jj == j and i in big:
            v = float(sign * probe * np.sign(e[i]))
        vals[(i, jj)] = v
    return Repair(vals)


def check_certain_linreg(ds: IncompleteDataset, tol: float = 1e-8, verify_witness: bool = True) -> CertainReport:
    """Decide whether a certain least-squares model exists and return it or a refuting repair."""
    cols = complete_columns(ds)
    _, incomplete = missing_sets(ds)
    y = ds.labels
    w = np.zeros(ds.d)
    if cols.any():
        model_c, res = train_ols(ds.values[:, cols], y)
        w[cols] = model_c.w
        e = res.e
    else:
        e = -y.copy()
    e_inf = float(np.abs(e).max()) if e.size else 0.0

    per_feature = []
    failed = None
    for j in incomplete:
        col = ds.values[:, j]
        null = ds.mask[:, j]
        scale = (1.0 + e_inf) * (1.0 + float(np.abs(col[~null]).max(initial=0.0)))
        thresh = tol * scale
        e_null = float(np.abs(e[null]).max())
        inner = float(col[~null] @ e[~null])
        ok_null = e_null <= thresh
        ok_inner = abs(inner) <= thresh
        per_feature.append({
            "feature": j, "name": ds.feature_names[j], "residue_at_nulls": e_null,
            "inner_product": inner, "threshold": thresh,
            "residue_zero_at_nulls": ok_null, "orthogonal_on_observed": ok_inner,
        })
        if failed is None and not (ok_null and ok_inner):
            failed = (j, inner, thresh, ok_null)

    diagnostics = {
        "tol": tol,
        "residue_norm": float(np.linalg.norm(e)),
        "complete_features": [int(j) for j in np.flatnonzero(cols)],
        "incomplete_features": incomplete,
        "features": per_feature,
    }
    if failed is None:
        return CertainReport("exists", LinearModel(w, float(e @ e)), diagnostics=diagnostics)

    j, inner, thresh, ok_null = failed
    repair = _witness_repair(ds, e, j, inner, thresh)
    rows = [int(i) for i in np.flatnonzero(ds.mask[:, j] & (np.abs(e) > thresh))]
    if not cols.any():
        reason = "no complete features; residue not orthogonal to incomplete feature"
    elif not ok_null:
        reason = "residue nonzero at a missing cell"
    else:
        reason = "residue not orthogonal to observed part of incomplete feature"
    diagnostics["padded_model"] = w.tolist()
    if verify_witness:
        X = ds.fill(repair.vector(ds))
        best, _ = train_ols(X, y)
        diagnostics["witness_gap"] = ols_loss(X, y, w) - best.training_loss
    return CertainReport("not_exists", None, Witness(reason, repair, [j], rows), diagnostics)
