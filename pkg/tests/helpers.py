"""Random and constructed instances shared by the test modules."""

from __future__ import annotations

import numpy as np
from scipy.linalg import null_space

from certainml.dataset import IncompleteDataset, RepairBounds


def make_ds(X, mask, y, task="regression"):
    X = np.array(X, dtype=float)
    mask = np.array(mask, dtype=bool)
    X[mask] = np.nan
    return IncompleteDataset(X, mask, np.asarray(y, dtype=float), (), task)


def box(ds, lo, hi, policy="user-file"):
    return RepairBounds(np.where(ds.mask, lo, np.nan), np.where(ds.mask, hi, np.nan), policy)


def random_mask(rng, n, d, k, rows=None):
    """k distinct missing cells, optionally restricted to the given rows."""
    cells = [(i, j) for i in (range(n) if rows is None else rows) for j in range(d)]
    pick = rng.choice(len(cells), size=k, replace=False)
    mask = np.zeros((n, d), dtype=bool)
    for p in pick:
        mask[cells[p]] = True
    return mask


def linreg_instance(rng, kind):
    """Small regression instance (n <= 6, d <= 3, <= 2 missing cells).

    kind: "random" (generic data), "exact" (complete features fit y exactly),
    "orthogonal" (nonzero residue built orthogonal to the incomplete features
    and zero at their missing cells).
    """
    n = int(rng.integers(3, 7))
    d = int(rng.integers(2, 4))
    k = int(rng.integers(1, 3))
    X = rng.normal(size=(n, d)).round(2)
    while True:
        mask = random_mask(rng, n, d, k)
        if (~mask.any(axis=0)).any():
            break
    if kind == "random":
        y = rng.normal(size=n).round(2)
        return make_ds(X, mask, y)
    comp = ~mask.any(axis=0)
    w = rng.normal(size=comp.sum())
    y = X[:, comp] @ w
    if kind == "orthogonal":
        cons = [X[:, comp].T]
        for j in np.flatnonzero(~comp):
            cons.append(np.where(mask[:, j], 0.0, X[:, j])[None, :])
            cons.append(np.eye(n)[mask[:, j]])
        ns = null_space(np.vstack(cons))
        if ns.shape[1]:
            y = y + ns @ rng.normal(size=ns.shape[1])
    return make_ds(X, mask, y)


def linsvm_instance(rng, kind):
    """Small classification instance (n <= 6, d <= 3, <= 2 missing cells).

    "far": incomplete features are zero on the complete rows and the
    incomplete examples sit far outside the margin; "random": generic.
    """
    n = int(rng.integers(4, 7))
    d = int(rng.integers(2, 4))
    k = int(rng.integers(1, 3))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y[0], y[1] = -1.0, 1.0
    n_inc = int(rng.integers(1, min(k, n - 2) + 1))
    inc_rows = list(range(n - n_inc, n))
    k = min(k, (d - 1) * n_inc)
    mask = random_mask(rng, n, d, k, rows=inc_rows)
    while not mask.any(axis=1)[inc_rows].all() or mask.all(axis=0).any() or mask.any(axis=0).all():
        mask = random_mask(rng, n, d, k, rows=inc_rows)
    if kind == "random":
        X = rng.normal(size=(n, d)).round(2) + y[:, None] * 0.5
        return make_ds(X, mask, y, "classification")
    inc_cols = mask.any(axis=0)
    X = rng.normal(size=(n, d)).round(2)
    X[:, ~inc_cols] += y[:, None] * 1.0
    X[: n - n_inc][:, inc_cols] = 0.0
    # push incomplete examples far along the class direction
    X[n - n_inc:, ~inc_cols] = y[n - n_inc:, None] * 6.0
    return make_ds(X, mask, y, "classification")


def poly_instance(rng, kind):
    """Classification instance whose last row misses one cell.

    "zero": the incomplete feature is 0 on every complete row and the
    incomplete example is well outside the margin. "nonzero": complete rows
    carry that feature, so support vectors touch it.
    """
    n = int(rng.integers(4, 7))
    d = int(rng.integers(2, 4))
    y = np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
    rng.shuffle(y[2:])
    m = int(rng.integers(0, d))
    X = rng.normal(scale=0.5, size=(n, d)).round(2)
    others = [j for j in range(d) if j != m]
    X[:, others[0]] += y
    if kind == "zero":
        X[:-1, m] = 0.0
        X[-1, others[0]] = y[-1] * float(rng.uniform(2.5, 4.0))
    else:
        X[:-1, m] += rng.choice([-1.0, 1.0]) * float(rng.uniform(0.5, 1.5))
        X[-1, others[0]] = y[-1] * float(rng.uniform(0.8, 2.0))
    mask = np.zeros((n, d), dtype=bool)
    mask[-1, m] = True
    return make_ds(X, mask, y, "classification")


def cluster_instance(rng, one_missing_per_row=False, spread=0.3):
    """Two labelled clusters; a few rows of each lose cells."""
    n = int(rng.integers(5, 9))
    d = int(rng.integers(2, 4))
    y = np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
    centre = rng.normal(size=d)
    centre *= 1.5 / np.linalg.norm(centre)
    X = y[:, None] * centre + rng.normal(scale=spread, size=(n, d))
    n_inc = int(rng.integers(1, 3))
    mask = np.zeros((n, d), dtype=bool)
    for i in range(n - n_inc, n):
        k = 1 if one_missing_per_row else int(rng.integers(1, d))
        mask[i, rng.choice(d, size=k, replace=False)] = True
    return make_ds(X.round(3), mask, y, "classification")


def centroid_instance(rng, d=3, width=0.05):
    """Incomplete last row placed at its class centroid, one missing cell, narrow box.

    About one in ten of these certifies under the RBF/arc-cosine lower bounds.
    """
    n = int(rng.integers(4, 8))
    y = np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
    X = rng.normal(size=(n, d))
    i = n - 1
    same = [j for j in range(n - 1) if y[j] == y[i]]
    X[i] = X[same].mean(axis=0)
    m = int(rng.integers(0, d))
    mask = np.zeros((n, d), dtype=bool)
    mask[i, m] = True
    ds = make_ds(X, mask, y, "classification")
    v = X[i, m]
    return ds, box(ds, v - width, v + width)


def acm_instance(rng, task="regression", max_missing=6):
    """Small instance for ACM tests with bounds one unit wider than the observed range."""
    n = int(rng.integers(4, 8))
    d = int(rng.integers(2, 4))
    k = int(rng.integers(1, max_missing + 1))
    k = min(k, (n - 1) * (d - 1))
    X = rng.normal(size=(n, d)).round(3)
    while True:
        mask = random_mask(rng, n, d, k)
        if (~mask).any(axis=0).all() and (~mask.any(axis=0)).any():
            break
    if task == "regression":
        y = X @ rng.normal(size=d) + 0.3 * rng.normal(size=n)
    else:
        y = np.where(X @ rng.normal(size=d) + 0.3 * rng.normal(size=n) >= 0, 1.0, -1.0)
    ds = make_ds(X, mask, y, task)
    lo = np.nanmin(ds.values, axis=0) - 1.0
    hi = np.nanmax(ds.values, axis=0) + 1.0
    return ds, box(ds, lo[None, :], hi[None, :])
