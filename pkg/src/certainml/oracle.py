"""Brute-force ground truth over a discretised repair grid.

Every missing cell is replaced by evenly spaced values in its interval and all
combinations are trained. Slow by design; meant for small data and tests.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .acm import loss, min_loss
from .dataset import ContractError, IncompleteDataset, Repair, RepairBounds
from .trainers import KernelSpec, gram, kernel_eval, train_kernel_svm_dual

GRID_CAP = 10**7
ORACLE_KINDS = ("linreg", "linsvm", "poly", "rbf", "arccos")
DEFAULT_TOL = {"linreg": 1e-8, "linsvm": 1e-4, "poly": 1e-4, "rbf": 1e-4, "arccos": 1e-4}


@dataclass(frozen=True)
class GridSpec:
    points_per_cell: int
    bounds: RepairBounds

    def __post_init__(self):
        if self.points_per_cell < 2:
            raise ContractError("points_per_cell must be >= 2")

    def axes(self, ds: IncompleteDataset) -> list[np.ndarray]:
        lo, hi = self.bounds.cell_bounds(ds)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ContractError("grid needs finite bounds at every missing cell")
        return [np.linspace(a, b, self.points_per_cell) for a, b in zip(lo, hi)]

    def size(self, ds: IncompleteDataset) -> int:
        return self.points_per_cell ** ds.n_missing


@dataclass
class OracleResult:
    exists: bool
    witness: tuple[Repair, Repair] | None = None
    worst_gap: float = 0.0
    repairs_checked: int = 0
    diagnostics: dict = field(default_factory=dict)


def _check_cap(ds, grid):
    if grid.size(ds) > GRID_CAP:
        raise ContractError(
            f"grid of {grid.points_per_cell}^{ds.n_missing} repairs exceeds the cap of {GRID_CAP}")


def grid_vectors(ds: IncompleteDataset, grid: GridSpec):
    """Cell-value vectors of every grid repair, lexicographic (first cell slowest)."""
    _check_cap(ds, grid)
    axes = grid.axes(ds)
    for combo in itertools.product(*axes):
        yield np.array(combo, dtype=float)


def grid_repairs(ds: IncompleteDataset, grid: GridSpec):
    for v in grid_vectors(ds, grid):
        yield Repair.from_vector(ds, v)


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _kernel_of(model_kind, params) -> KernelSpec:
    if model_kind == "poly":
        return KernelSpec.polynomial(int(params["degree"]), float(params.get("coef0", 0.0)))
    if model_kind == "rbf":
        return KernelSpec.rbf(float(params["gamma"]))
    return KernelSpec.arccos()


def _kernel_primal(kernel, C, Xtrain, coef, Q_norm, X, y) -> float:
    """Primal SVM objective of f = sum coef_j k(Xtrain_j, .) on the data (X, y)."""
    if coef.size:
        f = gram(kernel, X, Xtrain) @ coef
    else:
        f = np.zeros(len(y))
    return 0.5 * Q_norm + C * float(np.maximum(0.0, 1.0 - y * f).sum())


def _kernel_optimum(kernel, C, X, y) -> tuple[float, np.ndarray]:
    model = train_kernel_svm_dual(X, y, kernel, C, tol=1e-9, equality=False)
    coef = model.alphas * model.y
    Q = float(coef @ gram(kernel, X) @ coef)
    return _kernel_primal(kernel, C, X, coef, Q, X, y), coef


def oracle_certain(ds: IncompleteDataset, model_kind: str, params: dict | None, grid: GridSpec,
                   tol: float | None = None, threads: int = 1) -> OracleResult:
    """Is the model trained on the first grid repair optimal on every grid repair?"""
    if model_kind not in ORACLE_KINDS:
        raise ContractError(f"model_kind must be one of {ORACLE_KINDS}")
    params = dict(params or {})
    C = float(params.get("C", 1.0))
    tol = DEFAULT_TOL[model_kind] if tol is None else tol
    y = ds.labels
    vecs = list(grid_vectors(ds, grid)) if ds.n_missing else [np.zeros(0)]

    if model_kind in ("linreg", "linsvm"):
        _, w0 = min_loss(model_kind, ds.fill(vecs[0]), y, C)

        def gap(v):
            X = ds.fill(v)
            try:
                best, _ = min_loss(model_kind, X, y, C)
            except Exception as exc:
                raise type(exc)(f"{exc} (grid repair {v.tolist()})") from exc
            return loss(model_kind, X, y, w0, C) - best, best
    else:
        kernel = _kernel_of(model_kind, params)
        X0 = ds.fill(vecs[0])
        _, coef0 = _kernel_optimum(kernel, C, X0, y)
        keep = coef0 != 0.0
        Xs, cs = X0[keep], coef0[keep]
        Qn = float(cs @ gram(kernel, Xs) @ cs) if cs.size else 0.0

        def gap(v):
            X = ds.fill(v)
            best, _ = _kernel_optimum(kernel, C, X, y)
            return _kernel_primal(kernel, C, Xs, cs, Qn, X, y) - best, best

    out = _map(gap, vecs, threads)
    gaps = np.array([g for g, _ in out])
    scale = np.maximum(1.0, np.abs([b for _, b in out]))
    bad = np.flatnonzero(gaps > tol * scale)
    result = OracleResult(bad.size == 0, None, float(gaps.max()), len(vecs),
                          {"tol": tol, "candidate_repair": 0})
    if bad.size:
        k = int(bad[0])
        result.witness = (Repair.from_vector(ds, vecs[0]), Repair.from_vector(ds, vecs[k]))
        result.diagnostics["witness_index"] = k
        result.diagnostics["witness_gap"] = float(gaps[k])
    return result


def oracle_g(w, ds: IncompleteDataset, model_kind: str, params: dict | None, grid: GridSpec,
             threads: int = 1) -> float:
    """Largest optimality gap of w over the grid repairs (linreg / linsvm)."""
    if model_kind not in ("linreg", "linsvm"):
        raise ContractError("oracle_g supports linreg and linsvm")
    C = float((params or {}).get("C", 1.0))
    w = np.asarray(w, dtype=float)
    vecs = list(grid_vectors(ds, grid)) if ds.n_missing else [np.zeros(0)]

    def h(v):
        X = ds.fill(v)
        return loss(model_kind, X, ds.labels, w, C) - min_loss(model_kind, X, ds.labels, C)[0]

    return float(max(_map(h, vecs, threads)))


def oracle_kernel_range(kernel: KernelSpec, x_i, x_j, lo, hi, points: int = 1001) -> tuple[float, float]:
    """Extremes of k(x_i^r, x_j) with x_i's NaN coordinates scanned on an even grid.

    ``lo``/``hi`` are per-coordinate interval ends (scalars broadcast).
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    miss = np.flatnonzero(np.isnan(x_i))
    if miss.size == 0:
        k = kernel_eval(kernel, x_i, x_j)
        return k, k
    if points < 2:
        raise ContractError("points must be >= 2")
    if points ** miss.size > GRID_CAP:
        raise ContractError(f"scan of {points}^{miss.size} points exceeds the cap of {GRID_CAP}")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), x_i.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), x_i.shape)
    if not (np.all(np.isfinite(lo[miss])) and np.all(np.isfinite(hi[miss]))):
        raise ContractError("scan needs finite bounds")
    axes = [np.linspace(lo[m], hi[m], points) for m in miss]
    mesh = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    Z = np.broadcast_to(x_i, (len(mesh), x_i.size)).copy()
    Z[:, miss] = mesh
    k = gram(kernel, Z, x_j[None, :]).ravel()
    return float(k.min()), float(k.max())
