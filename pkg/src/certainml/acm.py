"""Approximately certain models.

A model w is an epsilon-ACM when its optimality gap

    h(w, X^r) = L(X^r, w) - min_v L(X^r, v)

stays within epsilon for every repair r. The worst gap g(w) = sup_r h(w, X^r)
is convex in w (a pointwise supremum of convex functions), and for linear
regression and linear SVM the supremum is sought over the corners of the
repair box ("edge repairs").
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import ContractError, IncompleteDataset, Repair, RepairBounds
from .trainers import LinearModel, ols_loss, svm_primal_loss, train_linear_svm, train_ols

log = logging.getLogger(__name__)

MODEL_KINDS = ("linreg", "linsvm")
G_KINDS = ("exact-over-edges", "sampled-estimate", "per-example-decomposed")
GAP_TOL = 1e-6
PATIENCE = 2000
DIVERGENCE_RUN = 100


@dataclass(frozen=True)
class AcmConfig:
    epsilon: float = 0.0
    samples: int = 64
    seed: int = 0
    gd_step: float | None = None  # None: 0.1 / curvature estimate
    gd_tol: float = 1e-6
    gd_max_iters: int = 50_000
    enum_cap: int = 20
    threads: int = 1

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ContractError("epsilon must be >= 0")
        if self.samples < 1:
            raise ContractError("samples must be >= 1")
        if self.seed < 0:
            raise ContractError("seed must be non-negative")
        if self.gd_step is not None and not self.gd_step > 0:
            raise ContractError("gd_step must be > 0")
        if not self.gd_tol > 0 or self.gd_max_iters < 1 or self.enum_cap < 0 or self.threads < 1:
            raise ContractError("gd_tol, gd_max_iters, enum_cap and threads must be positive")


@dataclass(frozen=True)
class EdgeRepair:
    """One corner of the repair box: bit 0 puts a missing cell at lo, 1 at hi."""

    bits: tuple[int, ...]

    def values(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        b = np.asarray(self.bits, dtype=bool)
        if b.shape != lo.shape:
            raise ContractError(f"edge repair has {b.size} bits for {lo.size} missing cells")
        return np.where(b, hi, lo)

    def to_repair(self, ds: IncompleteDataset, bounds: RepairBounds) -> Repair:
        lo, hi = _finite_cell_bounds(ds, bounds)
        return Repair.from_vector(ds, self.values(lo, hi))


@dataclass
class AcmReport:
    model: LinearModel
    g_value: float
    g_kind: str
    verdict: str
    epsilon: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.g_kind not in G_KINDS:
            raise ValueError(f"bad g_kind {self.g_kind!r}")
        if self.verdict not in ("acm_exists", "not_found"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "acm_exists" and not self.g_value <= self.epsilon + GAP_TOL:
            raise ValueError("'acm_exists' needs g <= epsilon")


# --- losses --------------------------------------------------------------------


def _check_kind(model_kind):
    if model_kind not in MODEL_KINDS:
        raise ContractError(f"model_kind must be one of {MODEL_KINDS}, got {model_kind!r}")


def loss(model_kind: str, X, y, w, C: float = 1.0) -> float:
    _check_kind(model_kind)
    if model_kind == "linreg":
        return ols_loss(X, y, w)
    return svm_primal_loss(X, y, w, C)


def min_loss(model_kind: str, X, y, C: float = 1.0) -> tuple[float, np.ndarray]:
    """Optimal training loss on a complete matrix, with the optimal weights."""
    _check_kind(model_kind)
    if model_kind == "linreg":
        model, _ = train_ols(X, y)
    else:
        model = train_linear_svm(X, y, C)
    return float(model.training_loss), model.w


def _stack_losses(model_kind, Xs, y, w, C):
    """Losses of w on a stack of repaired matrices (s, n, d), and the residual-like term."""
    z = Xs @ w
    if model_kind == "linreg":
        r = z - y
        return (r * r).sum(axis=1), r
    m = y * z
    return 0.5 * float(w @ w) + C * np.maximum(0.0, 1.0 - m).sum(axis=1), m


def _stack_grad(model_kind, Xk, y, w, aux, C):
    if model_kind == "linreg":
        return 2.0 * Xk.T @ aux
    return w - C * Xk.T @ (y * (aux < 1.0))


def _finite_cell_bounds(ds, bounds):
    lo, hi = bounds.cell_bounds(ds)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ContractError("edge repairs need finite bounds at every missing cell")
    return lo, hi


def _repaired_stack(ds, vals):
    """(s, n, d) stack of complete matrices from an (s, m) array of cell values."""
    Xs = np.broadcast_to(ds.values, (len(vals),) + ds.values.shape).copy()
    r, c = np.nonzero(ds.mask)
    Xs[:, r, c] = vals
    return Xs


def _min_losses(model_kind, Xs, y, C, threads=1):
    def one(X):
        return min_loss(model_kind, X, y, C)

    if threads > 1 and len(Xs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, Xs))
    else:
        out = [one(X) for X in Xs]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


# --- h and edge repairs -----------------------------------------------------------


class MinLossCache:
    """Optimal losses per repair, keyed by the repair's cell values."""

    def __init__(self, ds: IncompleteDataset, model_kind: str, C: float = 1.0):
        _check_kind(model_kind)
        self.ds, self.model_kind, self.C = ds, model_kind, C
        self._store: dict[bytes, float] = {}

    def __call__(self, cell_values) -> float:
        v = np.ascontiguousarray(cell_values, dtype=float)
        key = v.tobytes()
        if key not in self._store:
            self._store[key] = min_loss(self.model_kind, self.ds.fill(v), self.ds.labels, self.C)[0]
        return self._store[key]

    def __len__(self):
        return len(self._store)


def h_value(w, repair: Repair, ds: IncompleteDataset, model_kind: str, C: float = 1.0,
            cache: MinLossCache | None = None) -> float:
    """Optimality gap of w on one repair."""
    _check_kind(model_kind)
    vals = repair.vector(ds) if ds.n_missing else np.zeros(0)
    if cache is None:
        cache = MinLossCache(ds, model_kind, C)
    X = ds.fill(vals)
    return loss(model_kind, X, ds.labels, np.asarray(w, dtype=float), C) - cache(vals)


def enumerate_edge_repairs(ds: IncompleteDataset, bounds: RepairBounds, cap: int = 20) -> list[EdgeRepair]:
    """All 2^m corners in lexicographic bit order (lo before hi, first cell most significant)."""
    m = ds.n_missing
    if m > cap:
        raise ContractError(f"{m} missing cells exceed the enumeration cap of {cap}; sample edge repairs instead")
    _finite_cell_bounds(ds, bounds)
    return [EdgeRepair(bits) for bits in itertools.product((0, 1), repeat=m)]


def sample_edge_repairs(ds: IncompleteDataset, bounds: RepairBounds, s: int, seed: int = 0) -> list[EdgeRepair]:
    if s < 1:
        raise ContractError("s must be >= 1")
    _finite_cell_bounds(ds, bounds)
    bits = np.random.default_rng(seed).integers(0, 2, size=(s, ds.n_missing))
    return [EdgeRepair(tuple(int(b) for b in row)) for row in bits]


def _edge_values(edges, lo, hi):
    if not edges:
        return np.zeros((0, lo.size))
    b = np.array([e.bits for e in edges], dtype=bool).reshape(len(edges), lo.size)
    return np.where(b, hi, lo)


def g_over_edges(w, ds: IncompleteDataset, bounds: RepairBounds, model_kind: str, C: float = 1.0,
                 edges=None, cap: int = 20, threads: int = 1) -> tuple[float, int]:
    """Max gap over the given (default: all) edge repairs; returns (g, argmax index)."""
    if edges is None:
        edges = enumerate_edge_repairs(ds, bounds, cap)
    lo, hi = _finite_cell_bounds(ds, bounds)
    vals = _edge_values(edges, lo, hi)
    Xs = _repaired_stack(ds, vals)
    mins, _ = _min_losses(model_kind, Xs, ds.labels, C, threads)
    losses, _ = _stack_losses(model_kind, Xs, ds.labels, np.asarray(w, dtype=float), C)
    h = losses - mins
    k = int(np.argmax(h))
    return float(h[k]), k


# --- sampled min-max learner ----------------------------------------------------------


def _curvature(model_kind, Xs, C, iters=20):
    """Largest Hessian eigenvalue over the stack, by power iteration on X^T X."""
    best = 0.0
    rng = np.random.default_rng(0)
    for X in Xs:
        v = rng.standard_normal(X.shape[1])
        lam = 0.0
        for _ in range(iters):
            u = X.T @ (X @ v)
            lam = float(np.linalg.norm(u))
            if lam == 0.0:
                break
            v = u / lam
        best = max(best, lam)
    if model_kind == "linreg":
        return 2.0 * best
    return 1.0 + C * best


def _minimize_max(model_kind, Xs, y, mins, w0, C, cfg: AcmConfig):
    """Subgradient descent on max_k [L(X_k, w) - mins_k]."""
    L = _curvature(model_kind, Xs, C)
    eta0 = cfg.gd_step if cfg.gd_step is not None else (0.1 / L if L > 0 else 0.1)
    w = np.array(w0, dtype=float)

    def objective(w):
        losses, aux = _stack_losses(model_kind, Xs, y, w, C)
        h = losses - mins
        k = int(np.argmax(h))
        return float(h[k]), k, aux

    val, k, aux = objective(w)
    best_w, best_val = w.copy(), val
    last_gain, rising, prev = 0, 0, val
    stop = "max_iters"
    it = 0
    for it in range(cfg.gd_max_iters):
        grad = _stack_grad(model_kind, Xs[k], y, w, aux[k], C)
        if float(np.linalg.norm(grad)) <= cfg.gd_tol:
            stop = "gradient"
            break
        w = w - eta0 / math.sqrt(1.0 + it / 500.0) * grad
        val, k, aux = objective(w)
        if not math.isfinite(val):
            stop = "diverged"
            break
        rising = rising + 1 if val > prev else 0
        prev = val
        if rising >= DIVERGENCE_RUN:
            stop = "diverged"
            break
        if val < best_val - 1e-12 * max(1.0, abs(best_val)):
            best_w, best_val, last_gain = w.copy(), val, it
        elif it - last_gain >= PATIENCE:
            stop = "stalled"
            break
    return best_w, best_val, {"iterations": it + 1, "stop": stop, "step": eta0, "curvature": L}


def learn_acm_sampled(ds: IncompleteDataset, bounds: RepairBounds, model_kind: str, C: float = 1.0,
                      cfg: AcmConfig | None = None) -> AcmReport:
    """Minimise the worst gap over a random sample of edge repairs, then certify."""
    cfg = cfg or AcmConfig()
    _check_kind(model_kind)
    y = ds.labels
    if ds.is_complete():
        best, w = min_loss(model_kind, ds.values, y, C)
        return AcmReport(LinearModel(w, best), 0.0, "exact-over-edges",
                         "acm_exists" if 0.0 <= cfg.epsilon + GAP_TOL else "not_found",
                         cfg.epsilon, {"edges": 1})

    lo, hi = _finite_cell_bounds(ds, bounds)
    edges = sample_edge_repairs(ds, bounds, cfg.samples, cfg.seed)
    vals = _edge_values(edges, lo, hi)
    Xs = _repaired_stack(ds, vals)
    mins, ws = _min_losses(model_kind, Xs, y, C, cfg.threads)
    w0 = ws.mean(axis=0)
    w, ghat, info = _minimize_max(model_kind, Xs, y, mins, w0, C, cfg)
    diagnostics = {"descent": info, "sample_g": ghat, "samples": cfg.samples, "seed": cfg.seed,
                   "distinct_samples": len({e.bits for e in edges})}

    if ds.n_missing <= cfg.enum_cap:
        g, k = g_over_edges(w, ds, bounds, model_kind, C, cap=cfg.enum_cap, threads=cfg.threads)
        kind = "exact-over-edges"
        diagnostics["worst_edge"] = list(enumerate_edge_repairs(ds, bounds, cfg.enum_cap)[k].bits)
    else:
        g, kind = ghat, "sampled-estimate"
        diagnostics["note"] = (f"{ds.n_missing} missing cells exceed the enumeration cap; "
                               "g is estimated on the sampled edge repairs only")
    g = max(g, 0.0)
    ok = info["stop"] != "diverged" and g <= cfg.epsilon + GAP_TOL
    return AcmReport(LinearModel(w, ghat), g, kind, "acm_exists" if ok else "not_found",
                     cfg.epsilon, diagnostics)


# --- exact learner for linear regression --------------------------------------------


def worst_edge_per_example(w, row, lo_row, hi_row, y_i: float) -> np.ndarray:
    """Corner of one row's repair box maximising the squared residual (w.x - y)^2.

    The residual is affine in the missing cells, so its largest and smallest
    values over the corners are found coordinate-wise; the one with the larger
    magnitude wins (ties go to the largest value).
    """
    w = np.asarray(w, dtype=float)
    row = np.asarray(row, dtype=float)
    miss = np.isnan(row)
    if not miss.any():
        return row.copy()
    lo_row = np.broadcast_to(np.asarray(lo_row, dtype=float), row.shape)
    hi_row = np.broadcast_to(np.asarray(hi_row, dtype=float), row.shape)
    up = row.copy()
    down = row.copy()
    pos = w > 0
    up[miss] = np.where(pos[miss], hi_row[miss], lo_row[miss])
    down[miss] = np.where(pos[miss], lo_row[miss], hi_row[miss])
    if abs(up @ w - y_i) >= abs(down @ w - y_i):
        return up
    return down


def _worst_matrix(w, ds, lo_full, hi_full):
    """Vectorised worst_edge_per_example over all rows."""
    pos = w > 0
    up = np.where(ds.mask, np.where(pos, hi_full, lo_full), ds.values)
    down = np.where(ds.mask, np.where(pos, lo_full, hi_full), ds.values)
    ru = up @ w - ds.labels
    rd = down @ w - ds.labels
    pick = np.abs(ru) >= np.abs(rd)
    return np.where(pick[:, None], up, down)


def decomposed_g(w, ds: IncompleteDataset, bounds: RepairBounds) -> tuple[float, np.ndarray]:
    """Gap of w on the repair assembled from every row's worst corner."""
    _finite_cell_bounds(ds, bounds)
    w = np.asarray(w, dtype=float)
    Xe = _worst_matrix(w, ds, bounds.lo, bounds.hi)
    best, _ = train_ols(Xe, ds.labels)
    return ols_loss(Xe, ds.labels, w) - best.training_loss, Xe


def _bits_of(ds, Xe, lo, hi):
    vals = Xe[ds.mask]
    return tuple(int(v == h and h != l) for v, l, h in zip(vals, lo, hi))


def learn_acm_linreg_exact(ds: IncompleteDataset, bounds: RepairBounds, cfg: AcmConfig | None = None) -> AcmReport:
    """Gradient descent on the sum of per-row worst squared residuals."""
    cfg = cfg or AcmConfig()
    if ds.task != "regression":
        log.warning("exact ACM learner treats labels as regression targets")
    y = ds.labels
    if ds.is_complete():
        model, _ = train_ols(ds.values, y)
        ok = "acm_exists" if 0.0 <= cfg.epsilon + GAP_TOL else "not_found"
        return AcmReport(model, 0.0, "exact-over-edges", ok, cfg.epsilon, {"edges": 1})

    lo, hi = _finite_cell_bounds(ds, bounds)
    lo_full = np.where(ds.mask, bounds.lo, 0.0)
    hi_full = np.where(ds.mask, bounds.hi, 0.0)
    X_abs = np.where(ds.mask, np.maximum(np.abs(lo_full), np.abs(hi_full)), np.abs(ds.values))
    Lhat = _curvature("linreg", X_abs[None], 0.0)
    eta = cfg.gd_step if cfg.gd_step is not None else (0.1 / Lhat if Lhat > 0 else 0.1)

    mid = ds.fill((lo + hi) / 2.0)
    w, _ = train_ols(mid, y)
    w = w.w.copy()

    def objective(w):
        Xe = _worst_matrix(w, ds, lo_full, hi_full)
        r = Xe @ w - y
        return float(r @ r), Xe, r

    val, Xe, r = objective(w)
    best_w, best_val = w.copy(), val
    last_gain, rising, prev = 0, 0, val
    stop = "max_iters"
    it = 0
    for it in range(cfg.gd_max_iters):
        grad = 2.0 * Xe.T @ r
        if float(np.linalg.norm(grad)) <= cfg.gd_tol:
            stop = "gradient"
            break
        w = w - eta * grad
        val, Xe, r = objective(w)
        if not math.isfinite(val):
            stop = "diverged"
            break
        rising = rising + 1 if val > prev else 0
        prev = val
        if rising >= DIVERGENCE_RUN:
            stop = "diverged"
            break
        if val < best_val - 1e-12 * max(1.0, abs(best_val)):
            best_w, best_val, last_gain = w.copy(), val, it
        elif it - last_gain >= PATIENCE:
            stop = "stalled"
            break

    w = best_w
    g_dec, Xe = decomposed_g(w, ds, bounds)
    g_dec = max(g_dec, 0.0)
    diagnostics = {
        "descent": {"iterations": it + 1, "stop": stop, "step": eta, "curvature": Lhat},
        "decomposed_g": g_dec,
        "worst_edge": list(_bits_of(ds, Xe, lo, hi)),
    }
    g, kind = g_dec, "per-example-decomposed"
    if ds.n_missing <= cfg.enum_cap:
        g_enum, _ = g_over_edges(w, ds, bounds, "linreg", cap=cfg.enum_cap, threads=cfg.threads)
        g_enum = max(g_enum, 0.0)
        diagnostics["enumerated_g"] = g_enum
        diagnostics["decomposition_validated"] = bool(abs(g_enum - g_dec) <= 1e-8 * max(1.0, g_enum))
        g, kind = max(g_enum, g_dec), "exact-over-edges"
    else:
        diagnostics["decomposition_validated"] = None
    ok = stop != "diverged" and g <= cfg.epsilon + GAP_TOL
    return AcmReport(LinearModel(w, best_val), g, kind, "acm_exists" if ok else "not_found",
                     cfg.epsilon, diagnostics)
