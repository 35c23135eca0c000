"""Certain models for kernel SVMs.

The polynomial kernel gets an exact test. For the RBF and arc-cosine kernels
the kernel value between an incomplete and a complete example is bracketed
over all repairs, which gives a repair-free lower bound on each incomplete
example's margin; a bound above 1 everywhere proves a certain model exists,
anything else is inconclusive.

All duals here are trained without the sum(alpha*y) = 0 constraint so that
the model matches the intercept-free decision function the margin tests use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import ContractError, IncompleteDataset, RepairBounds, derive_bounds, missing_sets
from .trainers import DualModel, KernelSpec, train_kernel_svm_dual

MARGIN_TOL = 1e-6


class UnsupportedCase(ValueError):
    """The input falls outside what a closed-form kernel range covers."""


@dataclass(frozen=True)
class KernelRange:
    k_min: float
    k_max: float
    argmin: str = ""
    argmax: str = ""

    def __post_init__(self):
        if not self.k_min <= self.k_max:
            raise ValueError(f"k_min {self.k_min} > k_max {self.k_max}")


@dataclass
class KernelCertainReport:
    verdict: str
    lwb: dict[int, float] = field(default_factory=dict)
    model: DualModel | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("exists", "unknown", "not_exists"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "exists" and any(not v > 1.0 for v in self.lwb.values()):
            raise ValueError("'exists' needs every lower bound above 1")


def _train_complete(ds: IncompleteDataset, kernel: KernelSpec, C: float, tol: float) -> DualModel | None:
    keep = ~ds.mask.any(axis=1)
    if not keep.any():
        return None
    return train_kernel_svm_dual(ds.values[keep], ds.labels[keep], kernel, C, tol=tol, equality=False)


def _no_missing(ds, kernel, C, tol) -> KernelCertainReport:
    model = train_kernel_svm_dual(ds.values, ds.labels, kernel, C, tol=tol, equality=False)
    return KernelCertainReport("exists", {}, model, {"route": "complete data"})


# --- polynomial ---------------------------------------------------------------


def check_certain_poly_svm(ds: IncompleteDataset, degree: int, coef0: float, C: float = 1.0,
                           tol: float = 1e-8) -> KernelCertainReport:
    kernel = KernelSpec.polynomial(degree, coef0)
    rows, cols = missing_sets(ds)
    if not rows:
        return _no_missing(ds, kernel, C, tol)
    model = _train_complete(ds, kernel, C, tol)
    if model is None:
        return KernelCertainReport("not_exists", {}, None, {"reason": "no complete examples"})

    sv = model.support
    Xsv = model.X[sv]
    entry_tol = 1e-6 * (1.0 + np.abs(Xsv).max(initial=0.0))
    offending = [(int(s), int(m)) for s in sv for m in cols if abs(model.X[s, m]) > entry_tol]

    coef = model.alphas[sv] * model.y[sv]
    lwb = {}
    for i in rows:
        xi = np.where(ds.mask[i], 0.0, ds.values[i])
        k = (Xsv @ xi + coef0) ** degree
        lwb[i] = float(ds.labels[i] * (k @ coef))
    low = [i for i, v in lwb.items() if not v > 1.0 + MARGIN_TOL]

    diagnostics = {
        "support_vectors": [int(s) for s in sv],
        "nonzero_support_entries": offending,
        "examples_inside_margin": low,
        "margin_tol": MARGIN_TOL,
    }
    if offending:
        diagnostics["reason"] = "a support vector is nonzero at an incomplete feature"
        return KernelCertainReport("not_exists", lwb, None, diagnostics)
    if low:
        diagnostics["reason"] = "an incomplete example is a support vector"
        return KernelCertainReport("not_exists", lwb, None, diagnostics)
    return KernelCertainReport("exists", lwb, model, diagnostics)


# --- kernel ranges -------------------------------------------------------------


def kernel_range_rbf(x_i, x_j, lo, hi, gamma: float) -> KernelRange:
    """Min/max of exp(-gamma ||x_i^r - x_j||^2) over repairs of x_i's NaN cells.

    ``lo``/``hi`` give the interval of each coordinate (only read where x_i is
    NaN). The maximiser copies x_j into the missing coordinates, clamped into
    the interval; the minimiser takes the endpoint farther from x_j.
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    miss = np.isnan(x_i)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), x_i.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), x_i.shape)
    if miss.any() and not (np.all(np.isfinite(lo[miss])) and np.all(np.isfinite(hi[miss]))):
        raise ContractError("finite bounds required for the RBF kernel range")
    obs = float(((x_i[~miss] - x_j[~miss]) ** 2).sum())
    xm = x_j[miss]
    near = np.clip(xm, lo[miss], hi[miss])
    d_near = float(((near - xm) ** 2).sum())
    d_far = float(np.maximum((hi[miss] - xm) ** 2, (lo[miss] - xm) ** 2).sum())
    clamped = bool(np.any(near != xm))
    return KernelRange(
        math.exp(-gamma * (obs + d_far)),
        math.exp(-gamma * (obs + d_near)),
        argmin="farther endpoint",
        argmax="copy of x_j, clamped" if clamped else "copy of x_j",
    )


def _arccos_k(f: float) -> float:
    return math.pi - math.acos(min(1.0, max(-1.0, f)))


def kernel_range_arccos(x_i, x_j, lo: float = -math.inf, hi: float = math.inf) -> KernelRange:
    """Min/max of pi - acos(cos angle(x_i^r, x_j)) over the single missing cell of x_i.

    With t the repair value the cosine is f(t) = (a t + b) / (c sqrt(t^2 + d)),
    a = x_jz, b = observed dot product, c = ||x_j||, d = observed ||x_i||^2.
    Its only stationary point is t = a d / b; otherwise f is monotone, so the
    extremes are among the stationary point, the interval ends and the limits
    +-a/c at infinity. Each candidate is evaluated and the extremes taken.
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    miss = np.flatnonzero(np.isnan(x_i))
    if miss.size != 1:
        raise UnsupportedCase(f"arc-cosine range needs exactly one missing value per example, got {miss.size}")
    z = int(miss[0])
    obs = np.ones(x_i.shape, dtype=bool)
    obs[z] = False
    a = float(x_j[z])
    b = float(x_i[obs] @ x_j[obs])
    c = float(np.linalg.norm(x_j))
    d = float(x_i[obs] @ x_i[obs])
    if d == 0.0:
        raise UnsupportedCase("observed part of the incomplete example is zero")
    if c == 0.0:
        raise UnsupportedCase("complete example is the zero vector")
    lo, hi = float(lo), float(hi)
    if lo > hi:
        raise ContractError("lo > hi")

    def f(t):
        return (a * t + b) / (c * math.sqrt(t * t + d))

    cands = []
    if b != 0.0:
        t_star = a * d / b
        if lo <= t_star <= hi:
            # At t* the cosine is sign(b) sqrt(a^2 d + b^2) / (c sqrt d). The angle is
            # taken with atan2 and the Lagrange identity for the sine, so parallel
            # vectors give exactly pi instead of losing half the digits in acos.
            u, v = x_i[obs], x_j[obs]
            cross = np.outer(u, v)
            sine = math.sqrt(0.5 * float(((cross - cross.T) ** 2).sum())) / (c * math.sqrt(d))
            cosine = math.copysign(math.sqrt(a * a * d + b * b), b) / (c * math.sqrt(d))
            cands.append((math.pi - math.atan2(sine, cosine), f"stationary t={t_star:.6g}"))
    if math.isinf(lo):
        cands.append((_arccos_k(-a / c), "limit t->-inf"))
    else:
        cands.append((_arccos_k(f(lo)), f"bound t={lo:.6g}"))
    if math.isinf(hi):
        cands.append((_arccos_k(a / c), "limit t->+inf"))
    else:
        cands.append((_arccos_k(f(hi)), f"bound t={hi:.6g}"))
    kmin = min(cands, key=lambda p: p[0])
    kmax = max(cands, key=lambda p: p[0])
    return KernelRange(kmin[0], kmax[0], kmin[1], kmax[1])


# --- lower bounds ----------------------------------------------------------------


def _range(kernel: KernelSpec, x_i, x_j, lo_row, hi_row) -> KernelRange:
    if kernel.kind == "rbf":
        return kernel_range_rbf(x_i, x_j, lo_row, hi_row, kernel.gamma)
    if kernel.kind == "arccos":
        z = np.flatnonzero(np.isnan(x_i))
        if z.size != 1:
            raise UnsupportedCase(
                f"arc-cosine range needs exactly one missing value per example, got {z.size}")
        return kernel_range_arccos(x_i, x_j, lo_row[z[0]], hi_row[z[0]])
    raise ValueError(f"no kernel range for kind {kernel.kind!r}")


def lower_bound_margins(ds: IncompleteDataset, dual: DualModel, bounds: RepairBounds) -> dict[int, float]:
    """Repair-free lower bound on y_i * decision(x_i) for each incomplete example."""
    rows, _ = missing_sets(ds)
    sv = dual.support
    out = {}
    for i in rows:
        x_i = ds.values[i]
        total = 0.0
        for j in sv:
            beta = ds.labels[i] * dual.alphas[j] * dual.y[j]
            if beta == 0.0:
                continue
            rng = _range(dual.kernel, x_i, dual.X[j], bounds.lo[i], bounds.hi[i])
            total += beta * (rng.k_min if beta > 0 else rng.k_max)
        out[i] = float(total)
    return out


def _check_by_bounds(ds, kernel, C, bounds, tol) -> KernelCertainReport:
    rows, _ = missing_sets(ds)
    if not rows:
        return _no_missing(ds, kernel, C, tol)
    if kernel.kind == "arccos":
        per_row = ds.mask.sum(axis=1)
        bad = [int(i) for i in np.flatnonzero(per_row > 1)]
        if bad:
            raise UnsupportedCase(
                f"arc-cosine check needs one missing value per example; rows {bad} have more")
    model = _train_complete(ds, kernel, C, tol)
    if model is None:
        lwb = {i: 0.0 for i in rows}
        return KernelCertainReport("unknown", lwb, None, {"reason": "no complete examples"})
    lwb = lower_bound_margins(ds, model, bounds)
    low = [i for i, v in lwb.items() if not v > 1.0 + MARGIN_TOL]
    diagnostics = {"support_vectors": [int(s) for s in model.support], "margin_tol": MARGIN_TOL,
                   "bounds_policy": bounds.policy, "examples_not_certified": low}
    verdict = "unknown" if low else "exists"
    return KernelCertainReport(verdict, lwb, model if verdict == "exists" else None, diagnostics)


def check_certain_rbf_svm(ds: IncompleteDataset, gamma: float, C: float = 1.0,
                          bounds: RepairBounds | None = None, tol: float = 1e-8) -> KernelCertainReport:
    if bounds is None:
        bounds = derive_bounds(ds, "observed-min-max")
    return _check_by_bounds(ds, KernelSpec.rbf(gamma), C, bounds, tol)


def check_certain_arccos_svm(ds: IncompleteDataset, C: float = 1.0, bounds: RepairBounds | None = None,
                             tol: float = 1e-8) -> KernelCertainReport:
    if bounds is None:
        bounds = derive_bounds(ds, "unbounded")
    return _check_by_bounds(ds, KernelSpec.arccos(), C, bounds, tol)
