"""Deterministic trainers and loss functions: least squares, linear SVM, kernel SVM.

No model carries an intercept; append a constant column to the features if one
is wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear


class SolverError(RuntimeError):
    """A solver hit its iteration cap. ``best`` holds the last iterate."""

    def __init__(self, message, best=None, violation=None):
        super().__init__(message)
        self.best = best
        self.violation = violation


class NumericError(ValueError):
    pass


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    training_loss: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise NumericError("model coefficients must be finite")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class ResidueReport:
    e: np.ndarray


KERNEL_KINDS = ("linear", "polynomial", "rbf", "arccos")


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    degree: int | None = None
    coef0: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial":
            if self.degree is None or int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial kernel needs an integer degree >= 1")
            if self.coef0 is None or self.coef0 < 0:
                raise ValueError("polynomial kernel needs coef0 >= 0")
            if self.gamma is not None:
                raise ValueError("polynomial kernel takes no gamma")
        elif self.kind == "rbf":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("rbf kernel needs gamma > 0")
            if self.degree is not None or self.coef0 is not None:
                raise ValueError("rbf kernel takes only gamma")
        elif any(p is not None for p in (self.degree, self.coef0, self.gamma)):
            raise ValueError(f"{self.kind} kernel takes no parameters")

    @classmethod
    def polynomial(cls, degree: int, coef0: float = 0.0) -> "KernelSpec":
        return cls("polynomial", degree=int(degree), coef0=float(coef0))

    @classmethod
    def rbf(cls, gamma: float) -> "KernelSpec":
        return cls("rbf", gamma=float(gamma))

    @classmethod
    def arccos(cls) -> "KernelSpec":
        return cls("arccos")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for k in ("degree", "coef0", "gamma"):
            if getattr(self, k) is not None:
                out[k] = getattr(self, k)
        return out


@dataclass(frozen=True)
class DualModel:
    """Kernel SVM in dual form: decision(x) = sum_j alpha_j y_j k(x, x_j)."""

    alphas: np.ndarray
    X: np.ndarray
    y: np.ndarray
    kernel: KernelSpec
    C: float
    equality: bool = True  # trained with sum(alpha * y) = 0
    kkt_violation: float = 0.0
    sv_tol: float = field(default=0.0)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > self.sv_tol)

    def decision(self, Xq) -> np.ndarray:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        sv = self.support
        if sv.size == 0:
            return np.zeros(Xq.shape[0])
        K = gram(self.kernel, Xq, self.X[sv])
        return K @ (self.alphas[sv] * self.y[sv])

    def dual_objective(self) -> float:
        return dual_objective(self.alphas, gram(self.kernel, self.X), self.y)


# --- losses ----------------------------------------------------------------


def ols_loss(X, y, w) -> float:
    r = np.asarray(X, dtype=float) @ np.asarray(w, dtype=float) - np.asarray(y, dtype=float)
    return float(r @ r)


def svm_primal_loss(X, y, w, C) -> float:
    w = np.asarray(w, dtype=float)
    margins = np.asarray(y, dtype=float) * (np.asarray(X, dtype=float) @ w)
    return float(0.5 * (w @ w) + C * np.maximum(0.0, 1.0 - margins).sum())


def svm_subgradient(X, y, w, C) -> np.ndarray:
    """Subgradient of the primal SVM loss; kinks contribute zero."""
    margins = y * (X @ w)
    active = margins < 1.0
    return w - C * (y[active] @ X[active])


def dual_objective(alphas, K, y) -> float:
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


# --- least squares -----------------------------------------------------------


def train_ols(X, y) -> tuple[LinearModel, ResidueReport]:
    """Least squares with the minimum-norm solution under rank deficiency."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError("train_ols needs a non-empty 2-D matrix")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("train_ols: non-finite input")
    w, *_ = np.linalg.lstsq(X, y, rcond=None)
    e = X @ w - y
    return LinearModel(w, float(e @ e)), ResidueReport(e)


# --- linear SVM -------------------------------------------------------------


def _huber_hinge(z, mu):
    """Hinge max(0, z) with its corner rounded over [0, mu]; value and slope."""
    val = np.where(z >= mu, z - mu / 2, np.where(z > 0, z * z / (2 * mu), 0.0))
    slope = np.where(z >= mu, 1.0, np.where(z > 0, z / mu, 0.0))
    return val, slope


def _newton_smoothed(yX, C, w, mu, max_steps=100):
    """Newton with backtracking on the primal whose hinges are rounded by mu."""
    d = yX.shape[1]

    def obj(v):
        return 0.5 * (v @ v) + C * _huber_hinge(1.0 - yX @ v, mu)[0].sum()

    for _ in range(max_steps):
        z = 1.0 - yX @ w
        _, s = _huber_hinge(z, mu)
        g = w - C * (s @ yX)
        Q = (z > 0) & (z < mu)
        z_hi = z >= mu
        H = np.eye(d) + (C / mu) * (yX[Q].T @ yX[Q])
        step = np.linalg.solve(H, g)
        f0, t = obj(w), 1.0
        while obj(w - t * step) > f0 - 1e-4 * t * (g @ step) and t > 1e-12:
            t *= 0.5
        w = w - t * step
        if t * np.abs(step).max() <= 1e-15 * max(1.0, np.abs(w).max()):
            break
        # piecewise quadratic: a full step that keeps the pattern is exact
        z = 1.0 - yX @ w
        if t == 1.0 and np.array_equal(Q, (z > 0) & (z < mu)) and np.array_equal(z >= mu, z_hi):
            break
    return w


def _exact_finish(yX, C, w):
    """Dual point built from the margin pattern of w; returns (alpha, gap, primal).

    Examples with margin near 1 form the set E and those below it take
    alpha = C. The primal optimum for that pattern is the projection of the
    bounded part onto {margin = 1 on E}; multipliers in [0, C] reproducing it
    come from bounded least squares. Several thresholds are tried.
    """
    m = yX @ w
    best = None
    for kappa in (1e-3, 1e-5, 1e-7, 1e-9):
        E = np.abs(m - 1.0) <= kappa
        L = m < 1.0 - kappa
        a = np.where(L, C, 0.0)
        if E.any():
            F = yX[E]
            gL = a @ yX
            lam, *_ = np.linalg.lstsq(F @ F.T, 1.0 - F @ gL, rcond=None)
            a[E] = lsq_linear(F.T, F.T @ lam, bounds=(0.0, C), method="bvls", tol=1e-14).x
        v = a @ yX
        vv = v @ v
        primal = 0.5 * vv + C * np.maximum(0.0, 1.0 - yX @ v).sum()
        gap = primal - (a.sum() - 0.5 * vv)
        if best is None or gap < best[1]:
            best = (a, gap, primal)
    return best


def train_linear_svm(X, y, C: float, tol: float = 1e-8, max_iter: int = 200_000) -> LinearModel:
    """Minimise 0.5||w||^2 + C * sum(hinge).

    Newton steps on a smoothed primal with shrinking smoothing width, each
    stage followed by an exact finish from the margin pattern. Succeeds once
    the duality gap is at most ``tol * max(1, primal)``. ``max_iter`` caps
    the total number of Newton steps.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not C > 0:
        raise ValueError("C must be positive")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("train_linear_svm: non-finite input")
    yX = X * y[:, None]
    w = np.zeros(X.shape[1])
    best = None
    stages = 14
    per_stage = max(1, max_iter // stages)
    for k in range(stages):
        w = _newton_smoothed(yX, C, w, 10.0 ** -k, per_stage)
        a, gap, primal = _exact_finish(yX, C, w)
        if best is None or gap < best[2]:
            best = (a @ yX, primal, gap)
        if best[2] <= tol * max(1.0, abs(best[1])):
            return LinearModel(best[0], best[1])
    raise SolverError(f"linear SVM did not converge (duality gap {best[2]:.3g})",
                      best=LinearModel(best[0], best[1]), violation=best[2])


# --- kernels ----------------------------------------------------------------


def _unit_rows(A):
    """Rows scaled to unit length (max-abs first, so tiny or huge rows keep their direction)."""
    s = np.abs(A).max(axis=1)
    if (s == 0).any():
        raise ValueError("arccos kernel undefined for a zero vector")
    A = A / s[:, None]
    return A / np.sqrt(np.einsum("ij,ij->i", A, A))[:, None]


def _angle(u, v):
    """Angle between unit vectors; well conditioned near 0 and pi, unlike acos."""
    return 2.0 * math.atan2(float(np.linalg.norm(u - v)), float(np.linalg.norm(u + v)))


def kernel_eval(kernel: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("kernel_eval: vectors differ in length")
    if kernel.kind == "linear":
        return float(a @ b)
    if kernel.kind == "polynomial":
        return float((a @ b + kernel.coef0) ** kernel.degree)
    if kernel.kind == "rbf":
        diff = a - b
        return float(math.exp(-kernel.gamma * (diff @ diff)))
    u, v = _unit_rows(a[None, :]), _unit_rows(b[None, :])
    return float(math.pi - _angle(u[0], v[0]))


def gram(kernel: KernelSpec, A, B=None) -> np.ndarray:
    """Kernel matrix between rows of A and rows of B (B defaults to A)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    same = B is None
    B = A if same else np.atleast_2d(np.asarray(B, dtype=float))
    if kernel.kind == "rbf":
        sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
        K = np.exp(-kernel.gamma * sq)
    else:
        D = A @ B.T
        if kernel.kind == "linear":
            K = D
        elif kernel.kind == "polynomial":
            K = (D + kernel.coef0) ** kernel.degree
        else:
            U, V = _unit_rows(A), _unit_rows(B)
            c = np.clip(U @ V.T, -1.0, 1.0)
            K = np.pi - np.arccos(c)
            for i, j in zip(*np.nonzero(np.abs(c) > 0.9)):
                K[i, j] = np.pi - _angle(U[i], V[j])
    if same:
        K = 0.5 * (K + K.T)
    return K


# --- kernel SVM (dual) --------------------------------------------------------


def _smo_equality(Q, y, C, tol, max_iter):
    """Pairwise SMO with maximal-violating-pair selection (sum(alpha*y) = 0)."""
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)
    tau = 1e-12
    for it in range(int(max_iter)):
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            return alpha, 0.0
        i = int(np.flatnonzero(up)[np.argmax(yG[up])])
        j = int(np.flatnonzero(low)[np.argmin(yG[low])])
        viol = yG[i] - yG[j]
        if viol <= tol:
            return alpha, max(viol, 0.0)
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(Q[i, i] + Q[j, j] + 2 * Q[i, j], tau)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0 and aj < 0:
                aj, ai = 0.0, diff
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0 and ai > C:
                ai, aj = C, C - diff
            elif diff <= 0 and aj > C:
                aj, ai = C, C + diff
        else:
            quad = max(Q[i, i] + Q[j, j] - 2 * Q[i, j], tau)
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            ai -= delta
            aj += delta
            if s > C and ai > C:
                ai, aj = C, s - C
            elif s <= C and aj < 0:
                aj, ai = 0.0, s
            if s > C and aj > C:
                aj, ai = C, s - C
            elif s <= C and ai < 0:
                ai, aj = 0.0, s
        di, dj = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += Q[:, i] * di + Q[:, j] * dj
    raise SolverError("SMO iteration cap reached", best=alpha, violation=float(viol))


def _cd_box(Q, C, tol, max_iter):
    """Greedy coordinate descent for the box-constrained dual (no equality)."""
    n = Q.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(Q).copy()
    for it in range(int(max_iter)):
        pg = np.where(alpha <= 0.0, np.minimum(G, 0.0), np.where(alpha >= C, np.maximum(G, 0.0), G))
        i = int(np.argmax(np.abs(pg)))
        viol = abs(pg[i])
        if viol <= tol:
            return alpha, float(viol)
        if diag[i] <= 1e-15:
            new = C if G[i] < 0 else 0.0
        else:
            new = min(max(alpha[i] - G[i] / diag[i], 0.0), C)
        delta = new - alpha[i]
        alpha[i] = new
        G += Q[:, i] * delta
    raise SolverError("coordinate descent iteration cap reached", best=alpha, violation=float(viol))


def train_kernel_svm_dual(X, y, kernel: KernelSpec, C: float, tol: float = 1e-6,
                          max_iter: int = 1_000_000, equality: bool = True) -> DualModel:
    """Maximise sum(a) - 0.5 a'Qa subject to 0 <= a <= C.

    With ``equality`` the constraint sum(a*y) = 0 is also imposed and solved by
    SMO. Without it the problem is the exact dual of the intercept-free primal
    and is solved by greedy coordinate descent. ``tol`` bounds the KKT
    violation at exit.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not C > 0:
        raise ValueError("C must be positive")
    K = gram(kernel, X)
    if not np.all(np.isfinite(K)):
        raise NumericError("kernel matrix is not finite")
    Q = K * np.outer(y, y)
    if equality:
        alpha, viol = _smo_equality(Q, y, C, tol, max_iter)
    else:
        alpha, viol = _cd_box(Q, C, tol, max_iter)
    alpha = np.clip(alpha, 0.0, C)
    return DualModel(alpha, X.copy(), y.copy(), kernel, float(C), equality, viol, sv_tol=1e-10 * max(1.0, C))
