import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from certainml.trainers import (
    KernelSpec,
    NumericError,
    SolverError,
    gram,
    kernel_eval,
    ols_loss,
    svm_primal_loss,
    train_kernel_svm_dual,
    train_linear_svm,
    train_ols,
)


# --- least squares ---------------------------------------------------------------


def test_ols_exact_fit():
    m, r = train_ols([[1.0], [2.0]], [2.0, 4.0])
    assert m.w == pytest.approx([2.0]) and r.e == pytest.approx([0.0, 0.0], abs=1e-12)


def test_ols_one_feature_normal_equation():
    X, y = np.array([[1.0], [2.0]]), np.array([1.0, 3.0])
    w_hand = (X[:, 0] @ y) / (X[:, 0] @ X[:, 0])
    m, r = train_ols(X, y)
    assert w_hand == pytest.approx(1.4)
    assert m.w[0] == pytest.approx(w_hand, abs=1e-12)
    # residue is prediction minus label
    assert r.e == pytest.approx([0.4, -0.2], abs=1e-12)


def test_ols_duplicate_columns_min_norm():
    rng = np.random.default_rng(3)
    z = rng.normal(size=6)
    X = np.column_stack([z, z])
    y = rng.normal(size=6)
    m, _ = train_ols(X, y)
    assert m.w == pytest.approx(np.linalg.pinv(X) @ y, abs=1e-10)
    assert m.w[0] == pytest.approx(m.w[1], abs=1e-12)


def test_ols_rejects_non_finite():
    with pytest.raises(NumericError):
        train_ols([[np.inf]], [1.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(1, 4), st.integers(0, 2**31))
def test_ols_residue_orthogonal_to_columns(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) * rng.uniform(0.1, 10)
    y = rng.normal(size=n)
    _, r = train_ols(X, y)
    for j in range(d):
        assert abs(r.e @ X[:, j]) <= 1e-8 * (1 + np.linalg.norm(X[:, j]) * np.linalg.norm(r.e))


# --- linear SVM ------------------------------------------------------------------


def test_linear_svm_symmetric_pair():
    m = train_linear_svm([[-2.0, 0.0], [2.0, 0.0]], [-1.0, 1.0], 1.0)
    assert m.w == pytest.approx([0.5, 0.0], abs=1e-7)
    assert m.training_loss == pytest.approx(0.125, abs=1e-8)


def test_linear_svm_zero_example():
    m = train_linear_svm([[0.0, 0.0]], [1.0], 1.0)
    assert m.w == pytest.approx([0.0, 0.0], abs=1e-12)


def test_linear_svm_scaling_c_keeps_separable_solution():
    X = np.array([[-2.0, 0.3], [2.0, -0.1], [-3.0, 1.0], [4.0, 0.5]])
    y = np.array([-1.0, 1.0, -1.0, 1.0])
    a = train_linear_svm(X, y, 1.0)
    b = train_linear_svm(X, y, 10.0)
    assert np.all(y * (X @ a.w) >= 1 - 1e-9)
    assert a.w == pytest.approx(b.w, abs=1e-7)


def test_linear_svm_single_class():
    # 0.5 w^2 + hinge(1 - w) + hinge(1 - 2w): subgradient w - t contains 0 at w = 1
    m = train_linear_svm([[1.0], [2.0]], [1.0, 1.0], 1.0)
    assert m.w == pytest.approx([1.0], abs=1e-8)


def test_linear_svm_rejects_bad_c():
    with pytest.raises(ValueError):
        train_linear_svm([[1.0]], [1.0], 0.0)


def test_linear_svm_cap_raises_with_best_iterate():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 5))
    y = np.where(rng.random(200) < 0.5, -1.0, 1.0)
    with pytest.raises(SolverError) as exc:
        train_linear_svm(X, y, 1.0, tol=0.0, max_iter=1)
    assert exc.value.best is not None and exc.value.violation > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(1, 4), st.sampled_from([0.1, 1.0, 10.0]), st.integers(0, 2**31))
def test_linear_svm_local_optimality_probe(n, d, C, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    m = train_linear_svm(X, y, C)
    base = svm_primal_loss(X, y, m.w, C)
    delta = rng.normal(size=(1000, d))
    delta *= (0.1 * rng.random(1000) / np.linalg.norm(delta, axis=1))[:, None]
    for dw in delta:
        assert base <= svm_primal_loss(X, y, m.w + dw, C) + 1e-8 * max(1.0, base)


def test_losses_trivial_values():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert ols_loss(X, X @ [1.0, -1.0], [1.0, -1.0]) == 0.0
    assert svm_primal_loss(X, [1.0, -1.0], np.zeros(2), 2.5) == 5.0


def test_trained_losses_beat_random_models():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(12, 3))
    y_reg = rng.normal(size=12)
    y_cls = np.where(rng.random(12) < 0.5, -1.0, 1.0)
    w_ols = train_ols(X, y_reg)[0].w
    w_svm = train_linear_svm(X, y_cls, 1.0).w
    for w in rng.normal(scale=2.0, size=(100, 3)):
        assert ols_loss(X, y_reg, w_ols) <= ols_loss(X, y_reg, w)
        assert svm_primal_loss(X, y_cls, w_svm, 1.0) <= svm_primal_loss(X, y_cls, w, 1.0)


# --- kernels ---------------------------------------------------------------------


def test_kernel_eval_examples():
    assert kernel_eval(KernelSpec.polynomial(2, 1.0), [1.0, 0.0], [1.0, 0.0]) == 4.0
    assert kernel_eval(KernelSpec.rbf(1.0), [0.3, -2.0], [0.3, -2.0]) == 1.0
    assert kernel_eval(KernelSpec.arccos(), [1.0, 2.0], [2.0, 4.0]) == math.pi


def test_arccos_zero_vector_is_a_domain_error():
    with pytest.raises(ValueError):
        kernel_eval(KernelSpec.arccos(), [0.0, 0.0], [1.0, 0.0])


def test_kernel_spec_parameters_match_kind():
    with pytest.raises(ValueError):
        KernelSpec("rbf")
    with pytest.raises(ValueError):
        KernelSpec("polynomial", degree=2, coef0=1.0, gamma=1.0)
    with pytest.raises(ValueError):
        KernelSpec("arccos", gamma=1.0)


vecs = arrays(np.float64, 3, elements=st.floats(-10, 10))


@settings(max_examples=200, deadline=None)
@given(vecs, vecs)
def test_kernel_symmetry(a, b):
    kinds = [KernelSpec.polynomial(3, 0.5), KernelSpec.rbf(0.7), KernelSpec("linear")]
    if np.any(a) and np.any(b):
        kinds.append(KernelSpec.arccos())
    for k in kinds:
        assert kernel_eval(k, a, b) == kernel_eval(k, b, a)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_gram_psd(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, 3))
    for k in (KernelSpec.polynomial(2, 1.0), KernelSpec.polynomial(3, 0.0), KernelSpec.rbf(0.5)):
        K = gram(k, A)
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * max(1.0, np.abs(K).max())


def test_gram_matches_kernel_eval():
    rng = np.random.default_rng(5)
    A, B = rng.normal(size=(4, 3)), rng.normal(size=(3, 3))
    for k in (KernelSpec.polynomial(2, 1.0), KernelSpec.rbf(0.5), KernelSpec.arccos()):
        K = gram(k, A, B)
        for i in range(4):
            for j in range(3):
                assert K[i, j] == pytest.approx(kernel_eval(k, A[i], B[j]), abs=1e-12)


# --- kernel dual -------------------------------------------------------------------


def test_dual_two_point_polynomial():
    X, y = np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([-1.0, 1.0])
    k = KernelSpec.polynomial(2, 1.0)
    assert gram(k, X).tolist() == [[4.0, 0.0], [0.0, 4.0]]
    # maximise 2a - 4a^2 by hand: a = 1/4
    for equality in (True, False):
        m = train_kernel_svm_dual(X, y, k, 1.0, tol=1e-10, equality=equality)
        assert m.alphas == pytest.approx([0.25, 0.25], abs=1e-8)


def _kkt_residuals(m):
    f = m.decision(m.X)
    marg = m.y * f
    a, C = m.alphas, m.C
    res = np.where(a <= 1e-12, np.maximum(0, 1 - marg), np.where(a >= C - 1e-12, np.maximum(0, marg - 1),
                                                                  np.abs(marg - 1)))
    return res


def test_dual_rbf_separable_kkt():
    X = np.array([[-2.0, 0.0], [-1.5, 0.5], [1.5, 0.0], [2.0, -0.5]])
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    m = train_kernel_svm_dual(X, y, KernelSpec.rbf(1.0), 1.0, tol=1e-8, equality=False)
    assert _kkt_residuals(m).max() <= 1e-6


def test_dual_opposite_duplicates_hit_box():
    X = np.array([[1.0, 1.0], [1.0, 1.0]])
    y = np.array([1.0, -1.0])
    C = 0.5
    m = train_kernel_svm_dual(X, y, KernelSpec.polynomial(2, 1.0), C, tol=1e-10)
    # brute force over the feasible line a1 = a2 = t (equality constraint)
    ts = np.linspace(0, C, 10_001)
    assert ts[np.argmax(2 * ts)] == C
    assert m.alphas == pytest.approx([C, C], abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**31), st.sampled_from([0.1, 1.0, 10.0]), st.booleans())
def test_dual_feasibility(n, seed, C, equality):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
    m = train_kernel_svm_dual(X, y, KernelSpec.rbf(0.5), C, tol=1e-8, equality=equality)
    assert np.all(m.alphas >= 0) and np.all(m.alphas <= C)
    if equality:
        assert abs(m.alphas @ y) <= 1e-8
