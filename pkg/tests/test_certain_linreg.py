import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from certainml.certain_linreg import check_certain_linreg
from certainml.dataset import IncompleteDataset, missing_sets
from certainml.oracle import GridSpec, grid_vectors
from certainml.trainers import ols_loss, train_ols

from helpers import box, linreg_instance


def ds_from(rows, y):
    return IncompleteDataset.from_rows(rows, y)


def test_exact_fit_exists_and_holds_on_grid():
    ds = ds_from([[1.0, None], [2.0, 3.0]], [2.0, 4.0])
    rep = check_certain_linreg(ds)
    assert rep.verdict == "exists"
    assert rep.model.w.tolist() == pytest.approx([2.0, 0.0])
    for v in np.linspace(-2, 2, 21):
        X = ds.fill([v])
        assert ols_loss(X, ds.labels, rep.model.w) - train_ols(X, ds.labels)[0].training_loss <= 1e-8


def test_nonzero_residue_at_null_refuted():
    ds = ds_from([[1.0, None], [2.0, 1.0]], [1.0, 3.0])
    rep = check_certain_linreg(ds)
    assert rep.verdict == "not_exists"
    assert rep.witness.features == [1]
    assert rep.witness.reason == "residue nonzero at a missing cell"
    assert rep.diagnostics["witness_gap"] > 1e-8
    # two repairs with different OLS optima
    a = train_ols(ds.fill([-2.0]), ds.labels)[0].w
    b = train_ols(ds.fill([2.0]), ds.labels)[0].w
    assert not np.allclose(a, b)


def test_complete_data_is_plain_ols():
    X = np.array([[1.0, 2.0], [3.0, 1.0], [0.5, 0.5]])
    y = np.array([1.0, 2.0, 0.0])
    rep = check_certain_linreg(IncompleteDataset(X, np.zeros_like(X, bool), y))
    assert rep.verdict == "exists"
    assert rep.model.w == pytest.approx(train_ols(X, y)[0].w, abs=1e-12)


def test_no_complete_feature():
    ds = ds_from([[None], [1.0]], [1.0, 0.0])
    rep = check_certain_linreg(ds)
    assert rep.verdict == "not_exists"
    zero = ds_from([[None], [1.0]], [0.0, 0.0])
    assert check_certain_linreg(zero).verdict == "exists"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["random", "exact", "orthogonal"]))
def test_verdict_sound_and_complete(seed, kind):
    rng = np.random.default_rng(seed)
    ds = linreg_instance(rng, kind)
    rep = check_certain_linreg(ds)
    _, inc = missing_sets(ds)
    if rep.verdict == "exists":
        # the model never uses an incomplete feature
        assert all(rep.model.w[j] == 0.0 for j in inc)
        for v in grid_vectors(ds, GridSpec(5, box(ds, -3.0, 3.0))):
            X = ds.fill(v)
            best = train_ols(X, ds.labels)[0].training_loss
            assert ols_loss(X, ds.labels, rep.model.w) - best <= 1e-8 * max(1.0, best)
    else:
        assert rep.diagnostics["witness_gap"] > 1e-8
        X = ds.fill(rep.witness.repair.vector(ds))
        w = np.array(rep.diagnostics["padded_model"])
        assert ols_loss(X, ds.labels, w) - train_ols(X, ds.labels)[0].training_loss > 1e-8
