"""Reference repair strategies: mean imputation and dropping incomplete rows."""

from __future__ import annotations

import numpy as np

from .dataset import DataError, IncompleteDataset


def feature_means(ds: IncompleteDataset, fallback: float | None = None) -> np.ndarray:
    """Mean of observed values per feature (numpy's pairwise summation).

    A feature with no observed value raises unless ``fallback`` is given.
    """
    means = np.empty(ds.d)
    for j in range(ds.d):
        obs = ds.values[~ds.mask[:, j], j]
        if obs.size == 0:
            if fallback is None:
                raise DataError(f"feature {ds.feature_names[j]!r} has no observed values")
            means[j] = fallback
        else:
            means[j] = np.mean(obs)
    return means


def mean_impute(ds: IncompleteDataset) -> tuple[np.ndarray, np.ndarray]:
    means = feature_means(ds)
    X = ds.values.copy()
    rows, cols = np.nonzero(ds.mask)
    X[rows, cols] = means[cols]
    return X, ds.labels.copy()


def drop_incomplete(ds: IncompleteDataset) -> tuple[np.ndarray, np.ndarray]:
    keep = ~ds.mask.any(axis=1)
    return ds.values[keep].copy(), ds.labels[keep].copy()
