"""Seeded synthetic datasets used for timing and examples."""

from __future__ import annotations

import numpy as np

from .dataset import IncompleteDataset


def make_synthetic(n: int = 5000, d: int = 30, missing_factor: float = 0.01, task: str = "regression",
                   seed: int = 0, noise: float = 0.1) -> IncompleteDataset:
    """Gaussian features with a planted linear model; ``missing_factor`` of the rows lose one cell.

    Classification labels are the sign of the planted score (ties go to +1).
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    score = X @ w + noise * rng.standard_normal(n)
    y = np.where(score >= 0, 1.0, -1.0) if task == "classification" else score
    k = int(round(missing_factor * n))
    rows = rng.choice(n, size=k, replace=False)
    cols = rng.integers(0, d, size=k)
    mask = np.zeros((n, d), dtype=bool)
    mask[rows, cols] = True
    X[mask] = np.nan
    return IncompleteDataset(X, mask, y, tuple(f"x{j}" for j in range(d)), task)
