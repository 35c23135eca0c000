"""Incomplete tabular training data: loading, missing-value structure, repairs.

Missing cells are stored as NaN in ``values`` and flagged in ``mask``; the
mask is the only source of truth about which cells are missing.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_NULL_MARKERS = frozenset({"", "na", "null", "?", "nan"})

POLICIES = ("observed-min-max", "user-file", "unbounded")


class DataError(ValueError):
    """Raised for malformed input data (bad cells, missing columns, empty data)."""


class ContractError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class IncompleteDataset:
    values: np.ndarray
    mask: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    task: str = "regression"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        labels = np.array(self.labels, dtype=float).reshape(-1)
        if values.ndim != 2:
            raise ContractError("values must be a 2-D matrix")
        n, d = values.shape
        if n < 1 or d < 1:
            raise ContractError(f"dataset needs n >= 1 and d >= 1, got {n}x{d}")
        if mask.shape != values.shape:
            raise ContractError("mask shape does not match values")
        if labels.shape[0] != n:
            raise ContractError("labels length does not match number of rows")
        if self.task not in ("regression", "classification"):
            raise ContractError(f"unknown task {self.task!r}")
        if self.task == "classification" and not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ContractError("classification labels must be -1 or +1")
        if not np.all(np.isfinite(values[~mask])):
            raise ContractError("observed cells must be finite")
        if not np.all(np.isfinite(labels)):
            raise ContractError("labels must be finite")
        values[mask] = np.nan
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(d))
        if len(names) != d:
            raise ContractError("feature_names length does not match columns")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_rows(cls, rows, labels, feature_names=(), task="regression"):
        """Build from nested lists where ``None`` (or NaN) marks a missing cell."""
        arr = np.array([[np.nan if v is None else float(v) for v in row] for row in rows])
        return cls(arr, np.isnan(arr), labels, feature_names, task)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def missing_cells(self) -> np.ndarray:
        """(k, 2) array of missing (row, col) indices in row-major order."""
        return np.argwhere(self.mask)

    @property
    def n_missing(self) -> int:
        return int(self.mask.sum())

    def is_complete(self) -> bool:
        return not self.mask.any()

    def fill(self, cell_values) -> np.ndarray:
        """Complete matrix with missing cells (row-major order) set to ``cell_values``."""
        cell_values = np.asarray(cell_values, dtype=float).reshape(-1)
        if cell_values.shape[0] != self.n_missing:
            raise ContractError(
                f"expected {self.n_missing} repair values, got {cell_values.shape[0]}"
            )
        X = self.values.copy()
        X[self.mask] = cell_values
        return X


@dataclass(frozen=True)
class RepairBounds:
    lo: np.ndarray
    hi: np.ndarray
    policy: str = "observed-min-max"

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ContractError(f"unknown bounds policy {self.policy!r}")
        lo = np.array(self.lo, dtype=float)
        hi = np.array(self.hi, dtype=float)
        if lo.shape != hi.shape:
            raise ContractError("lo/hi shapes differ")
        bad = ~(lo <= hi) & ~(np.isnan(lo) & np.isnan(hi))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ContractError(f"lo > hi at cell ({i}, {j})")
        object.__setattr__(self, "lo", _frozen(lo))
        object.__setattr__(self, "hi", _frozen(hi))

    def cell_bounds(self, ds: IncompleteDataset) -> tuple[np.ndarray, np.ndarray]:
        """lo/hi vectors aligned with ``ds.missing_cells``."""
        return self.lo[ds.mask], self.hi[ds.mask]

    def is_finite_at(self, mask: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(self.lo[mask])) and np.all(np.isfinite(self.hi[mask])))


@dataclass(frozen=True)
class Repair:
    assignments: Mapping[tuple[int, int], float] = field(default_factory=dict)

    @classmethod
    def from_vector(cls, ds: IncompleteDataset, cell_values) -> "Repair":
        cell_values = np.asarray(cell_values, dtype=float).reshape(-1)
        cells = ds.missing_cells
        if len(cells) != len(cell_values):
            raise ContractError("repair vector length does not match missing cells")
        return cls({(int(i), int(j)): float(v) for (i, j), v in zip(cells, cell_values)})

    def vector(self, ds: IncompleteDataset) -> np.ndarray:
        return np.array([self.assignments[(int(i), int(j))] for i, j in ds.missing_cells])

    def to_json(self) -> list[dict]:
        return [{"row": i, "col": j, "value": v} for (i, j), v in sorted(self.assignments.items())]


# --- loading ---------------------------------------------------------------


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}, column {col!r}: non-finite value {text!r}")
    return v


def load_csv(
    path,
    label_column: str,
    null_markers: Iterable[str] = DEFAULT_NULL_MARKERS,
    task: str = "regression",
    positive_label: str | None = None,
) -> IncompleteDataset:
    """Read a headered CSV into an :class:`IncompleteDataset`.

    Cells matching a null marker (case-insensitive, surrounding whitespace
    ignored) become missing. Rows whose label is null are dropped. For
    classification, labels equal to ``positive_label`` map to +1 and all others
    to -1; without ``positive_label`` the labels must already be numeric +-1.
    """
    markers = {m.strip().lower() for m in null_markers}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not found in header {header}")
        li = header.index(label_column)
        feature_names = [h for k, h in enumerate(header) if k != li]
        if not feature_names:
            raise DataError("no feature columns besides the label")

        rows, labels = [], []
        dropped = 0
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"row {lineno}: expected {len(header)} fields, got {len(rec)}")
            raw_label = rec[li].strip()
            if raw_label.lower() in markers:
                dropped += 1
                continue
            if task == "classification" and positive_label is not None:
                labels.append(1.0 if raw_label == positive_label else -1.0)
            else:
                lab = _parse_float(raw_label, lineno, label_column)
                if task == "classification" and lab not in (-1.0, 1.0):
                    raise DataError(
                        f"row {lineno}: classification label {raw_label!r} is not +-1; "
                        "pass a positive label to map it"
                    )
                labels.append(lab)
            row = []
            for k, cell in enumerate(rec):
                if k == li:
                    continue
                c = cell.strip()
                row.append(math.nan if c.lower() in markers else _parse_float(c, lineno, header[k]))
            rows.append(row)

    if dropped:
        log.warning("dropped %d row(s) with a missing label", dropped)
    if not rows:
        raise DataError("no usable examples")
    values = np.array(rows, dtype=float)
    return IncompleteDataset(values, np.isnan(values), labels, tuple(feature_names), task)


def write_csv(path, X: np.ndarray, y: np.ndarray, feature_names: Sequence[str], label_column: str,
              mask: np.ndarray | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*feature_names, label_column])
        for i in range(X.shape[0]):
            cells = ["" if mask is not None and mask[i, j] else repr(float(X[i, j]))
                     for j in range(X.shape[1])]
            w.writerow([*cells, repr(float(y[i]))])


# --- structure ---------------------------------------------------------------


def missing_sets(ds: IncompleteDataset) -> tuple[list[int], list[int]]:
    """Indices of incomplete examples and of incomplete features."""
    rows = np.flatnonzero(ds.mask.any(axis=1))
    cols = np.flatnonzero(ds.mask.any(axis=0))
    return [int(i) for i in rows], [int(j) for j in cols]


def missing_factor(ds: IncompleteDataset) -> float:
    return float(ds.mask.any(axis=1).sum()) / ds.n


def derive_bounds(
    ds: IncompleteDataset,
    policy: str = "observed-min-max",
    overrides: Mapping[str, Sequence[float]] | str | Path | None = None,
) -> RepairBounds:
    """Per-cell repair intervals.

    ``overrides`` maps feature name to ``[lo, hi]`` (or is a path to such a
    JSON file). It is required for the ``user-file`` policy and, for the
    ``observed-min-max`` policy, replaces the observed range of the features
    it names. Features not named keep the policy's default.
    """
    if policy not in POLICIES:
        raise ContractError(f"unknown bounds policy {policy!r}")
    if isinstance(overrides, (str, Path)):
        with open(overrides, encoding="utf-8") as fh:
            overrides = json.load(fh)
    overrides = dict(overrides or {})
    if policy == "user-file" and not overrides:
        raise ContractError("user-file policy needs a bounds mapping")
    unknown = set(overrides) - set(ds.feature_names)
    if unknown:
        raise DataError(f"bounds name unknown feature(s): {sorted(unknown)}")

    lo = np.full((ds.n, ds.d), np.nan)
    hi = np.full((ds.n, ds.d), np.nan)
    _, cols = missing_sets(ds)
    for j in cols:
        name = ds.feature_names[j]
        col_mask = ds.mask[:, j]
        if name in overrides:
            pair = overrides[name]
            if len(pair) != 2:
                raise DataError(f"bounds for {name!r} must be [lo, hi]")
            a, b = float(pair[0]), float(pair[1])
        elif policy == "observed-min-max":
            observed = ds.values[~col_mask, j]
            if observed.size == 0:
                raise DataError(f"feature {name!r} has no observed values to bound its missing cells")
            a, b = float(observed.min()), float(observed.max())
        else:
            a, b = -math.inf, math.inf
        if a > b:
            raise DataError(f"bounds for {name!r}: lo {a} > hi {b}")
        lo[col_mask, j] = a
        hi[col_mask, j] = b
    return RepairBounds(lo, hi, policy)


def apply_repair(ds: IncompleteDataset, r: Repair) -> tuple[np.ndarray, np.ndarray]:
    """Complete matrix and labels for repair ``r``."""
    cells = {(int(i), int(j)) for i, j in ds.missing_cells}
    given = set(r.assignments)
    if given != cells:
        missing = sorted(cells - given)
        extra = sorted(given - cells)
        raise ContractError(f"repair does not cover the missing cells (unassigned={missing}, extra={extra})")
    X = ds.values.copy()
    for (i, j), v in r.assignments.items():
        X[i, j] = v
    return X, ds.labels.copy()


def submatrices(ds: IncompleteDataset) -> tuple[IncompleteDataset | None, IncompleteDataset | None]:
    """(complete-feature dataset, complete-example dataset).

    Either may be ``None`` when it would have zero columns or zero rows, since
    an :class:`IncompleteDataset` needs at least one of each.
    """
    row_ok = ~ds.mask.any(axis=1)
    col_ok = ~ds.mask.any(axis=0)
    by_feature = None
    if col_ok.any():
        by_feature = IncompleteDataset(
            ds.values[:, col_ok], ds.mask[:, col_ok], ds.labels,
            tuple(np.array(ds.feature_names)[col_ok]), ds.task,
        )
    by_example = None
    if row_ok.any():
        by_example = IncompleteDataset(
            ds.values[row_ok], ds.mask[row_ok], ds.labels[row_ok], ds.feature_names, ds.task,
        )
    return by_feature, by_example


def complete_columns(ds: IncompleteDataset) -> np.ndarray:
    """Boolean column selector for complete features."""
    return ~ds.mask.any(axis=0)


def complete_rows(ds: IncompleteDataset) -> np.ndarray:
    """Boolean row selector for complete examples."""
    return ~ds.mask.any(axis=1)
