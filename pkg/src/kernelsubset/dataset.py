"""Labeled datasets, standardization and the instance-pair structure.

Every solver in this package works on a :class:`PairStructure`: the class
weights ``psi``, the list of instance pairs ``i < h`` split by the sign of
``psi_i * psi_h`` and the per-feature squared differences of each pair.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

STD_TOL = 1e-9


class DatasetError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``x`` (n x p) with labels ``y`` in {-1, +1}."""

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()
    standardized: bool = False
    dropped: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=int).ravel()
        if x.ndim != 2:
            raise DatasetError(f"x must be 2-D, got shape {x.shape}")
        n, p = x.shape
        if n < 2 or p < 1:
            raise DatasetError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise DatasetError(f"{y.shape[0]} labels for {n} rows")
        if not np.all(np.isin(y, (-1, 1))):
            raise DatasetError("labels must be -1 or +1")
        if not (np.any(y == 1) and np.any(y == -1)):
            raise DatasetError("both classes must be present (label balance)")
        if not np.all(np.isfinite(x)):
            raise DatasetError("x contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise DatasetError(f"{len(names)} feature names for {p} columns")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def select_rows(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx], self.feature_names, self.standardized)

    def select_features(self, cols) -> "Dataset":
        cols = list(cols)
        return Dataset(
            self.x[:, cols],
            self.y,
            tuple(self.feature_names[j] for j in cols),
            self.standardized,
        )


@dataclass(frozen=True)
class SubsetMask:
    """Binary feature mask with cardinality budget ``theta``."""

    z: tuple[int, ...]
    theta: int

    def __post_init__(self):
        z = tuple(int(v) for v in self.z)
        if any(v not in (0, 1) for v in z):
            raise ValueError("mask entries must be 0 or 1")
        if not 0 <= self.theta <= len(z):
            raise ValueError(f"theta={self.theta} outside [0, {len(z)}]")
        if sum(z) > self.theta:
            raise ValueError(f"mask selects {sum(z)} features, budget is {self.theta}")
        object.__setattr__(self, "z", z)

    @classmethod
    def from_indices(cls, indices, p: int, theta: int | None = None) -> "SubsetMask":
        z = [0] * p
        for j in indices:
            z[j] = 1
        return cls(tuple(z), len(set(indices)) if theta is None else theta)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(j for j, v in enumerate(self.z) if v)

    @property
    def size(self) -> int:
        return sum(self.z)

    def array(self) -> np.ndarray:
        return np.asarray(self.z, dtype=float)


@dataclass(frozen=True, eq=False)
class PairStructure:
    """Class weights and pairwise squared differences for all pairs ``i < h``.

    Attributes
    ----------
    psi : ndarray (n,)
        ``y_i / |N(y_i)|``.
    pairs : ndarray (m, 2)
        Zero-based ``(i, h)`` with ``i < h`` in lexicographic order,
        ``m = n(n-1)/2``.
    prod : ndarray (m,)
        ``psi_i * psi_h`` per pair.
    dist : ndarray (m, p)
        ``(x_ij - x_hj)**2``.
    """

    psi: np.ndarray
    pairs: np.ndarray
    prod: np.ndarray
    dist: np.ndarray

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @property
    def p(self) -> int:
        return self.dist.shape[1]

    @property
    def plus(self) -> np.ndarray:
        """Boolean mask of pairs in H+ (same class)."""
        return self.prod > 0

    @property
    def minus(self) -> np.ndarray:
        return self.prod < 0

    @property
    def H(self) -> list[tuple[int, int]]:
        return [tuple(map(int, ph)) for ph in self.pairs]

    @property
    def H_plus(self) -> list[tuple[int, int]]:
        return [tuple(map(int, ph)) for ph in self.pairs[self.plus]]

    @property
    def H_minus(self) -> list[tuple[int, int]]:
        return [tuple(map(int, ph)) for ph in self.pairs[self.minus]]

    @property
    def psi_sq_sum(self) -> float:
        return float(np.dot(self.psi, self.psi))


def _parse_float(cell: str, row: int, col: str) -> float:
    cell = cell.strip()
    if cell == "" or cell.lower() in ("na", "nan", "?"):
        raise DatasetError(f"missing value at row {row}, column {col!r}; remove it before loading")
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"non-numeric value {cell!r} at row {row}, column {col!r}") from None
    if not np.isfinite(value):
        raise DatasetError(f"non-finite value at row {row}, column {col!r}")
    return value


def load_csv(path) -> Dataset:
    """Read a CSV whose last column is the label ``y`` in {-1, +1}."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if len(header) < 2 or header[-1] != "y":
            raise DatasetError(f"{path}: last header column must be 'y'")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"row {lineno}: expected {len(header)} cells, got {len(row)}")
            rows.append([_parse_float(c, lineno, header[k]) for k, c in enumerate(row[:-1])])
            label = _parse_float(row[-1], lineno, "y")
            if label not in (-1.0, 1.0):
                raise DatasetError(f"row {lineno}: label {row[-1]!r} is not -1 or +1")
            labels.append(int(label))
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(labels), tuple(header[:-1]))


def save_csv(ds: Dataset, path, fmt: str = "%.17g") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(ds.feature_names) + ",y\n")
        for row, label in zip(ds.x, ds.y):
            fh.write(",".join(fmt % v for v in row) + f",{int(label)}\n")


def _column_stats(x: np.ndarray):
    mean = x.mean(axis=0)
    scale = np.sqrt(((x - mean) ** 2).mean(axis=0))
    return mean, scale


def is_standardized(x: np.ndarray, tol: float = STD_TOL) -> bool:
    n = x.shape[0]
    return bool(
        np.all(np.abs(x.sum(axis=0)) <= tol * max(1, n))
        and np.all(np.abs((x**2).sum(axis=0) / n - 1.0) <= tol)
    )


def standardize(ds: Dataset) -> Dataset:
    """Zero mean and unit population variance per column.

    Constant columns are dropped with a warning; their names end up in
    ``Dataset.dropped``.
    """
    mean, scale = _column_stats(ds.x)
    constant = scale <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if np.all(constant):
        raise DatasetError("all feature columns are constant")
    dropped = tuple(name for name, c in zip(ds.feature_names, constant) if c)
    if dropped:
        logger.warning("dropping constant columns: %s", ", ".join(dropped))
    keep = ~constant
    x = (ds.x[:, keep] - mean[keep]) / scale[keep]
    names = tuple(name for name, k in zip(ds.feature_names, keep) if k)
    return Dataset(x, ds.y, names, standardized=True, dropped=ds.dropped + dropped)


def class_weights(y: Sequence[int]) -> np.ndarray:
    y = np.asarray(y)
    n_pos, n_neg = int(np.sum(y == 1)), int(np.sum(y == -1))
    if n_pos == 0 or n_neg == 0:
        raise DatasetError("one class is empty")
    return np.where(y == 1, 1.0 / n_pos, -1.0 / n_neg)


def build_pair_structure(ds: Dataset) -> PairStructure:
    """Precompute psi, the pair lists and per-feature squared differences."""
    if not ds.standardized:
        raise DatasetError("dataset must be standardized first")
    return pair_structure_from_arrays(ds.x, ds.y)


def pair_structure_from_arrays(x, y) -> PairStructure:
    """Like :func:`build_pair_structure` without the standardization check."""
    x = np.asarray(x, dtype=float)
    psi = class_weights(y)
    i_idx, h_idx = np.triu_indices(x.shape[0], k=1)
    pairs = np.column_stack([i_idx, h_idx])
    dist = (x[i_idx] - x[h_idx]) ** 2
    prod = psi[i_idx] * psi[h_idx]
    for arr in (psi, pairs, prod, dist):
        arr.setflags(write=False)
    return PairStructure(psi=psi, pairs=pairs, prod=prod, dist=dist)
