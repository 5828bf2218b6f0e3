"""Synthetic data: normally distributed clusters on cube vertices plus noise features.

Relevant features come from Gaussian clusters centred on the vertices of
``{-1, +1}^theta_star``; a vertex is labelled +1 when it has an even number
of +1 coordinates. Each cluster has covariance ``(expansion / 100) * I``,
so a larger expansion makes the classes overlap more. The remaining
``p - theta_star`` columns are standard normal noise. All columns are
standardized over the pooled train + test sample and then shuffled.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dataset import Dataset, save_csv


@dataclass(frozen=True)
class GenConfig:
    n_train: int = 50
    n_test: int = 1000
    p: int = 10
    theta_star: int = 3
    expansion: float = 25.0
    seed: int = 0
    imbalance_cap: int = 0

    def __post_init__(self):
        if self.n_train < 4:
            raise ValueError("n_train must be >= 4")
        if self.n_test < 0:
            raise ValueError("n_test must be >= 0")
        if not 1 <= self.theta_star <= self.p:
            raise ValueError("theta_star must lie in [1, p]")
        if not self.expansion > 0:
            raise ValueError("expansion must be positive")
        if self.imbalance_cap < 0:
            raise ValueError("imbalance_cap must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


class SyntheticData(NamedTuple):
    train: Dataset
    test: Dataset | None
    relevant: tuple[int, ...]
    permutation: tuple[int, ...]


def _labels(rng: np.random.Generator, n: int, cap: int) -> np.ndarray:
    if cap == 0:
        y = np.array([1, -1] * (n // 2) + [1] * (n % 2))
        return rng.permutation(y)
    while True:
        y = rng.choice([-1, 1], size=n)
        if abs(int(y.sum())) <= cap and (y == 1).any() and (y == -1).any():
            return y


def _relevant_block(rng: np.random.Generator, y: np.ndarray, theta_star: int, expansion: float):
    verts = np.array(list(itertools.product([-1.0, 1.0], repeat=theta_star)))
    parity = np.where(((verts > 0).sum(axis=1) % 2) == 0, 1, -1)
    by_class = {1: verts[parity == 1], -1: verts[parity == -1]}
    centers = np.empty((len(y), theta_star))
    for label in (1, -1):
        idx = np.flatnonzero(y == label)
        pick = rng.integers(0, len(by_class[label]), size=len(idx))
        centers[idx] = by_class[label][pick]
    sigma = np.sqrt(expansion / 100.0)
    return centers + sigma * rng.standard_normal(centers.shape)


def generate(cfg: GenConfig) -> SyntheticData:
    """Draw a train/test pair; identical ``cfg`` gives identical output."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_train + cfg.n_test
    y_train = _labels(rng, cfg.n_train, cfg.imbalance_cap)
    y_test = _labels(rng, cfg.n_test, cfg.imbalance_cap) if cfg.n_test else np.empty(0, dtype=int)
    y = np.concatenate([y_train, y_test])

    x = np.empty((n, cfg.p))
    x[:, : cfg.theta_star] = _relevant_block(rng, y, cfg.theta_star, cfg.expansion)
    x[:, cfg.theta_star:] = rng.standard_normal((n, cfg.p - cfg.theta_star))
    x = (x - x.mean(axis=0)) / x.std(axis=0)

    perm = rng.permutation(cfg.p)
    x = x[:, perm]
    relevant = tuple(int(k) for k in np.flatnonzero(perm < cfg.theta_star))
    names = tuple(f"f{j + 1}" for j in range(cfg.p))
    # rows are standardized as a pool, so neither split carries the flag
    train = Dataset(x[: cfg.n_train], y_train, names)
    test = Dataset(x[cfg.n_train:], y_test, names) if cfg.n_test >= 2 else None
    return SyntheticData(train, test, relevant, tuple(int(v) for v in perm))


def write(data: SyntheticData, cfg: GenConfig, outdir) -> dict:
    """Write ``train.csv``, ``test.csv`` and ``meta.json`` into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_csv(data.train, outdir / "train.csv")
    if data.test is not None:
        save_csv(data.test, outdir / "test.csv")
    meta = {
        "seed": cfg.seed,
        "relevant": list(data.relevant),
        "relevant_names": [data.train.feature_names[j] for j in data.relevant],
        "permutation": list(data.permutation),
        "config": asdict(cfg),
    }
    (outdir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta
