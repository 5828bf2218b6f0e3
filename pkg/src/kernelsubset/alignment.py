"""Subset Gaussian kernel and kernel-target alignment objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PairStructure, SubsetMask

BETAS = (0.25, 1.00, 4.00)


@dataclass(frozen=True)
class KernelConfig:
    gamma: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def _mask(z) -> np.ndarray:
    if isinstance(z, SubsetMask):
        return z.array()
    return np.asarray(z, dtype=float)


def subset_kernel(pair_dists, z, gamma: float) -> float:
    """``exp(-gamma * sum_j z_j d_j)`` for one pair."""
    return float(np.exp(-gamma * np.dot(_mask(z), np.asarray(pair_dists, dtype=float))))


def pair_kernels(ps: PairStructure, z, gamma: float) -> np.ndarray:
    """Subset kernel value for every pair in ``ps``."""
    return np.exp(-gamma * (ps.dist @ _mask(z)))


def reduced_objective(ps: PairStructure, z, gamma: float) -> float:
    """Sum over pairs ``i < h`` of ``psi_i psi_h k_z(x_i, x_h)``."""
    return float(np.dot(ps.prod, pair_kernels(ps, z, gamma)))


def alignment_objective(ps: PairStructure, z, gamma: float) -> float:
    """Unnormalized alignment ``sum_i sum_h psi_i psi_h k_z(x_i, x_h)``.

    Evaluated as the diagonal part plus twice the pair sum.
    """
    return ps.psi_sq_sum + 2.0 * reduced_objective(ps, z, gamma)


def subset_kernel_matrix(x, z, gamma: float, x2=None) -> np.ndarray:
    """Full subset-Gaussian kernel matrix between rows of ``x`` and ``x2``."""
    m = _mask(z).astype(bool)
    a = np.asarray(x, dtype=float)[:, m]
    b = a if x2 is None else np.asarray(x2, dtype=float)[:, m]
    sq = (a**2).sum(1)[:, None] + (b**2).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def full_alignment_objective(x, y, z, gamma: float) -> float:
    """Double-sum form over the full kernel matrix; used to cross-check."""
    y = np.asarray(y)
    psi = np.where(y == 1, 1.0 / np.sum(y == 1), -1.0 / np.sum(y == -1))
    K = subset_kernel_matrix(x, z, gamma)
    return float(psi @ K @ psi)


def normalized_alignment(K, y) -> float:
    """``<K, yy^T>_F / (n ||K||_F)``."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel matrix has non-finite entries")
    fro = np.linalg.norm(K, "fro")
    if fro == 0:
        raise ValueError("kernel matrix has zero Frobenius norm")
    return float(y @ K @ y / (len(y) * fro))


def sigest_gamma(ps: PairStructure, theta: int, p: int | None = None) -> float:
    """Scale estimate ``1 / median((theta/p) * ||x_i - x_h||^2)`` over all pairs.

    Duplicates are kept; an even number of pairs uses the midpoint of the
    two central values.
    """
    p = ps.p if p is None else p
    if ps.dist.shape[0] < 1:
        raise ValueError("need at least one instance pair")
    med = float(np.median((theta / p) * ps.dist.sum(axis=1)))
    if med <= 0:
        raise ValueError("median pairwise distance is zero; too many duplicate instances")
    return 1.0 / med
