"""Heuristic selectors used for comparison with the exact solver."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .alignment import sigest_gamma
from .dataset import Dataset, PairStructure, SubsetMask, pair_structure_from_arrays
from .solver import _greedy_steps
from .svm import bias_from_alpha, dual_objective, smo


@dataclass
class SelectionTrace:
    """Ordered ``(feature, criterion)`` decisions and the resulting mask."""

    action: str  # "add" or "remove"
    steps: list[tuple[int, float]]
    mask: SubsetMask
    gammas: list[float] = field(default_factory=list)

    def to_list(self) -> list[dict]:
        out = []
        for k, (j, v) in enumerate(self.steps):
            step = {"step": k + 1, "action": self.action, "feature": j, "criterion": v}
            if self.gammas:
                step["gamma"] = self.gammas[k]
            out.append(step)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_list(), **kwargs)


def greedy_forward(ps: PairStructure, theta: int, gamma: float) -> SelectionTrace:
    """Add the feature with the largest alignment gain until ``theta`` or no gain."""
    if not 1 <= theta <= ps.p:
        raise ValueError(f"theta must lie in [1, {ps.p}]")
    steps = _greedy_steps(ps, theta, gamma)
    mask = SubsetMask.from_indices([j for j, _ in steps], ps.p, theta)
    return SelectionTrace("add", [(int(j), float(v)) for j, v in steps], mask)


def rfe_criteria(alpha, y, sq: np.ndarray, active: list[int], gamma: float) -> np.ndarray:
    """``|W(alpha) - W_{-j}(alpha)|`` for every active feature, alpha held fixed.

    ``sq`` holds per-feature squared differences with shape ``(n, n, p)``.
    """
    D = sq[:, :, active].sum(axis=2)
    K = np.exp(-gamma * D)
    w_full = dual_objective(alpha, y, K)
    out = np.empty(len(active))
    for k, j in enumerate(active):
        K_minus = np.exp(-gamma * (D - sq[:, :, j]))
        out[k] = abs(w_full - dual_objective(alpha, y, K_minus))
    return out


def rfe_k(
    ds: Dataset,
    theta: int,
    C: float = 1.0,
    gamma: float | None = None,
    beta: float = 1.0,
    tol: float = 1e-6,
) -> SelectionTrace:
    """Recursive feature elimination driven by the kernel SVM dual.

    One feature leaves per round: the one whose removal changes the dual
    objective least with the multipliers frozen. Unless ``gamma`` is
    fixed, it is re-estimated each round as ``beta`` times the median
    heuristic applied to the surviving features.
    """
    p = ds.p
    if not 1 <= theta <= p:
        raise ValueError(f"theta must lie in [1, {p}]")
    x, y = ds.x, ds.y.astype(float)
    sq = (x[:, None, :] - x[None, :, :]) ** 2
    active = list(range(p))
    steps: list[tuple[int, float]] = []
    gammas: list[float] = []
    while len(active) > theta:
        g = gamma
        if g is None:
            ps = pair_structure_from_arrays(x[:, active], ds.y)
            g = beta * sigest_gamma(ps, theta, len(active))
        K = np.exp(-g * sq[:, :, active].sum(axis=2))
        alpha, _, _ = smo(K, y, C=C, tol=tol)
        bias_from_alpha(alpha, y, K, C)  # raises when training produced no support vectors
        crit = rfe_criteria(alpha, y, sq, active, g)
        k = int(np.argmin(crit))  # first minimum = smallest feature index
        steps.append((active[k], float(crit[k])))
        gammas.append(float(g))
        del active[k]
    return SelectionTrace("remove", steps, SubsetMask.from_indices(active, p, theta), gammas)
