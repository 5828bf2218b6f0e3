"""Exact maximization of the subset alignment objective.

:func:`solve_bnb` is a best-first branch-and-bound over the feature mask.
Node bounds treat every instance pair independently: a same-class pair
can do no better than adding no further feature, a cross-class pair no
better than adding the ``r`` free features with the largest squared
differences. :func:`brute_force` enumerates every feasible mask and is
kept as the reference the search is tested against.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .alignment import alignment_objective
from .dataset import PairStructure, SubsetMask

DEFAULT_TIME_LIMIT = 10000.0
ENUMERATION_CAP = 2**24
GAP_SENTINEL = ">1000.0%"
TIE_TOL = 1e-12

OPTIMAL = "optimal"
TIME_LIMIT = "time_limit"
NODE_LIMIT = "node_limit"


class SolverError(ValueError):
    pass


def opt_gap(lb: float, ub: float):
    """Relative bound gap ``|ub - lb| / lb`` in percent, or ``">1000.0%"``."""
    if lb <= 0:
        return GAP_SENTINEL
    gap = abs(ub - lb) / lb * 100.0
    if gap > 1000.0:
        return GAP_SENTINEL
    return gap


def format_gap(gap) -> str:
    return gap if isinstance(gap, str) else f"{gap:.1f}%"


@dataclass
class SolveResult:
    z_best: SubsetMask
    objective: float
    lower_bound: float
    upper_bound: float
    opt_gap: float | str
    nodes_explored: int
    wall_time: float
    status: str
    history: list[tuple[int, float]] = field(default_factory=list, repr=False)

    def to_dict(self, include_time: bool = True) -> dict:
        d = {
            "z": list(self.z_best.z),
            "objective": self.objective,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "opt_gap": self.opt_gap,
            "nodes": self.nodes_explored,
            "time_s": self.wall_time,
            "status": self.status,
        }
        if not include_time:
            del d["time_s"]
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class BnbNode:
    fixed_in: frozenset
    fixed_out: frozenset
    free: frozenset
    bound: float = math.inf

    def __post_init__(self):
        if self.fixed_in & self.fixed_out or self.fixed_in & self.free or self.fixed_out & self.free:
            raise ValueError("fixed_in, fixed_out and free must be disjoint")

    @classmethod
    def root(cls, p: int) -> "BnbNode":
        return cls(frozenset(), frozenset(), frozenset(range(p)))


@dataclass(frozen=True)
class Limits:
    time_limit_s: float = DEFAULT_TIME_LIMIT
    node_cap: int | None = None
    gap_tol: float = 0.0

    def __post_init__(self):
        if not self.time_limit_s >= 0:
            raise SolverError("time_limit_s must be >= 0")
        if self.node_cap is not None and self.node_cap < 1:
            raise SolverError("node_cap must be >= 1")
        if not self.gap_tol >= 0:
            raise SolverError("gap_tol must be >= 0")


def _check_theta(theta: int, p: int, allow_zero: bool = False):
    lo = 0 if allow_zero else 1
    if not lo <= theta <= p:
        raise SolverError(f"theta must lie in [{lo}, {p}], got {theta}")


def brute_force(
    ps: PairStructure, theta: int, gamma: float, cap: int = ENUMERATION_CAP, batch: int = 4096
) -> SolveResult:
    """Evaluate every mask with at most ``theta`` features.

    Ties (within ``TIE_TOL``) go to the lexicographically smallest mask.
    """
    p = ps.p
    _check_theta(theta, p, allow_zero=True)
    total = sum(comb(p, k) for k in range(theta + 1))
    if total > cap:
        raise SolverError(f"{total} subsets exceed the enumeration cap {cap}; use solve_bnb")
    t0 = time.perf_counter()
    best = -math.inf
    tied: list[tuple[tuple[int, ...], float]] = []

    def masks():
        for k in range(theta + 1):
            for combo in itertools.combinations(range(p), k):
                z = [0] * p
                for j in combo:
                    z[j] = 1
                yield tuple(z)

    it = masks()
    while True:
        chunk = list(itertools.islice(it, batch))
        if not chunk:
            break
        Z = np.array(chunk, dtype=float)
        vals = ps.psi_sq_sum + 2.0 * (np.exp(-gamma * (ps.dist @ Z.T)).T @ ps.prod)
        best = max(best, float(vals.max()))
        tied = [(z, v) for z, v in tied if v >= best - TIE_TOL]
        tied.extend((z, float(v)) for z, v in zip(chunk, vals) if v >= best - TIE_TOL)
    z = min(z for z, _ in tied)
    obj = alignment_objective(ps, z, gamma)
    return SolveResult(
        z_best=SubsetMask(z, theta),
        objective=obj,
        lower_bound=obj,
        upper_bound=obj,
        opt_gap=0.0,
        nodes_explored=total,
        wall_time=time.perf_counter() - t0,
        status=OPTIMAL,
    )


def _objective_from_base(ps: PairStructure, base: np.ndarray, gamma: float) -> float:
    return ps.psi_sq_sum + 2.0 * float(np.dot(ps.prod, np.exp(-gamma * base)))


def _bound_from_base(ps: PairStructure, base: np.ndarray, free: list[int], r: int, gamma: float) -> float:
    plus, minus = ps.plus, ps.minus
    total = float(np.dot(ps.prod[plus], np.exp(-gamma * base[plus])))
    extra = np.zeros(int(minus.sum()))
    k = min(r, len(free))
    if k > 0:
        d = ps.dist[minus][:, free]
        if k < len(free):
            d = np.partition(d, len(free) - k, axis=1)[:, len(free) - k:]
        extra = d.sum(axis=1)
    total += float(np.dot(ps.prod[minus], np.exp(-gamma * (base[minus] + extra))))
    return ps.psi_sq_sum + 2.0 * total


def node_upper_bound(node: BnbNode, ps: PairStructure, theta: int, gamma: float) -> float:
    """Upper bound on the objective of every completion of ``node``."""
    s1 = sorted(node.fixed_in)
    if len(s1) > theta:
        raise SolverError("node fixes more features than the budget allows")
    base = ps.dist[:, s1].sum(axis=1) if s1 else np.zeros(ps.dist.shape[0])
    return _bound_from_base(ps, base, sorted(node.free), theta - len(s1), gamma)


def _greedy_steps(ps: PairStructure, theta: int, gamma: float):
    """Forward selection; returns ``[(feature, objective_after), ...]``."""
    chosen: list[int] = []
    base = np.zeros(ps.dist.shape[0])
    current = _objective_from_base(ps, base, gamma)
    steps = []
    while len(chosen) < theta:
        best_j, best_val = None, current
        for j in range(ps.p):
            if j in chosen:
                continue
            val = _objective_from_base(ps, base + ps.dist[:, j], gamma)
            if val > best_val + TIE_TOL:
                best_j, best_val = j, val
        if best_j is None:
            break
        chosen.append(best_j)
        base = base + ps.dist[:, best_j]
        current = best_val
        steps.append((best_j, best_val))
    return steps


def greedy_incumbent(ps: PairStructure, theta: int, gamma: float) -> SubsetMask:
    """Forward selection by largest objective gain; stops at ``theta`` or no gain."""
    steps = _greedy_steps(ps, theta, gamma)
    return SubsetMask.from_indices([j for j, _ in steps], ps.p, theta)


def _branch_feature(ps: PairStructure, base: np.ndarray, free: list[int], gamma: float) -> int:
    w = np.abs(ps.prod) * np.exp(-gamma * base)
    scores = w @ ps.dist[:, free]
    return free[int(np.argmax(scores))]


def solve_bnb(
    ps: PairStructure,
    theta: int,
    gamma: float,
    limits: Limits | None = None,
    **kwargs,
) -> SolveResult:
    """Best-first branch-and-bound for the subset alignment problem.

    ``limits`` (or keyword arguments ``time_limit_s``, ``node_cap``,
    ``gap_tol``) control termination. On a limit the incumbent is returned
    with the current bounds.
    """
    if limits is None:
        limits = Limits(**kwargs)
    elif kwargs:
        raise SolverError("pass either limits or keyword limits, not both")
    _check_theta(theta, ps.p)
    t0 = time.perf_counter()
    p, m = ps.p, ps.dist.shape[0]

    inc = greedy_incumbent(ps, theta, gamma)
    inc_z = inc.z
    inc_val = alignment_objective(ps, inc, gamma)
    history = [(0, inc_val)]

    def prune_level(val: float) -> float:
        return val + max(TIE_TOL, limits.gap_tol * abs(val))

    def consider(s1: tuple[int, ...], base: np.ndarray, nodes: int):
        nonlocal inc_z, inc_val
        val = _objective_from_base(ps, base, gamma)
        z = tuple(1 if j in s1 else 0 for j in range(p))
        if val > inc_val + TIE_TOL:
            inc_z, inc_val = z, val
            history.append((nodes, val))

    counter = itertools.count()
    root_base = np.zeros(m)
    root_bound = _bound_from_base(ps, root_base, list(range(p)), theta, gamma)
    nodes = 1
    # heap entries: (-bound, seq, fixed_in, fixed_out, base)
    heap = [(-root_bound, next(counter), (), (), root_base)]
    status = OPTIMAL
    open_top = -math.inf

    while heap:
        if time.perf_counter() - t0 >= limits.time_limit_s:
            status = TIME_LIMIT
            break
        if limits.node_cap is not None and nodes >= limits.node_cap:
            status = NODE_LIMIT
            break
        neg_bound, _, s1, s0, base = heapq.heappop(heap)
        if -neg_bound <= prune_level(inc_val):
            # best-first: nothing left in the heap can improve enough
            open_top = -neg_bound
            heap.clear()
            break
        free = [j for j in range(p) if j not in s1 and j not in s0]
        r = theta - len(s1)
        if not free or r == 0:
            consider(s1, base, nodes)
            continue
        j = _branch_feature(ps, base, free, gamma)
        rest = [f for f in free if f != j]
        # z_j = 1 first, then z_j = 0
        in_s1 = tuple(sorted(s1 + (j,)))
        in_base = base + ps.dist[:, j]
        children = [
            (in_s1, s0, in_base, rest, r - 1),
            (s1, tuple(sorted(s0 + (j,))), base, rest, r),
        ]
        for c_s1, c_s0, c_base, c_free, c_r in children:
            nodes += 1
            consider(c_s1, c_base, nodes)
            bound = _bound_from_base(ps, c_base, c_free, c_r, gamma)
            if bound > prune_level(inc_val) and c_free and c_r > 0:
                heapq.heappush(heap, (-bound, next(counter), c_s1, c_s0, c_base))

    open_bound = max([open_top] + [-e[0] for e in heap])
    upper = max(inc_val, open_bound)
    if status == OPTIMAL and upper - inc_val <= TIE_TOL:
        upper = inc_val
    gap = 0.0 if upper == inc_val else opt_gap(inc_val, upper)
    return SolveResult(
        z_best=SubsetMask(inc_z, theta),
        objective=inc_val,
        lower_bound=inc_val,
        upper_bound=upper,
        opt_gap=gap,
        nodes_explored=nodes,
        wall_time=time.perf_counter() - t0,
        status=status,
        history=history,
    )
