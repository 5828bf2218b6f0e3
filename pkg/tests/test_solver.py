import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelsubset.alignment import alignment_objective
from kernelsubset.dataset import pair_structure_from_arrays
from kernelsubset.solver import (
    GAP_SENTINEL,
    BnbNode,
    SolverError,
    brute_force,
    greedy_incumbent,
    node_upper_bound,
    opt_gap,
    solve_bnb,
)

from conftest import forced_pair_instance, random_instance


def enumerate_best(ps, theta, gamma):
    """Independent oracle: plain double loop over pairs for every feasible mask."""
    best, best_z = -math.inf, None
    for k in range(theta + 1):
        for combo in itertools.combinations(range(ps.p), k):
            total = 0.0
            for (i, h), pr, d in zip(ps.pairs, ps.prod, ps.dist):
                total += pr * math.exp(-gamma * sum(d[j] for j in combo))
            val = ps.psi_sq_sum + 2 * total
            if val > best:
                best, best_z = val, combo
    return best, best_z


class TestOptGap:
    def test_values(self):
        assert opt_gap(0.5, 0.6) == pytest.approx(20.0)
        assert opt_gap(0.7, 0.7) == 0.0
        assert opt_gap(0.0, 0.3) == GAP_SENTINEL
        assert opt_gap(-0.1, 0.3) == GAP_SENTINEL
        assert opt_gap(0.01, 0.5) == GAP_SENTINEL


class TestBruteForce:
    def test_forced_instance(self):
        res = brute_force(forced_pair_instance(), 1, 1.0)
        assert res.z_best.z == (1, 0)
        assert res.opt_gap == 0.0 and res.nodes_explored == 3

    def test_zero_distance_tie_break(self):
        ps = pair_structure_from_arrays(np.zeros((4, 3)), [1, -1, 1, -1])
        res = brute_force(ps, 3, 1.0)
        assert res.objective == pytest.approx(0.0, abs=1e-15)
        assert res.z_best.z == (0, 0, 0)

    def test_cap(self, rng):
        _, ps = random_instance(rng, 5, 10)
        with pytest.raises(SolverError, match="solve_bnb"):
            brute_force(ps, 5, 1.0, cap=100)

    def test_matches_loop_oracle(self, rng):
        for _ in range(15):
            n, p = int(rng.integers(3, 9)), int(rng.integers(1, 6))
            theta = int(rng.integers(1, p + 1))
            _, ps = random_instance(rng, n, p)
            gamma = float(rng.choice([0.1, 1.0, 4.0]))
            best, _ = enumerate_best(ps, theta, gamma)
            assert brute_force(ps, theta, gamma).objective == pytest.approx(best, abs=1e-12)


class TestBound:
    def test_leaf_equals_objective(self, rng):
        _, ps = random_instance(rng, 8, 4)
        node = BnbNode(frozenset({0, 2}), frozenset({1, 3}), frozenset())
        assert node_upper_bound(node, ps, 3, 0.8) == pytest.approx(alignment_objective(ps, [1, 0, 1, 0], 0.8))

    def test_root_theta_zero(self, rng):
        _, ps = random_instance(rng, 8, 4)
        assert node_upper_bound(BnbNode.root(4), ps, 0, 0.8) == pytest.approx(0.0, abs=1e-12)

    def test_root_dominates_optimum(self, rng):
        for _ in range(20):
            _, ps = random_instance(rng, 10, 5)
            theta = int(rng.integers(1, 6))
            best = brute_force(ps, theta, 1.0).objective
            assert node_upper_bound(BnbNode.root(5), ps, theta, 1.0) >= best - 1e-12

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_valid_and_monotone(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 7))
        n = int(rng.integers(3, 10))
        _, ps = random_instance(rng, n, p)
        theta = int(rng.integers(1, p + 1))
        gamma = float(rng.uniform(0.1, 4))
        labels = rng.integers(0, 3, size=p)  # 0 out, 1 in, 2 free
        s1 = {j for j in range(p) if labels[j] == 1}
        if len(s1) > theta:
            s1 = set(sorted(s1)[:theta])
        s0 = {j for j in range(p) if labels[j] == 0}
        free = set(range(p)) - s1 - s0
        node = BnbNode(frozenset(s1), frozenset(s0), frozenset(free))
        bound = node_upper_bound(node, ps, theta, gamma)
        r = theta - len(s1)
        for k in range(min(r, len(free)) + 1):
            for extra in itertools.combinations(sorted(free), k):
                z = [1 if j in s1 or j in extra else 0 for j in range(p)]
                assert alignment_objective(ps, z, gamma) <= bound + 1e-12
        if free:
            j = min(free)
            rest = frozenset(free - {j})
            if r > 0:
                child_in = BnbNode(frozenset(s1 | {j}), frozenset(s0), rest)
                assert node_upper_bound(child_in, ps, theta, gamma) <= bound + 1e-9
            child_out = BnbNode(frozenset(s1), frozenset(s0 | {j}), rest)
            assert node_upper_bound(child_out, ps, theta, gamma) <= bound + 1e-9


class TestGreedy:
    def test_theta_one_is_best_single(self, rng):
        for _ in range(10):
            _, ps = random_instance(rng, 9, 5)
            g = greedy_incumbent(ps, 1, 1.0)
            b = brute_force(ps, 1, 1.0)
            assert alignment_objective(ps, g, 1.0) == pytest.approx(b.objective)

    def test_zero_distance(self):
        ps = pair_structure_from_arrays(np.zeros((4, 3)), [1, -1, 1, -1])
        assert greedy_incumbent(ps, 2, 1.0).z == (0, 0, 0)

    def test_below_optimum(self, rng):
        for _ in range(20):
            _, ps = random_instance(rng, 10, 6)
            theta = int(rng.integers(1, 5))
            g = alignment_objective(ps, greedy_incumbent(ps, theta, 0.5), 0.5)
            assert g <= brute_force(ps, theta, 0.5).objective + 1e-12


class TestBnb:
    def test_forced_instance(self):
        res = solve_bnb(forced_pair_instance(), 1, 1.0)
        assert res.z_best.z == (1, 0)
        assert res.nodes_explored <= 3
        assert res.status == "optimal" and res.opt_gap == 0.0

    def test_matches_brute_force(self, rng):
        for _ in range(40):
            n, p = int(rng.integers(4, 16)), int(rng.integers(2, 9))
            theta = int(rng.integers(1, min(p, 5) + 1))
            gamma = float(rng.choice([0.1, 1.0, 4.0]))
            _, ps = random_instance(rng, n, p)
            a, b = brute_force(ps, theta, gamma), solve_bnb(ps, theta, gamma)
            assert b.objective == pytest.approx(a.objective, abs=1e-9)
            assert b.status == "optimal" and b.opt_gap == 0.0
            assert b.lower_bound <= b.objective <= b.upper_bound + 1e-9
            if b.z_best.z != a.z_best.z:
                assert alignment_objective(ps, b.z_best, gamma) == pytest.approx(a.objective, abs=1e-9)

    def test_time_limit_zero(self, rng):
        _, ps = random_instance(rng, 12, 6)
        res = solve_bnb(ps, 3, 1.0, time_limit_s=0)
        assert res.status == "time_limit"
        assert res.z_best == greedy_incumbent(ps, 3, 1.0)
        assert res.upper_bound >= res.objective

    def test_node_cap(self, rng):
        _, ps = random_instance(rng, 14, 8)
        res = solve_bnb(ps, 4, 1.0, node_cap=2)
        assert res.status in ("node_limit", "optimal")
        assert res.lower_bound <= res.upper_bound

    def test_invalid_limits(self, rng):
        _, ps = random_instance(rng, 6, 3)
        for bad in ({"time_limit_s": -1}, {"node_cap": 0}, {"gap_tol": -0.1}):
            with pytest.raises(SolverError):
                solve_bnb(ps, 2, 1.0, **bad)
        with pytest.raises(SolverError):
            solve_bnb(ps, 0, 1.0)

    def test_deterministic(self, rng):
        _, ps = random_instance(rng, 15, 7)
        a, b = solve_bnb(ps, 3, 1.0), solve_bnb(ps, 3, 1.0)
        assert a.to_dict(include_time=False) == b.to_dict(include_time=False)

    def test_anytime(self, rng):
        _, ps = random_instance(rng, 15, 8)
        res = solve_bnb(ps, 4, 1.0)
        vals = [v for _, v in res.history]
        assert vals == sorted(vals)
        assert vals[-1] == res.objective

    def test_gap_tolerance(self, rng):
        _, ps = random_instance(rng, 15, 8)
        exact = solve_bnb(ps, 3, 1.0)
        loose = solve_bnb(ps, 3, 1.0, gap_tol=0.5)
        assert loose.nodes_explored <= exact.nodes_explored
        assert loose.objective <= exact.objective + 1e-12
        assert loose.upper_bound >= exact.objective - 1e-12

    def test_json(self, rng):
        _, ps = random_instance(rng, 6, 3)
        d = json.loads(solve_bnb(ps, 2, 1.0).to_json())
        assert set(d) == {"z", "objective", "lower_bound", "upper_bound", "opt_gap", "nodes", "time_s", "status"}
