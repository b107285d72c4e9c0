"""Solver cross-checks: branch-and-bound against its prune-free twin, the
greedy heuristic's feasibility, and local-search improvement guarantees."""

import numpy as np
import pytest

from evroute.baselines import (ExactConfig, brute_force, gap, local_search,
                               nearest_feasible, solve_exact)
from evroute.env import check_solution
from evroute.instance import generate_instance


class TestExact:
    @pytest.mark.parametrize("size", [3, 4])
    def test_matches_brute_force(self, size):
        for seed in range(5):
            inst = generate_instance(size, seed)
            ex = solve_exact(inst)
            bf = brute_force(inst)
            assert ex.feasible == bf.feasible, seed
            if ex.feasible:
                assert ex.cost == pytest.approx(bf.cost, abs=1e-9), seed

    def test_solution_verifies(self):
        for seed in range(5):
            inst = generate_instance(5, seed)
            res = solve_exact(inst)
            if not res.feasible:
                continue
            verdict = check_solution(inst, res.solution)
            assert verdict.ok, verdict.failures
            assert verdict.cost == pytest.approx(res.cost, abs=1e-9)

    def test_never_beaten_by_heuristics(self):
        for seed in range(8):
            inst = generate_instance(5, seed)
            res = solve_exact(inst)
            heur = nearest_feasible(inst)
            if res.feasible and heur is not None:
                assert res.cost <= heur.total_cost + 1e-9

    def test_size_limit_refuses(self):
        inst = generate_instance(12, 0)
        res = solve_exact(inst, ExactConfig(max_customers=8))
        assert not res.feasible and not res.optimal
        assert "too large" in res.reason


class TestNearestFeasible:
    def test_solutions_verify(self):
        solved = 0
        for seed in range(30):
            inst = generate_instance(8, seed)
            sol = nearest_feasible(inst)
            if sol is None:
                continue
            solved += 1
            assert check_solution(inst, sol).ok
        assert solved >= 25  # the heuristic should almost always succeed

    def test_deterministic(self):
        inst = generate_instance(8, 3)
        a, b = nearest_feasible(inst), nearest_feasible(inst)
        assert a.routes == b.routes


class TestLocalSearch:
    def test_never_worse_and_verifies(self):
        for seed in range(10):
            inst = generate_instance(8, seed)
            sol = nearest_feasible(inst)
            if sol is None:
                continue
            improved = local_search(sol, inst)
            assert improved.total_cost <= sol.total_cost + 1e-9
            assert check_solution(inst, improved).ok

    def test_improves_sometimes(self):
        gains = 0
        for seed in range(15):
            inst = generate_instance(8, seed)
            sol = nearest_feasible(inst)
            if sol is None:
                continue
            if local_search(sol, inst).total_cost < sol.total_cost - 1e-9:
                gains += 1
        assert gains >= 3


class TestGap:
    def test_basic(self):
        assert gap(110.0, 100.0) == pytest.approx(0.10)
        assert gap(100.0, 100.0) == 0.0

    def test_infinite_when_reference_missing(self):
        assert not np.isfinite(gap(100.0, float("inf"))) or \
            gap(100.0, float("inf")) <= 0.0
