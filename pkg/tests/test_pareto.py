"""Tests for Pareto enumeration and non-domination of the exact allocators."""

import numpy as np
import pytest

from src.allocation import TieBreak, allocate_equity_exact, allocate_priority_exact, pareto_bruteforce
from src.allocation.oracles import equity_band_front
from src.allocation.pareto import check_oracle_scale, deviation_vectors, dominates, non_dominated
from src.exceptions import OracleScaleError
from src.model.generators import random_bids, random_scenario
from src.model.types import Bid
from tests.conftest import make_scenario


class TestDominance:

    def test_dominates(self):
        assert dominates((0, 30), (30, 30))
        assert not dominates((0, 30), (0, 30))
        assert not dominates((0, 60), (30, 30))

    def test_non_dominated(self):
        assert non_dominated([(0, 60), (30, 30), (30, 60), (60, 0)]) == {(0, 60), (30, 30), (60, 0)}


class TestParetoBruteforce:

    def test_single_conflict(self, small_scenario):
        bids = [Bid("RU1", {"w1": (2,)}), Bid("RU2", {"w1": (2,)})]
        front = pareto_bruteforce(small_scenario, bids)
        assert front.undertakings == ("RU1", "RU2")
        assert front.vectors == frozenset({(0, 30), (30, 0)})
        assert (0, 30) in front
        assert front.is_dominated((30, 30))

    def test_no_conflict_has_zero_vector(self, small_scenario):
        bids = [Bid("RU1", {"w1": (0,)}), Bid("RU2", {"w1": (5,)})]
        assert pareto_bruteforce(small_scenario, bids).vectors == frozenset({(0, 0)})

    def test_vectors_combine_across_od_pairs(self):
        rng = np.random.default_rng(0)
        scenario = random_scenario(rng, n_undertakings=2, n_od=2, n_slots=3)
        bids = [Bid("RU1", {"w1": (0,), "w2": (0,)}), Bid("RU2", {"w1": (0,)})]
        vectors = deviation_vectors(scenario, bids)
        assert (0, 30) in vectors
        assert (30, 0) in vectors
        assert (0, 0) not in vectors

    def test_scale_guard(self, case_scenario, case_bids):
        with pytest.raises(OracleScaleError, match="oracle scale exceeded"):
            check_oracle_scale(case_scenario, case_bids("priority", "py1"))


class TestExactAllocatorsOnTheFront:

    def test_sequential_priority_can_be_dominated(self):
        scenario = make_scenario(shares=(0.3, 0.3, 0.3))
        bids = [Bid("RU1", {"w1": (2,)}), Bid("RU2", {"w1": (2,)}), Bid("RU3", {"w1": (3,)})]
        sequential = allocate_priority_exact(scenario, bids, tie_break=TieBreak.LATER)
        lookahead = allocate_priority_exact(scenario, bids, tie_break=TieBreak.LATER, lookahead=True)
        front = pareto_bruteforce(scenario, bids)
        assert sequential.total_deviation == {"RU1": 0, "RU2": 30, "RU3": 30}
        assert front.is_dominated((0, 30, 30))
        assert lookahead.total_deviation == {"RU1": 0, "RU2": 30, "RU3": 0}
        assert (0, 30, 0) in front

    def test_equity_band_excludes_dominating_vectors(self, small_scenario):
        bids = [Bid("RU1", {"w1": (2,)}), Bid("RU2", {"w1": (2,)})]
        result = allocate_equity_exact(small_scenario, bids)
        assert result.total_deviation == {"RU1": 30, "RU2": 30}
        assert result.epsilon_used == 0.0
        assert pareto_bruteforce(small_scenario, bids).is_dominated((30, 30))
        assert equity_band_front(small_scenario, bids, 0.0).vectors == frozenset({(30, 30)})

    def test_lookahead_priority_is_non_dominated(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            scenario = random_scenario(rng, n_undertakings=int(rng.integers(2, 4)), n_od=1,
                                       n_slots=int(rng.integers(3, 7)))
            bids = random_bids(rng, scenario, max_total=6)
            result = allocate_priority_exact(scenario, bids, lookahead=True)
            vector = tuple(result.total_deviation[b.undertaking] for b in bids)
            assert not pareto_bruteforce(scenario, bids).is_dominated(vector), vector

    def test_sequential_priority_is_non_dominated_for_two_undertakings(self):
        rng = np.random.default_rng(17)
        for _ in range(300):
            scenario = random_scenario(rng, n_undertakings=2, n_od=1, n_slots=int(rng.integers(3, 7)))
            bids = random_bids(rng, scenario, max_total=6)
            result = allocate_priority_exact(scenario, bids)
            vector = tuple(result.total_deviation[b.undertaking] for b in bids)
            assert not pareto_bruteforce(scenario, bids).is_dominated(vector), vector

    def test_equity_exact_is_non_dominated_inside_its_band(self):
        rng = np.random.default_rng(31)
        for _ in range(1000):
            scenario = random_scenario(rng, n_undertakings=int(rng.integers(2, 4)), n_od=1,
                                       n_slots=int(rng.integers(3, 7)))
            bids = random_bids(rng, scenario, max_total=6)
            result = allocate_equity_exact(scenario, bids)
            vector = tuple(result.total_deviation[b.undertaking] for b in bids)
            front = equity_band_front(scenario, bids, result.epsilon_used)
            assert not front.is_dominated(vector), (vector, result.epsilon_used)
