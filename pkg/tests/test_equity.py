"""Tests for the equity-rule allocators."""

from functools import partial

import numpy as np
import pytest

from src.allocation import (
    EquityParams,
    allocate_equity_exact,
    allocate_equity_heuristic,
    allocate_priority_heuristic,
    compute_deviation,
    equity_band,
    match_retiming,
    swap_symmetry_report,
)
from src.allocation.equity import within_band
from src.allocation.oracles import equity_enumeration_minimum
from src.allocation.results import load_allocation
from src.exceptions import InputError
from src.model.generators import random_bids, random_scenario
from src.model.types import Bid
from src.model.validation import check_allocation
from tests.conftest import DATA_DIR, make_scenario

CROWDED = [Bid("RU1", {"w1": (0, 1, 2)}), Bid("RU2", {"w1": (0, 1, 2)})]


class TestEquityHeuristic:

    def test_alternates_between_undertakings(self, small_scenario):
        result = allocate_equity_heuristic(small_scenario, CROWDED)
        assert result.total_deviation == {"RU1": 90, "RU2": 180}
        assert result.allocation.slots("RU1", "w1") == (0, 2, 4)
        assert result.allocation.slots("RU2", "w1") == (1, 3, 5)

    def test_spreads_deviation_compared_to_priority(self, small_scenario):
        priority = allocate_priority_heuristic(small_scenario, CROWDED)
        equity = allocate_equity_heuristic(small_scenario, CROWDED)
        assert priority.total_deviation == {"RU1": 0, "RU2": 270}
        assert max(equity.total_deviation.values()) < max(priority.total_deviation.values())

    def test_order_breaks_ratio_ties(self, small_scenario):
        bids = [Bid("RU1", {"w1": (2,)}), Bid("RU2", {"w1": (2,)})]
        result = allocate_equity_heuristic(small_scenario, bids, order=["RU2", "RU1"])
        assert result.total_deviation == {"RU1": 30, "RU2": 0}

    def test_case_study_invariants(self, case_scenario, case_bids):
        bids = case_bids("equity", "py2")
        result = allocate_equity_heuristic(case_scenario, bids, tie_break="later")
        assert check_allocation(case_scenario, bids, result.allocation, result.retiming) == []
        assert compute_deviation(case_scenario, bids, result.retiming) == result.total_deviation
        assert result.total % 30 == 0

    @pytest.mark.parametrize("tie_break, expected", [
        ("earlier", {"RU1": 300, "RU2": 300, "RU3": 540}),
        ("later", {"RU1": 360, "RU2": 390, "RU3": 540}),
    ])
    def test_case_study_falls_short_of_published_total(self, case_scenario, case_bids, tie_break, expected):
        # The published allocation implies 36 h.
        result = allocate_equity_heuristic(case_scenario, case_bids("equity", "py2"), tie_break=tie_break)
        assert result.total_deviation == expected
        assert result.total < 36 * 60 - 2 * 30

    def test_published_allocation_is_thirty_six_hours(self, case_scenario, case_bids):
        published, _ = load_allocation(DATA_DIR / "published" / "equity_heuristic_py2.json", case_scenario)
        retiming = match_retiming(case_scenario, case_bids("equity", "py2"), published)
        assert retiming.total_deviation == {"RU1": 930, "RU2": 720, "RU3": 510}
        assert retiming.total == 36 * 60


class TestEquityBand:

    def test_band_values(self, small_scenario):
        delta, normalized = equity_band(small_scenario, CROWDED, {"RU1": 120, "RU2": 150})
        assert delta == pytest.approx(45.0)
        assert normalized == pytest.approx({"RU1": 40.0, "RU2": 50.0})
        assert within_band(delta, normalized, 5.0)
        assert not within_band(delta, normalized, 4.9)

    def test_band_ignores_non_bidders(self, small_scenario):
        bids = [Bid("RU1", {"w1": (0,)}), Bid("RU2", {})]
        _, normalized = equity_band(small_scenario, bids, {"RU1": 0, "RU2": 0})
        assert list(normalized) == ["RU1"]

    def test_params_validation(self):
        with pytest.raises(InputError):
            EquityParams(epsilon=-1.0)
        with pytest.raises(InputError):
            EquityParams(epsilon_search_step=0.0)


class TestEquityExact:

    def test_widens_band_until_feasible(self, small_scenario):
        result = allocate_equity_exact(small_scenario, CROWDED)
        assert result.total == 270
        assert result.epsilon_used == pytest.approx(5.0)
        assert sorted(result.total_deviation.values()) == [120, 150]

    def test_matches_enumeration(self, small_scenario):
        assert equity_enumeration_minimum(small_scenario, CROWDED, 0.0) is None
        assert equity_enumeration_minimum(small_scenario, CROWDED, 5.0) == 270

    def test_custom_step(self, small_scenario):
        result = allocate_equity_exact(small_scenario, CROWDED, EquityParams(epsilon_search_step=15.0))
        assert result.epsilon_used == pytest.approx(15.0)
        assert result.total == 270

    def test_disjoint_bids_need_no_moves(self, small_scenario):
        bids = [Bid("RU1", {"w1": (0, 1)}), Bid("RU2", {"w1": (4, 5)})]
        result = allocate_equity_exact(small_scenario, bids)
        assert result.total_deviation == {"RU1": 0, "RU2": 0}
        assert result.epsilon_used == 0.0

    def test_no_requests(self, small_scenario):
        result = allocate_equity_exact(small_scenario, [])
        assert result.total == 0
        assert result.retiming.moves == ()

    def test_case_study(self, case_scenario, case_bids):
        bids = case_bids("equity", "py2")
        result = allocate_equity_exact(case_scenario, bids, tie_break="later")
        assert result.total <= 16 * 60 + 30
        assert check_allocation(case_scenario, bids, result.allocation, result.retiming) == []
        delta, normalized = equity_band(case_scenario, bids, result.total_deviation)
        assert within_band(delta, normalized, result.epsilon_used)

    @pytest.mark.parametrize("seed", [3, 4])
    def test_against_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(100):
            scenario = random_scenario(rng, n_undertakings=2, n_od=1, n_slots=int(rng.integers(3, 7)))
            bids = random_bids(rng, scenario, max_total=6)
            result = allocate_equity_exact(scenario, bids)
            assert result.total == equity_enumeration_minimum(scenario, bids, result.epsilon_used)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(5, 10))
    def test_band_and_invariants_hold(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(200):
            scenario = random_scenario(rng, n_undertakings=int(rng.integers(2, 4)),
                                       n_slots=int(rng.integers(3, 7)))
            bids = random_bids(rng, scenario)
            greedy = allocate_equity_heuristic(scenario, bids)
            assert check_allocation(scenario, bids, greedy.allocation, greedy.retiming) == []
            assert compute_deviation(scenario, bids, greedy.retiming) == greedy.total_deviation
            result = allocate_equity_exact(scenario, bids)
            assert check_allocation(scenario, bids, result.allocation, result.retiming) == []
            delta, normalized = equity_band(scenario, bids, result.total_deviation)
            assert within_band(delta, normalized, result.epsilon_used)


class TestSwapSymmetry:

    def test_disjoint_bids_are_symmetric(self, small_scenario):
        bids = [Bid("RU1", {"w1": (1,)}), Bid("RU2", {"w1": (4,)})]
        report = swap_symmetry_report(small_scenario, bids, "RU1", "RU2", allocate_equity_heuristic)
        assert report.values_swapped
        assert report.allocation_swapped

    def test_identical_bids_favour_first_in_order(self, small_scenario):
        bids = [Bid("RU1", {"w1": (2,)}), Bid("RU2", {"w1": (2,)})]
        report = swap_symmetry_report(small_scenario, bids, "RU1", "RU2", allocate_priority_heuristic)
        assert report.original == {"RU1": 0, "RU2": 30}
        assert not report.values_swapped

    def test_exact_equity_swaps_deviation(self, small_scenario):
        bids = [Bid("RU1", {"w1": (0, 1, 2)}), Bid("RU2", {"w1": (0, 3, 4)})]
        report = swap_symmetry_report(small_scenario, bids, "RU1", "RU2", allocate_equity_exact)
        assert report.values_swapped
        assert report.allocation_swapped
        assert report.original["RU1"] == report.swapped["RU2"]

    @pytest.mark.parametrize("tie_break", ["earlier", "later"])
    def test_exact_equity_swaps_on_random_instances(self, tie_break):
        rng = np.random.default_rng(37)
        allocator = partial(allocate_equity_exact, tie_break=tie_break)
        checked = 0
        for _ in range(300):
            scenario = random_scenario(rng, n_undertakings=2, n_od=1, n_slots=int(rng.integers(3, 7)))
            bids = random_bids(rng, scenario, max_total=6)
            if bids[0].requested == bids[1].requested:
                continue
            report = swap_symmetry_report(scenario, bids, "RU1", "RU2", allocator)
            assert report.values_swapped, (bids, report.original, report.swapped)
            checked += 1
        assert checked > 150

    def test_identical_bids_cannot_swap_unequal_deviations(self, small_scenario):
        bids = [Bid("RU1", {"w1": (2,)}), Bid("RU2", {"w1": (2,)})]
        allocator = partial(allocate_equity_exact, params=EquityParams(epsilon=15.0))
        report = swap_symmetry_report(small_scenario, bids, "RU1", "RU2", allocator)
        assert sorted(report.original.values()) == [0, 30]
        assert report.swapped == report.original
        assert not report.values_swapped

    def test_requires_equal_shares(self):
        scenario = make_scenario(shares=(0.5, 0.25))
        bids = [Bid("RU1", {"w1": (1,)}), Bid("RU2", {"w1": (4,)})]
        with pytest.raises(InputError):
            swap_symmetry_report(scenario, bids, "RU1", "RU2", allocate_equity_heuristic)
