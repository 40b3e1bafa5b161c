"""Tests for the minimum fleet and the payoff model."""

import numpy as np
import pytest

from src.allocation import allocate_priority_heuristic
from src.allocation.results import load_allocation
from src.economics import (
    Trip,
    max_concurrent_trips,
    min_fleet,
    min_fleet_bruteforce,
    payoff,
    payoffs,
    slot_revenue,
    trips_for,
    weighted_breakdowns,
)
from src.economics.fleet import min_fleet_for_trips
from src.economics.payoff import payoff_frame
from src.exceptions import InputError
from src.model.generators import random_bids, random_scenario
from src.model.types import Allocation
from tests.conftest import DATA_DIR, make_scenario


class TestFleet:

    def test_round_trip_needs_one_unit(self):
        out = Trip("w1", 420, "Madrid", "Barcelona")
        back = Trip("w2", 630, "Barcelona", "Madrid")
        assert min_fleet_for_trips([out, back], 150, 30) == 1

    def test_turnaround_too_short(self):
        out = Trip("w1", 420, "Madrid", "Barcelona")
        back = Trip("w2", 570, "Barcelona", "Madrid")
        assert min_fleet_for_trips([out, back], 150, 30) == 2

    def test_same_origin_needs_two_units(self):
        trips = [Trip("w1", 0, "A", "B"), Trip("w1", 600, "A", "B")]
        assert min_fleet_for_trips(trips, 90, 30) == 2

    def test_no_trips(self):
        assert min_fleet_for_trips([], 150, 30) == 0

    def test_allocation_fleet(self):
        scenario = make_scenario(n_slots=12, n_od=2)
        allocation = Allocation({"RU1": {"w1": (0, 8), "w2": (4,)}})
        assert [t.od_pair for t in trips_for(scenario, allocation, "RU1")] == ["w1", "w2", "w1"]
        assert min_fleet(scenario, allocation, "RU1") == 1
        assert min_fleet(scenario, allocation, "RU2") == 0

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(19)
        for _ in range(100):
            trips = []
            for _ in range(int(rng.integers(1, 9))):
                outbound = bool(rng.integers(0, 2))
                trips.append(Trip("w1" if outbound else "w2", int(rng.integers(0, 48)) * 30,
                                  "A" if outbound else "B", "B" if outbound else "A"))
            fleet = min_fleet_for_trips(trips, 150, 30)
            assert fleet == min_fleet_bruteforce(trips, 150, 30)
            assert max_concurrent_trips(trips, 150, 30) <= fleet <= len(trips)


class TestPayoff:

    def test_single_slot_profit(self):
        scenario = make_scenario(demand=300, costs=(1_149_000, 0, 295_000))
        allocation = Allocation({"RU1": {"w1": (2,)}})
        assert slot_revenue(scenario, "w1", 2) == 2_100_000
        result = payoff(scenario, allocation, "RU1")
        assert result.fleet_size == 1
        assert result.passengers == {"w1": 300}
        assert result.profit == 656_000
        assert result.profit == result.recomputed_profit()

    def test_empty_allocation_pays_access_cost(self, case_scenario):
        result = payoff(case_scenario, Allocation(), "RU2")
        assert result.fleet_size == 0
        assert result.ticket_revenue == 0
        assert result.profit == -5_600_000

    def test_case_study_frame(self, case_scenario):
        published, _ = load_allocation(DATA_DIR / "published" / "priority_heuristic_py2.json", case_scenario)
        frame = payoff_frame(case_scenario, list(payoffs(case_scenario, published).values()))
        assert list(frame["RU"]) == ["RU1", "RU2", "RU3"]
        assert list(frame["w1 slots"]) == [8, 8, 8]
        assert list(frame["w2 slots"]) == [8, 8, 8]
        assert (frame["rolling stock"] >= 1).all()

    def test_profit_identity(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            scenario = random_scenario(rng, n_undertakings=int(rng.integers(2, 4)),
                                       n_slots=int(rng.integers(3, 9)))
            result = allocate_priority_heuristic(scenario, random_bids(rng, scenario))
            for o, breakdown in payoffs(scenario, result.allocation).items():
                assert breakdown.profit == breakdown.recomputed_profit()
                trips = trips_for(scenario, result.allocation, o)
                assert breakdown.fleet_size >= max_concurrent_trips(
                    trips, scenario.trip_duration, scenario.turnaround)
                assert breakdown.fleet_size <= result.allocation.count(o)


class TestWeightedBreakdowns:

    def test_weights_outcomes(self):
        scenario = make_scenario(demand=300, costs=(1_149_000, 0, 295_000))
        one = payoffs(scenario, Allocation({"RU1": {"w1": (2,)}}))
        none = payoffs(scenario, Allocation())
        merged = weighted_breakdowns([(0.25, one), (0.75, none)])
        assert merged["RU1"].profit == pytest.approx(0.25 * 656_000)
        assert merged["RU1"].fleet_size == pytest.approx(0.25)
        assert merged["RU1"].slots_operated == {"w1": pytest.approx(0.25)}
        assert merged["RU2"].profit == pytest.approx(0.0)

    @pytest.mark.parametrize("weights", [(0.5, 0.6), (-0.5, 1.5)])
    def test_rejects_bad_probabilities(self, weights):
        scenario = make_scenario()
        table = payoffs(scenario, Allocation())
        with pytest.raises(InputError):
            weighted_breakdowns([(weights[0], table), (weights[1], table)])
