"""
Shared fixtures: the shipped case study and small hand-built scenarios.
"""

from pathlib import Path
from typing import Dict, Sequence

import pytest

from src.model.io import load_bids, load_scenario
from src.model.types import Bid, ODPair, Scenario, TimeSlot, Undertaking, parse_hhmm

DATA_DIR = Path(__file__).parent.parent / "data"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: randomized suites over a thousand instances (deselect with -m \"not slow\")")


def make_scenario(n_slots: int = 6, shares: Sequence[float] = (0.5, 0.5), n_od: int = 1,
                  demand: int = 100, fare: int = 7000, trip_duration: int = 90,
                  turnaround: int = 30, costs=(0, 0, 0)) -> Scenario:
    """Grid from 06:15 every 30 minutes; undertakings RU1, RU2, ... with the given shares."""
    termini = ("A", "B")
    od_pairs = tuple(ODPair(f"w{i + 1}", termini[i % 2], termini[(i + 1) % 2]) for i in range(n_od))
    slots = {od.id: tuple(TimeSlot(i, 375 + 30 * i, od.id) for i in range(n_slots)) for od in od_pairs}
    rolling_stock, fixed, operating = costs
    undertakings = tuple(
        Undertaking(f"RU{i + 1}", share, rolling_stock, fixed, operating)
        for i, share in enumerate(shares)
    )
    keys = [(od.id, i) for od in od_pairs for i in range(n_slots)]
    return Scenario(od_pairs, slots, undertakings, {k: demand for k in keys}, {k: fare for k in keys},
                    trip_duration, turnaround)


def bid_at(scenario: Scenario, undertaking: str, times: Dict[str, Sequence[str]]) -> Bid:
    """Bid from ``HH:MM`` times per OD pair."""
    return Bid.from_slots(undertaking, {
        od_id: [scenario.slot_index(od_id, parse_hhmm(t)) for t in ts] for od_id, ts in times.items()
    })


@pytest.fixture(scope="session")
def case_scenario() -> Scenario:
    return load_scenario(DATA_DIR / "scenarios" / "madrid_barcelona.json")


@pytest.fixture(scope="session")
def case_bids(case_scenario):
    """Loader for the shipped bid files, e.g. ``case_bids("priority", "py2")``."""
    def load(rule: str, strategy: str):
        return load_bids(DATA_DIR / "bids" / f"{rule}_{strategy}.json", case_scenario)
    return load


@pytest.fixture
def small_scenario() -> Scenario:
    """One OD pair, six slots (06:15 to 08:45), two undertakings with half the capacity each."""
    return make_scenario()
