"""
Seeded random instances for property suites and ``tsa selftest``.
"""

from typing import List, Optional

import numpy as np

from src.model.types import Bid, ODPair, Scenario, TimeSlot, Undertaking

_TERMINI = ("A", "B")


def random_scenario(
    rng: np.random.Generator,
    n_undertakings: int = 3,
    n_od: int = 2,
    n_slots: int = 8,
    grid_step: int = 30,
    first_departure: int = 6 * 60 + 15,
    trip_duration: int = 90,
    turnaround: int = 30,
) -> Scenario:
    """
    A small valid scenario with equal capacity shares.

    OD pairs alternate direction between two termini, so fleets can chain.
    """
    od_pairs = tuple(
        ODPair(f"w{i + 1}", _TERMINI[i % 2], _TERMINI[(i + 1) % 2]) for i in range(n_od)
    )
    slots = {
        od.id: tuple(TimeSlot(i, first_departure + i * grid_step, od.id) for i in range(n_slots))
        for od in od_pairs
    }
    share = 1.0 / n_undertakings
    undertakings = tuple(
        Undertaking(
            id=f"RU{i + 1}",
            capacity_share=share,
            daily_rolling_stock_cost=int(rng.integers(5_000, 15_000)) * 100,
            fixed_access_cost=int(rng.integers(0, 5_000)) * 100,
            per_slot_operating_cost=int(rng.integers(1_000, 4_000)) * 100,
        )
        for i in range(n_undertakings)
    )
    demand = {(od.id, i): int(rng.integers(0, 500)) for od in od_pairs for i in range(n_slots)}
    fare = {(od.id, i): 7000 for od in od_pairs for i in range(n_slots)}
    return Scenario(od_pairs, slots, undertakings, demand, fare, trip_duration, turnaround,
                    grid_step, name="random")


def random_bids(rng: np.random.Generator, scenario: Scenario, max_total: Optional[int] = None,
                clustered: bool = True) -> List[Bid]:
    """
    One valid bid per undertaking.

    With ``clustered`` the requests favour the first half of each grid, which
    makes conflicts frequent. ``max_total`` caps the number of requests over
    all bids.
    """
    bids = []
    budget = max_total if max_total is not None else 10 ** 9
    for u in scenario.undertakings:
        requested = {}
        for od_id in scenario.od_ids:
            size = len(scenario.grid(od_id))
            limit = min(scenario.capacity_limit(u.id, od_id), budget)
            count = int(rng.integers(0, limit + 1)) if limit > 0 else 0
            if count == 0:
                continue
            if clustered:
                weights = np.linspace(2.0, 1.0, size)
                weights /= weights.sum()
                chosen = rng.choice(size, size=count, replace=False, p=weights)
            else:
                chosen = rng.choice(size, size=count, replace=False)
            requested[od_id] = [int(i) for i in chosen]
            budget -= count
        bids.append(Bid.from_slots(u.id, requested))
    return bids
