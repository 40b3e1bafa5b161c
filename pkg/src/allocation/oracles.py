"""
Brute-force reference solutions used by the test suites and ``tsa selftest``.
"""

from itertools import permutations
from typing import AbstractSet, List, Optional, Sequence

from src.allocation.equity import within_band
from src.allocation.pareto import (
    MAX_REQUESTS,
    MAX_SLOTS_PER_OD,
    ParetoSet,
    Vector,
    deviation_vectors,
    non_dominated,
)
from src.exceptions import OracleScaleError
from src.model.types import Bid, Scenario


def priority_permutation_minimum(scenario: Scenario, od_id: str, requested: Sequence[int],
                                 occupied: AbstractSet[int]) -> Optional[int]:
    """
    Minimum deviation of re-timing ``requested`` into free slots, by trying every permutation.

    Returns:
        Minimum total deviation in minutes, or None when there are fewer free slots than requests

    Raises:
        OracleScaleError: If the instance is beyond exhaustive enumeration
    """
    grid = scenario.grid(od_id)
    free = [slot for slot in grid if slot.index not in occupied]
    if len(requested) > MAX_REQUESTS or len(free) > MAX_SLOTS_PER_OD:
        raise OracleScaleError(
            f"oracle scale exceeded: {len(requested)} requests into {len(free)} free slots"
        )
    if len(free) < len(requested):
        return None
    times = [grid[r].time for r in requested]
    return min(
        sum(abs(t - slot.time) for t, slot in zip(times, chosen))
        for chosen in permutations(free, len(requested))
    )


def _band_vectors(scenario: Scenario, bids: Sequence[Bid], epsilon: float) -> List[Vector]:
    n_y = sum(b.count() for b in bids)
    if n_y == 0:
        return [tuple(0 for _ in bids)]
    kept = []
    for vector in deviation_vectors(scenario, bids):
        delta = sum(vector) / n_y
        normalized = {
            b.undertaking: d / (scenario.undertaking(b.undertaking).capacity_share * n_y)
            for b, d in zip(bids, vector) if b.count() > 0
        }
        if within_band(delta, normalized, epsilon):
            kept.append(vector)
    return kept


def equity_enumeration_minimum(scenario: Scenario, bids: Sequence[Bid],
                               epsilon: float) -> Optional[int]:
    """
    Minimum total deviation among re-timings whose vector satisfies the equity band.

    Returns:
        Minimum total in minutes, or None when no vector fits the band
    """
    totals = [sum(v) for v in _band_vectors(scenario, bids, epsilon)]
    return min(totals) if totals else None


def equity_band_front(scenario: Scenario, bids: Sequence[Bid], epsilon: float) -> ParetoSet:
    """
    Non-dominated deviation vectors among those inside the equity band.

    A minimum-total vector in the band is never dominated by another vector
    in the band, though it can be dominated by one outside it.
    """
    vectors = non_dominated(_band_vectors(scenario, bids, epsilon))
    return ParetoSet(tuple(b.undertaking for b in bids), frozenset(vectors))
