"""
Exhaustive enumeration of deviation vectors, for tiny instances only.
"""

from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Sequence, Set, Tuple

from src.exceptions import OracleScaleError
from src.model.types import Bid, Scenario

MAX_REQUESTS = 8
MAX_SLOTS_PER_OD = 10

Vector = Tuple[int, ...]


def dominates(a: Vector, b: Vector) -> bool:
    """True when ``a`` is componentwise ≤ ``b`` and strictly smaller somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def non_dominated(vectors: Iterable[Vector]) -> Set[Vector]:
    candidates = set(vectors)
    return {v for v in candidates if not any(dominates(w, v) for w in candidates)}


@dataclass(frozen=True)
class ParetoSet:
    """Non-dominated deviation vectors, ordered like ``undertakings``."""
    undertakings: Tuple[str, ...]
    vectors: FrozenSet[Vector]

    def __contains__(self, vector) -> bool:
        return tuple(vector) in self.vectors

    def is_dominated(self, vector: Sequence[int]) -> bool:
        return any(dominates(v, tuple(vector)) for v in self.vectors)


def check_oracle_scale(scenario: Scenario, bids: Sequence[Bid]) -> None:
    """
    Raises:
        OracleScaleError: If the instance is beyond exhaustive enumeration
    """
    total = sum(b.count() for b in bids)
    if total > MAX_REQUESTS:
        raise OracleScaleError(f"oracle scale exceeded: {total} requests > {MAX_REQUESTS}")
    for od_id in scenario.od_ids:
        if any(b.count(od_id) for b in bids) and len(scenario.grid(od_id)) > MAX_SLOTS_PER_OD:
            raise OracleScaleError(
                f"oracle scale exceeded: {od_id} has {len(scenario.grid(od_id))} slots > {MAX_SLOTS_PER_OD}"
            )


def _od_vectors(scenario: Scenario, bids: Sequence[Bid], od_id: str) -> Set[Vector]:
    grid = scenario.grid(od_id)
    requests = [(i, grid[r].time) for i, b in enumerate(bids) for r in b.slots(od_id)]
    found: Set[Vector] = set()
    totals = [0] * len(bids)
    used = [False] * len(grid)

    def assign(position: int) -> None:
        if position == len(requests):
            found.add(tuple(totals))
            return
        owner, time = requests[position]
        for slot in grid:
            if used[slot.index]:
                continue
            used[slot.index] = True
            totals[owner] += abs(slot.time - time)
            assign(position + 1)
            totals[owner] -= abs(slot.time - time)
            used[slot.index] = False

    assign(0)
    return found


def deviation_vectors(scenario: Scenario, bids: Sequence[Bid]) -> Set[Vector]:
    """
    Every deviation vector reachable by a conflict-free complete re-timing.

    Vector components follow the order of ``bids``. Re-timings never cross OD
    pairs, so per-OD vector sets are combined by Minkowski sum.

    Raises:
        OracleScaleError: If the instance is beyond exhaustive enumeration
    """
    check_oracle_scale(scenario, bids)
    combined: Set[Vector] = {tuple([0] * len(bids))}
    for od_id in scenario.od_ids:
        per_od = _od_vectors(scenario, bids, od_id)
        combined = {tuple(a + b for a, b in zip(u, v)) for u in combined for v in per_od}
    return combined


def pareto_bruteforce(scenario: Scenario, bids: Sequence[Bid]) -> ParetoSet:
    """
    Non-dominated deviation vectors over all conflict-free re-timings.

    Example:
        >>> pareto_bruteforce(scenario, [Bid("A", {"w1": (2,)}), Bid("B", {"w1": (2,)})]).vectors
        frozenset({(0, 30), (30, 0)})
    """
    vectors: List[Vector] = list(deviation_vectors(scenario, bids))
    return ParetoSet(tuple(b.undertaking for b in bids), frozenset(non_dominated(vectors)))
