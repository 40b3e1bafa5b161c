"""
Swap-symmetry check: does exchanging two undertakings' bids exchange their outcomes?
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

from src.allocation.results import AllocationResult
from src.exceptions import InputError
from src.model.types import Bid, Scenario

Allocator = Callable[[Scenario, Sequence[Bid]], AllocationResult]


@dataclass(frozen=True)
class SymmetryReport:
    first: str
    second: str
    original: Dict[str, int]
    swapped: Dict[str, int]
    values_swapped: bool
    allocation_swapped: bool


def swap_bids(bids: Sequence[Bid], first: str, second: str) -> List[Bid]:
    """Give ``first`` the requests of ``second`` and vice versa."""
    requested = {b.undertaking: b.requested for b in bids}
    if first not in requested or second not in requested:
        raise InputError(f"both {first} and {second} need a bid to be swapped")
    exchange = {first: second, second: first}
    return [Bid(b.undertaking, requested[exchange.get(b.undertaking, b.undertaking)]) for b in bids]


def swap_symmetry_report(scenario: Scenario, bids: Sequence[Bid], first: str, second: str,
                         allocator: Allocator) -> SymmetryReport:
    """
    Run ``allocator`` on the bids and on the bids with two undertakings swapped.

    ``values_swapped`` is True when D_first and D_second trade places;
    ``allocation_swapped`` when the allocated slots trade places too.

    Raises:
        InputError: If the two undertakings have different capacity shares
    """
    if scenario.undertaking(first).capacity_share != scenario.undertaking(second).capacity_share:
        raise InputError(f"{first} and {second} have different capacity shares")

    before = allocator(scenario, bids)
    after = allocator(scenario, swap_bids(bids, first, second))
    d_before, d_after = before.total_deviation, after.total_deviation

    values = d_before[first] == d_after[second] and d_before[second] == d_after[first]
    slots = all(
        before.allocation.slots(first, od) == after.allocation.slots(second, od)
        and before.allocation.slots(second, od) == after.allocation.slots(first, od)
        for od in scenario.od_ids
    )
    return SymmetryReport(first, second, d_before, d_after, values, slots)
