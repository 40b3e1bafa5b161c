"""
Re-timing primitives shared by every allocator.

A re-timing moves a requested slot to another slot of the same OD pair. The
helpers here pick the nearest free slot, evaluate deviations from the move
variables and rebuild moves for allocations stored without them.
"""

import logging
from enum import Enum
from typing import AbstractSet, Dict, Iterable, List, Sequence, Tuple, Union

from src.exceptions import InputError, NoFreeSlotError, ValidationFailed
from src.model.types import Allocation, Bid, RetimingMap, Scenario, TimeSlot, Violation, format_hhmm

LOG = logging.getLogger(__name__)


class TieBreak(str, Enum):
    """Direction used when two free slots are equally far from the target."""
    EARLIER = "earlier"
    LATER = "later"


def nearest_available_slot(
    target: TimeSlot,
    occupied: AbstractSet[int],
    grid: Sequence[TimeSlot],
    tie_break: TieBreak = TieBreak.EARLIER,
) -> TimeSlot:
    """
    Find the free slot closest in time to ``target``.

    Args:
        target: Requested slot
        occupied: Indices of slots already taken on this grid
        grid: All slots of the target's OD pair
        tie_break: Which of two equidistant slots wins

    Returns:
        The unoccupied slot minimizing ``|t - t_target|``

    Raises:
        NoFreeSlotError: If every slot of the grid is occupied

    Example:
        >>> nearest_available_slot(grid[4], {4}, grid)   # 08:15 taken
        TimeSlot(index=3, time=465, od_pair='w1')         # 07:45
    """
    free = [slot for slot in grid if slot.index not in occupied]
    if not free:
        raise NoFreeSlotError(
            f"no free slot on the {target.od_pair} grid for {format_hhmm(target.time)}"
        )
    direction = 1 if TieBreak(tie_break) is TieBreak.EARLIER else -1
    return min(free, key=lambda slot: (abs(slot.time - target.time), direction * slot.time))


def compute_deviation(
    scenario: Scenario,
    bids: Union[Bid, Iterable[Bid]],
    retiming: RetimingMap,
) -> Dict[str, int]:
    """
    Evaluate D_o for each bidder from the move variables.

    The per-request deviation is ``Σ_r' h[r -> r'] · |t_r - t_r'|`` summed over
    the whole grid of the request's OD pair, then D_o sums over requests.

    Args:
        scenario: Scenario providing slot times
        bids: One bid or a collection of bids
        retiming: Moves to evaluate

    Returns:
        Undertaking id -> total deviation in minutes

    Raises:
        ValidationFailed: If the moves do not resolve every requested slot exactly once
    """
    bids = [bids] if isinstance(bids, Bid) else list(bids)
    bidders = {b.undertaking for b in bids}

    h: Dict[Tuple[str, str, int], Dict[int, int]] = {}
    for move in retiming.moves:
        if move.undertaking in bidders:
            row = h.setdefault((move.undertaking, move.od_pair, move.requested), {})
            row[move.allocated] = row.get(move.allocated, 0) + 1

    violations: List[Violation] = []
    requested = {(b.undertaking, od, r) for b in bids for od, r in b.keys()}
    for key in sorted(requested):
        if sum(h.get(key, {}).values()) != 1:
            violations.append(Violation(f"retiming[{key[0]}]", "Σ_r' h = y for every request",
                                        f"{key[1]} #{key[2]}"))
    for key in sorted(set(h) - requested):
        violations.append(Violation(f"retiming[{key[0]}]", "move for a slot that was not requested",
                                    f"{key[1]} #{key[2]}"))
    if violations:
        raise ValidationFailed(violations, source="retiming")

    totals = {b.undertaking: 0 for b in bids}
    for (o, od_id, r), row in h.items():
        t_r = scenario.slot_time(od_id, r)
        totals[o] += sum(row.get(s.index, 0) * abs(t_r - s.time) for s in scenario.grid(od_id))
    return totals


def match_retiming(scenario: Scenario, bids: Iterable[Bid], allocation: Allocation) -> RetimingMap:
    """
    Rebuild a minimum-displacement re-timing for an allocation given without moves.

    Requested and allocated slots of each undertaking and OD pair are paired
    in time order, which minimizes the summed absolute displacement.

    Raises:
        InputError: If an undertaking holds a different number of slots than it requested
    """
    pairs = []
    bids = list(bids)
    for bid in bids:
        for od_id in scenario.od_ids:
            requested = sorted(bid.slots(od_id))
            allocated = sorted(allocation.slots(bid.undertaking, od_id))
            if len(requested) != len(allocated):
                raise InputError(
                    f"{bid.undertaking} requested {len(requested)} slot(s) on {od_id} "
                    f"but holds {len(allocated)}"
                )
            pairs.extend((bid.undertaking, od_id, r, a) for r, a in zip(requested, allocated))
    return RetimingMap.build(scenario, pairs, [b.undertaking for b in bids])
