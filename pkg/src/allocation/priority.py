"""
Priority-rule allocators.

Undertakings are served one after another in a fixed order. Each one keeps
every requested slot that is still free and has the others re-timed into
slots left over by higher-priority undertakings.
"""

import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.allocation.results import AllocationResult, Method, PriorityOrder, Rule
from src.allocation.retiming import TieBreak, nearest_available_slot
from src.exceptions import InfeasibleAllocationError, ValidationFailed
from src.model.types import Bid, RetimingMap, Scenario
from src.model.validation import validate_bids

LOG = logging.getLogger(__name__)

OrderLike = Optional[Union[PriorityOrder, Sequence[str]]]


def index_bids(scenario: Scenario, bids: Sequence[Bid]) -> Dict[str, Bid]:
    """
    Validate a bid collection and key it by undertaking.

    Raises:
        UnknownUndertakingError: If a bid names an unknown undertaking
        ValidationFailed: If any bid breaks a capacity or grid rule
    """
    violations = validate_bids(scenario, bids)
    if violations:
        raise ValidationFailed(violations, source="bids")
    return {bid.undertaking: bid for bid in bids}


def allocate_priority_heuristic(
    scenario: Scenario,
    bids: Sequence[Bid],
    order: OrderLike = None,
    tie_break: TieBreak = TieBreak.EARLIER,
) -> AllocationResult:
    """
    Greedy priority allocation.

    Requests are handled per undertaking in priority order, per OD pair in
    declaration order, in ascending time. A free request is granted as is;
    a taken one goes to the nearest free slot.

    Args:
        scenario: Allocation instance
        bids: One bid per participating undertaking
        order: Priority order (defaults to declaration order)
        tie_break: Direction for equidistant free slots

    Returns:
        AllocationResult with rule ``priority`` and method ``heuristic``

    Raises:
        NoFreeSlotError: If a grid runs out of slots while re-timing
    """
    by_undertaking = index_bids(scenario, bids)
    order = PriorityOrder.resolve(scenario, order)
    occupied: Dict[str, Set[int]] = {od_id: set() for od_id in scenario.od_ids}
    pairs: List[Tuple[str, str, int, int]] = []

    for o in order.undertakings:
        bid = by_undertaking.get(o)
        if bid is None:
            continue
        for od_id in scenario.od_ids:
            grid = scenario.grid(od_id)
            for r in bid.slots(od_id):
                if r in occupied[od_id]:
                    allocated = nearest_available_slot(grid[r], occupied[od_id], grid, tie_break).index
                    LOG.debug("%s %s: %s taken, re-timed to %s", o, od_id, grid[r], grid[allocated])
                else:
                    allocated = r
                occupied[od_id].add(allocated)
                pairs.append((o, od_id, r, allocated))

    retiming = RetimingMap.build(scenario, pairs, scenario.undertaking_ids)
    LOG.info("priority heuristic: total deviation %d min", retiming.total)
    return AllocationResult(retiming.to_allocation(), retiming, Rule.PRIORITY, Method.HEURISTIC,
                            tie_break=TieBreak(tie_break))


def retime_into_free_slots(
    scenario: Scenario,
    od_id: str,
    requested: Sequence[int],
    occupied: Set[int],
    tie_break: TieBreak = TieBreak.EARLIER,
) -> List[Tuple[int, int]]:
    """
    Minimum-deviation assignment of requested slots to free slots of one grid.

    Solved as a rectangular assignment problem. Among minimum-deviation
    assignments the one using the earliest (or latest) free slots wins: the
    cost is ``deviation * scale + rank`` with ``scale`` larger than any rank sum.

    Returns:
        List of (requested index, allocated index) pairs

    Raises:
        InfeasibleAllocationError: If fewer free slots than requests remain
    """
    if not requested:
        return []
    grid = scenario.grid(od_id)
    free = [slot for slot in grid if slot.index not in occupied]
    if len(free) < len(requested):
        raise InfeasibleAllocationError(
            f"{od_id}: {len(requested)} request(s) but only {len(free)} free slot(s)"
        )

    times = np.array([grid[r].time for r in requested], dtype=np.int64)
    free_times = np.array([slot.time for slot in free], dtype=np.int64)
    rank = np.arange(len(free), dtype=np.int64)
    if TieBreak(tie_break) is TieBreak.LATER:
        rank = rank[::-1]
    scale = len(requested) * len(free)
    cost = np.abs(times[:, None] - free_times[None, :]) * scale + rank[None, :]

    rows, cols = linear_sum_assignment(cost)
    return [(requested[i], free[j].index) for i, j in zip(rows, cols)]


def retime_lexicographic(
    scenario: Scenario,
    od_id: str,
    levels: Sequence[Sequence[int]],
    tie_break: TieBreak = TieBreak.EARLIER,
) -> Optional[List[List[Tuple[int, int]]]]:
    """
    Joint re-timing of several undertakings' requests on one grid.

    ``levels`` lists the requested indices per undertaking, highest priority
    first. The assignment minimizes the first undertaking's deviation, then
    the second's among those, and so on; slot rank breaks the remaining ties.
    Each level is weighted above everything the lower levels can add up to.

    Returns:
        One list of (requested index, allocated index) pairs per level, or
        ``None`` when the weights would not be exact in float64

    Raises:
        InfeasibleAllocationError: If the grid has fewer slots than requests
    """
    grid = scenario.grid(od_id)
    rows = [(level, r) for level, requested in enumerate(levels) for r in requested]
    if not rows:
        return [[] for _ in levels]
    if len(rows) > len(grid):
        raise InfeasibleAllocationError(
            f"{od_id}: {len(rows)} request(s) but only {len(grid)} slot(s)"
        )

    times = np.array([slot.time for slot in grid], dtype=np.int64)
    unit = int(np.gcd.reduce(times - times[0])) or 1
    steps = (times - times[0]) // unit
    span = int(steps[-1] - steps[0])
    rank_total = len(rows) * (len(grid) - 1)

    # weights[level] exceeds the largest cost all lower levels plus rank can reach
    weights = [0] * len(levels)
    bound = rank_total
    for level in reversed(range(len(levels))):
        weights[level] = bound + 1
        bound += len(levels[level]) * span * weights[level]
    if bound >= 2 ** 53:
        return None

    rank = np.arange(len(grid), dtype=np.int64)
    if TieBreak(tie_break) is TieBreak.LATER:
        rank = rank[::-1]
    requested_steps = np.array([steps[r] for _, r in rows], dtype=np.int64)
    row_weights = np.array([weights[level] for level, _ in rows], dtype=np.float64)
    cost = np.abs(requested_steps[:, None] - steps[None, :]) * row_weights[:, None] + rank[None, :]

    assigned_rows, cols = linear_sum_assignment(cost)
    result: List[List[Tuple[int, int]]] = [[] for _ in levels]
    for i, j in zip(assigned_rows, cols):
        level, r = rows[i]
        result[level].append((r, grid[j].index))
    return result


def allocate_priority_exact(
    scenario: Scenario,
    bids: Sequence[Bid],
    order: OrderLike = None,
    tie_break: TieBreak = TieBreak.EARLIER,
    lookahead: bool = False,
) -> AllocationResult:
    """
    Exact priority allocation.

    Each undertaking in turn gets the re-timing of its requests that
    minimizes its own total deviation, given the slots fixed for
    higher-priority undertakings.

    Without ``lookahead`` ties between equally good re-timings are settled
    by slot rank alone, which can leave a lower-priority undertaking worse
    off than necessary. With ``lookahead`` the choice among them favours the
    undertakings further down the order, so the deviation vector is
    lexicographically minimal and never Pareto-dominated.

    Raises:
        InfeasibleAllocationError: If an undertaking faces fewer free slots than requests
    """
    by_undertaking = index_bids(scenario, bids)
    order = PriorityOrder.resolve(scenario, order)
    bidders = [o for o in order.undertakings if o in by_undertaking]
    occupied: Dict[str, Set[int]] = {od_id: set() for od_id in scenario.od_ids}
    pairs: List[Tuple[str, str, int, int]] = []

    for od_id in scenario.od_ids:
        if lookahead:
            levels = [by_undertaking[o].slots(od_id) for o in bidders]
            joint = retime_lexicographic(scenario, od_id, levels, tie_break)
            if joint is not None:
                for o, assignment in zip(bidders, joint):
                    pairs.extend((o, od_id, r, a) for r, a in assignment)
                continue
            LOG.warning("%s: lookahead weights exceed float precision, ties settled per undertaking",
                        od_id)
        for o in bidders:
            assignment = retime_into_free_slots(scenario, od_id, by_undertaking[o].slots(od_id),
                                                occupied[od_id], tie_break)
            pairs.extend((o, od_id, r, a) for r, a in assignment)
            occupied[od_id].update(a for _, a in assignment)

    retiming = RetimingMap.build(scenario, pairs, scenario.undertaking_ids)
    LOG.info("priority exact%s: total deviation %d min", " (lookahead)" if lookahead else "",
             retiming.total)
    return AllocationResult(retiming.to_allocation(), retiming, Rule.PRIORITY, Method.EXACT,
                            tie_break=TieBreak(tie_break))
