"""
Validation of scenarios, bids and allocation outputs.

Validators return lists of :class:`Violation`; they only raise when a
reference cannot be resolved at all (an unknown undertaking).
"""

from collections import Counter
from typing import Dict, Iterable, List, Sequence

from src.model.types import Allocation, Bid, RetimingMap, Scenario, Violation, format_hhmm


def validate_scenario(scenario: Scenario) -> List[Violation]:
    """
    Check every Scenario invariant.

    Args:
        scenario: Scenario to check

    Returns:
        List of violations, empty when the scenario is valid
    """
    violations: List[Violation] = []

    od_ids = [od.id for od in scenario.od_pairs]
    if not od_ids:
        violations.append(Violation("od_pairs", "at least one OD pair required"))
    for od_id, n in Counter(od_ids).items():
        if n > 1:
            violations.append(Violation(f"od_pairs[{od_id}]", "duplicate OD pair id"))

    if scenario.grid_step <= 0:
        violations.append(Violation("grid_step_min", "grid step > 0"))
    if scenario.trip_duration <= 0:
        violations.append(Violation("trip_duration_min", "trip duration > 0"))
    if scenario.turnaround < 0:
        violations.append(Violation("turnaround_min", "turnaround ≥ 0"))

    for od_id in od_ids:
        violations.extend(_validate_grid(scenario, od_id))
    for od_id in scenario.slots:
        if od_id not in od_ids:
            violations.append(Violation(f"slots[{od_id}]", "grid for an undeclared OD pair"))

    ids = [u.id for u in scenario.undertakings]
    for u_id, n in Counter(ids).items():
        if n > 1:
            violations.append(Violation(f"undertakings[{u_id}]", "duplicate undertaking id"))

    for u in scenario.undertakings:
        prefix = f"undertakings[{u.id}]"
        if not 0 < u.capacity_share <= 1:
            violations.append(Violation(f"{prefix}.capacity_share", "capacity_share in (0, 1]",
                                        f"got {u.capacity_share}"))
        for name in ("daily_rolling_stock_cost", "fixed_access_cost", "per_slot_operating_cost"):
            if getattr(u, name) < 0:
                violations.append(Violation(f"{prefix}.{name}", "cost ≥ 0"))
        for (od_id, index), cost in u.slot_operating_costs.items():
            if od_id not in scenario.slots or not 0 <= index < len(scenario.slots[od_id]):
                violations.append(Violation(f"{prefix}.slot_operating_costs", "slot not on grid",
                                            f"{od_id}#{index}"))
            if cost < 0:
                violations.append(Violation(f"{prefix}.slot_operating_costs", "cost ≥ 0",
                                            f"{od_id}#{index}"))

    expected = {(od_id, s.index) for od_id in od_ids for s in scenario.slots.get(od_id, ())}
    for name, values in (("demand", scenario.demand), ("fare", scenario.fare)):
        missing = sorted(expected - set(values))
        if missing:
            violations.append(Violation(name, f"{name} defined for every slot",
                                        f"{len(missing)} slot(s) missing, first {missing[0]}"))
        extra = sorted(set(values) - expected)
        if extra:
            violations.append(Violation(name, "entry for a slot not on the grid", f"{extra[0]}"))
        for key in sorted(expected & set(values)):
            if values[key] < 0:
                violations.append(Violation(f"{name}[{key[0]}#{key[1]}]", f"{name} ≥ 0",
                                            f"got {values[key]}"))

    for od_id in od_ids:
        grid = scenario.slots.get(od_id, ())
        if not grid or any(not 0 < u.capacity_share <= 1 for u in scenario.undertakings):
            continue
        booked = sum(scenario.capacity_limit(u.id, od_id) for u in scenario.undertakings)
        if booked > len(grid):
            violations.append(Violation(f"od_pairs[{od_id}]", "capacity oversubscription",
                                        f"Σ floor(k·|R|) = {booked} > {len(grid)}"))

    return violations


def _validate_grid(scenario: Scenario, od_id: str) -> List[Violation]:
    grid = scenario.slots.get(od_id)
    field = f"slots[{od_id}]"
    if not grid:
        return [Violation(field, "non-empty slot grid required")]

    violations = []
    for position, slot in enumerate(grid):
        if slot.index != position or slot.od_pair != od_id:
            violations.append(Violation(field, "slot index/OD pair mismatch", f"position {position}"))
        if not 0 <= slot.time < 24 * 60:
            violations.append(Violation(field, "slot time within one day", f"position {position}"))
    for previous, current in zip(grid, grid[1:]):
        if current.time <= previous.time:
            violations.append(Violation(field, "slot times strictly increasing",
                                        f"index {current.index}"))
        elif current.time - previous.time != scenario.grid_step:
            violations.append(Violation(field, "consecutive slots differ by the grid step",
                                        f"index {current.index}"))
    return violations


def validate_bid(scenario: Scenario, bid: Bid) -> List[Violation]:
    """
    Check a bid against the scenario capacity bounds.

    Args:
        scenario: Scenario the bid is placed in
        bid: Bid to check

    Returns:
        List of violations, empty when the bid is valid

    Raises:
        UnknownUndertakingError: If the bidder is not in the scenario

    Example:
        >>> validate_bid(scenario, Bid("RU1", {"w1": (0, 1)}))
        []
    """
    scenario.undertaking(bid.undertaking)
    violations: List[Violation] = []
    prefix = f"bids[{bid.undertaking}]"

    for od_id, indices in bid.requested.items():
        if od_id not in scenario.slots:
            violations.append(Violation(f"{prefix}.{od_id}", "unknown OD pair"))
            continue
        size = len(scenario.slots[od_id])
        for index in indices:
            if not 0 <= index < size:
                violations.append(Violation(f"{prefix}.{od_id}", "slot not on grid", f"index {index}"))
        for index, n in Counter(indices).items():
            if n > 1:
                violations.append(Violation(f"{prefix}.{od_id}", "requested slots must be distinct",
                                            _describe(scenario, od_id, index)))
        limit = scenario.capacity_limit(bid.undertaking, od_id)
        if len(indices) > limit:
            violations.append(Violation(f"{prefix}.{od_id}", "capacity exceeded",
                                        f"{len(indices)} > floor(k·|R|) = {limit}"))
    return violations


def validate_bids(scenario: Scenario, bids: Sequence[Bid]) -> List[Violation]:
    """Validate a bid collection: every bid, plus at most one bid per undertaking."""
    violations: List[Violation] = []
    for u_id, n in Counter(b.undertaking for b in bids).items():
        if n > 1:
            violations.append(Violation(f"bids[{u_id}]", "one bid per undertaking"))
    for bid in bids:
        violations.extend(validate_bid(scenario, bid))
    return violations


def check_allocation(
    scenario: Scenario,
    bids: Iterable[Bid],
    allocation: Allocation,
    retiming: RetimingMap,
) -> List[Violation]:
    """
    Check an allocator output against the re-timing invariants.

    Verifies that every requested slot has exactly one move, that every
    allocated slot is the target of exactly one move, that no slot is held
    twice, that per-OD counts are preserved and that stored deviations match
    the grid.
    """
    violations: List[Violation] = []
    bids = list(bids)

    requested = Counter((b.undertaking, od, r) for b in bids for od, r in b.keys())
    moved_from = Counter((m.undertaking, m.od_pair, m.requested) for m in retiming.moves)
    for key in sorted(set(requested) | set(moved_from)):
        if requested[key] != moved_from[key]:
            violations.append(Violation(f"retiming[{key[0]}]", "Σ_r' h = y for every request",
                                        _describe(scenario, key[1], key[2])))

    allocated = Counter((o, od, r) for o, per_od in allocation.assigned.items()
                        for od, idx in per_od.items() for r in idx)
    moved_to = Counter((m.undertaking, m.od_pair, m.allocated) for m in retiming.moves)
    for key in sorted(set(allocated) | set(moved_to)):
        if allocated[key] != moved_to[key]:
            violations.append(Violation(f"retiming[{key[0]}]", "Σ_r h = x for every allocated slot",
                                        _describe(scenario, key[1], key[2])))

    for od_id in scenario.od_ids:
        for index, holders in allocation.owners(od_id).items():
            if len(holders) > 1:
                violations.append(Violation(f"allocation[{od_id}]", "slot held at most once",
                                            f"{_describe(scenario, od_id, index)} held by "
                                            f"{', '.join(holders)}"))

    for bid in bids:
        for od_id in scenario.od_ids:
            if bid.count(od_id) != allocation.count(bid.undertaking, od_id):
                violations.append(Violation(f"allocation[{bid.undertaking}].{od_id}",
                                            "allocated count equals requested count",
                                            f"{allocation.count(bid.undertaking, od_id)} != "
                                            f"{bid.count(od_id)}"))

    totals: Dict[str, int] = {}
    for move in retiming.moves:
        expected = abs(scenario.slot_time(move.od_pair, move.requested)
                       - scenario.slot_time(move.od_pair, move.allocated))
        if move.deviation != expected:
            violations.append(Violation(f"retiming[{move.undertaking}]", "deviation matches grid",
                                        _describe(scenario, move.od_pair, move.requested)))
        totals[move.undertaking] = totals.get(move.undertaking, 0) + expected
    for o, total in retiming.total_deviation.items():
        if totals.get(o, 0) != total:
            violations.append(Violation(f"retiming[{o}]", "D_o equals the sum of slot deviations",
                                        f"{total} != {totals.get(o, 0)}"))
    return violations


def _describe(scenario: Scenario, od_id: str, index: int) -> str:
    grid = scenario.slots.get(od_id, ())
    if 0 <= index < len(grid):
        return f"{od_id} {format_hhmm(grid[index].time)}"
    return f"{od_id} #{index}"

