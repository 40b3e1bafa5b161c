"""
Domain types for railway time-slot allocation.

All values are immutable after construction. Times are integer minutes since
midnight, deviations are integer minutes and every currency amount is an
integer number of cents.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from src.exceptions import UnknownSlotError, UnknownUndertakingError

# (od pair id, slot index)
SlotKey = Tuple[str, int]

_HHMM = re.compile(r'^([01]\d|2[0-3]):([0-5]\d)$')


def parse_hhmm(text: str) -> int:
    """
    Parse a zero-padded 24-hour ``HH:MM`` string.

    Args:
        text: Time such as ``"07:45"``

    Returns:
        Minutes since midnight

    Raises:
        ValueError: If the string is not zero-padded ``HH:MM``

    Example:
        >>> parse_hhmm("07:45")
        465
    """
    match = _HHMM.match(text.strip()) if isinstance(text, str) else None
    if not match:
        raise ValueError(f"Invalid time '{text}': expected zero-padded HH:MM")
    return int(match.group(1)) * 60 + int(match.group(2))


def format_hhmm(minutes: int) -> str:
    """Format minutes since midnight as ``HH:MM``."""
    if not 0 <= minutes < 24 * 60:
        raise ValueError(f"Time {minutes} is outside a single day")
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def format_duration(minutes: int) -> str:
    """
    Render a deviation in hours and minutes.

    Example:
        >>> format_duration(390)
        '6h 30m'
    """
    hours, rest = divmod(int(minutes), 60)
    if hours and rest:
        return f"{hours}h {rest}m"
    if hours:
        return f"{hours}h"
    return f"{rest}m"


@dataclass(frozen=True)
class TimeSlot:
    """A departure slot on one OD pair grid."""
    index: int
    time: int
    od_pair: str

    @property
    def key(self) -> SlotKey:
        return (self.od_pair, self.index)

    def __str__(self):
        return f"{self.od_pair}@{format_hhmm(self.time)}"


@dataclass(frozen=True)
class ODPair:
    """An origin-destination pair served by the slot grid."""
    id: str
    origin: str
    destination: str


@dataclass(frozen=True)
class Undertaking:
    """
    A railway undertaking bidding for slots.

    ``slot_operating_costs`` overrides ``per_slot_operating_cost`` for
    individual slots; the shipped scenario leaves it empty.
    """
    id: str
    capacity_share: float
    daily_rolling_stock_cost: int
    fixed_access_cost: int
    per_slot_operating_cost: int
    slot_operating_costs: Mapping[SlotKey, int] = field(default_factory=dict)

    def operating_cost(self, od_pair: str, index: int) -> int:
        """Operating cost in cents of running slot ``index`` on ``od_pair``."""
        return self.slot_operating_costs.get((od_pair, index), self.per_slot_operating_cost)


@dataclass(frozen=True)
class Scenario:
    """
    A complete allocation instance: grid, undertakings, demand and costs.

    Construction never fails on bad values; use
    :func:`src.model.validation.validate_scenario` to obtain violations.
    """
    od_pairs: Tuple[ODPair, ...]
    slots: Mapping[str, Tuple[TimeSlot, ...]]
    undertakings: Tuple[Undertaking, ...]
    demand: Mapping[SlotKey, int]
    fare: Mapping[SlotKey, int]
    trip_duration: int
    turnaround: int
    grid_step: int = 30
    name: str = ""
    demand_profile: str = "exact"

    @property
    def od_ids(self) -> List[str]:
        return [od.id for od in self.od_pairs]

    @property
    def undertaking_ids(self) -> List[str]:
        return [u.id for u in self.undertakings]

    def od_pair(self, od_id: str) -> ODPair:
        for od in self.od_pairs:
            if od.id == od_id:
                return od
        raise UnknownSlotError(f"Unknown OD pair '{od_id}'")

    def grid(self, od_id: str) -> Tuple[TimeSlot, ...]:
        """All slots of one OD pair, ordered by index."""
        if od_id not in self.slots:
            raise UnknownSlotError(f"Unknown OD pair '{od_id}'")
        return self.slots[od_id]

    def slot(self, od_id: str, index: int) -> TimeSlot:
        grid = self.grid(od_id)
        if not 0 <= index < len(grid):
            raise UnknownSlotError(f"Slot index {index} is not on the {od_id} grid")
        return grid[index]

    def slot_time(self, od_id: str, index: int) -> int:
        return self.slot(od_id, index).time

    def slot_index(self, od_id: str, minutes: int) -> int:
        """Index of the slot departing at ``minutes`` on ``od_id``."""
        for slot in self.grid(od_id):
            if slot.time == minutes:
                return slot.index
        raise UnknownSlotError(f"No {od_id} slot departs at {format_hhmm(minutes)}")

    def undertaking(self, undertaking_id: str) -> Undertaking:
        for u in self.undertakings:
            if u.id == undertaking_id:
                return u
        raise UnknownUndertakingError(
            f"Undertaking '{undertaking_id}' not found. "
            f"Known undertakings: {', '.join(self.undertaking_ids)}"
        )

    def capacity_limit(self, undertaking_id: str, od_id: str) -> int:
        """Maximum number of slots an undertaking may request on one OD pair."""
        share = self.undertaking(undertaking_id).capacity_share
        return math.floor(share * len(self.grid(od_id)) + 1e-9)


@dataclass(frozen=True)
class Bid:
    """Requested slots of one undertaking, per OD pair, as sorted indices."""
    undertaking: str
    requested: Mapping[str, Tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def from_slots(cls, undertaking: str, requested: Mapping[str, Iterable[int]]) -> 'Bid':
        """Build a bid, sorting indices and dropping empty OD entries."""
        normalized = {od: tuple(sorted(idx)) for od, idx in requested.items()}
        return cls(undertaking, {od: idx for od, idx in normalized.items() if idx})

    def slots(self, od_id: str) -> Tuple[int, ...]:
        return tuple(self.requested.get(od_id, ()))

    def count(self, od_id: Optional[str] = None) -> int:
        if od_id is not None:
            return len(self.slots(od_id))
        return sum(len(v) for v in self.requested.values())

    def keys(self) -> Iterator[SlotKey]:
        for od_id, indices in self.requested.items():
            for index in indices:
                yield (od_id, index)

    def without(self, od_id: str, index: int) -> 'Bid':
        """Copy of the bid with one requested slot removed."""
        remaining = list(self.slots(od_id))
        remaining.remove(index)
        requested = dict(self.requested)
        requested[od_id] = tuple(remaining)
        return Bid.from_slots(self.undertaking, requested)


@dataclass(frozen=True)
class Allocation:
    """Assigned slots: undertaking -> OD pair -> sorted slot indices."""
    assigned: Mapping[str, Mapping[str, Tuple[int, ...]]] = field(default_factory=dict)

    def slots(self, undertaking_id: str, od_id: str) -> Tuple[int, ...]:
        return tuple(self.assigned.get(undertaking_id, {}).get(od_id, ()))

    def count(self, undertaking_id: str, od_id: Optional[str] = None) -> int:
        per_od = self.assigned.get(undertaking_id, {})
        if od_id is not None:
            return len(per_od.get(od_id, ()))
        return sum(len(v) for v in per_od.values())

    def owners(self, od_id: str) -> Dict[int, List[str]]:
        """Slot index -> undertakings holding it (more than one means a conflict)."""
        owners: Dict[int, List[str]] = {}
        for undertaking_id, per_od in self.assigned.items():
            for index in per_od.get(od_id, ()):
                owners.setdefault(index, []).append(undertaking_id)
        return owners

    def owner_of(self, od_id: str, index: int) -> Optional[str]:
        holders = self.owners(od_id).get(index)
        return holders[0] if holders else None


@dataclass(frozen=True)
class Move:
    """One re-timing decision: requested slot -> allocated slot on the same OD pair."""
    undertaking: str
    od_pair: str
    requested: int
    allocated: int
    deviation: int


@dataclass(frozen=True)
class RetimingMap:
    """
    Links every requested slot to its allocated slot.

    ``total_deviation`` holds D_o in minutes for every undertaking the map was
    built for, including undertakings with no moves.
    """
    moves: Tuple[Move, ...]
    total_deviation: Mapping[str, int]

    @classmethod
    def build(
        cls,
        scenario: Scenario,
        pairs: Iterable[Tuple[str, str, int, int]],
        undertakings: Optional[Iterable[str]] = None,
    ) -> 'RetimingMap':
        """
        Create a map from (undertaking, od, requested, allocated) tuples.

        Deviations are derived from the scenario grid. Moves are stored in
        scenario order (undertaking declaration, OD declaration, requested
        index).
        """
        u_rank = {u: i for i, u in enumerate(scenario.undertaking_ids)}
        od_rank = {od: i for i, od in enumerate(scenario.od_ids)}
        moves = [
            Move(o, od, r, a, abs(scenario.slot_time(od, r) - scenario.slot_time(od, a)))
            for o, od, r, a in pairs
        ]
        moves.sort(key=lambda m: (u_rank.get(m.undertaking, len(u_rank)), m.undertaking,
                                  od_rank.get(m.od_pair, len(od_rank)), m.requested))
        names = list(undertakings) if undertakings is not None else []
        totals: Dict[str, int] = {o: 0 for o in names}
        for move in moves:
            totals[move.undertaking] = totals.get(move.undertaking, 0) + move.deviation
        return cls(tuple(moves), totals)

    @property
    def per_slot_deviation(self) -> Dict[Tuple[str, str, int], int]:
        """(undertaking, od, requested index) -> minutes."""
        return {(m.undertaking, m.od_pair, m.requested): m.deviation for m in self.moves}

    @property
    def total(self) -> int:
        return sum(self.total_deviation.values())

    def to_allocation(self) -> Allocation:
        assigned: Dict[str, Dict[str, List[int]]] = {}
        for o in self.total_deviation:
            assigned.setdefault(o, {})
        for move in self.moves:
            assigned.setdefault(move.undertaking, {}).setdefault(move.od_pair, []).append(move.allocated)
        return Allocation({
            o: {od: tuple(sorted(idx)) for od, idx in per_od.items()}
            for o, per_od in assigned.items()
        })


@dataclass(frozen=True)
class Violation:
    """A broken validation rule, reported as data."""
    field: str
    rule: str
    detail: str = ""

    def __str__(self):
        text = f"{self.field}: {self.rule}"
        return f"{text} ({self.detail})" if self.detail else text
