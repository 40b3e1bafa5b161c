"""Domain types, validation and file I/O shared by every other module."""

from src.model.types import (
    Allocation,
    Bid,
    Move,
    ODPair,
    RetimingMap,
    Scenario,
    SlotKey,
    TimeSlot,
    Undertaking,
    Violation,
    format_duration,
    format_hhmm,
    parse_hhmm,
)
from src.model.validation import (
    check_allocation,
    validate_bid,
    validate_bids,
    validate_scenario,
)

__all__ = [
    "Allocation",
    "Bid",
    "Move",
    "ODPair",
    "RetimingMap",
    "Scenario",
    "SlotKey",
    "TimeSlot",
    "Undertaking",
    "Violation",
    "check_allocation",
    "format_duration",
    "format_hhmm",
    "parse_hhmm",
    "validate_bid",
    "validate_bids",
    "validate_scenario",
]
