"""Revenue, fleet size and payoff of allocations."""

from src.economics.fleet import Trip, max_concurrent_trips, min_fleet, min_fleet_bruteforce, trips_for
from src.economics.payoff import (
    PayoffBreakdown,
    WeightedBreakdown,
    payoff,
    payoffs,
    slot_revenue,
    ticket_revenue,
    weighted_breakdowns,
)

__all__ = [
    "PayoffBreakdown",
    "Trip",
    "WeightedBreakdown",
    "max_concurrent_trips",
    "min_fleet",
    "min_fleet_bruteforce",
    "payoff",
    "payoffs",
    "slot_revenue",
    "ticket_revenue",
    "trips_for",
    "weighted_breakdowns",
]
