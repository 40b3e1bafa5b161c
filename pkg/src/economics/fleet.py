"""
Minimum rolling-stock fleet for an undertaking's allocated slots.

A unit that departs at ``t`` can depart again from the arrival terminus no
earlier than ``t + trip_duration + turnaround``. Units start unpositioned.
The minimum fleet is the minimum path cover of the chaining graph: trips
minus a maximum bipartite matching between "ends before" and "starts after".
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import networkx as nx

from src.model.types import Allocation, Scenario

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trip:
    od_pair: str
    departure: int
    origin: str
    destination: str


def trips_for(scenario: Scenario, allocation: Allocation, undertaking: str) -> List[Trip]:
    """Trips operated by ``undertaking``, ordered by departure."""
    trips = []
    for od in scenario.od_pairs:
        for index in allocation.slots(undertaking, od.id):
            trips.append(Trip(od.id, scenario.slot_time(od.id, index), od.origin, od.destination))
    return sorted(trips, key=lambda t: (t.departure, t.od_pair))


def can_chain(first: Trip, second: Trip, trip_duration: int, turnaround: int) -> bool:
    return (second.origin == first.destination
            and second.departure >= first.departure + trip_duration + turnaround)


def min_fleet_for_trips(trips: Sequence[Trip], trip_duration: int, turnaround: int) -> int:
    """
    Minimum number of units covering ``trips``.

    Example:
        >>> out = Trip("w1", 420, "Madrid", "Barcelona")
        >>> back = Trip("w2", 630, "Barcelona", "Madrid")
        >>> min_fleet_for_trips([out, back], 150, 30)
        1
    """
    if not trips:
        return 0
    graph = nx.Graph()
    tails = [("end", i) for i in range(len(trips))]
    graph.add_nodes_from(tails, bipartite=0)
    graph.add_nodes_from((("start", j) for j in range(len(trips))), bipartite=1)
    for i, first in enumerate(trips):
        for j, second in enumerate(trips):
            if i != j and can_chain(first, second, trip_duration, turnaround):
                graph.add_edge(("end", i), ("start", j))
    matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=tails)
    chained = sum(1 for node in matching if node[0] == "end")
    return len(trips) - chained


def min_fleet(scenario: Scenario, allocation: Allocation, undertaking: str) -> int:
    """Minimum fleet n_T for an undertaking's allocated slots (0 when it holds none)."""
    fleet = min_fleet_for_trips(trips_for(scenario, allocation, undertaking),
                                scenario.trip_duration, scenario.turnaround)
    LOG.debug("%s: fleet %d", undertaking, fleet)
    return fleet


def min_fleet_bruteforce(trips: Sequence[Trip], trip_duration: int, turnaround: int) -> int:
    """
    Minimum fleet by enumerating every partition of the trips into chains.

    Trips are placed in departure order, each either appended to a chain it
    can follow or opening a new chain.
    """
    ordered = sorted(trips, key=lambda t: (t.departure, t.od_pair))
    best = len(ordered)

    def place(position: int, chains: List[List[Trip]]) -> None:
        nonlocal best
        if len(chains) >= best:
            return
        if position == len(ordered):
            best = len(chains)
            return
        trip = ordered[position]
        for chain in chains:
            if can_chain(chain[-1], trip, trip_duration, turnaround):
                chain.append(trip)
                place(position + 1, chains)
                chain.pop()
        chains.append([trip])
        place(position + 1, chains)
        chains.pop()

    if ordered:
        place(0, [])
    return best


def max_concurrent_trips(trips: Sequence[Trip], trip_duration: int, turnaround: int) -> int:
    """
    Largest number of trips whose busy windows ``[t, t + trip + turnaround)`` overlap.

    No two such trips can share a unit, so this is a lower bound on the fleet.
    """
    events = []
    for trip in trips:
        events.append((trip.departure, 1))
        events.append((trip.departure + trip_duration + turnaround, -1))
    busy = peak = 0
    for _, change in sorted(events):
        busy += change
        peak = max(peak, busy)
    return peak
