"""
Invariant and oracle checks runnable without pytest (``tsa selftest``).

Each check draws seeded random instances, runs the library and compares
against an independent recomputation or a brute-force oracle.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from src.allocation import EquityParams, allocate_equity_exact, allocate_equity_heuristic
from src.allocation import allocate_priority_exact, allocate_priority_heuristic, pareto_bruteforce
from src.allocation import swap_symmetry_report
from src.allocation.oracles import (
    equity_band_front,
    equity_enumeration_minimum,
    priority_permutation_minimum,
)
from src.economics.fleet import Trip, min_fleet_bruteforce, min_fleet_for_trips
from src.economics.payoff import payoff
from src.equilibrium.game import GameTensor
from src.equilibrium.solver import SolverConfig, solve_equilibrium, verify_equilibrium
from src.model.generators import random_bids, random_scenario
from src.model.validation import check_allocation

LOG = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    runs: int = 0
    failures: int = 0
    details: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def fail(self, detail: str) -> None:
        self.failures += 1
        if len(self.details) < 5:
            self.details.append(detail)


def check_allocator_invariants(rng: np.random.Generator, rounds: int) -> CheckResult:
    check = CheckResult("allocator invariants")
    allocators = [
        allocate_priority_heuristic,
        allocate_priority_exact,
        allocate_equity_heuristic,
        lambda s, b: allocate_equity_exact(s, b, EquityParams()),
    ]
    for _ in range(rounds):
        scenario = random_scenario(rng, n_undertakings=int(rng.integers(2, 4)), n_slots=int(rng.integers(3, 7)))
        bids = random_bids(rng, scenario)
        for allocator in allocators:
            check.runs += 1
            result = allocator(scenario, bids)
            for violation in check_allocation(scenario, bids, result.allocation, result.retiming):
                check.fail(f"{result.label}: {violation}")
            if result.epsilon_used is not None and not _band_holds(scenario, bids, result):
                check.fail(f"{result.label}: equity band broken at ε={result.epsilon_used}")
    return check


def _band_holds(scenario, bids, result) -> bool:
    n_y = sum(b.count() for b in bids)
    if n_y == 0:
        return True
    totals = {}
    for move in result.retiming.moves:
        totals[move.undertaking] = totals.get(move.undertaking, 0) + move.deviation
    delta = sum(totals.values()) / n_y
    for bid in bids:
        if bid.count() == 0:
            continue
        share = scenario.undertaking(bid.undertaking).capacity_share
        value = totals.get(bid.undertaking, 0) / (share * n_y)
        if abs(value - delta) > result.epsilon_used + 1e-9:
            return False
    return True


def check_priority_oracle(rng: np.random.Generator, rounds: int) -> CheckResult:
    check = CheckResult("exact priority vs permutations")
    for _ in range(rounds):
        scenario = random_scenario(rng, n_undertakings=2, n_od=1, n_slots=int(rng.integers(3, 7)))
        bids = random_bids(rng, scenario)
        result = allocate_priority_exact(scenario, bids)
        occupied = set()
        for bid in bids:
            check.runs += 1
            expected = priority_permutation_minimum(scenario, "w1", bid.slots("w1"), occupied)
            if expected != result.total_deviation[bid.undertaking]:
                check.fail(f"{bid.undertaking}: {result.total_deviation[bid.undertaking]} != {expected}")
            occupied |= set(result.allocation.slots(bid.undertaking, "w1"))
    return check


def check_equity_oracle(rng: np.random.Generator, rounds: int) -> CheckResult:
    check = CheckResult("exact equity vs enumeration")
    for _ in range(rounds):
        scenario = random_scenario(rng, n_undertakings=2, n_od=1, n_slots=int(rng.integers(3, 7)))
        bids = random_bids(rng, scenario, max_total=6)
        result = allocate_equity_exact(scenario, bids)
        check.runs += 1
        expected = equity_enumeration_minimum(scenario, bids, result.epsilon_used)
        if expected != result.total:
            check.fail(f"total {result.total} != enumerated {expected} at ε={result.epsilon_used}")
    return check


def check_pareto_membership(rng: np.random.Generator, rounds: int) -> CheckResult:
    check = CheckResult("exact allocators are non-dominated")
    for _ in range(rounds):
        scenario = random_scenario(rng, n_undertakings=int(rng.integers(2, 4)), n_od=1, n_slots=6)
        bids = random_bids(rng, scenario, max_total=6)

        check.runs += 1
        result = allocate_priority_exact(scenario, bids, lookahead=True)
        vector = tuple(result.total_deviation[b.undertaking] for b in bids)
        if pareto_bruteforce(scenario, bids).is_dominated(vector):
            check.fail(f"{result.label} (lookahead): {vector} is dominated")

        check.runs += 1
        result = allocate_equity_exact(scenario, bids)
        vector = tuple(result.total_deviation[b.undertaking] for b in bids)
        if equity_band_front(scenario, bids, result.epsilon_used).is_dominated(vector):
            check.fail(f"{result.label}: {vector} is dominated inside the band ε={result.epsilon_used}")
    return check


def check_swap_symmetry(rng: np.random.Generator, rounds: int) -> CheckResult:
    check = CheckResult("exact equity swap symmetry")
    for _ in range(rounds):
        scenario = random_scenario(rng, n_undertakings=2, n_od=1, n_slots=int(rng.integers(3, 7)))
        bids = random_bids(rng, scenario, max_total=6)
        if bids[0].requested == bids[1].requested:
            continue
        check.runs += 1
        report = swap_symmetry_report(scenario, bids, "RU1", "RU2", allocate_equity_exact)
        if not report.values_swapped:
            check.fail(f"D={report.original} stays {report.swapped} after swapping")
    return check


def check_fleet_oracle(rng: np.random.Generator, rounds: int) -> CheckResult:
    check = CheckResult("min fleet vs chain partitions")
    for _ in range(rounds):
        n = int(rng.integers(1, 9))
        trips = []
        for _ in range(n):
            outbound = bool(rng.integers(0, 2))
            trips.append(Trip("w1" if outbound else "w2", int(rng.integers(0, 48)) * 30,
                              "A" if outbound else "B", "B" if outbound else "A"))
        check.runs += 1
        fast = min_fleet_for_trips(trips, 150, 30)
        slow = min_fleet_bruteforce(trips, 150, 30)
        if fast != slow:
            check.fail(f"{len(trips)} trips: matching {fast} != brute force {slow}")
    return check


def check_payoff_identity(rng: np.random.Generator, rounds: int) -> CheckResult:
    check = CheckResult("payoff identity")
    for _ in range(rounds):
        scenario = random_scenario(rng)
        bids = random_bids(rng, scenario)
        allocation = allocate_priority_heuristic(scenario, bids).allocation
        for o in scenario.undertaking_ids:
            check.runs += 1
            b = payoff(scenario, allocation, o)
            u = scenario.undertaking(o)
            expected = (
                sum(scenario.demand[(od, i)] * scenario.fare[(od, i)]
                    for od in scenario.od_ids for i in allocation.slots(o, od))
                - u.per_slot_operating_cost * allocation.count(o)
                - u.daily_rolling_stock_cost * b.fleet_size
                - u.fixed_access_cost
            )
            if b.profit != expected:
                check.fail(f"{o}: {b.profit} != {expected}")
    return check


def check_equilibrium_certificates(rng: np.random.Generator, rounds: int) -> CheckResult:
    check = CheckResult("equilibrium certificates")
    config = SolverConfig(tolerance=1e-6)
    for _ in range(rounds):
        tensor = GameTensor(("P1", "P2", "P3"), rng.random((2, 2, 2, 3)))
        check.runs += 1
        result = solve_equilibrium(tensor, config)
        certificate = verify_equilibrium(tensor, result.profile, config.tolerance)
        if not certificate.passed:
            check.fail(f"ε={certificate.epsilon:.3g}")
    return check


CHECKS: List[Callable[[np.random.Generator, int], CheckResult]] = [
    check_allocator_invariants,
    check_priority_oracle,
    check_equity_oracle,
    check_pareto_membership,
    check_swap_symmetry,
    check_fleet_oracle,
    check_payoff_identity,
    check_equilibrium_certificates,
]


def run_selftest(seed: int = 0, rounds: int = 20,
                 progress: Optional[Callable[[str], None]] = None) -> List[CheckResult]:
    """
    Run every check with a seeded generator.

    Args:
        seed: Seed for the random instances
        rounds: Instances per check
        progress: Called with each check name before it runs
    """
    rng = np.random.default_rng(seed)
    results = []
    for check in CHECKS:
        name = check.__name__.replace("check_", "").replace("_", " ")
        if progress:
            progress(name)
        result = check(rng, rounds)
        LOG.info("%s: %d run(s), %d failure(s)", result.name, result.runs, result.failures)
        results.append(result)
    return results
