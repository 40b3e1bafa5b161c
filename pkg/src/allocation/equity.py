"""
Equity-rule allocators.

The heuristic serves one request at a time, always to the undertaking that
holds the fewest slots relative to its capacity share. The exact allocator
minimizes total deviation while every bidder's capacity-normalized deviation
stays within ``epsilon`` of the mean:

    Δ - ε ≤ D_o / (k_o · n_y) ≤ Δ + ε,    Δ = Σ_o D_o / n_y

with ``n_y`` the total number of requested slots. It runs depth-first branch
and bound over the assignment variables with LP relaxations solved by HiGHS.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from src.allocation.priority import OrderLike, index_bids
from src.allocation.results import AllocationResult, EquityParams, Method, PriorityOrder, Rule
from src.allocation.retiming import TieBreak, nearest_available_slot
from src.exceptions import BudgetExceededError, InfeasibleAllocationError
from src.model.types import Bid, RetimingMap, Scenario

LOG = logging.getLogger(__name__)

# Slack on the band, in normalized minutes, shared with the enumeration oracle.
BAND_TOLERANCE = 1e-9
_INTEGRALITY = 1e-6


def allocate_equity_heuristic(
    scenario: Scenario,
    bids: Sequence[Bid],
    order: OrderLike = None,
    tie_break: TieBreak = TieBreak.EARLIER,
) -> AllocationResult:
    """
    Greedy equity allocation.

    Each iteration serves the pending undertaking with the lowest ratio
    φ_o = (slots held) / k_o. Ties go to the earlier undertaking in ``order``
    (declaration order when omitted). The served request is the
    undertaking's earliest unprocessed one (OD pairs in declaration order,
    then ascending time); it is granted if free, otherwise re-timed to the
    nearest free slot.

    Raises:
        NoFreeSlotError: If a grid runs out of slots while re-timing
    """
    by_undertaking = index_bids(scenario, bids)
    ranking = PriorityOrder.resolve(scenario, order).undertakings
    rank = {o: i for i, o in enumerate(ranking)}
    share = {u.id: u.capacity_share for u in scenario.undertakings}

    pending: Dict[str, Deque[Tuple[str, int]]] = {
        o: deque((od_id, r) for od_id in scenario.od_ids for r in by_undertaking[o].slots(od_id))
        for o in ranking if o in by_undertaking
    }
    held = {o: 0 for o in pending}
    occupied = {od_id: set() for od_id in scenario.od_ids}
    pairs: List[Tuple[str, str, int, int]] = []

    n_y = sum(len(queue) for queue in pending.values())
    for _ in range(n_y):
        phi = {o: held[o] / share[o] for o, queue in pending.items() if queue}
        o = min(phi, key=lambda name: (phi[name], rank[name]))
        od_id, r = pending[o].popleft()
        grid = scenario.grid(od_id)
        allocated = r
        if r in occupied[od_id]:
            allocated = nearest_available_slot(grid[r], occupied[od_id], grid, tie_break).index
            LOG.debug("%s %s: %s taken, re-timed to %s", o, od_id, grid[r], grid[allocated])
        occupied[od_id].add(allocated)
        held[o] += 1
        pairs.append((o, od_id, r, allocated))

    retiming = RetimingMap.build(scenario, pairs, scenario.undertaking_ids)
    LOG.info("equity heuristic: total deviation %d min", retiming.total)
    return AllocationResult(retiming.to_allocation(), retiming, Rule.EQUITY, Method.HEURISTIC,
                            tie_break=TieBreak(tie_break))


def equity_band(scenario: Scenario, bids: Sequence[Bid],
                total_deviation: Dict[str, int]) -> Tuple[float, Dict[str, float]]:
    """
    Mean deviation Δ and the normalized deviation D_o / (k_o · n_y) of every bidder.

    Undertakings without requests are left out; they are not bound by the band.
    """
    n_y = sum(b.count() for b in bids)
    if n_y == 0:
        return 0.0, {}
    delta = sum(total_deviation.get(b.undertaking, 0) for b in bids) / n_y
    normalized = {
        b.undertaking: total_deviation.get(b.undertaking, 0)
        / (scenario.undertaking(b.undertaking).capacity_share * n_y)
        for b in bids if b.count() > 0
    }
    return delta, normalized


def within_band(delta: float, normalized: Dict[str, float], epsilon: float) -> bool:
    return all(abs(value - delta) <= epsilon + BAND_TOLERANCE for value in normalized.values())


@dataclass
class _Node:
    lower: np.ndarray
    upper: np.ndarray
    depth: int = 0


def _content_key(scenario: Scenario, bid: Bid) -> Tuple:
    return (scenario.undertaking(bid.undertaking).capacity_share,
            tuple(bid.slots(od_id) for od_id in scenario.od_ids),
            bid.undertaking)


class _EquityProgram:
    """
    The equity allocation as a 0-1 program over move variables.

    One variable per (request, candidate slot on the same grid), with cost
    ``deviation / grid_step * scale + rank`` where ``rank`` orders candidate slots by the
    tie direction and ``scale`` exceeds any rank sum. Rows:

    * one equality per request (each request moves exactly once)
    * one ``≤ 1`` row per grid slot (single occupancy)
    * two band rows per bidder, ``± (D_o / k_o - Σ D) ≤ n_y · ε``

    Bidders enter the program ordered by share and requested slots, so the
    rank tie-break never depends on declaration order. Only bids with equal
    share and identical requests fall back to the undertaking name.
    """

    def __init__(self, scenario: Scenario, bids: Sequence[Bid], tie_break: TieBreak):
        self.scenario = scenario
        bidders = sorted((b for b in bids if b.count() > 0), key=lambda b: _content_key(scenario, b))
        self.requests = [(b.undertaking, od_id, r)
                         for b in bidders for od_id in scenario.od_ids for r in b.slots(od_id)]
        self.n_y = len(self.requests)
        self.bidders = [b.undertaking for b in bidders]

        later = TieBreak(tie_break) is TieBreak.LATER
        variables, deviation, rank = [], [], []
        for q, (_, od_id, r) in enumerate(self.requests):
            grid = scenario.grid(od_id)
            for slot in grid:
                variables.append((q, od_id, slot.index))
                deviation.append(abs(grid[r].time - slot.time))
                rank.append(len(grid) - 1 - slot.index if later else slot.index)
        self.variables = variables
        self.deviation = np.array(deviation, dtype=float)
        scale = 1 + sum(len(scenario.grid(od)) for _, od, _ in self.requests)
        self.cost = self.deviation / scenario.grid_step * scale + np.array(rank, dtype=float)

        n = len(variables)
        self.a_eq = np.zeros((self.n_y, n))
        for v, (q, _, _) in enumerate(variables):
            self.a_eq[q, v] = 1.0
        self.b_eq = np.ones(self.n_y)

        slot_rows = sorted({(od_id, a) for _, od_id, a in variables})
        row_of = {key: i for i, key in enumerate(slot_rows)}
        self.a_slot = np.zeros((len(slot_rows), n))
        for v, (_, od_id, a) in enumerate(variables):
            self.a_slot[row_of[(od_id, a)], v] = 1.0

        # g_o · x = D_o / k_o - Σ_o' D_o'
        self.band = np.zeros((len(self.bidders), n))
        owner = np.array([self.bidders.index(self.requests[q][0]) for q, _, _ in variables])
        for i, o in enumerate(self.bidders):
            share = scenario.undertaking(o).capacity_share
            self.band[i] = self.deviation * ((owner == i) / share - 1.0)

    def _constraints(self, epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
        rhs = self.n_y * (epsilon + BAND_TOLERANCE)
        a_ub = np.vstack([self.a_slot, self.band, -self.band])
        b_ub = np.concatenate([np.ones(len(self.a_slot)), np.full(2 * len(self.bidders), rhs)])
        return a_ub, b_ub

    def min_epsilon(self) -> float:
        """Smallest ε for which the LP relaxation is feasible (a lower bound for the 0-1 program)."""
        n = len(self.variables)
        cost = np.zeros(n + 1)
        cost[-1] = 1.0
        eps_column = np.full((2 * len(self.bidders), 1), -float(self.n_y))
        a_ub = np.vstack([
            np.hstack([self.a_slot, np.zeros((len(self.a_slot), 1))]),
            np.hstack([np.vstack([self.band, -self.band]), eps_column]),
        ])
        b_ub = np.concatenate([np.ones(len(self.a_slot)), np.zeros(2 * len(self.bidders))])
        a_eq = np.hstack([self.a_eq, np.zeros((self.n_y, 1))])
        bounds = [(0.0, 1.0)] * n + [(0.0, None)]
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=self.b_eq,
                      bounds=bounds, method="highs")
        if res.status != 0:
            raise InfeasibleAllocationError(f"equity relaxation failed: {res.message}")
        return max(0.0, float(res.x[-1]))

    def epsilon_cap(self) -> float:
        """An ε at which the band can no longer bind."""
        span = max(g[-1].time - g[0].time for g in (self.scenario.grid(od) for _, od, _ in self.requests))
        ratios = [
            sum(1 for o, _, _ in self.requests if o == bidder)
            / (self.scenario.undertaking(bidder).capacity_share * self.n_y)
            for bidder in self.bidders
        ]
        return span * max([1.0] + ratios)

    def band_holds(self, x: np.ndarray, epsilon: float) -> bool:
        totals = self.totals(x)
        delta = sum(totals.values()) / self.n_y
        normalized = {o: totals[o] / (self.scenario.undertaking(o).capacity_share * self.n_y)
                      for o in self.bidders}
        return within_band(delta, normalized, epsilon)

    def totals(self, x: np.ndarray) -> Dict[str, int]:
        totals = {o: 0 for o in self.bidders}
        for v in np.flatnonzero(x > 0.5):
            totals[self.requests[self.variables[v][0]][0]] += int(self.deviation[v])
        return totals

    def pairs(self, x: np.ndarray) -> List[Tuple[str, str, int, int]]:
        pairs = []
        for v in np.flatnonzero(x > 0.5):
            q, od_id, a = self.variables[v]
            o, _, r = self.requests[q]
            pairs.append((o, od_id, r, a))
        return pairs

    def branch_and_bound(self, epsilon: float, max_nodes: int) -> Optional[np.ndarray]:
        """
        Depth-first branch and bound at a fixed ε.

        Branches on the most fractional variable, exploring ``x = 1`` first.
        Costs are integers, so a node whose bound is within 0.5 of the
        incumbent cannot improve on it.

        Returns:
            Optimal 0-1 vector, or None when the band is infeasible at ``epsilon``

        Raises:
            BudgetExceededError: If more than ``max_nodes`` nodes are evaluated
        """
        a_ub, b_ub = self._constraints(epsilon)
        n = len(self.variables)
        stack = [_Node(np.zeros(n), np.ones(n))]
        incumbent: Optional[np.ndarray] = None
        best = math.inf
        evaluated = 0

        while stack:
            node = stack.pop()
            evaluated += 1
            if evaluated > max_nodes:
                raise BudgetExceededError(
                    f"equity branch and bound evaluated {max_nodes} nodes at ε={epsilon:.6g} "
                    "without closing the search"
                )
            res = linprog(self.cost, A_ub=a_ub, b_ub=b_ub, A_eq=self.a_eq, b_eq=self.b_eq,
                          bounds=np.column_stack([node.lower, node.upper]), method="highs")
            if res.status != 0 or res.fun >= best - 0.5:
                continue

            x = res.x
            gap = np.abs(x - np.round(x))
            if gap.max() <= _INTEGRALITY:
                candidate = np.round(x)
                if self.band_holds(candidate, epsilon):
                    incumbent, best = candidate, float(self.cost @ candidate)
                    LOG.debug("new incumbent %.0f at depth %d (node %d)", best, node.depth, evaluated)
                continue

            j = int(np.argmax(gap))
            zero = _Node(node.lower.copy(), node.upper.copy(), node.depth + 1)
            zero.upper[j] = 0.0
            one = _Node(node.lower.copy(), node.upper.copy(), node.depth + 1)
            one.lower[j] = 1.0
            stack.append(zero)
            stack.append(one)

        LOG.debug("branch and bound at ε=%.6g: %d node(s), %s", epsilon, evaluated,
                  "solved" if incumbent is not None else "infeasible")
        return incumbent


def allocate_equity_exact(
    scenario: Scenario,
    bids: Sequence[Bid],
    params: Optional[EquityParams] = None,
    tie_break: TieBreak = TieBreak.EARLIER,
) -> AllocationResult:
    """
    Minimum total deviation subject to the equity band.

    Starts at ``params.epsilon`` and widens the band by the search step until
    the 0-1 program becomes feasible. Steps whose LP relaxation is already
    infeasible are skipped. The final band is reported as ``epsilon_used``.

    Args:
        scenario: Allocation instance
        bids: One bid per participating undertaking
        params: Band settings (``EquityParams()`` when omitted)
        tie_break: Preferred direction among equal-deviation optima

    Returns:
        AllocationResult with rule ``equity`` and method ``exact``

    Raises:
        InfeasibleAllocationError: If some OD pair has more requests than slots
        BudgetExceededError: If the branch and bound node limit is reached
    """
    params = params or EquityParams()
    index_bids(scenario, bids)

    n_y = sum(b.count() for b in bids)
    if n_y == 0:
        retiming = RetimingMap.build(scenario, [], scenario.undertaking_ids)
        return AllocationResult(retiming.to_allocation(), retiming, Rule.EQUITY, Method.EXACT,
                                epsilon_used=params.epsilon, tie_break=TieBreak(tie_break))

    for od_id in scenario.od_ids:
        requested = sum(b.count(od_id) for b in bids)
        if requested > len(scenario.grid(od_id)):
            raise InfeasibleAllocationError(
                f"{od_id}: {requested} requested slot(s) exceed the {len(scenario.grid(od_id))} on the grid"
            )

    program = _EquityProgram(scenario, bids, tie_break)
    step = params.epsilon_search_step or scenario.grid_step / n_y
    lower_bound = program.min_epsilon()
    k = max(0, math.ceil((lower_bound - params.epsilon) / step - 1e-6))
    cap = program.epsilon_cap() + step
    LOG.info("equity exact: n_y=%d, LP band bound %.6g, starting at ε=%.6g (step %.6g)",
             n_y, lower_bound, params.epsilon + k * step, step)

    while params.epsilon + k * step <= cap + step:
        epsilon = params.epsilon + k * step
        x = program.branch_and_bound(epsilon, params.max_nodes)
        if x is not None:
            retiming = RetimingMap.build(scenario, program.pairs(x), scenario.undertaking_ids)
            LOG.info("equity exact: total deviation %d min at ε=%.6g", retiming.total, epsilon)
            return AllocationResult(retiming.to_allocation(), retiming, Rule.EQUITY, Method.EXACT,
                                    epsilon_used=epsilon, tie_break=TieBreak(tie_break))
        LOG.debug("equity exact: infeasible at ε=%.6g, widening", epsilon)
        k += 1

    raise InfeasibleAllocationError("equity band stayed infeasible up to its vacuous width")
