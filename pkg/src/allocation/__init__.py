"""
Allocation of requested slots under the priority and equity rules.
"""

from typing import Optional, Sequence, Union

from src.allocation.equity import allocate_equity_exact, allocate_equity_heuristic, equity_band
from src.allocation.pareto import ParetoSet, pareto_bruteforce
from src.allocation.priority import allocate_priority_exact, allocate_priority_heuristic
from src.allocation.results import (
    AllocationResult,
    EquityParams,
    Method,
    PriorityOrder,
    Rule,
)
from src.allocation.retiming import TieBreak, compute_deviation, match_retiming, nearest_available_slot
from src.allocation.symmetry import swap_symmetry_report
from src.model.types import Bid, Scenario


def allocate(
    scenario: Scenario,
    bids: Sequence[Bid],
    rule: Union[Rule, str],
    method: Union[Method, str],
    order: Optional[Union[PriorityOrder, Sequence[str]]] = None,
    params: Optional[EquityParams] = None,
    tie_break: Union[TieBreak, str] = TieBreak.EARLIER,
    lookahead: bool = False,
) -> AllocationResult:
    """
    Run the allocator selected by ``rule`` and ``method``.

    ``order`` applies to the priority rule and to tie-breaking in the equity
    heuristic; ``params`` applies to the exact equity allocator and
    ``lookahead`` to the exact priority allocator.
    """
    rule, method, tie_break = Rule(rule), Method(method), TieBreak(tie_break)
    if rule is Rule.PRIORITY:
        if method is Method.HEURISTIC:
            return allocate_priority_heuristic(scenario, bids, order, tie_break)
        return allocate_priority_exact(scenario, bids, order, tie_break, lookahead)
    if method is Method.HEURISTIC:
        return allocate_equity_heuristic(scenario, bids, order, tie_break)
    return allocate_equity_exact(scenario, bids, params, tie_break)


__all__ = [
    "AllocationResult",
    "EquityParams",
    "Method",
    "ParetoSet",
    "PriorityOrder",
    "Rule",
    "TieBreak",
    "allocate",
    "allocate_equity_exact",
    "allocate_equity_heuristic",
    "allocate_priority_exact",
    "allocate_priority_heuristic",
    "compute_deviation",
    "equity_band",
    "match_retiming",
    "nearest_available_slot",
    "pareto_bruteforce",
    "swap_symmetry_report",
]
