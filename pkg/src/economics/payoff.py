"""
Revenue, cost and profit of an undertaking under an allocation.

Profit follows

    F_o = J_o - Σ_r f_or · x_or - C_o · n_T - c_a

where J_o is ticket revenue from the full demand of every held slot and n_T
is the minimum fleet. Amounts are integer cents.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple, Union

import pandas as pd

from src.economics.fleet import min_fleet
from src.exceptions import InputError
from src.model.io import write_csv
from src.model.types import Allocation, Scenario


def slot_revenue(scenario: Scenario, od_id: str, index: int) -> int:
    """
    Revenue of one slot: demand times fare.

    Raises:
        UnknownSlotError: If the slot is not on the scenario grid

    Example:
        >>> slot_revenue(scenario, "w1", 4)   # 300 passengers at 70 €
        2100000
    """
    scenario.slot(od_id, index)
    return scenario.demand[(od_id, index)] * scenario.fare[(od_id, index)]


def ticket_revenue(scenario: Scenario, allocation: Allocation, undertaking: str) -> int:
    """J_o: revenue over every slot held by ``undertaking``."""
    return sum(
        slot_revenue(scenario, od_id, index)
        for od_id in scenario.od_ids
        for index in allocation.slots(undertaking, od_id)
    )


@dataclass(frozen=True)
class PayoffBreakdown:
    """Per-undertaking payoff with every term of the profit identity."""
    undertaking: str
    ticket_revenue: int
    slots_operated: Mapping[str, int]
    passengers: Mapping[str, int]
    fleet_size: int
    operating_cost: int
    investment_cost: int
    fixed_cost: int
    profit: int

    @property
    def total_passengers(self) -> int:
        return sum(self.passengers.values())

    def recomputed_profit(self) -> int:
        return self.ticket_revenue - self.operating_cost - self.investment_cost - self.fixed_cost


def payoff(scenario: Scenario, allocation: Allocation, undertaking: str) -> PayoffBreakdown:
    """
    Compute F_o and its components.

    Args:
        scenario: Scenario with demand, fares and costs
        allocation: Conflict-free allocation
        undertaking: Undertaking to evaluate

    Returns:
        PayoffBreakdown in cents

    Raises:
        UnknownUndertakingError: If ``undertaking`` is not in the scenario
    """
    u = scenario.undertaking(undertaking)
    slots = {od_id: allocation.count(undertaking, od_id) for od_id in scenario.od_ids}
    passengers = {
        od_id: sum(scenario.demand[(od_id, i)] for i in allocation.slots(undertaking, od_id))
        for od_id in scenario.od_ids
    }
    revenue = ticket_revenue(scenario, allocation, undertaking)
    operating = sum(
        u.operating_cost(od_id, index)
        for od_id in scenario.od_ids
        for index in allocation.slots(undertaking, od_id)
    )
    fleet = min_fleet(scenario, allocation, undertaking)
    investment = u.daily_rolling_stock_cost * fleet
    fixed = u.fixed_access_cost
    return PayoffBreakdown(
        undertaking=undertaking,
        ticket_revenue=revenue,
        slots_operated=slots,
        passengers=passengers,
        fleet_size=fleet,
        operating_cost=operating,
        investment_cost=investment,
        fixed_cost=fixed,
        profit=revenue - operating - investment - fixed,
    )


def payoffs(scenario: Scenario, allocation: Allocation) -> Dict[str, PayoffBreakdown]:
    """Breakdowns for every undertaking of the scenario, in declaration order."""
    return {o: payoff(scenario, allocation, o) for o in scenario.undertaking_ids}


@dataclass(frozen=True)
class WeightedBreakdown:
    """Expected payoff terms over a distribution of pure outcomes (cents, may be fractional)."""
    undertaking: str
    ticket_revenue: float
    slots_operated: Mapping[str, float]
    passengers: Mapping[str, float]
    fleet_size: float
    operating_cost: float
    investment_cost: float
    fixed_cost: float
    profit: float

    @property
    def total_passengers(self) -> float:
        return sum(self.passengers.values())


def weighted_breakdowns(
    outcomes: Sequence[Tuple[float, Mapping[str, PayoffBreakdown]]],
) -> Dict[str, WeightedBreakdown]:
    """
    Probability-weighted average of per-outcome breakdowns.

    Args:
        outcomes: (probability, breakdowns by undertaking) for each pure joint strategy

    Raises:
        InputError: If probabilities are negative or do not sum to one
    """
    weights = [p for p, _ in outcomes]
    if any(p < 0 for p in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise InputError(f"outcome probabilities must be non-negative and sum to 1, got {sum(weights)}")

    merged: Dict[str, WeightedBreakdown] = {}
    names = [o for o in outcomes[0][1]] if outcomes else []
    for o in names:
        rows = [(p, table[o]) for p, table in outcomes]
        ods = list(rows[0][1].slots_operated)
        merged[o] = WeightedBreakdown(
            undertaking=o,
            ticket_revenue=sum(p * b.ticket_revenue for p, b in rows),
            slots_operated={od: sum(p * b.slots_operated[od] for p, b in rows) for od in ods},
            passengers={od: sum(p * b.passengers[od] for p, b in rows) for od in ods},
            fleet_size=sum(p * b.fleet_size for p, b in rows),
            operating_cost=sum(p * b.operating_cost for p, b in rows),
            investment_cost=sum(p * b.investment_cost for p, b in rows),
            fixed_cost=sum(p * b.fixed_cost for p, b in rows),
            profit=sum(p * b.profit for p, b in rows),
        )
    return merged


Breakdown = Union[PayoffBreakdown, WeightedBreakdown]


def payoff_frame(scenario: Scenario, breakdowns: Sequence[Breakdown]) -> pd.DataFrame:
    """
    Economic table: passengers and slots per OD pair, fleet and money in euros.

    ``revenue`` is the profit F_o.
    """
    rows = []
    for b in breakdowns:
        row: Dict[str, object] = {"RU": b.undertaking}
        for od_id in scenario.od_ids:
            row[f"{od_id} passengers"] = b.passengers[od_id]
            row[f"{od_id} slots"] = b.slots_operated[od_id]
        row["total passengers"] = b.total_passengers
        row["rolling stock"] = b.fleet_size
        row["ticket revenue"] = round(b.ticket_revenue / 100, 2)
        row["operating cost"] = round(b.operating_cost / 100, 2)
        row["investment cost"] = round(b.investment_cost / 100, 2)
        row["fixed cost"] = round(b.fixed_cost / 100, 2)
        row["revenue"] = round(b.profit / 100, 2)
        rows.append(row)
    return pd.DataFrame(rows)


def write_payoff_csv(path: Union[str, Path], scenario: Scenario,
                     breakdowns: Sequence[Breakdown]) -> Path:
    return write_csv(path, payoff_frame(scenario, breakdowns))
