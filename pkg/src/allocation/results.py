"""
Allocation results and their file formats.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from src.allocation.retiming import TieBreak, match_retiming
from src.exceptions import InputError, UnknownUndertakingError
from src.model.io import bid_from_schema, read_json, write_csv, write_json
from src.model.types import (
    Allocation,
    Bid,
    RetimingMap,
    Scenario,
    format_duration,
    format_hhmm,
    parse_hhmm,
)


class Rule(str, Enum):
    PRIORITY = "priority"
    EQUITY = "equity"


class Method(str, Enum):
    HEURISTIC = "heuristic"
    EXACT = "exact"


@dataclass(frozen=True)
class PriorityOrder:
    """Order in which undertakings are served under the priority rule."""
    undertakings: Tuple[str, ...]

    @classmethod
    def resolve(cls, scenario: Scenario,
                order: Optional[Union['PriorityOrder', Sequence[str]]] = None) -> 'PriorityOrder':
        """
        Validate ``order`` against the scenario, defaulting to declaration order.

        Raises:
            UnknownUndertakingError: If the order names an unknown undertaking
            InputError: If the order repeats or omits an undertaking
        """
        if order is None:
            return cls(tuple(scenario.undertaking_ids))
        names = tuple(order.undertakings if isinstance(order, PriorityOrder) else order)
        for name in names:
            scenario.undertaking(name)
        if len(set(names)) != len(names):
            raise InputError(f"priority order repeats an undertaking: {', '.join(names)}")
        missing = [u for u in scenario.undertaking_ids if u not in names]
        if missing:
            raise InputError(f"priority order is missing: {', '.join(missing)}")
        return cls(names)


@dataclass(frozen=True)
class EquityParams:
    """
    Equity band settings.

    ``epsilon_search_step`` defaults to one grid step divided by the number
    of requested slots when left as ``None``.
    """
    epsilon: float = 0.0
    epsilon_search_step: Optional[float] = None
    max_nodes: int = 200_000

    def __post_init__(self):
        if self.epsilon < 0:
            raise InputError(f"epsilon must be ≥ 0, got {self.epsilon}")
        if self.epsilon_search_step is not None and self.epsilon_search_step <= 0:
            raise InputError(f"epsilon search step must be > 0, got {self.epsilon_search_step}")
        if self.max_nodes <= 0:
            raise InputError("max_nodes must be positive")


@dataclass(frozen=True)
class AllocationResult:
    """Output of one allocator run."""
    allocation: Allocation
    retiming: RetimingMap
    rule: Rule
    method: Method
    epsilon_used: Optional[float] = None
    tie_break: TieBreak = field(default=TieBreak.EARLIER)

    @property
    def total_deviation(self) -> Dict[str, int]:
        return dict(self.retiming.total_deviation)

    @property
    def total(self) -> int:
        return self.retiming.total

    @property
    def label(self) -> str:
        return f"{Rule(self.rule).value}/{Method(self.method).value}"


def result_to_dict(scenario: Scenario, result: AllocationResult) -> Dict[str, Any]:
    """Serialize a result: per undertaking and OD pair, the list of moves plus D_o."""
    undertakings: Dict[str, Any] = {}
    for o, total in result.retiming.total_deviation.items():
        undertakings[o] = {"deviation_min": total, "moves": {}}
    for move in result.retiming.moves:
        entry = undertakings.setdefault(move.undertaking, {"deviation_min": 0, "moves": {}})
        entry["moves"].setdefault(move.od_pair, []).append({
            "requested": format_hhmm(scenario.slot_time(move.od_pair, move.requested)),
            "allocated": format_hhmm(scenario.slot_time(move.od_pair, move.allocated)),
        })
    return {
        "scenario": scenario.name,
        "rule": Rule(result.rule).value,
        "method": Method(result.method).value,
        "tie_break": TieBreak(result.tie_break).value,
        "epsilon_used": result.epsilon_used,
        "total_deviation_min": result.total,
        "undertakings": undertakings,
    }


def result_from_dict(scenario: Scenario, data: Dict[str, Any], source: str = "<allocation>") -> AllocationResult:
    """Inverse of :func:`result_to_dict`."""
    try:
        pairs = []
        names = []
        for o, entry in data["undertakings"].items():
            scenario.undertaking(o)
            names.append(o)
            for od_id, moves in entry.get("moves", {}).items():
                for move in moves:
                    pairs.append((
                        o, od_id,
                        scenario.slot_index(od_id, parse_hhmm(move["requested"])),
                        scenario.slot_index(od_id, parse_hhmm(move["allocated"])),
                    ))
        retiming = RetimingMap.build(scenario, pairs, names)
        return AllocationResult(
            allocation=retiming.to_allocation(),
            retiming=retiming,
            rule=Rule(data["rule"]),
            method=Method(data["method"]),
            epsilon_used=data.get("epsilon_used"),
            tie_break=TieBreak(data.get("tie_break", TieBreak.EARLIER.value)),
        )
    except UnknownUndertakingError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{source}: malformed allocation result ({e})") from e


def load_allocation(
    path: Union[str, Path],
    scenario: Scenario,
    bids: Optional[Sequence[Bid]] = None,
) -> Tuple[Allocation, Optional[RetimingMap]]:
    """
    Load an allocation file.

    Accepts either a saved :class:`AllocationResult` or a plain mapping
    ``undertaking -> OD pair -> ["HH:MM", ...]``. For plain mappings the
    re-timing is rebuilt with :func:`match_retiming` when ``bids`` are given.

    Returns:
        Tuple of (allocation, retiming or None)
    """
    data = read_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    if "undertakings" in data and "rule" in data:
        result = result_from_dict(scenario, data, str(path))
        return result.allocation, result.retiming

    assigned = {}
    for o, per_od in data.items():
        if not isinstance(per_od, dict):
            raise InputError(f"{path}: {o} must map OD pairs to lists of times")
        scenario.undertaking(o)
        assigned[o] = bid_from_schema(scenario, o, per_od, str(path)).requested
    for o in scenario.undertaking_ids:
        assigned.setdefault(o, {})
    allocation = Allocation(assigned)
    retiming = match_retiming(scenario, bids, allocation) if bids is not None else None
    return allocation, retiming


def moves_frame(scenario: Scenario, result: AllocationResult) -> pd.DataFrame:
    """One row per move, for plotting."""
    rows = [
        {
            "rule": Rule(result.rule).value,
            "method": Method(result.method).value,
            "undertaking": m.undertaking,
            "od_pair": m.od_pair,
            "requested": format_hhmm(scenario.slot_time(m.od_pair, m.requested)),
            "allocated": format_hhmm(scenario.slot_time(m.od_pair, m.allocated)),
            "deviation_min": m.deviation,
        }
        for m in result.retiming.moves
    ]
    columns = ["rule", "method", "undertaking", "od_pair", "requested", "allocated", "deviation_min"]
    return pd.DataFrame(rows, columns=columns)


def deviation_summary_frame(results: Sequence[AllocationResult]) -> pd.DataFrame:
    """
    Deviation table: one row per (rule, method), one column per undertaking.

    Minutes are given as integers, with a rendered ``total`` column.
    """
    rows = []
    for result in results:
        row: Dict[str, Any] = {"rule": Rule(result.rule).value, "method": Method(result.method).value}
        for o, minutes in result.retiming.total_deviation.items():
            row[f"{o}_min"] = minutes
        row["total_min"] = result.total
        row["total"] = format_duration(result.total)
        row["epsilon_used"] = "" if result.epsilon_used is None else f"{result.epsilon_used:.6g}"
        rows.append(row)
    return pd.DataFrame(rows)


def write_allocation_outputs(out_dir: Union[str, Path], scenario: Scenario,
                             result: AllocationResult) -> List[Path]:
    """Write ``allocation.json``, ``moves.csv`` and ``deviation_summary.csv``."""
    out_dir = Path(out_dir)
    return [
        write_json(out_dir / "allocation.json", result_to_dict(scenario, result)),
        write_csv(out_dir / "moves.csv", moves_frame(scenario, result)),
        write_csv(out_dir / "deviation_summary.csv", deviation_summary_frame([result])),
    ]
