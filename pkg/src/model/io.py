"""
JSON file formats for scenarios, bids and strategy sets.

Files are decoded with orjson and checked against pydantic schemas; every
problem is re-raised as :class:`InputError` naming the file and, for syntax
errors, the line and column. Currency is written in euros and held in cents.
"""

from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Union

import orjson
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator

from src.exceptions import InputError
from src.model.types import Bid, ODPair, Scenario, TimeSlot, Undertaking, format_hhmm, parse_hhmm

# od pair -> list of "HH:MM"
BidSchema = Dict[str, List[str]]

_BIDS = TypeAdapter(Dict[str, BidSchema])
_STRATEGIES = TypeAdapter(Dict[str, List[BidSchema]])


class ODPairModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    origin: str
    destination: str


class UndertakingModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    capacity_share: float
    daily_rolling_stock_cost: float
    fixed_access_cost: float
    per_slot_operating_cost: float
    slot_operating_costs: Dict[str, Dict[str, float]] = Field(default_factory=dict)


class ScenarioModel(BaseModel):
    """On-disk scenario layout."""
    model_config = ConfigDict(extra="forbid")

    name: str = ""
    description: str = ""
    demand_profile: str = "exact"
    grid_step_min: int = 30
    trip_duration_min: int
    turnaround_min: int
    od_pairs: List[ODPairModel]
    slots: Dict[str, List[str]]
    undertakings: List[UndertakingModel]
    demand: Dict[str, Dict[str, int]]
    fare: Dict[str, Union[float, Dict[str, float]]]

    @field_validator("slots")
    @classmethod
    def _times_are_hhmm(cls, value: Dict[str, List[str]]) -> Dict[str, List[str]]:
        for times in value.values():
            for text in times:
                parse_hhmm(text)
        return value


def to_cents(euros: float) -> int:
    return int(round(euros * 100))


def to_euros(cents: int) -> float:
    return cents / 100


def read_json(path: Union[str, Path]) -> Any:
    """
    Read and decode a JSON file.

    Raises:
        InputError: If the file is missing or is not valid JSON
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise InputError(f"{path}: cannot read file ({e.strerror or e})") from e
    try:
        return orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise InputError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e


def write_json(path: Union[str, Path], data: Any) -> Path:
    """Write ``data`` as indented JSON with sorted keys (byte-stable across runs)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(data, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS) + b"\n")
    return path


def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    """Comma-separated, dot decimal, header row, LF line endings, cents resolution."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.2f")
    return path


def _schema_error(source: str, error: ValidationError) -> InputError:
    details = "; ".join(
        f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in error.errors()
    )
    return InputError(f"{source}: {details}")


def _slot_index(scenario_slots: Mapping[str, Sequence[TimeSlot]], od_id: str, text: str,
                source: str) -> int:
    try:
        minutes = parse_hhmm(text)
    except ValueError as e:
        raise InputError(f"{source}: {e}") from e
    for slot in scenario_slots.get(od_id, ()):
        if slot.time == minutes:
            return slot.index
    raise InputError(f"{source}: {text} is not a slot on the {od_id} grid")


def scenario_from_dict(data: Any, source: str = "<scenario>") -> Scenario:
    """Build a Scenario from decoded JSON."""
    try:
        model = ScenarioModel.model_validate(data)
    except ValidationError as e:
        raise _schema_error(source, e) from e

    slots = {
        od_id: tuple(TimeSlot(i, parse_hhmm(t), od_id) for i, t in enumerate(times))
        for od_id, times in model.slots.items()
    }

    undertakings = []
    for u in model.undertakings:
        overrides = {
            (od_id, _slot_index(slots, od_id, t, f"{source}: undertakings[{u.id}]")): to_cents(v)
            for od_id, per_time in u.slot_operating_costs.items()
            for t, v in per_time.items()
        }
        undertakings.append(Undertaking(
            id=u.id,
            capacity_share=u.capacity_share,
            daily_rolling_stock_cost=to_cents(u.daily_rolling_stock_cost),
            fixed_access_cost=to_cents(u.fixed_access_cost),
            per_slot_operating_cost=to_cents(u.per_slot_operating_cost),
            slot_operating_costs=overrides,
        ))

    demand = {
        (od_id, _slot_index(slots, od_id, t, f"{source}: demand")): value
        for od_id, per_time in model.demand.items()
        for t, value in per_time.items()
    }

    fare: Dict[Any, int] = {}
    for od_id, value in model.fare.items():
        if isinstance(value, dict):
            for t, euros in value.items():
                fare[(od_id, _slot_index(slots, od_id, t, f"{source}: fare"))] = to_cents(euros)
        else:
            for slot in slots.get(od_id, ()):
                fare[(od_id, slot.index)] = to_cents(value)

    return Scenario(
        od_pairs=tuple(ODPair(od.id, od.origin, od.destination) for od in model.od_pairs),
        slots=slots,
        undertakings=tuple(undertakings),
        demand=demand,
        fare=fare,
        trip_duration=model.trip_duration_min,
        turnaround=model.turnaround_min,
        grid_step=model.grid_step_min,
        name=model.name,
        demand_profile=model.demand_profile,
    )


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Serialize a Scenario to the on-disk layout (fares written per slot)."""

    def per_time(values: Mapping[Any, int], od_id: str, convert=lambda v: v) -> Dict[str, Any]:
        return {
            format_hhmm(slot.time): convert(values[(od_id, slot.index)])
            for slot in scenario.slots[od_id]
            if (od_id, slot.index) in values
        }

    undertakings = []
    for u in scenario.undertakings:
        overrides: Dict[str, Dict[str, float]] = {}
        for (od_id, index), cents in u.slot_operating_costs.items():
            overrides.setdefault(od_id, {})[format_hhmm(scenario.slot_time(od_id, index))] = to_euros(cents)
        undertakings.append({
            "id": u.id,
            "capacity_share": u.capacity_share,
            "daily_rolling_stock_cost": to_euros(u.daily_rolling_stock_cost),
            "fixed_access_cost": to_euros(u.fixed_access_cost),
            "per_slot_operating_cost": to_euros(u.per_slot_operating_cost),
            "slot_operating_costs": overrides,
        })

    return {
        "name": scenario.name,
        "demand_profile": scenario.demand_profile,
        "grid_step_min": scenario.grid_step,
        "trip_duration_min": scenario.trip_duration,
        "turnaround_min": scenario.turnaround,
        "od_pairs": [{"id": od.id, "origin": od.origin, "destination": od.destination}
                     for od in scenario.od_pairs],
        "slots": {od_id: [format_hhmm(s.time) for s in grid] for od_id, grid in scenario.slots.items()},
        "undertakings": undertakings,
        "demand": {od_id: per_time(scenario.demand, od_id) for od_id in scenario.slots},
        "fare": {od_id: per_time(scenario.fare, od_id, to_euros) for od_id in scenario.slots},
    }


def bid_from_schema(scenario: Scenario, undertaking: str, data: Mapping[str, Sequence[str]],
                    source: str) -> Bid:
    requested: Dict[str, List[int]] = {}
    for od_id, times in data.items():
        if od_id not in scenario.slots:
            raise InputError(f"{source}: {undertaking} bids on unknown OD pair '{od_id}'")
        requested[od_id] = [_slot_index(scenario.slots, od_id, t, f"{source}: {undertaking}")
                            for t in times]
    return Bid.from_slots(undertaking, requested)


def bid_to_schema(scenario: Scenario, bid: Bid) -> Dict[str, List[str]]:
    return {
        od_id: [format_hhmm(scenario.slot_time(od_id, i)) for i in bid.slots(od_id)]
        for od_id in scenario.od_ids
        if bid.count(od_id)
    }


def bids_from_dict(scenario: Scenario, data: Any, source: str = "<bids>") -> List[Bid]:
    """Decode a bids mapping (undertaking -> OD pair -> times), keeping file order."""
    try:
        parsed = _BIDS.validate_python(data)
    except ValidationError as e:
        raise _schema_error(source, e) from e
    return [bid_from_schema(scenario, o, per_od, source) for o, per_od in parsed.items()]


def bids_to_dict(scenario: Scenario, bids: Sequence[Bid]) -> Dict[str, Any]:
    return {bid.undertaking: bid_to_schema(scenario, bid) for bid in bids}


def strategies_from_dict(scenario: Scenario, data: Any,
                         source: str = "<strategies>") -> Dict[str, List[Bid]]:
    """Decode a strategy-set mapping (undertaking -> list of bids)."""
    try:
        parsed = _STRATEGIES.validate_python(data)
    except ValidationError as e:
        raise _schema_error(source, e) from e
    return {
        o: [bid_from_schema(scenario, o, per_od, f"{source}: {o}[{i}]") for i, per_od in enumerate(bids)]
        for o, bids in parsed.items()
    }


def load_scenario(path: Union[str, Path]) -> Scenario:
    return scenario_from_dict(read_json(path), str(path))


def load_bids(path: Union[str, Path], scenario: Scenario) -> List[Bid]:
    return bids_from_dict(scenario, read_json(path), str(path))


def load_strategies(path: Union[str, Path], scenario: Scenario) -> Dict[str, List[Bid]]:
    return strategies_from_dict(scenario, read_json(path), str(path))


def save_scenario(path: Union[str, Path], scenario: Scenario) -> Path:
    return write_json(path, scenario_to_dict(scenario))


def save_bids(path: Union[str, Path], scenario: Scenario, bids: Sequence[Bid]) -> Path:
    return write_json(path, bids_to_dict(scenario, bids))
