"""
The finite game induced by strategy sets and an allocation rule.

Every joint pure strategy (one bid per player) is allocated with the chosen
rule and method, and each player's profit is tabulated. Payoffs are stored in
euros as float64, converted from exact integer cents.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.allocation import AllocationResult, EquityParams, Method, PriorityOrder, Rule, TieBreak, allocate
from src.economics.payoff import payoff
from src.exceptions import BudgetExceededError, InputError, ShapeMismatchError, ValidationFailed
from src.model.io import read_json, strategies_from_dict, write_csv
from src.model.types import Bid, Scenario, Violation
from src.model.validation import validate_bid

LOG = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class StrategySet:
    """The bids one undertaking chooses among."""
    undertaking: str
    strategies: Tuple[Bid, ...]

    def validate(self, scenario: Scenario) -> List[Violation]:
        field = f"strategies[{self.undertaking}]"
        violations: List[Violation] = []
        if not self.strategies:
            violations.append(Violation(field, "strategy set must be non-empty"))
        for i, bid in enumerate(self.strategies):
            if bid.undertaking != self.undertaking:
                violations.append(Violation(f"{field}[{i}]", "strategy belongs to another undertaking"))
            violations.extend(validate_bid(scenario, bid))
            if bid in self.strategies[:i]:
                violations.append(Violation(f"{field}[{i}]", "duplicate strategy"))
        return violations


def strategy_sets_from_mapping(scenario: Scenario, sets: Mapping[str, Sequence[Bid]]) -> List[StrategySet]:
    """Strategy sets ordered by undertaking declaration order."""
    for o in sets:
        scenario.undertaking(o)
    return [StrategySet(o, tuple(sets[o])) for o in scenario.undertaking_ids if o in sets]


def load_strategy_sets(path: Union[str, Path], scenario: Scenario) -> List[StrategySet]:
    return strategy_sets_from_mapping(scenario, strategies_from_dict(scenario, read_json(path), str(path)))


@dataclass(frozen=True, eq=False)
class GameTensor:
    """
    Payoffs of every joint pure strategy.

    ``payoffs[i_1, ..., i_n, o]`` is player ``o``'s payoff when player ``k``
    plays strategy ``i_k``.
    """
    undertakings: Tuple[str, ...]
    payoffs: np.ndarray
    rule: Optional[str] = None
    method: Optional[str] = None

    def __post_init__(self):
        payoffs = np.array(self.payoffs, dtype=float)
        n = len(self.undertakings)
        if payoffs.ndim != n + 1 or payoffs.shape[-1] != n:
            raise ShapeMismatchError(
                f"payoff array of shape {payoffs.shape} does not fit {n} player(s)"
            )
        if not np.all(np.isfinite(payoffs)):
            raise InputError("payoff tensor contains non-finite entries")
        payoffs.setflags(write=False)
        object.__setattr__(self, "payoffs", payoffs)
        object.__setattr__(self, "undertakings", tuple(self.undertakings))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.payoffs.shape[:-1]

    @property
    def n_players(self) -> int:
        return len(self.undertakings)

    def player(self, who: Union[int, str]) -> int:
        if isinstance(who, str):
            if who not in self.undertakings:
                raise InputError(f"'{who}' is not a player of this game")
            return self.undertakings.index(who)
        return who

    def entry(self, joint: Sequence[int]) -> np.ndarray:
        return self.payoffs[tuple(joint)]

    def same_as(self, other: 'GameTensor') -> bool:
        return self.undertakings == other.undertakings and np.array_equal(self.payoffs, other.payoffs)


@dataclass(frozen=True, eq=False)
class MixedProfile:
    """One probability vector per player."""
    undertakings: Tuple[str, ...]
    probabilities: Tuple[np.ndarray, ...]

    def __post_init__(self):
        vectors = tuple(np.array(p, dtype=float) for p in self.probabilities)
        if len(vectors) != len(self.undertakings):
            raise ShapeMismatchError(f"{len(vectors)} vector(s) for {len(self.undertakings)} player(s)")
        for name, p in zip(self.undertakings, vectors):
            if p.ndim != 1 or p.size == 0:
                raise ShapeMismatchError(f"{name}: probability vector must be 1-D and non-empty")
            if np.any(p < 0) or abs(p.sum() - 1.0) > PROBABILITY_TOLERANCE:
                raise InputError(f"{name}: probabilities must be non-negative and sum to 1")
            p.setflags(write=False)
        object.__setattr__(self, "probabilities", vectors)
        object.__setattr__(self, "undertakings", tuple(self.undertakings))

    @classmethod
    def from_vectors(cls, undertakings: Sequence[str], vectors: Sequence[Sequence[float]]) -> 'MixedProfile':
        """Clip round-off negatives and renormalize before validating."""
        cleaned = []
        for v in vectors:
            p = np.clip(np.asarray(v, dtype=float), 0.0, None)
            cleaned.append(p / p.sum() if p.sum() > 0 else p)
        return cls(tuple(undertakings), tuple(cleaned))

    @classmethod
    def pure(cls, undertakings: Sequence[str], shape: Sequence[int], joint: Sequence[int]) -> 'MixedProfile':
        return cls(tuple(undertakings), tuple(np.eye(n)[i] for n, i in zip(shape, joint)))

    @classmethod
    def uniform(cls, undertakings: Sequence[str], shape: Sequence[int]) -> 'MixedProfile':
        return cls(tuple(undertakings), tuple(np.full(n, 1.0 / n) for n in shape))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(p.size for p in self.probabilities)

    def support(self, player: int, threshold: float = 1e-9) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.probabilities[player] > threshold))

    def to_dict(self) -> Dict[str, List[float]]:
        return {o: [float(x) for x in p] for o, p in zip(self.undertakings, self.probabilities)}


def profile_from_dict(tensor: GameTensor, data: Any, source: str = "<profile>") -> MixedProfile:
    """Read a profile mapping (or an equilibrium result with a ``profile`` key)."""
    if isinstance(data, dict) and isinstance(data.get("profile"), dict):
        data = data["profile"]
    if not isinstance(data, dict):
        raise InputError(f"{source}: expected a mapping undertaking -> probabilities")
    missing = [o for o in tensor.undertakings if o not in data]
    if missing:
        raise InputError(f"{source}: no probabilities for {', '.join(missing)}")
    try:
        profile = MixedProfile(tensor.undertakings, tuple(data[o] for o in tensor.undertakings))
    except (TypeError, ValueError) as e:
        raise InputError(f"{source}: {e}") from e
    check_shape(tensor, profile)
    return profile


def check_shape(tensor: GameTensor, profile: MixedProfile) -> None:
    """
    Raises:
        ShapeMismatchError: If players or strategy counts differ
    """
    if profile.undertakings != tensor.undertakings or profile.shape != tensor.shape:
        raise ShapeMismatchError(
            f"profile {dict(zip(profile.undertakings, profile.shape))} does not match "
            f"tensor {dict(zip(tensor.undertakings, tensor.shape))}"
        )


def _allocation_profits(task) -> List[int]:
    scenario, bids, rule, method, order, params, tie_break, lookahead, players = task
    result: AllocationResult = allocate(scenario, bids, rule, method, order, params, tie_break,
                                        lookahead=lookahead)
    return [payoff(scenario, result.allocation, o).profit for o in players]


def build_game(
    scenario: Scenario,
    strategy_sets: Sequence[StrategySet],
    rule: Union[Rule, str],
    method: Union[Method, str],
    order: Optional[Union[PriorityOrder, Sequence[str]]] = None,
    params: Optional[EquityParams] = None,
    tie_break: Union[TieBreak, str] = TieBreak.EARLIER,
    budget: int = 4096,
    max_workers: int = 1,
    lookahead: bool = False,
) -> GameTensor:
    """
    Tabulate every player's profit over the joint strategy space.

    Args:
        scenario: Allocation instance
        strategy_sets: One set per player, in player order
        rule: Allocation rule
        method: Allocation method
        order: Priority order for the priority rule
        params: Band settings for the exact equity allocator
        tie_break: Re-timing tie direction
        budget: Largest joint strategy space allowed
        max_workers: Processes used to evaluate joint strategies
        lookahead: Settle exact priority ties in favour of lower-priority undertakings

    Returns:
        GameTensor in euros

    Raises:
        ValidationFailed: If a strategy set is invalid
        BudgetExceededError: If |Y| exceeds ``budget``
    """
    violations = [v for s in strategy_sets for v in s.validate(scenario)]
    if violations:
        raise ValidationFailed(violations, source="strategy sets")

    players = tuple(s.undertaking for s in strategy_sets)
    if len(set(players)) != len(players):
        raise InputError("each undertaking may have only one strategy set")
    shape = tuple(len(s.strategies) for s in strategy_sets)
    size = int(np.prod(shape)) if shape else 1
    if size > budget:
        raise BudgetExceededError(f"|Y| = {size} joint strategies exceeds the budget of {budget}")

    rule, method, tie_break = Rule(rule), Method(method), TieBreak(tie_break)
    joints = list(product(*(range(n) for n in shape)))
    tasks = [
        (scenario, [s.strategies[i] for s, i in zip(strategy_sets, joint)],
         rule, method, order, params, tie_break, lookahead, players)
        for joint in joints
    ]
    LOG.info("building %s/%s game: shape %s, %d joint strategies", rule.value, method.value, shape, size)

    if max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            profits = list(pool.map(_allocation_profits, tasks))
    else:
        profits = [_allocation_profits(task) for task in tasks]

    payoffs = np.zeros(shape + (len(players),))
    for joint, row in zip(joints, profits):
        payoffs[joint] = np.array(row, dtype=float) / 100.0
    return GameTensor(players, payoffs, rule.value, method.value)


def expected_payoff(tensor: GameTensor, profile: MixedProfile) -> np.ndarray:
    """
    u_o = Σ_y (Π_k p_k[y_k]) · F_o(y) for every player.

    Raises:
        ShapeMismatchError: If the profile does not fit the tensor
    """
    check_shape(tensor, profile)
    values = tensor.payoffs
    for p in profile.probabilities:
        values = np.tensordot(p, values, axes=([0], [0]))
    return np.asarray(values, dtype=float)


def strategy_values(tensor: GameTensor, profile: MixedProfile, player: Union[int, str]) -> np.ndarray:
    """Payoff of each pure strategy of ``player`` against the others' mixed strategies."""
    check_shape(tensor, profile)
    o = tensor.player(player)
    values = tensor.payoffs[..., o]
    for axis in reversed(range(tensor.n_players)):
        if axis != o:
            values = np.tensordot(values, profile.probabilities[axis], axes=([axis], [0]))
    return np.asarray(values, dtype=float)


def best_response(tensor: GameTensor, profile: MixedProfile, player: Union[int, str]) -> Tuple[int, float]:
    """
    Best pure reply of ``player`` and its gain over the current expected payoff.

    Returns:
        (strategy index, gain ≥ 0); ties go to the lowest index
    """
    o = tensor.player(player)
    values = strategy_values(tensor, profile, o)
    current = float(values @ profile.probabilities[o])
    index = int(np.argmax(values))
    return index, max(0.0, float(values[index]) - current)


def tensor_frame(tensor: GameTensor) -> pd.DataFrame:
    """One row per joint strategy: strategy indices, then payoffs in euros."""
    rows = []
    for joint in product(*(range(n) for n in tensor.shape)):
        row: Dict[str, Any] = {f"{o}_strategy": i for o, i in zip(tensor.undertakings, joint)}
        row.update({f"{o}_payoff": float(v) for o, v in zip(tensor.undertakings, tensor.entry(joint))})
        rows.append(row)
    return pd.DataFrame(rows)


def write_tensor_csv(path: Union[str, Path], tensor: GameTensor) -> Path:
    return write_csv(path, tensor_frame(tensor))
