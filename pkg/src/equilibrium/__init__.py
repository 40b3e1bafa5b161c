"""Games induced by allocation rules and their mixed-strategy equilibria."""

from src.equilibrium.game import (
    GameTensor,
    MixedProfile,
    StrategySet,
    best_response,
    build_game,
    expected_payoff,
    load_strategy_sets,
)
from src.equilibrium.solver import (
    Certificate,
    EquilibriumResult,
    SolverConfig,
    enumerate_equilibria,
    solve_equilibrium,
    verify_equilibrium,
)

__all__ = [
    "Certificate",
    "EquilibriumResult",
    "GameTensor",
    "MixedProfile",
    "SolverConfig",
    "StrategySet",
    "best_response",
    "build_game",
    "enumerate_equilibria",
    "expected_payoff",
    "load_strategy_sets",
    "solve_equilibrium",
    "verify_equilibrium",
]
