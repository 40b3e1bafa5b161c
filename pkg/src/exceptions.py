"""
Error hierarchy for the time-slot allocation toolkit.

Every error raised on purpose by the library derives from ``TsaError`` so the
CLI can map it onto an exit code. Input problems also derive from
``ValueError`` so callers that only know the standard hierarchy still catch
them.
"""

from typing import Iterable, List, Optional


class TsaError(Exception):
    """Base class for all toolkit errors."""


class InputError(TsaError, ValueError):
    """Malformed or inconsistent input (files, parameters, references)."""


class ValidationFailed(InputError):
    """One or more validation violations were found in an input."""

    def __init__(self, violations: Iterable[object], source: Optional[str] = None):
        self.violations: List[object] = list(violations)
        self.source = source
        prefix = f"{source}: " if source else ""
        lines = "; ".join(str(v) for v in self.violations) or "no details"
        super().__init__(f"{prefix}{len(self.violations)} violation(s): {lines}")


class UnknownUndertakingError(InputError):
    """A bid, order or strategy references an undertaking not in the scenario."""


class UnknownSlotError(InputError):
    """A slot reference does not exist on the scenario grid."""


class ShapeMismatchError(InputError):
    """A mixed profile does not match the shape of a game tensor."""


class NoFreeSlotError(TsaError):
    """Every slot of an OD pair grid is occupied."""


class InfeasibleAllocationError(TsaError):
    """An allocation problem has no feasible solution."""


class OracleScaleError(TsaError):
    """An exhaustive oracle was asked to enumerate an instance that is too large."""


class BudgetExceededError(TsaError):
    """The joint strategy space exceeds the configured evaluation budget."""


class EquilibriumNotFoundError(TsaError):
    """No profile within tolerance was found.

    Carries the best candidate seen so callers can report it.
    """

    def __init__(self, message: str, best_profile=None, best_epsilon: float = float("inf")):
        super().__init__(message)
        self.best_profile = best_profile
        self.best_epsilon = best_epsilon
