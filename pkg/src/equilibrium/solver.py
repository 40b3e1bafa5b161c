"""
Mixed-strategy Nash equilibria of a game tensor.

The solver runs support enumeration first: supports are visited by total
size, then per-player sizes, then lexicographically, and the indifference
conditions on each support are solved with bounded least squares. When no
support up to ``max_support`` yields an equilibrium it falls back to
fictitious play and replicator dynamics. Every candidate must pass
:func:`verify_equilibrium`, which recomputes regrets by brute force.
"""

import logging
from dataclasses import dataclass
from itertools import combinations, product
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares, root

from src.equilibrium.game import (
    GameTensor,
    MixedProfile,
    check_shape,
    expected_payoff,
    strategy_values,
)
from src.exceptions import EquilibriumNotFoundError
from src.utils.config import Config

LOG = logging.getLogger(__name__)

_CONVERGED = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Equilibrium search settings."""
    tolerance: float = 1e-6
    max_support: int = 3
    max_iters: int = 20000
    restarts: int = 8
    seed: int = 0

    @classmethod
    def from_config(cls, config: Config, **overrides) -> 'SolverConfig':
        values = dict(tolerance=config.NASH_TOLERANCE, max_support=config.MAX_SUPPORT,
                      max_iters=config.MAX_ITERS)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class Certificate:
    """Regret of every player and the resulting ε."""
    regrets: np.ndarray
    epsilon: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.epsilon <= self.tolerance


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    profile: MixedProfile
    expected_payoffs: np.ndarray
    regret: np.ndarray
    epsilon: float
    method: str

    def to_dict(self) -> Dict[str, Any]:
        names = self.profile.undertakings
        return {
            "method": self.method,
            "epsilon_nash": float(self.epsilon),
            "profile": self.profile.to_dict(),
            "support": {o: list(self.profile.support(i)) for i, o in enumerate(names)},
            "expected_payoffs": {o: float(u) for o, u in zip(names, self.expected_payoffs)},
            "regrets": {o: float(r) for o, r in zip(names, self.regret)},
        }


def verify_equilibrium(tensor: GameTensor, profile: MixedProfile, tolerance: float = 1e-6) -> Certificate:
    """
    Largest gain any player gets from a pure deviation.

    Computed by summing over every joint pure strategy directly, without the
    contraction helpers the solver uses.

    Raises:
        ShapeMismatchError: If the profile does not fit the tensor
    """
    check_shape(tensor, profile)
    n = tensor.n_players
    p = profile.probabilities
    regrets = np.zeros(n)
    for o in range(n):
        current = 0.0
        deviations = np.zeros(tensor.shape[o])
        for joint in product(*(range(k) for k in tensor.shape)):
            others = 1.0
            for k in range(n):
                if k != o:
                    others *= p[k][joint[k]]
            if others == 0.0:
                continue
            value = tensor.payoffs[joint][o]
            deviations[joint[o]] += others * value
            current += others * p[o][joint[o]] * value
        regrets[o] = max(0.0, float(deviations.max() - current))
    return Certificate(regrets, float(regrets.max()) if n else 0.0, tolerance)


def _result(tensor: GameTensor, profile: MixedProfile, certificate: Certificate, method: str) -> EquilibriumResult:
    return EquilibriumResult(profile, expected_payoff(tensor, profile), certificate.regrets,
                             certificate.epsilon, method)


def _support_order(tensor: GameTensor, max_support: int) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    limits = [min(n, max(1, max_support)) for n in tensor.shape]
    sizes = sorted(product(*(range(1, k + 1) for k in limits)), key=lambda s: (sum(s), s))
    for size in sizes:
        yield from product(*(combinations(range(n), k) for n, k in zip(tensor.shape, size)))


def _solve_support(tensor: GameTensor, supports: Sequence[Tuple[int, ...]],
                   starts: Sequence[Sequence[np.ndarray]]) -> Iterator[MixedProfile]:
    """
    Profiles on ``supports`` that make every mixing player indifferent over its support.

    The system is square (one indifference row per extra support strategy plus
    one normalization row per mixing player). Bounded least squares finds a
    root inside the simplex; ``root`` then polishes it.
    """
    names, shape = tensor.undertakings, tensor.shape
    mixing = [o for o, s in enumerate(supports) if len(s) > 1]

    def vectors_of(z: np.ndarray) -> List[np.ndarray]:
        vectors, offset = [], 0
        for o, support in enumerate(supports):
            p = np.zeros(shape[o])
            if len(support) > 1:
                p[list(support)] = z[offset:offset + len(support)]
                offset += len(support)
            else:
                p[support[0]] = 1.0
            vectors.append(p)
        return vectors

    if not mixing:
        yield MixedProfile.from_vectors(names, vectors_of(np.zeros(0)))
        return

    scale = max(1.0, float(np.abs(tensor.payoffs).max()))

    def residuals(z: np.ndarray) -> np.ndarray:
        vectors = vectors_of(z)
        out = []
        for o in mixing:
            values = tensor.payoffs[..., o]
            for axis in reversed(range(len(shape))):
                if axis != o:
                    values = np.tensordot(values, vectors[axis], axes=([axis], [0]))
            chosen = values[list(supports[o])]
            out.extend((chosen[1:] - chosen[0]) / scale)
            out.append(vectors[o].sum() - 1.0)
        return np.array(out)

    for start in starts:
        x0 = np.concatenate([start[o] for o in mixing])
        fit = least_squares(residuals, x0, bounds=(0.0, 1.0), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.max(np.abs(fit.fun)) > _CONVERGED:
            continue
        z = fit.x
        polished = root(residuals, z, method="hybr")
        if polished.success and np.all(polished.x >= -1e-12) and np.all(polished.x <= 1 + 1e-12) \
                and np.max(np.abs(polished.fun)) <= np.max(np.abs(fit.fun)):
            z = polished.x
        yield MixedProfile.from_vectors(names, vectors_of(z))


def _starts(supports: Sequence[Tuple[int, ...]], rng: np.random.Generator, restarts: int) -> List[List[np.ndarray]]:
    starts = [[np.full(len(s), 1.0 / len(s)) for s in supports]]
    for _ in range(restarts):
        starts.append([rng.dirichlet(np.ones(len(s))) for s in supports])
    return starts


def _support_enumeration(tensor: GameTensor, config: SolverConfig) -> Iterator[EquilibriumResult]:
    rng = np.random.default_rng(config.seed)
    for supports in _support_order(tensor, config.max_support):
        for profile in _solve_support(tensor, supports, _starts(supports, rng, config.restarts)):
            certificate = verify_equilibrium(tensor, profile, config.tolerance)
            if certificate.passed:
                LOG.debug("support %s passes with ε=%.3g", supports, certificate.epsilon)
                yield _result(tensor, profile, certificate, "support-enumeration")
                break


def _regret(tensor: GameTensor, profile: MixedProfile) -> float:
    worst = 0.0
    for o in range(tensor.n_players):
        values = strategy_values(tensor, profile, o)
        worst = max(worst, float(values.max() - values @ profile.probabilities[o]))
    return worst


def _fictitious_play(tensor: GameTensor, config: SolverConfig) -> Tuple[MixedProfile, float]:
    names, shape = tensor.undertakings, tensor.shape
    beliefs = [np.full(n, 1.0 / n) for n in shape]
    best = MixedProfile.from_vectors(names, beliefs)
    best_eps = _regret(tensor, best)
    for t in range(1, config.max_iters + 1):
        current = MixedProfile.from_vectors(names, beliefs)
        replies = [int(np.argmax(strategy_values(tensor, current, o))) for o in range(len(shape))]
        for o, reply in enumerate(replies):
            beliefs[o] = beliefs[o] * t / (t + 1)
            beliefs[o][reply] += 1.0 / (t + 1)
        if t % 50 == 0 or t == config.max_iters:
            candidate = MixedProfile.from_vectors(names, beliefs)
            eps = _regret(tensor, candidate)
            if eps < best_eps:
                best, best_eps = candidate, eps
            if best_eps <= config.tolerance:
                break
    return best, best_eps


def _replicator(tensor: GameTensor, config: SolverConfig) -> Tuple[MixedProfile, float]:
    names, shape = tensor.undertakings, tensor.shape
    x = [np.full(n, 1.0 / n) for n in shape]
    best = MixedProfile.from_vectors(names, x)
    best_eps = _regret(tensor, best)
    for t in range(1, config.max_iters + 1):
        current = MixedProfile.from_vectors(names, x)
        updated = []
        for o in range(len(shape)):
            fitness = strategy_values(tensor, current, o)
            fitness = fitness - fitness.min() + 1e-12 * max(1.0, float(np.abs(fitness).max()))
            grown = x[o] * fitness
            updated.append(grown / grown.sum())
        x = updated
        if t % 50 == 0 or t == config.max_iters:
            candidate = MixedProfile.from_vectors(names, x)
            eps = _regret(tensor, candidate)
            if eps < best_eps:
                best, best_eps = candidate, eps
            if best_eps <= config.tolerance:
                break
    return best, best_eps


def solve_equilibrium(tensor: GameTensor, config: Optional[SolverConfig] = None) -> EquilibriumResult:
    """
    Find a profile whose ε-Nash certificate is within ``config.tolerance``.

    Args:
        tensor: Game to solve
        config: Search settings (defaults when omitted)

    Returns:
        The first certificate-passing profile in search order

    Raises:
        EquilibriumNotFoundError: If no stage reaches the tolerance; carries
            the best candidate and its ε
    """
    config = config or SolverConfig()
    for result in _support_enumeration(tensor, config):
        LOG.info("equilibrium found by support enumeration, ε=%.3g", result.epsilon)
        return result

    LOG.info("support enumeration up to size %d failed, falling back to learning dynamics",
             config.max_support)
    best_profile, best_eps, best_method = None, float("inf"), ""
    for method, dynamics in (("fictitious-play", _fictitious_play), ("replicator", _replicator)):
        profile, _ = dynamics(tensor, config)
        certificate = verify_equilibrium(tensor, profile, config.tolerance)
        if certificate.passed:
            return _result(tensor, profile, certificate, method)
        if certificate.epsilon < best_eps:
            best_profile, best_eps, best_method = profile, certificate.epsilon, method

    raise EquilibriumNotFoundError(
        f"no profile within tolerance {config.tolerance:g}; best ε={best_eps:.6g} from {best_method}",
        best_profile=best_profile,
        best_epsilon=best_eps,
    )


def enumerate_equilibria(tensor: GameTensor, config: Optional[SolverConfig] = None) -> List[EquilibriumResult]:
    """Every distinct certificate-passing profile found by support enumeration, in search order."""
    config = config or SolverConfig()
    found: List[EquilibriumResult] = []
    for result in _support_enumeration(tensor, config):
        if not any(_same_profile(result.profile, other.profile) for other in found):
            found.append(result)
    return found


def _same_profile(a: MixedProfile, b: MixedProfile, atol: float = 1e-9) -> bool:
    return all(np.allclose(p, q, atol=atol) for p, q in zip(a.probabilities, b.probabilities))


def format_report(tensor: GameTensor, results: Sequence[EquilibriumResult]) -> str:
    """Plain-text summary: supports, probabilities, expected payoffs and ε per equilibrium."""
    lines = [
        f"Game: {tensor.rule or '?'}/{tensor.method or '?'}, players "
        + ", ".join(f"{o} ({n} strategies)" for o, n in zip(tensor.undertakings, tensor.shape)),
        "",
    ]
    for k, result in enumerate(results, 1):
        lines.append(f"Equilibrium {k} ({result.method}), epsilon_nash = {result.epsilon:.3e}")
        for i, o in enumerate(tensor.undertakings):
            probs = ", ".join(f"{x:.4f}" for x in result.profile.probabilities[i])
            lines.append(
                f"  {o}: support {list(result.profile.support(i))}, p = [{probs}], "
                f"u = {result.expected_payoffs[i]:.2f} EUR, regret = {result.regret[i]:.3e}"
            )
        lines.append("")
    return "\n".join(lines)
