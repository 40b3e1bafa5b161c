#!/usr/bin/env python3
"""
Command-line interface for the railway time-slot allocation toolkit.
"""

import functools
import logging
import sys
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
import pandas as pd
from rich.markup import escape
from rich.table import Table

from src import __version__
from src.allocation import EquityParams, Method, Rule, TieBreak, allocate
from src.allocation.results import AllocationResult, load_allocation, write_allocation_outputs
from src.economics.payoff import payoffs, weighted_breakdowns, write_payoff_csv
from src.equilibrium.game import (
    GameTensor,
    MixedProfile,
    StrategySet,
    build_game,
    load_strategy_sets,
    write_tensor_csv,
)
from src.equilibrium.solver import (
    EquilibriumResult,
    SolverConfig,
    enumerate_equilibria,
    format_report,
    solve_equilibrium,
)
from src.exceptions import EquilibriumNotFoundError, InputError, TsaError, ValidationFailed
from src.model.io import load_bids, load_scenario, read_json, write_csv, write_json
from src.model.types import Scenario, format_duration, format_hhmm
from src.model.validation import check_allocation, validate_bids, validate_scenario
from src.selftest import run_selftest
from src.utils.config import get_config
from src.utils.console import console, err_console, setup_logging

LOG = logging.getLogger(__name__)

DEFAULT_SCENARIO = "madrid_barcelona.json"

EXIT_FAILURE = 1
EXIT_INPUT = 2


@dataclass
class RunConfig:
    """Merged configuration for one CLI command: config defaults overridden by flags."""
    command: str
    output_dir: Path
    scenario: Optional[Path] = None
    bids: Optional[Path] = None
    strategies: Optional[Path] = None
    allocation: Optional[Path] = None
    probabilities: Optional[Path] = None
    rule: Rule = Rule.PRIORITY
    method: Method = Method.HEURISTIC
    order: Optional[Tuple[str, ...]] = None
    tie_break: TieBreak = TieBreak.EARLIER
    lookahead: bool = False
    epsilon: float = 0.0
    epsilon_step: Optional[float] = None
    tolerance: float = 1e-6
    max_support: int = 3
    max_iters: int = 20000
    budget: int = 4096
    workers: int = 1
    list_all: bool = False
    seed: int = 0
    rounds: int = 20

    def check(self) -> None:
        """
        Raises:
            InputError: If a referenced input file does not exist
        """
        for name in ("scenario", "bids", "strategies", "allocation", "probabilities"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise InputError(f"{name} file not found: {path}")

    @property
    def equity_params(self) -> EquityParams:
        return EquityParams(epsilon=self.epsilon, epsilon_search_step=self.epsilon_step)


def parse_order(text: Optional[str]) -> Optional[Tuple[str, ...]]:
    """Split a comma-separated priority order, e.g. ``RU1,RU2,RU3``."""
    if not text:
        return None
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _load_checked_scenario(path: Path) -> Scenario:
    scenario = load_scenario(path)
    violations = validate_scenario(scenario)
    if violations:
        raise ValidationFailed(violations, source=str(path))
    return scenario


def _load_checked_bids(path: Path, scenario: Scenario):
    bids = load_bids(path, scenario)
    violations = validate_bids(scenario, bids)
    if violations:
        raise ValidationFailed(violations, source=str(path))
    return bids


def _run_allocation(config: RunConfig, scenario: Scenario, bids) -> AllocationResult:
    result = allocate(scenario, bids, config.rule, config.method, config.order,
                      config.equity_params, config.tie_break, lookahead=config.lookahead)
    violations = check_allocation(scenario, bids, result.allocation, result.retiming)
    if violations:
        raise TsaError("allocation failed its invariant check: "
                       + "; ".join(str(v) for v in violations))
    return result


def _strategy_table(sets: Sequence[StrategySet]) -> str:
    return ", ".join(f"{s.undertaking} ({len(s.strategies)})" for s in sets)


def cmd_allocate(config: RunConfig) -> List[Path]:
    """Allocate one bid file and write the result, moves and deviation summary."""
    config.check()
    scenario = _load_checked_scenario(config.scenario)
    bids = _load_checked_bids(config.bids, scenario)
    result = _run_allocation(config, scenario, bids)
    files = write_allocation_outputs(config.output_dir, scenario, result)

    table = Table(title=f"Deviation ({result.label})")
    table.add_column("RU", style="cyan")
    table.add_column("Minutes", justify="right")
    table.add_column("D_o", justify="right")
    for o, minutes in result.total_deviation.items():
        table.add_row(o, str(minutes), format_duration(minutes))
    table.add_row("[bold]total[/bold]", str(result.total), f"[bold]{format_duration(result.total)}[/bold]")
    console.print(table)
    if result.epsilon_used is not None:
        console.print(f"Equity band ε used: {result.epsilon_used:.6g}")
    return files


def _read_probabilities(path: Path, sets: Sequence[StrategySet]) -> MixedProfile:
    data = read_json(path)
    if isinstance(data, dict) and isinstance(data.get("profile"), dict):
        data = data["profile"]
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a mapping undertaking -> probabilities")
    names = [s.undertaking for s in sets]
    missing = [o for o in names if o not in data]
    if missing:
        raise InputError(f"{path}: no probabilities for {', '.join(missing)}")
    profile = MixedProfile(tuple(names), tuple(data[o] for o in names))
    for s, n in zip(sets, profile.shape):
        if n != len(s.strategies):
            raise InputError(f"{path}: {s.undertaking} has {len(s.strategies)} strategies, "
                             f"got {n} probabilities")
    return profile


def _weighted_payoffs(config: RunConfig, scenario: Scenario) -> List[Path]:
    sets = load_strategy_sets(config.strategies, scenario)
    violations = [v for s in sets for v in s.validate(scenario)]
    if violations:
        raise ValidationFailed(violations, source=str(config.strategies))
    profile = _read_probabilities(config.probabilities, sets)

    outcomes = []
    pure_rows: List[Dict[str, Any]] = []
    for joint in product(*(range(len(s.strategies)) for s in sets)):
        p = float(np.prod([profile.probabilities[i][j] for i, j in enumerate(joint)]))
        if p == 0.0:
            continue
        bids = [s.strategies[j] for s, j in zip(sets, joint)]
        result = _run_allocation(config, scenario, bids)
        table = payoffs(scenario, result.allocation)
        outcomes.append((p, table))
        for o, b in table.items():
            pure_rows.append({
                "joint": "-".join(str(j) for j in joint),
                "probability": p,
                "RU": o,
                "total passengers": b.total_passengers,
                "rolling stock": b.fleet_size,
                "revenue": round(b.profit / 100, 2),
            })

    merged = weighted_breakdowns(outcomes)
    breakdowns = [merged[o] for o in scenario.undertaking_ids if o in merged]
    files = [
        write_payoff_csv(config.output_dir / "payoff.csv", scenario, breakdowns),
        write_csv(config.output_dir / "payoff_by_strategy.csv", pd.DataFrame(pure_rows)),
    ]
    _print_payoffs(breakdowns, title="Expected payoff")
    return files


def _print_payoffs(breakdowns, title: str) -> None:
    table = Table(title=title)
    table.add_column("RU", style="cyan")
    table.add_column("Passengers", justify="right")
    table.add_column("Rolling stock", justify="right")
    table.add_column("Revenue (EUR)", justify="right")
    for b in breakdowns:
        table.add_row(b.undertaking, f"{b.total_passengers:,.2f}".rstrip("0").rstrip("."),
                      f"{b.fleet_size:g}", f"{b.profit / 100:,.2f}")
    console.print(table)


def cmd_payoff(config: RunConfig) -> List[Path]:
    """
    Write the economic table of an allocation, or the probability-weighted
    table over strategy sets when ``strategies`` and ``probabilities`` are given.
    """
    config.check()
    scenario = _load_checked_scenario(config.scenario)
    if config.strategies is not None or config.probabilities is not None:
        if config.strategies is None or config.probabilities is None:
            raise InputError("weighted payoff needs both --strategies and --probabilities")
        return _weighted_payoffs(config, scenario)
    if config.allocation is None:
        raise InputError("payoff needs --allocation, or --strategies with --probabilities")

    allocation, _ = load_allocation(config.allocation, scenario)
    breakdowns = list(payoffs(scenario, allocation).values())
    files = [write_payoff_csv(config.output_dir / "payoff.csv", scenario, breakdowns)]
    _print_payoffs(breakdowns, title="Payoff")
    return files


def _write_equilibria(config: RunConfig, tensor: GameTensor,
                      results: Sequence[EquilibriumResult]) -> List[Path]:
    report = config.output_dir / "equilibrium_report.txt"
    report.parent.mkdir(parents=True, exist_ok=True)
    report.write_text(format_report(tensor, results), encoding="utf-8")
    data = {
        "status": "ok",
        "rule": tensor.rule,
        "method": tensor.method,
        "tolerance": config.tolerance,
        "equilibria": [r.to_dict() for r in results],
    }
    return [write_json(config.output_dir / "equilibrium.json", data), report]


def _write_failure(config: RunConfig, tensor: GameTensor, error: EquilibriumNotFoundError) -> List[Path]:
    profile = error.best_profile
    data = {
        "status": "failed",
        "rule": tensor.rule,
        "method": tensor.method,
        "tolerance": config.tolerance,
        "message": str(error),
        "best_epsilon": float(error.best_epsilon),
        "best_profile": profile.to_dict() if profile is not None else None,
    }
    report = config.output_dir / "equilibrium_report.txt"
    report.parent.mkdir(parents=True, exist_ok=True)
    report.write_text(f"No equilibrium within tolerance {config.tolerance:g}\n"
                      f"Best ε_nash found: {error.best_epsilon:.6g}\n", encoding="utf-8")
    return [write_json(config.output_dir / "equilibrium.json", data), report]


def cmd_equilibrium(config: RunConfig) -> List[Path]:
    """Build the game tensor for the strategy sets, solve it and write the results."""
    config.check()
    scenario = _load_checked_scenario(config.scenario)
    sets = load_strategy_sets(config.strategies, scenario)
    violations = [v for s in sets for v in s.validate(scenario)]
    if violations:
        raise ValidationFailed(violations, source=str(config.strategies))
    console.print(f"[bold]Players:[/bold] {_strategy_table(sets)}")

    tensor = build_game(scenario, sets, config.rule, config.method, config.order,
                        config.equity_params, config.tie_break, budget=config.budget,
                        max_workers=config.workers, lookahead=config.lookahead)
    files = [write_tensor_csv(config.output_dir / "tensor.csv", tensor)]

    solver = SolverConfig(tolerance=config.tolerance, max_support=config.max_support,
                          max_iters=config.max_iters, seed=config.seed)
    try:
        results = enumerate_equilibria(tensor, solver) if config.list_all else []
        if not results:
            results = [solve_equilibrium(tensor, solver)]
    except EquilibriumNotFoundError as e:
        files.extend(_write_failure(config, tensor, e))
        raise

    files.extend(_write_equilibria(config, tensor, results))
    for k, result in enumerate(results, 1):
        table = Table(title=f"Equilibrium {k} ({result.method}, ε_nash = {result.epsilon:.2e})")
        table.add_column("RU", style="cyan")
        table.add_column("Probabilities")
        table.add_column("Expected payoff (EUR)", justify="right")
        table.add_column("Regret", justify="right")
        for i, o in enumerate(tensor.undertakings):
            probs = ", ".join(f"{x:.4f}" for x in result.profile.probabilities[i])
            table.add_row(o, probs, f"{result.expected_payoffs[i]:,.2f}", f"{result.regret[i]:.2e}")
        console.print(table)
    return files


def slot_frame(scenario: Scenario, allocation) -> pd.DataFrame:
    """One row per grid slot: time, OD pair, demand and owning undertaking (empty if free)."""
    rows = []
    for od_id in scenario.od_ids:
        owners = allocation.owners(od_id)
        for slot in scenario.grid(od_id):
            holders = owners.get(slot.index, [])
            rows.append({
                "time": format_hhmm(slot.time),
                "od_pair": od_id,
                "demand": scenario.demand[slot.key],
                "owner": holders[0] if holders else "",
            })
    return pd.DataFrame(rows, columns=["time", "od_pair", "demand", "owner"])


def cmd_report(config: RunConfig) -> List[Path]:
    """Write the per-slot table of an allocation for plotting."""
    config.check()
    if config.allocation is None:
        raise InputError("report needs --allocation")
    scenario = _load_checked_scenario(config.scenario)
    allocation, _ = load_allocation(config.allocation, scenario)
    frame = slot_frame(scenario, allocation)
    free = int((frame["owner"] == "").sum())
    console.print(f"{len(frame)} slot(s), {free} unallocated")
    return [write_csv(config.output_dir / "slots.csv", frame)]


def cmd_selftest(config: RunConfig) -> Tuple[List[Path], bool]:
    """Run the invariant and oracle checks; returns written files and overall success."""
    with console.status("[bold green]Running checks...") as status:
        results = run_selftest(config.seed, config.rounds,
                               progress=lambda name: status.update(f"[bold green]{name}..."))

    table = Table(title=f"Self-test (seed {config.seed}, {config.rounds} rounds)")
    table.add_column("Check", style="cyan")
    table.add_column("Runs", justify="right")
    table.add_column("Failures", justify="right")
    table.add_column("Status")
    for r in results:
        table.add_row(r.name, str(r.runs), str(r.failures),
                      "[green]✓[/green]" if r.passed else "[red]✗[/red]")
    console.print(table)
    for r in results:
        for detail in r.details:
            console.print(f"[red]{r.name}:[/red] {escape(detail)}")

    frame = pd.DataFrame([{"check": r.name, "runs": r.runs, "failures": r.failures}
                          for r in results], columns=["check", "runs", "failures"])
    return [write_csv(config.output_dir / "selftest.csv", frame)], all(r.passed for r in results)


def _report_files(files: Sequence[Path]) -> None:
    for path in files:
        console.print(f"[green]✓[/green] {path}")


def handle_errors(func):
    """Map toolkit errors onto exit codes: 2 for input problems, 1 otherwise."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationFailed as e:
            prefix = f"{e.source}: " if e.source else ""
            err_console.print(f"[red]Error:[/red] {escape(prefix)}{len(e.violations)} violation(s)")
            for v in e.violations:
                err_console.print(f"  {escape(str(v))}")
            sys.exit(EXIT_INPUT)
        except InputError as e:
            err_console.print(f"[red]Error:[/red] {escape(str(e))}")
            sys.exit(EXIT_INPUT)
        except TsaError as e:
            err_console.print(f"[red]Error:[/red] {escape(str(e))}")
            sys.exit(EXIT_FAILURE)

    return wrapper


def _default_scenario(path: Optional[Path]) -> Path:
    return Path(path) if path else get_config().SCENARIO_DIR / DEFAULT_SCENARIO


def allocator_options(func):
    """Rule, method, order, tie direction and equity band flags shared by several commands."""
    options = [
        click.option('--rule', '-r', type=click.Choice([r.value for r in Rule], case_sensitive=False),
                     default=Rule.PRIORITY.value, show_default=True, help='Allocation rule'),
        click.option('--method', '-m', type=click.Choice([m.value for m in Method], case_sensitive=False),
                     default=Method.HEURISTIC.value, show_default=True, help='Heuristic or exact'),
        click.option('--order', help='Priority order, e.g. RU1,RU2,RU3 (default: declaration order)'),
        click.option('--tie-break', type=click.Choice([t.value for t in TieBreak], case_sensitive=False),
                     default=TieBreak.EARLIER.value, show_default=True,
                     help='Direction of equidistant re-timing ties'),
        click.option('--lookahead', is_flag=True,
                     help='Exact priority: settle ties in favour of lower-priority RUs'),
        click.option('--epsilon', type=float, default=0.0, show_default=True,
                     help='Initial equity band for the exact equity allocator'),
        click.option('--epsilon-step', type=float, default=None,
                     help='Band search step (default: grid step / total number of requested slots)'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def scenario_option(func):
    return click.option('--scenario', '-s', type=click.Path(dir_okay=False, path_type=Path),
                        help='Scenario JSON (default: shipped case study)')(func)


def output_option(func):
    return click.option('--output-dir', '-o', type=click.Path(file_okay=False, path_type=Path),
                        help='Directory for output files (default: TSA_OUTPUT_DIR or ./out)')(func)


def _base_config(command: str, scenario: Optional[Path], output_dir: Optional[Path],
                 **kwargs) -> RunConfig:
    config = get_config()
    allocator = {}
    if 'rule' in kwargs:
        allocator = dict(
            rule=Rule(kwargs.pop('rule').lower()),
            method=Method(kwargs.pop('method').lower()),
            order=parse_order(kwargs.pop('order')),
            tie_break=TieBreak(kwargs.pop('tie_break').lower()),
            lookahead=kwargs.pop('lookahead'),
            epsilon=kwargs.pop('epsilon'),
            epsilon_step=kwargs.pop('epsilon_step'),
        )
    run = RunConfig(
        command=command,
        scenario=_default_scenario(scenario),
        output_dir=Path(output_dir) if output_dir else config.OUTPUT_DIR,
        tolerance=config.NASH_TOLERANCE,
        max_support=config.MAX_SUPPORT,
        max_iters=config.MAX_ITERS,
        budget=config.GAME_BUDGET,
        workers=config.MAX_WORKERS,
        **allocator,
        **kwargs,
    )
    LOG.debug("run config: %s", run)
    return run


@click.group()
@click.version_option(version=__version__)
@click.option('--verbose', '-v', is_flag=True, help='Log allocator and solver progress')
def cli(verbose):
    """Railway time-slot allocation: priority and equity rules, payoffs and equilibria."""
    setup_logging(get_config().LOG_LEVEL, verbose)


@cli.command('allocate')
@scenario_option
@click.option('--bids', '-b', required=True, type=click.Path(dir_okay=False, path_type=Path),
              help='Bid file (one bid per RU)')
@allocator_options
@output_option
@handle_errors
def allocate_command(scenario, bids, output_dir, **allocator):
    """
    Allocate a set of bids.

    Example: tsa allocate -b data/bids/priority_py2.json --rule priority --tie-break later
    """
    config = _base_config('allocate', scenario, output_dir, bids=bids, **allocator)
    _report_files(cmd_allocate(config))


@cli.command('payoff')
@scenario_option
@click.option('--allocation', '-a', type=click.Path(dir_okay=False, path_type=Path),
              help='Allocation JSON (allocator output or RU -> OD -> times)')
@click.option('--strategies', type=click.Path(dir_okay=False, path_type=Path),
              help='Strategy sets for the weighted mode')
@click.option('--probabilities', '-p', type=click.Path(dir_okay=False, path_type=Path),
              help='Mixed profile for the weighted mode (RU -> probabilities)')
@allocator_options
@output_option
@handle_errors
def payoff_command(scenario, allocation, strategies, probabilities, output_dir, **allocator):
    """
    Compute passengers, fleet and revenue per RU.

    Example: tsa payoff -a out/allocation.json
    """
    config = _base_config('payoff', scenario, output_dir, allocation=allocation,
                          strategies=strategies, probabilities=probabilities, **allocator)
    _report_files(cmd_payoff(config))


@cli.command('equilibrium')
@scenario_option
@click.option('--strategies', required=True, type=click.Path(dir_okay=False, path_type=Path),
              help='Strategy sets (RU -> list of bids)')
@allocator_options
@click.option('--tolerance', type=float, help='ε-Nash acceptance threshold')
@click.option('--max-support', type=int, help='Largest support size to enumerate')
@click.option('--max-iters', type=int, help='Iterations of the learning fallbacks')
@click.option('--budget', type=int, help='Largest joint strategy space')
@click.option('--workers', type=int, help='Processes used to build the game')
@click.option('--all', 'list_all', is_flag=True, help='List every equilibrium found by support enumeration')
@click.option('--seed', type=int, default=0, show_default=True, help='Seed for solver restarts')
@output_option
@handle_errors
def equilibrium_command(scenario, strategies, output_dir, tolerance, max_support, max_iters,
                        budget, workers, list_all, seed, **allocator):
    """
    Solve the game induced by an allocation rule.

    Example: tsa equilibrium --strategies data/strategies/priority.json --tie-break later
    """
    config = _base_config('equilibrium', scenario, output_dir, strategies=strategies,
                          list_all=list_all, seed=seed, **allocator)
    overrides = dict(tolerance=tolerance, max_support=max_support, max_iters=max_iters,
                     budget=budget, workers=workers)
    for name, value in overrides.items():
        if value is not None:
            setattr(config, name, value)
    _report_files(cmd_equilibrium(config))


@cli.command('report')
@scenario_option
@click.option('--allocation', '-a', required=True, type=click.Path(dir_okay=False, path_type=Path),
              help='Allocation JSON')
@output_option
@handle_errors
def report_command(scenario, allocation, output_dir):
    """Write a per-slot CSV (time, OD, demand, owner) for plotting."""
    config = _base_config('report', scenario, output_dir, allocation=allocation)
    _report_files(cmd_report(config))


@cli.command('selftest')
@click.option('--seed', type=int, default=0, show_default=True, help='Seed for random instances')
@click.option('--rounds', type=int, default=20, show_default=True, help='Instances per check')
@output_option
@handle_errors
def selftest_command(seed, rounds, output_dir):
    """Run the allocator, payoff and equilibrium invariant checks."""
    config = _base_config('selftest', None, output_dir, seed=seed, rounds=rounds)
    files, passed = cmd_selftest(config)
    _report_files(files)
    if not passed:
        sys.exit(EXIT_FAILURE)


def main():
    """Entry point for CLI."""
    cli()


if __name__ == '__main__':
    main()
