#!/usr/bin/env python3
"""
Run the Madrid-Barcelona case study end to end.

For each allocation rule this script:
1. Allocates both pure strategies of RU2 with the heuristic and exact methods
2. Rebuilds the deviations of the published allocations
3. Prints the deviation table and writes it to the output directory
4. Writes the probability-weighted payoff table of the published mixed profile
"""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import pandas as pd
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from src.allocation import Method, Rule, TieBreak, allocate, match_retiming
from src.allocation.results import load_allocation
from src.economics.payoff import payoffs, weighted_breakdowns, write_payoff_csv
from src.exceptions import TsaError
from src.model.io import load_bids, load_scenario, read_json, write_csv
from src.model.types import format_duration
from src.utils.config import get_config

console = Console()

STRATEGIES = ("py1", "py2")


def deviation_rows(scenario, rule: Rule, progress: Progress):
    """Allocate both strategy bid files with both methods, plus the published allocations."""
    config = get_config()
    rows = []
    for strategy in STRATEGIES:
        bids = load_bids(config.BIDS_DIR / f"{rule.value}_{strategy}.json", scenario)
        for method in Method:
            task = progress.add_task(f"{rule.value} {method.value} ({strategy})", total=None)
            result = allocate(scenario, bids, rule, method, tie_break=TieBreak.LATER)
            progress.remove_task(task)
            rows.append({"rule": rule.value, "method": method.value, "strategy": strategy,
                         **{f"{o}_min": d for o, d in result.total_deviation.items()},
                         "total_min": result.total})

        published = config.PUBLISHED_DIR / f"{rule.value}_heuristic_{strategy}.json"
        if published.exists():
            allocation, _ = load_allocation(published, scenario)
            retiming = match_retiming(scenario, bids, allocation)
            rows.append({"rule": rule.value, "method": "published", "strategy": strategy,
                         **{f"{o}_min": d for o, d in retiming.total_deviation.items()},
                         "total_min": retiming.total})
    return rows


def weighted_payoff(scenario, rule: Rule, out_dir: Path) -> Path:
    """Expected payoff table of the published allocations under the published mixed profile."""
    config = get_config()
    profile = read_json(config.STRATEGIES_DIR / f"{rule.value}_profile.json")
    outcomes = []
    for strategy, p in zip(STRATEGIES, profile["RU2"]):
        allocation, _ = load_allocation(config.PUBLISHED_DIR / f"{rule.value}_heuristic_{strategy}.json",
                                        scenario)
        outcomes.append((p, payoffs(scenario, allocation)))
    merged = weighted_breakdowns(outcomes)
    return write_payoff_csv(out_dir / f"{rule.value}_payoff.csv", scenario, list(merged.values()))


def main():
    """Reproduce the case-study deviation and payoff tables."""
    config = get_config()
    out_dir = config.OUTPUT_DIR / "case_study"

    console.print("[bold]Madrid-Barcelona case study[/bold]\n")
    scenario = load_scenario(config.SCENARIO_DIR / "madrid_barcelona.json")
    if scenario.demand_profile != "exact":
        console.print(f"[yellow]Note:[/yellow] demand profile is {scenario.demand_profile}; "
                      "payoffs are indicative\n")

    rows = []
    with Progress(SpinnerColumn(), TextColumn("{task.description}"), console=console) as progress:
        for rule in Rule:
            rows.extend(deviation_rows(scenario, rule, progress))

    frame = pd.DataFrame(rows)
    table = Table(title="Deviation from requested slots")
    for column in ("rule", "method", "strategy"):
        table.add_column(column, style="cyan")
    for o in scenario.undertaking_ids:
        table.add_column(o, justify="right")
    table.add_column("total", justify="right", style="bold")
    for row in rows:
        table.add_row(row["rule"], row["method"], row["strategy"],
                      *(format_duration(row[f"{o}_min"]) for o in scenario.undertaking_ids),
                      format_duration(row["total_min"]))
    console.print(table)

    files = [write_csv(out_dir / "deviations.csv", frame)]
    for rule in Rule:
        files.append(weighted_payoff(scenario, rule, out_dir))

    console.print("\n[bold green]Written:[/bold green]")
    for path in files:
        console.print(f"[green]✓[/green] {path}")


if __name__ == '__main__':
    try:
        main()
    except TsaError as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(1)
    except KeyboardInterrupt:
        console.print("\n[yellow]Case study cancelled[/yellow]")
        sys.exit(1)
