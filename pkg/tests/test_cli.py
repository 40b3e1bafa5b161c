"""End-to-end tests of the ``tsa`` command line."""

import json

import pandas as pd
import pytest
from click.testing import CliRunner

from src import __version__
from src.cli import cli
from src.equilibrium.game import MixedProfile
from src.exceptions import EquilibriumNotFoundError
from tests.conftest import DATA_DIR

SCENARIO = str(DATA_DIR / "scenarios" / "madrid_barcelona.json")


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)


def write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_version(runner):
    result = invoke(runner, "--version")
    assert result.exit_code == 0
    assert __version__ in result.output


class TestAllocate:

    def test_priority_heuristic_case_study(self, runner, tmp_path):
        result = invoke(runner, "allocate", "-s", SCENARIO, "-b", DATA_DIR / "bids" / "priority_py2.json",
                        "--rule", "priority", "--method", "heuristic", "--tie-break", "later",
                        "-o", tmp_path)
        assert result.exit_code == 0, result.output
        summary = pd.read_csv(tmp_path / "deviation_summary.csv")
        assert summary.loc[0, "total_min"] == 1200
        assert summary.loc[0, "RU2_min"] == 390
        assert (tmp_path / "moves.csv").exists()
        saved = json.loads((tmp_path / "allocation.json").read_text(encoding="utf-8"))
        assert saved["rule"] == "priority"

    def test_default_tie_break_case_study(self, runner, tmp_path):
        result = invoke(runner, "allocate", "-s", SCENARIO, "-b", DATA_DIR / "bids" / "priority_py2.json",
                        "-o", tmp_path)
        assert result.exit_code == 0, result.output
        summary = pd.read_csv(tmp_path / "deviation_summary.csv")
        assert summary.loc[0, "total_min"] == 1170
        assert summary.loc[0, "RU3_min"] == 780

    @pytest.mark.parametrize("rule, method", [("priority", "exact"), ("equity", "heuristic")])
    def test_reruns_are_byte_identical(self, runner, tmp_path, rule, method):
        bids = DATA_DIR / "bids" / f"{rule}_py2.json"
        for run in ("first", "second"):
            result = invoke(runner, "allocate", "-s", SCENARIO, "-b", bids, "--rule", rule,
                            "--method", method, "--tie-break", "later", "-o", tmp_path / run)
            assert result.exit_code == 0, result.output
        names = sorted(p.name for p in (tmp_path / "first").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "second").iterdir())
        for name in names:
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes(), name

    def test_lookahead_flag(self, runner, tmp_path):
        result = invoke(runner, "allocate", "-s", SCENARIO, "-b", DATA_DIR / "bids" / "priority_py2.json",
                        "--method", "exact", "--tie-break", "later", "--lookahead", "-o", tmp_path)
        assert result.exit_code == 0, result.output
        summary = pd.read_csv(tmp_path / "deviation_summary.csv")
        assert summary.loc[0, "RU2_min"] == 390
        assert summary.loc[0, "RU3_min"] <= 780

    def test_capacity_exceeded(self, runner, tmp_path):
        times = ["06:15", "06:45", "07:15", "07:45", "08:15", "08:45", "09:15", "09:45", "10:15"]
        bids = write(tmp_path / "bids.json", {"RU1": {"w1": times}})
        result = invoke(runner, "allocate", "-s", SCENARIO, "-b", bids, "-o", tmp_path / "out")
        assert result.exit_code == 2
        assert "capacity exceeded" in result.output

    def test_disjoint_bids_equity_exact(self, runner, tmp_path):
        bids = write(tmp_path / "bids.json", {"RU1": {"w1": ["06:15"]}, "RU2": {"w1": ["12:15"]}})
        result = invoke(runner, "allocate", "-s", SCENARIO, "-b", bids, "--rule", "equity",
                        "--method", "exact", "-o", tmp_path / "out")
        assert result.exit_code == 0, result.output
        summary = pd.read_csv(tmp_path / "out" / "deviation_summary.csv")
        assert summary.loc[0, "total_min"] == 0

    def test_invalid_json(self, runner, tmp_path):
        bids = tmp_path / "bids.json"
        bids.write_text("{", encoding="utf-8")
        result = invoke(runner, "allocate", "-s", SCENARIO, "-b", bids, "-o", tmp_path / "out")
        assert result.exit_code == 2
        assert "Error" in result.output

    def test_unknown_order(self, runner, tmp_path):
        result = invoke(runner, "allocate", "-s", SCENARIO, "-b", DATA_DIR / "bids" / "priority_py1.json",
                        "--order", "RU1,RU9,RU3", "-o", tmp_path)
        assert result.exit_code == 2


class TestPayoff:

    def test_published_allocation(self, runner, tmp_path):
        result = invoke(runner, "payoff", "-s", SCENARIO,
                        "-a", DATA_DIR / "published" / "priority_heuristic_py2.json", "-o", tmp_path)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "payoff.csv")
        assert list(frame["RU"]) == ["RU1", "RU2", "RU3"]
        assert list(frame["w1 slots"]) == [8, 8, 8]

    def test_empty_allocation(self, runner, tmp_path):
        allocation = write(tmp_path / "empty.json", {})
        result = invoke(runner, "payoff", "-s", SCENARIO, "-a", allocation, "-o", tmp_path / "out")
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "out" / "payoff.csv")
        assert list(frame["revenue"]) == [-56000.0] * 3
        assert list(frame["rolling stock"]) == [0, 0, 0]

    def test_needs_an_input(self, runner, tmp_path):
        result = invoke(runner, "payoff", "-s", SCENARIO, "-o", tmp_path)
        assert result.exit_code == 2

    def test_weighted_mode(self, runner, tmp_path):
        result = invoke(runner, "payoff", "-s", SCENARIO,
                        "--strategies", DATA_DIR / "strategies" / "priority.json",
                        "-p", DATA_DIR / "strategies" / "priority_profile.json",
                        "--tie-break", "later", "-o", tmp_path)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "payoff.csv")
        assert len(frame) == 3
        pure = pd.read_csv(tmp_path / "payoff_by_strategy.csv")
        assert len(pure) == 6
        assert pure.groupby("joint")["probability"].first().sum() == pytest.approx(1.0)


class TestEquilibrium:

    def test_priority_game(self, runner, tmp_path):
        result = invoke(runner, "equilibrium", "-s", SCENARIO,
                        "--strategies", DATA_DIR / "strategies" / "priority.json",
                        "--tie-break", "later", "-o", tmp_path)
        assert result.exit_code == 0, result.output
        data = json.loads((tmp_path / "equilibrium.json").read_text(encoding="utf-8"))
        assert data["status"] == "ok"
        assert data["rule"] == "priority"
        assert data["equilibria"][0]["epsilon_nash"] <= 1e-6
        assert len(pd.read_csv(tmp_path / "tensor.csv")) == 2
        assert (tmp_path / "equilibrium_report.txt").exists()

    def test_failure_writes_best_candidate(self, runner, tmp_path, monkeypatch):
        def unattainable(tensor, config):
            raise EquilibriumNotFoundError(f"no profile within {config.tolerance:g}",
                                           MixedProfile.uniform(tensor.undertakings, tensor.shape), 0.25)

        monkeypatch.setattr("src.cli.solve_equilibrium", unattainable)
        result = invoke(runner, "equilibrium", "-s", SCENARIO,
                        "--strategies", DATA_DIR / "strategies" / "priority.json",
                        "--tie-break", "later", "--tolerance", 1e-15, "-o", tmp_path)
        assert result.exit_code == 1
        data = json.loads((tmp_path / "equilibrium.json").read_text(encoding="utf-8"))
        assert data["status"] == "failed"
        assert data["tolerance"] == 1e-15
        assert data["best_epsilon"] == 0.25
        assert data["best_profile"]["RU2"] == [0.5, 0.5]
        assert "0.25" in (tmp_path / "equilibrium_report.txt").read_text(encoding="utf-8")

    def test_budget_exceeded(self, runner, tmp_path):
        result = invoke(runner, "equilibrium", "-s", SCENARIO,
                        "--strategies", DATA_DIR / "strategies" / "priority.json",
                        "--budget", 1, "-o", tmp_path)
        assert result.exit_code == 1


def test_report(runner, tmp_path):
    result = invoke(runner, "report", "-s", SCENARIO,
                    "-a", DATA_DIR / "published" / "equity_heuristic_py2.json", "-o", tmp_path)
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "slots.csv", keep_default_na=False)
    assert len(frame) == 70
    assert list(frame.columns) == ["time", "od_pair", "demand", "owner"]
    assert (frame["owner"] != "").sum() == 48
    assert frame.loc[0, "time"] == "06:15"


def test_selftest(runner, tmp_path):
    result = invoke(runner, "selftest", "--rounds", 2, "--seed", 1, "-o", tmp_path)
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "selftest.csv")
    assert (frame["failures"] == 0).all()


def test_epsilon_step_help(runner):
    result = invoke(runner, "allocate", "--help")
    assert result.exit_code == 0
    assert "grid step / total number of requested slots" in " ".join(result.output.split())
