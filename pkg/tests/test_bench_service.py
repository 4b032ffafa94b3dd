import asyncio
import csv
import shutil
import sys

import pytest

from models.schemas import RunConfig, RunRecord
from services.bench_service import STATUS_ERROR, STATUS_TIMEOUT, BenchService
from tests.conftest import OPB_DIR

SOLVER_STDOUT = "o 9\no 5\ns SATISFIABLE\nv x1 -x2\n"
SOLVER_STDERR = (
    "2026-01-01 10:00:00,000 - services.local_search_service - INFO - New best cost 5 after 3 flips\n"
    "flips=120\nlocal_optima=7\nbest_cost=5\ntime_to_first_feasible_s=0.012000\n"
)

FAKE_SOLVER = """
import sys
print("o 4")
print("s SATISFIABLE")
print("v x1")
print("flips=10", file=sys.stderr)
print("time_to_first_feasible_s=0.5", file=sys.stderr)
"""

SLEEPING_SOLVER = "import time; time.sleep(30)"

FAILING_SOLVER = "import sys; print('cannot read instance', file=sys.stderr); sys.exit(2)"


def record(instance, config, seed, cost, ttff=None):
    return RunRecord(
        instance=instance,
        config=config,
        seed=seed,
        status="SATISFIABLE" if cost is not None else "UNKNOWN",
        best_cost=cost,
        time_to_first_feasible_s=ttff if cost is not None else None,
    )


@pytest.fixture
def sweep():
    costs = {
        ("a.opb", "deci"): [5, 7, 9],
        ("a.opb", "ls"): [5, 6, None],
        ("b.opb", "deci"): [None, None, None],
        ("b.opb", "ls"): [3, 3, 4],
    }
    return [
        record(instance, config, seed, cost, ttff=0.1 * (seed + 1))
        for (instance, config), values in costs.items()
        for seed, cost in enumerate(values)
    ]


def test_parse_run_output_prefers_last_o_line():
    parsed = BenchService.parse_run_output(SOLVER_STDOUT, SOLVER_STDERR)
    assert parsed["status"] == "SATISFIABLE"
    assert parsed["best_cost"] == "5"
    assert parsed["flips"] == "120"
    assert parsed["local_optima"] == "7"


def test_parse_run_output_falls_back_to_statistic():
    parsed = BenchService.parse_run_output("s SATISFIABLE\nv x1\n", "best_cost=0\n")
    assert parsed["best_cost"] == "0"


def test_parse_run_output_without_status():
    parsed = BenchService.parse_run_output("", "Traceback (most recent call last):\n")
    assert parsed["status"] is None
    assert parsed["best_cost"] is None


def test_record_statuses():
    ok = BenchService._record("a.opb", "deci", 1, 0, False, SOLVER_STDOUT, SOLVER_STDERR)
    assert (ok.status, ok.best_cost, ok.flips, ok.time_to_first_feasible_s) == ("SATISFIABLE", 5, 120, 0.012)

    killed = BenchService._record("a.opb", "deci", 1, -9, True, "o 8\n", "")
    assert killed.status == STATUS_TIMEOUT
    assert killed.best_cost == 8

    failed = BenchService._record("a.opb", "deci", 1, 2, False, "", "Cannot read a.opb: line 3\n")
    assert failed.status == STATUS_ERROR
    assert failed.error == "Cannot read a.opb: line 3"

    garbled = BenchService._record("a.opb", "deci", 1, 0, False, "s SATISFIABLE\n", "flips=lots\n")
    assert garbled.status == STATUS_ERROR
    assert "unreadable" in garbled.error


def test_aggregate_rows_and_wins(sweep):
    report = BenchService.aggregate(sweep, 3, ["deci", "ls"], ["a.opb", "b.opb"])
    assert len(report.rows) == 4
    rows = {(r.instance, r.config): r for r in report.rows}

    a_deci = rows[("a.opb", "deci")]
    assert (a_deci.min_cost, a_deci.median_cost, a_deci.max_cost) == (5, 7, 9)
    assert BenchService.format_cell(a_deci) == "5 [+2, +4]"
    assert a_deci.ttff_quantiles == pytest.approx({"p25": 0.1, "p50": 0.2, "p75": 0.3})

    a_ls = rows[("a.opb", "ls")]
    assert a_ls.feasible_runs == 2
    assert BenchService.format_cell(a_ls) == "5 [+1, N/A]"
    assert a_ls.ttff_quantiles["p75"] is None

    b_deci = rows[("b.opb", "deci")]
    assert b_deci.min_cost is None
    assert BenchService.format_cell(b_deci) == "N/A"

    assert BenchService.format_cell(rows[("b.opb", "ls")]) == "3 [+0, +1]"
    # both configs reach 5 on a.opb
    assert report.wins == {"deci": 1, "ls": 2}


def test_aggregate_median_dominated_by_infeasible_runs():
    runs = [record("a.opb", "deci", s, c) for s, c in enumerate([4, None, None])]
    [row] = BenchService.aggregate(runs, 3, ["deci"], ["a.opb"]).rows
    assert row.min_cost == 4
    assert row.median_cost is None
    assert BenchService.format_cell(row) == "4 [N/A, N/A]"


def test_format_table(sweep):
    report = BenchService.aggregate(sweep, 3, ["deci", "ls"], ["a.opb", "b.opb"])
    table = BenchService.format_table(report)
    lines = table.splitlines()
    assert lines[0].split() == ["instance", "deci", "ls"]
    assert lines[2].startswith("a.opb")
    assert "5 [+2, +4]" in lines[2] and "5 [+1, N/A]" in lines[2]
    assert lines[4].split() == ["#win", "1", "2"]
    assert lines[-1] == f"3 seeds per config; {report.tie_rule}"


def test_write_csv(tmp_path, sweep):
    path = tmp_path / "out" / "runs.csv"
    BenchService.write_csv(sweep, path)
    with path.open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 12
    unknown = next(r for r in rows if r["instance"] == "b.opb" and r["config"] == "deci")
    assert unknown["best_cost"] == "NA"
    assert unknown["flips"] == "NA"
    assert rows[0]["best_cost"] == "5"


def test_run_bench_rejects_empty_directory(tmp_path):
    with pytest.raises(ValueError, match="No .opb files"):
        BenchService().run_bench(tmp_path, [RunConfig()], seeds=1)


def test_run_bench_rejects_duplicate_names(tmp_path):
    shutil.copy(OPB_DIR / "example1.opb", tmp_path)
    with pytest.raises(ValueError, match="unique"):
        BenchService().run_bench(tmp_path, [RunConfig(), RunConfig()], seeds=1)


def test_run_one_with_fake_solver(tmp_path):
    service = BenchService(solver_command=[sys.executable, "-c", FAKE_SOLVER])
    result = asyncio.run(service.run_one(tmp_path / "x.opb", RunConfig(cutoff=5), 3, asyncio.Semaphore(1)))
    assert result.status == "SATISFIABLE"
    assert result.best_cost == 4
    assert result.flips == 10
    assert result.seed == 3
    assert result.exit_code == 0


def test_run_one_kills_after_grace(tmp_path):
    service = BenchService(kill_grace=0.2, solver_command=[sys.executable, "-c", SLEEPING_SOLVER])
    result = asyncio.run(service.run_one(tmp_path / "x.opb", RunConfig(cutoff=0.1), 1, asyncio.Semaphore(1)))
    assert result.status == STATUS_TIMEOUT
    assert result.best_cost is None


def test_run_one_reports_solver_failure(tmp_path):
    service = BenchService(solver_command=[sys.executable, "-c", FAILING_SOLVER])
    result = asyncio.run(service.run_one(tmp_path / "x.opb", RunConfig(cutoff=5), 1, asyncio.Semaphore(1)))
    assert result.status == STATUS_ERROR
    assert result.error == "cannot read instance"


@pytest.mark.slow
def test_run_bench_end_to_end(tmp_path):
    for name in ("example1.opb", "knapsack.opb"):
        shutil.copy(OPB_DIR / name, tmp_path)
    configs = [
        RunConfig(name=preset, preset=preset, cutoff=2, max_flips=20_000)
        for preset in ("deci-ls-pbo", "ls-pbo")
    ]
    records, report = BenchService().run_bench(tmp_path, configs, seeds=2, jobs=2)
    assert len(records) == 8
    assert all(r.status == "SATISFIABLE" for r in records)
    costs = {r.instance: r.best_cost for r in records}
    assert costs == {"example1.opb": 1, "knapsack.opb": 7}
    assert report.wins == {"deci-ls-pbo": 2, "ls-pbo": 2}
