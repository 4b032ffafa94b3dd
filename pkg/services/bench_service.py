"""
Multi-seed benchmark harness: one solver process per (instance, config, seed)
run, aggregated into min [+median, +max] rows and win counts
"""
import asyncio
import csv
import logging
import math
import re
import statistics
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from config import Config
from models.schemas import (
    CSV_COLUMNS,
    EXIT_FEASIBLE,
    EXIT_UNKNOWN,
    EXIT_UNSAT,
    BenchReport,
    BenchRow,
    RunConfig,
    RunRecord,
)

logger = logging.getLogger(__name__)

CLI_PATH = Path(__file__).resolve().parent.parent / "cli.py"
STAT_LINE_RE = re.compile(r"^([a-z_]+)=(\S*)$")
TTFF_QUANTILES = (0.25, 0.5, 0.75)

STATUS_TIMEOUT = "TIMEOUT"
STATUS_ERROR = "ERROR"


def _optional_int(raw: Optional[str]) -> Optional[int]:
    if raw is None or raw == "NA":
        return None
    return int(raw)


def _optional_float(raw: Optional[str]) -> Optional[float]:
    if raw is None or raw == "NA":
        return None
    return float(raw)


def _nearest_rank(sorted_values: List[float], q: float) -> float:
    index = max(0, math.ceil(q * len(sorted_values)) - 1)
    return sorted_values[index]


class BenchService:
    """Runs solver sweeps as isolated processes and summarizes them"""

    def __init__(self, kill_grace: float = Config.KILL_GRACE, solver_command: Optional[List[str]] = None):
        self.kill_grace = kill_grace
        self.solver_command = solver_command or [sys.executable, str(CLI_PATH), "solve"]

    @staticmethod
    def parse_run_output(stdout: str, stderr: str) -> Dict[str, Optional[str]]:
        """
        Extract status, final cost and statistics from one run's output

        Returns:
            Dict with 'status', 'best_cost' (last 'o' line, else the best_cost
            statistic) and every key=value statistic found on stderr
        """
        parsed: Dict[str, Optional[str]] = {"status": None, "best_cost": None}
        last_o: Optional[str] = None
        for line in stdout.splitlines():
            if line.startswith("o "):
                last_o = line[2:].strip()
            elif line.startswith("s "):
                parsed["status"] = line[2:].strip()

        stats: Dict[str, str] = {}
        for line in stderr.splitlines():
            match = STAT_LINE_RE.match(line.strip())
            if match:
                stats[match.group(1)] = match.group(2)
        parsed.update(stats)
        parsed["best_cost"] = last_o if last_o is not None else stats.get("best_cost")
        return parsed

    async def run_one(self, instance_path: Path, config: RunConfig, seed: int,
                      semaphore: asyncio.Semaphore) -> RunRecord:
        """Run one solver process, killing it cutoff + grace seconds after start"""
        cmd = self.solver_command + [str(instance_path)] + config.cli_args(seed=seed)
        async with semaphore:
            logger.debug(f"Starting: {' '.join(cmd)}")
            process = await asyncio.create_subprocess_exec(
                *cmd,
                stdout=asyncio.subprocess.PIPE,
                stderr=asyncio.subprocess.PIPE,
            )
            out_chunks: List[bytes] = []
            err_chunks: List[bytes] = []
            readers = [
                asyncio.create_task(self._drain(process.stdout, out_chunks)),
                asyncio.create_task(self._drain(process.stderr, err_chunks)),
            ]
            killed = False
            try:
                await asyncio.wait_for(process.wait(), timeout=config.cutoff + self.kill_grace)
            except asyncio.TimeoutError:
                killed = True
                logger.warning(f"Killing {instance_path.name} [{config.name}] seed={seed} after cutoff grace")
                process.kill()
                await process.wait()
            await asyncio.gather(*readers)

        stdout = b"".join(out_chunks).decode(errors="replace")
        stderr = b"".join(err_chunks).decode(errors="replace")
        return self._record(instance_path.name, config.name, seed, process.returncode, killed, stdout, stderr)

    @staticmethod
    async def _drain(stream: asyncio.StreamReader, sink: List[bytes]) -> None:
        while True:
            chunk = await stream.read(65536)
            if not chunk:
                return
            sink.append(chunk)

    @staticmethod
    def _record(instance: str, config: str, seed: int, returncode: Optional[int], killed: bool,
                stdout: str, stderr: str) -> RunRecord:
        parsed = BenchService.parse_run_output(stdout, stderr)
        record = RunRecord(
            instance=instance,
            config=config,
            seed=seed,
            status=parsed["status"] or STATUS_ERROR,
            exit_code=returncode,
        )
        try:
            record.best_cost = _optional_int(parsed["best_cost"])
            record.time_to_first_feasible_s = _optional_float(parsed.get("time_to_first_feasible_s"))
            record.flips = _optional_int(parsed.get("flips"))
            record.local_optima = _optional_int(parsed.get("local_optima"))
        except ValueError as e:
            record.status = STATUS_ERROR
            record.error = f"unreadable output: {e}"
            logger.error(f"{instance} [{config}] seed={seed}: {record.error}")
            return record

        if killed:
            record.status = STATUS_TIMEOUT
            record.error = "killed after cutoff grace"
        elif returncode not in (EXIT_FEASIBLE, EXIT_UNKNOWN, EXIT_UNSAT):
            record.status = STATUS_ERROR
            lines = [line for line in stderr.splitlines() if line.strip()]
            record.error = lines[-1] if lines else f"exit code {returncode}"
            logger.error(f"{instance} [{config}] seed={seed} failed: {record.error}")
        return record

    async def run_sweep(self, instance_paths: Sequence[Path], configs: Sequence[RunConfig], seeds: int,
                        base_seed: int = 1, jobs: int = Config.BENCH_JOBS) -> List[RunRecord]:
        """
        Run every (instance, config, seed) combination, at most `jobs` at a time.
        Run i of a config uses seed base_seed + i.
        """
        semaphore = asyncio.Semaphore(max(1, jobs))
        tasks = [
            self.run_one(path, config, base_seed + index, semaphore)
            for path in instance_paths
            for config in configs
            for index in range(seeds)
        ]
        logger.info(f"Running {len(tasks)} solver runs with {jobs} parallel jobs")
        records: List[RunRecord] = []
        for done, future in enumerate(asyncio.as_completed(tasks), start=1):
            record = await future
            logger.info(
                f"[{done}/{len(tasks)}] {record.instance} [{record.config}] seed={record.seed}: "
                f"{record.status} cost={record.best_cost}"
            )
            records.append(record)
        records.sort(key=lambda r: (r.instance, r.config, r.seed))
        return records

    def run_bench(self, directory: Path, configs: Sequence[RunConfig], seeds: int,
                  base_seed: int = 1, jobs: int = Config.BENCH_JOBS) -> Tuple[List[RunRecord], BenchReport]:
        """
        Benchmark every .opb file in a directory

        Raises:
            ValueError: If the directory holds no instances or config names repeat
        """
        instance_paths = sorted(Path(directory).glob("*.opb"))
        if not instance_paths:
            raise ValueError(f"No .opb files in {directory}")
        names = [config.name for config in configs]
        if len(set(names)) != len(names):
            raise ValueError(f"Config names must be unique: {names}")
        if seeds < 1:
            raise ValueError("seeds must be >= 1")

        records = asyncio.run(self.run_sweep(instance_paths, configs, seeds, base_seed, jobs))
        report = self.aggregate(records, seeds, names, [path.name for path in instance_paths])
        return records, report

    @staticmethod
    def aggregate(records: Sequence[RunRecord], seeds: int, configs: Sequence[str],
                  instances: Sequence[str]) -> BenchReport:
        """
        Summarize runs per (instance, config)

        Runs without a feasible solution count as +infinity, so a median or
        maximum they dominate is reported as N/A (None). On each instance every
        config whose minimum equals the overall minimum is credited a win.
        """
        grouped: Dict[Tuple[str, str], List[RunRecord]] = {}
        for record in records:
            grouped.setdefault((record.instance, record.config), []).append(record)

        rows: List[BenchRow] = []
        wins = {config: 0 for config in configs}
        for instance in instances:
            best_by_config: Dict[str, int] = {}
            for config in configs:
                runs = grouped.get((instance, config), [])
                if len(runs) != seeds:
                    logger.warning(f"{instance} [{config}]: {len(runs)} runs recorded, expected {seeds}")
                rows.append(BenchService._summarize(instance, config, runs))
                if rows[-1].min_cost is not None:
                    best_by_config[config] = rows[-1].min_cost

            if best_by_config:
                overall = min(best_by_config.values())
                for config, cost in best_by_config.items():
                    if cost == overall:
                        wins[config] += 1

        return BenchReport(seeds=seeds, configs=list(configs), instances=list(instances), rows=rows, wins=wins)

    @staticmethod
    def _summarize(instance: str, config: str, runs: Sequence[RunRecord]) -> BenchRow:
        costs = sorted(float(r.best_cost) if r.best_cost is not None else math.inf for r in runs)
        ttffs = sorted(
            r.time_to_first_feasible_s if r.time_to_first_feasible_s is not None and r.best_cost is not None
            else math.inf
            for r in runs
        )
        feasible = sum(1 for r in runs if r.best_cost is not None)
        row = BenchRow(instance=instance, config=config, runs=len(runs), feasible_runs=feasible)
        if feasible:
            row.min_cost = int(costs[0])
            median = statistics.median(costs)
            row.median_cost = None if math.isinf(median) else median
            row.max_cost = None if math.isinf(costs[-1]) else int(costs[-1])
        for q in TTFF_QUANTILES:
            value = _nearest_rank(ttffs, q) if ttffs else math.inf
            row.ttff_quantiles[f"p{int(q * 100)}"] = None if math.isinf(value) else value
        return row

    @staticmethod
    def write_csv(records: Sequence[RunRecord], path: Path) -> None:
        """One row per run; missing values written as NA"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for record in records:
                data = record.model_dump()
                writer.writerow(["NA" if data[column] is None else data[column] for column in CSV_COLUMNS])

    @staticmethod
    def format_cell(row: BenchRow) -> str:
        """'min [+dmed, +dmax]', N/A when no run was feasible"""
        if row.min_cost is None:
            return "N/A"
        dmed = "N/A" if row.delta_median is None else f"+{row.delta_median:g}"
        dmax = "N/A" if row.delta_max is None else f"+{row.delta_max}"
        return f"{row.min_cost} [{dmed}, {dmax}]"

    @staticmethod
    def format_table(report: BenchReport) -> str:
        """Aligned text table: one line per instance, one column per config, win row last"""
        cells = {(row.instance, row.config): BenchService.format_cell(row) for row in report.rows}
        header = ["instance"] + report.configs
        body = [[instance] + [cells.get((instance, config), "N/A") for config in report.configs]
                for instance in report.instances]
        body.append(["#win"] + [str(report.wins.get(config, 0)) for config in report.configs])

        widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]

        def render(line: List[str]) -> str:
            return "  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()

        lines = [render(header), render(["-" * w for w in widths])]
        lines += [render(line) for line in body]
        lines.append("")
        lines.append(f"{report.seeds} seeds per config; {report.tie_rule}")
        return "\n".join(lines)
