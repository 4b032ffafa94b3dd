"""
Command line entry point: solve, bench, verify, gen, info and serve
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import IO, List, Optional

from pydantic import ValidationError

from config import Config, DEFAULT_PRESET, PRESETS
from models.pbo import CoefficientOverflowError, PBOInstance, TriviallyUnsatError
from models.schemas import (
    EXIT_FEASIBLE,
    EXIT_PARSE_ERROR,
    EXIT_UNKNOWN,
    EXIT_UNSAT,
    RunConfig,
    SolveStatus,
)
from services.bench_service import BenchService
from services.generator_service import GeneratorService
from services.local_search_service import LocalSearchService
from services.opb_service import OpbService, ParseError
from services.verifier_service import VerifierService

logger = logging.getLogger("cli")

EXIT_VERIFY_FAILED = 1


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", default=DEFAULT_PRESET, choices=list(PRESETS),
                        help="Solver variant (default: %(default)s)")
    parser.add_argument("--cutoff", type=float, default=Config.DEFAULT_CUTOFF, help="Wall-clock limit in seconds")
    parser.add_argument("--p", type=float, default=None,
                        help="Probability of picking a random falsified constraint at a local optimum "
                             f"(default: {Config.DEFAULT_P}, or the preset's value; an explicit value wins)")
    parser.add_argument("--no-decimation", action="store_true", help="Start from the all-zeros assignment")
    parser.add_argument("--no-care", action="store_true", help="Ignore care values (same as --p 1)")
    parser.add_argument("--bms", type=int, default=0, help="Best-of-k sampling for greedy picks, 0 = off")
    parser.add_argument("--gamma", type=int, default=Config.DEFAULT_GAMMA, help="Objective weight cap")
    parser.add_argument("--hard-inc", type=int, default=Config.HARD_WEIGHT_INC, help="Hard weight increment")
    parser.add_argument("--objective-inc", type=int, default=Config.OBJECTIVE_WEIGHT_INC,
                        help="Objective weight increment")
    parser.add_argument("--max-flips", type=int, default=None, help="Flip budget")
    parser.add_argument("--run-to-cutoff", action="store_true",
                        help="Keep searching until the cutoff or flip budget. Without it a run ends once the "
                             "best cost equals the objective's constant offset, which no assignment can "
                             "beat (on instances without an objective, at the first feasible assignment)")


def _run_config(args: argparse.Namespace, preset: str, seed: int, instance: Optional[str] = None) -> RunConfig:
    explicit = {} if args.p is None else {"p": args.p}
    return RunConfig(
        name=preset,
        instance=instance,
        preset=preset,
        cutoff=args.cutoff,
        seed=seed,
        no_decimation=args.no_decimation,
        no_care=args.no_care,
        bms=args.bms,
        gamma=args.gamma,
        hard_weight_inc=args.hard_inc,
        objective_weight_inc=args.objective_inc,
        max_flips=args.max_flips,
        run_to_cutoff=args.run_to_cutoff,
        **explicit,
    )


def _open_text(path: str) -> IO[str]:
    # undecodable bytes become U+FFFD; inside a term they fail as a ParseError
    return open(path, encoding="utf-8", errors="replace")


def _load_instance(path: str) -> PBOInstance:
    with _open_text(path) as f:
        return OpbService.parse_opb(f)


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        instance = _load_instance(args.instance)
    except TriviallyUnsatError as e:
        logger.info(str(e))
        OpbService.emit_solution(SolveStatus.UNSATISFIABLE, None, sys.stdout)
        return EXIT_UNSAT
    except (ParseError, CoefficientOverflowError, OSError) as e:
        logger.error(f"Cannot read {args.instance}: {e}")
        return EXIT_PARSE_ERROR

    try:
        params = _run_config(args, args.preset, args.seed, args.instance).to_params()
    except (ValidationError, ValueError) as e:
        logger.error(f"Invalid solver options: {e}")
        return EXIT_PARSE_ERROR

    stdout = sys.stdout

    def on_improvement(cost: int, elapsed: float) -> None:
        OpbService.emit_improvement(cost, stdout)

    callback = None if instance.is_decision else on_improvement
    result = LocalSearchService.solve(instance, params, on_improvement=callback)

    if args.dump_initial:
        with open(args.dump_initial, "w") as f:
            for line in OpbService.format_v_lines(result.initial_assignment):
                f.write(line + "\n")

    best = (result.best, result.best_cost) if result.best is not None else None
    OpbService.emit_solution(result.status, best, stdout, emit_cost=False)
    for line in result.statistics.to_key_values():
        print(line, file=sys.stderr)
    sys.stderr.flush()

    return EXIT_FEASIBLE if result.status == SolveStatus.SATISFIABLE else EXIT_UNKNOWN


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        instance = _load_instance(args.instance)
        with _open_text(args.solution) as f:
            status, assignment, claimed = OpbService.read_solution(f, instance.num_vars)
    except TriviallyUnsatError as e:
        print(f"instance is trivially unsatisfiable: {e}")
        return EXIT_VERIFY_FAILED
    except (ParseError, CoefficientOverflowError, OSError) as e:
        logger.error(str(e))
        return EXIT_PARSE_ERROR

    if assignment is None:
        print(f"no assignment in {args.solution} (status {status.value if status else 'missing'})")
        return EXIT_VERIFY_FAILED

    report = VerifierService.verify(instance, assignment)
    print(f"feasible={str(report.feasible).lower()}")
    print(f"objective={report.objective_value}")
    if report.violated:
        print("violated=" + ",".join(str(c) for c in report.violated))
    ok = report.feasible
    if claimed is not None:
        print(f"claimed={claimed}")
        if claimed != report.objective_value:
            print("cost mismatch")
            ok = False
    return 0 if ok else EXIT_VERIFY_FAILED


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        _, text = GeneratorService.generate_random_instance(
            num_vars=args.vars,
            num_constraints=args.constraints,
            terms_range=(args.min_terms, args.max_terms),
            coeff_range=(args.min_coeff, args.max_coeff),
            objective_density=args.objective_density,
            seed=args.seed,
            planted=args.planted,
        )
    except ValueError as e:
        logger.error(str(e))
        return EXIT_PARSE_ERROR

    if args.output:
        Path(args.output).write_text(text)
        logger.info(f"Wrote {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_info(args: argparse.Namespace) -> int:
    try:
        instance = _load_instance(args.instance)
    except TriviallyUnsatError as e:
        print(f"trivially unsatisfiable: {e}")
        return EXIT_UNSAT
    except (ParseError, CoefficientOverflowError, OSError) as e:
        logger.error(str(e))
        return EXIT_PARSE_ERROR
    for key, value in OpbService.describe(instance).model_dump().items():
        print(f"{key}: {'NA' if value is None else value}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    presets = [name.strip() for name in args.configs.split(",") if name.strip()]
    try:
        configs = [_run_config(args, preset, args.base_seed) for preset in presets]
        records, report = BenchService().run_bench(
            Path(args.directory), configs, seeds=args.seeds, base_seed=args.base_seed, jobs=args.jobs
        )
    except (ValidationError, ValueError) as e:
        logger.error(str(e))
        return EXIT_PARSE_ERROR

    if args.csv:
        BenchService.write_csv(records, Path(args.csv))
        logger.info(f"Wrote {len(records)} runs to {args.csv}")
    print(BenchService.format_table(report))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn
    uvicorn.run("main:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deci-ls-pbo", description="Anytime local search for PBO")
    parser.add_argument("--log-level", default=Config.LOG_LEVEL, help="Logging level (to stderr)")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Solve one OPB instance")
    solve.add_argument("instance")
    solve.add_argument("--seed", type=int, default=1)
    solve.add_argument("--dump-initial", default=None, help="Write the initial assignment as a 'v' line")
    _add_solver_flags(solve)
    solve.set_defaults(func=cmd_solve)

    bench = sub.add_parser("bench", help="Multi-seed sweep over a directory of OPB files")
    bench.add_argument("directory")
    bench.add_argument("--seeds", type=int, default=10)
    bench.add_argument("--base-seed", type=int, default=1)
    bench.add_argument("--configs", default=",".join(PRESETS), help="Comma-separated presets")
    bench.add_argument("--jobs", type=int, default=Config.BENCH_JOBS)
    bench.add_argument("--csv", default=None, help="Per-run CSV output path")
    _add_solver_flags(bench)
    bench.set_defaults(func=cmd_bench)

    verify = sub.add_parser("verify", help="Check a solution file against an instance")
    verify.add_argument("instance")
    verify.add_argument("solution")
    verify.set_defaults(func=cmd_verify)

    gen = sub.add_parser("gen", help="Generate a random instance")
    gen.add_argument("--vars", type=int, default=20)
    gen.add_argument("--constraints", type=int, default=30)
    gen.add_argument("--min-terms", type=int, default=2)
    gen.add_argument("--max-terms", type=int, default=5)
    gen.add_argument("--min-coeff", type=int, default=1)
    gen.add_argument("--max-coeff", type=int, default=10)
    gen.add_argument("--objective-density", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--planted", action="store_true", help="Guarantee feasibility")
    gen.add_argument("-o", "--output", default=None)
    gen.set_defaults(func=cmd_gen)

    info = sub.add_parser("info", help="Print instance statistics")
    info.add_argument("instance")
    info.set_defaults(func=cmd_info)

    serve = sub.add_parser("serve", help="Start the HTTP solver service")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=Config.PORT)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=args.log_level.upper(), format=Config.LOG_FORMAT)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
