"""Command-line interface: ``fgcalib {simulate,calibrate,evaluate,study,selfcheck,replay}``.

Exit codes::

    0  success
    2  bad arguments, unreadable or invalid input file
    3  the scenario leaves a camera without any visible frame
    4  the solver did not converge (the result is still written)
    5  the problem is unsolvable (unobserved camera, indefinite system)
    6  the dataset carries no ground truth for evaluation

Errors are reported on stderr as a single JSON line.  Every command that
writes files also writes ``<output>.manifest.json`` describing the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import __version__, fileio, schemas
from .errors import (
    AngleNearPi,
    ArityMismatch,
    CalibrationError,
    EmptyProblem,
    IndefiniteSystem,
    MissingGroundTruth,
    NoVisibleFrames,
    UnobservedCamera,
)
from .fileio import ConfigError
from .pipeline import calibrate, compare_topologies, evaluate
from .selfcheck import CORRUPTIBLE, run_checks
from .sim import ScenarioSampler, perturbation_study, simulate
from .solver import SolverSettings

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_VISIBLE = 3
EXIT_NOT_CONVERGED = 4
EXIT_UNSOLVABLE = 5
EXIT_NO_GROUND_TRUTH = 6

CONFIG_DIR_ENV = "FGCALIB_CONFIG_DIR"

log = logging.getLogger("fgcalib")


class CommandError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.extra = extra


def _report_error(err: CommandError) -> None:
    payload = {"error": err.kind, "message": str(err), "exit_code": err.code}
    payload.update(err.extra)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def default_scenario_path() -> Path:
    """``$FGCALIB_CONFIG_DIR/scenario.json`` if present, else the bundled default."""
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir:
        candidate = Path(config_dir) / "scenario.json"
        if candidate.is_file():
            return candidate
    return Path(str(resources.files("fgcalib") / "data" / "default_scenario.json"))


def _write_manifest(args, outputs: list[Path], config_paths: list, seed, started: float) -> Path:
    primary = Path(args.output)
    manifest = {
        "command": args.command,
        "argv": list(args.argv),
        "cwd": os.getcwd(),
        "config_paths": [str(p) for p in config_paths],
        "seed": seed,
        "version": __version__,
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.perf_counter() - started, 6),
    }
    path = primary.with_name(primary.name + ".manifest.json")
    fileio.write_json(path, manifest, schemas.MANIFEST)
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    scenario_path = Path(args.scenario) if args.scenario else default_scenario_path()
    config = fileio.load_scenario(scenario_path)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.frames is not None:
        if args.frames < 1:
            raise ConfigError("--frames must be >= 1")
        overrides["n_frames"] = args.frames
    config = replace(config, **overrides)
    data = simulate(config)
    outputs = fileio.save_dataset(args.output, data, inline_chain=args.inline_chain)
    n_det = sum(len(f.detections) for f in data.frames)
    print(f"wrote {args.output}: {len(data.cameras)} cameras, {len(data.frames)} frames, {n_det} detections")
    _write_manifest(args, outputs, [scenario_path], config.seed, started)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    started = time.perf_counter()
    dataset = fileio.load_dataset(args.dataset)
    if args.max_iter is not None and args.max_iter < 1:
        raise ConfigError("--max-iter must be >= 1")
    settings = SolverSettings(
        max_iterations=args.max_iter or SolverSettings.max_iterations,
        initial_lambda=args.initial_lambda if args.lm else 0.0,
    )
    problem = dataset.problem(settings)
    try:
        problem.validate()
    except (UnobservedCamera, EmptyProblem):
        raise
    except ValueError as exc:
        raise ConfigError(f"{args.dataset}: {exc}") from exc
    if args.dump_linear_system:
        Path(args.dump_linear_system).mkdir(parents=True, exist_ok=True)
    result = calibrate(problem, dump_dir=args.dump_linear_system)
    fileio.save_result(args.output, result)
    r = result.report
    print(
        f"wrote {args.output}: {r.iterations} iterations, cost {r.initial_cost:.6g} -> {r.final_cost:.6g}, "
        f"termination {r.termination.value}"
    )
    configs = [args.dataset] + ([dataset.chain_path] if dataset.chain_path else [])
    _write_manifest(args, [Path(args.output)], configs, None, started)
    if not r.converged:
        raise CommandError(
            EXIT_NOT_CONVERGED,
            "NotConverged",
            f"solver stopped after {r.iterations} iterations ({r.termination.value}); result written to {args.output}",
        )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    result = fileio.load_result(args.result)
    dataset = fileio.load_dataset(args.dataset)
    if dataset.ground_truth is None:
        raise MissingGroundTruth(f"{args.dataset} has no ground_truth section")
    stats = evaluate(result, dataset.ground_truth)
    json_path = Path(args.output)
    csv_path = json_path.with_suffix(".csv")
    fileio.save_stats(json_path, csv_path, stats)
    for cam, s in stats.items():
        cells = ", ".join(f"{axis} {mae:.4g} {unit}" for axis, unit, mae, _ in s.rows())
        print(f"{cam}: {cells}")
    _write_manifest(args, [json_path, csv_path], [args.result, args.dataset], None, started)
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--sigma-grid: {exc}") from exc
    if not values or any(v < 0 for v in values):
        raise ConfigError("--sigma-grid needs one or more non-negative scale factors")
    return values


def format_ratio(ratio: float | None) -> str:
    return "0/0" if ratio is None else f"{ratio:.4f}"


def cmd_study(args) -> int:
    started = time.perf_counter()
    scenario_path = Path(args.scenario) if args.scenario else default_scenario_path()
    config = fileio.load_scenario(scenario_path)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    jobs = max(1, args.jobs)
    if args.compare_topologies:
        if len(config.cameras) < 2:
            raise ConfigError(f"{scenario_path}: --compare-topologies needs at least two cameras")
        cmp = compare_topologies(ScenarioSampler(config), args.trials, jobs)
        fileio.atomic_write_text(args.output, fileio.topology_csv(cmp))
        wins, n, p = cmp.sign_test()
        print(f"F2/F1 mean translation error ratio: {format_ratio(cmp.ratio)}")
        print(f"joint calibration better in {wins}/{n} informative trials, one-sided sign test p = {p:.3g}")
    else:
        grid = _parse_grid(args.sigma_grid)
        rows = perturbation_study(config, grid, args.trials, args.component, jobs)
        fileio.atomic_write_text(args.output, fileio.study_csv(rows))
        for sigma, stats in rows:
            print(f"noise x{sigma:g}: translation MAE {100 * stats.translation_mae:.4g} cm, rotation MAE {stats.rotation_mae:.4g} deg")
    _write_manifest(args, [Path(args.output)], [scenario_path], config.seed, started)
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    started = time.perf_counter()
    results = run_checks(seed=args.seed or 0, corrupt=args.corrupt_jacobian)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail} ({r.seconds:.2f} s)")
    failed = [r.name for r in results if not r.passed]
    if args.output:
        report = {"passed": not failed, "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]}
        fileio.write_json(args.output, report)
        _write_manifest(args, [Path(args.output)], [], args.seed, started)
    if failed:
        raise CommandError(1, "SelfCheckFailed", f"failed checks: {', '.join(failed)}", checks=failed)
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = fileio.read_json(args.manifest, schemas.MANIFEST)
    if manifest["command"] == "replay":
        raise ConfigError("cannot replay a replay manifest")
    here = os.getcwd()
    os.chdir(manifest.get("cwd", here))
    try:
        return main(manifest["argv"])
    finally:
        os.chdir(here)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, output_default: str | None) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the scenario's)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes for Monte Carlo trials")
    p.add_argument("--output", "-o", default=output_default, help="output file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fgcalib", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset from a scenario")
    p.add_argument("scenario", nargs="?", help=f"scenario JSON (default: ${CONFIG_DIR_ENV}/scenario.json or bundled)")
    p.add_argument("--frames", type=int, default=None, help="override the scenario's frame count")
    p.add_argument("--inline-chain", action="store_true", help="embed the chain instead of writing a chain file")
    _common(p, "dataset.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="estimate camera extrinsics from a dataset")
    p.add_argument("dataset")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--gn", action="store_true", help="Gauss-Newton (default)")
    mode.add_argument("--lm", action="store_true", help="Levenberg-Marquardt damping")
    p.add_argument("--initial-lambda", type=float, default=1e-3, help="initial damping for --lm")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--dump-linear-system", metavar="DIR", default=None, help="write each linearized system as MatrixMarket files")
    _common(p, "result.json")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="compare a calibration result with the dataset's ground truth")
    p.add_argument("result")
    p.add_argument("dataset")
    _common(p, "stats.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("study", help="Monte Carlo noise study or single- vs joint-camera comparison")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--compare-topologies", action="store_true")
    p.add_argument("--sigma-grid", default="0.5,1,2", help="comma-separated noise scale factors")
    p.add_argument("--component", choices=("all", "encoder", "detection"), default="all")
    _common(p, "study.csv")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("selfcheck", help="run the embedded invariant checks")
    p.add_argument("--corrupt-jacobian", choices=CORRUPTIBLE, default=None, help=argparse.SUPPRESS)
    _common(p, None)
    p.set_defaults(func=cmd_selfcheck)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay, output=None)
    return parser


_ERROR_CODES = (
    (ConfigError, EXIT_CONFIG),
    (ArityMismatch, EXIT_CONFIG),
    (NoVisibleFrames, EXIT_NO_VISIBLE),
    (UnobservedCamera, EXIT_UNSOLVABLE),
    (EmptyProblem, EXIT_UNSOLVABLE),
    (IndefiniteSystem, EXIT_UNSOLVABLE),
    (AngleNearPi, EXIT_UNSOLVABLE),
    (MissingGroundTruth, EXIT_NO_GROUND_TRUTH),
)


def _as_command_error(exc: Exception) -> CommandError | None:
    for cls, code in _ERROR_CODES:
        if isinstance(exc, cls):
            extra = {}
            if isinstance(exc, UnobservedCamera):
                extra["camera"] = exc.camera
            if isinstance(exc, IndefiniteSystem) and exc.keys:
                extra["variables"] = [str(k) for k in exc.keys]
            return CommandError(code, type(exc).__name__, str(exc), **extra)
    if isinstance(exc, CalibrationError):
        return CommandError(1, type(exc).__name__, str(exc))
    return None


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as err:
        _report_error(err)
        return err.code
    except Exception as exc:
        err = _as_command_error(exc)
        if err is None:
            raise
        _report_error(err)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
