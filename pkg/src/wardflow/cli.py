"""Command line front end: generate, simulate, optimize, analyze.

Every command writes its artifacts into a run directory (./runs/<stamp>-seed<n>
unless --out is given) along with a manifest.json describing what was produced.
Verbosity is controlled by the BUBSIM_LOG environment variable (DEBUG, INFO,
WARNING or ERROR). Exit codes: 0 success, 2 for invalid inputs or
configuration, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .arrivals import (
    CANONICAL_PEAKS,
    PeakEvent,
    apply_peaks,
    generate_poisson_series,
    load_case_series,
    save_case_series,
)
from .demand import ground_truth_demand, save_demand
from .engine import replicate, simulate_once, write_paths
from .errors import (
    AnalysisError,
    FitError,
    IngestionError,
    ParameterError,
    SimulationError,
    StructuralError,
    ValidationError,
    WardflowError,
)
from .objective import ObjectiveSpec, read_eval_log, write_eval_log
from .optimizer import optimize
from .sensitivity import (
    contour_grid,
    fit_tree,
    stepwise_regression,
    tree_to_dot,
    tree_to_text,
)
from .kriging import Kriging
from .scenario import canonical_scenario, load_scenario

log = logging.getLogger("wardflow")

_USAGE_ERRORS = (ParameterError, StructuralError, ValidationError, IngestionError,
                 AnalysisError)
_RUNTIME_ERRORS = (SimulationError, FitError)


def _setup_logging() -> None:
    raw = os.environ.get("BUBSIM_LOG", "INFO").strip().upper()
    level = getattr(logging, raw, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if not isinstance(getattr(logging, raw, None), int):
        log.warning("BUBSIM_LOG=%r is not a log level, using INFO", raw)


def _parse_peak(text: str) -> PeakEvent:
    try:
        day, count = text.split(":")
        return PeakEvent(int(day), int(count))
    except (ValueError, ParameterError) as exc:
        raise argparse.ArgumentTypeError(
            f"peak must look like DAY:COUNT with non-negative integers, got {text!r}"
        ) from exc


def _load_config(path):
    if path is None:
        return canonical_scenario()
    return load_scenario(path)


def _run_dir(args) -> Path:
    if args.out is not None:
        out = Path(args.out)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        out = Path("runs") / f"{stamp}-seed{args.seed}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, outputs: dict[str, str]) -> None:
    for name, fname in outputs.items():
        if not (out / fname).exists():
            raise WardflowError(f"declared output {name} ({fname}) was not written")
    manifest = {
        "command": args.command,
        "version": __version__,
        "created_utc": dt.datetime.now(dt.timezone.utc).isoformat(),
        "seed": args.seed,
        "config": str(args.config) if args.config else "canonical",
        "outputs": outputs,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _get_cases(args, config, out: Path):
    """Load --cases, or synthesize a series pinned to the scenario seed."""
    if args.cases is not None:
        series = load_case_series(args.cases)
        if len(series) < config.horizon_days:
            raise IngestionError(
                f"case series covers {len(series)} days but the horizon is "
                f"{config.horizon_days}"
            )
        return series, None
    log.info("no --cases given, generating a synthetic series")
    base = generate_poisson_series(4.0, config.horizon_days, config.master_seed,
                                   config.start_date)
    series = apply_peaks(base, [PeakEvent(d, c) for d, c in CANONICAL_PEAKS
                                if d < config.horizon_days])
    save_case_series(series, out / "cases.csv")
    return series, "cases.csv"


def _load_params(config, path):
    if path is None:
        return config.registry.defaults()
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IngestionError(f"parameter file {path} is not valid JSON: {exc}") from exc
    if isinstance(data, dict) and isinstance(data.get("params"), dict):
        data = data["params"]
    if not isinstance(data, dict):
        raise IngestionError(f"parameter file {path} must hold a name-to-value object")
    return config.registry.vector_from(data)


# --- commands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    out = _run_dir(args)
    base = generate_poisson_series(args.lam, config.horizon_days, args.seed,
                                   config.start_date)
    peaks = args.peak if args.peak else [PeakEvent(d, c) for d, c in CANONICAL_PEAKS
                                         if d < config.horizon_days]
    series = apply_peaks(base, peaks)
    save_case_series(series, out / "cases.csv")
    reference = ground_truth_demand(series, config.rates)
    save_demand(reference, out / "reference.csv")
    _write_manifest(out, args, {"cases": "cases.csv", "reference": "reference.csv"})
    log.info("wrote %s (%d days, %d cases total)", out / "cases.csv",
             len(series), series.total)
    return 0


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    out = _run_dir(args)
    series, cases_out = _get_cases(args, config, out)
    vector = _load_params(config, args.params)
    demand = replicate(config, series, vector, master_seed=args.seed,
                       threads=args.threads)
    save_demand(demand, out / "demand.csv")
    outputs = {"demand": "demand.csv"}
    if cases_out:
        outputs["cases"] = cases_out
    if args.trace:
        result = simulate_once(config, series, vector, seed=args.seed, keep_paths=True)
        write_paths(result.paths, out / "paths.jsonl")
        outputs["trace"] = "paths.jsonl"
    _write_manifest(out, args, outputs)
    log.info("wrote %s", out / "demand.csv")
    return 0


def cmd_optimize(args) -> int:
    config = _load_config(args.config)
    out = _run_dir(args)
    series, cases_out = _get_cases(args, config, out)
    objective = ObjectiveSpec.from_scenario(config, series, threads=args.threads)
    checkpoint = out / "checkpoint.json"
    if args.resume and not checkpoint.exists():
        raise ParameterError(f"--resume given but {checkpoint} does not exist")

    best_so_far = [np.inf]

    def progress(i, rec):
        if rec.epsilon < best_so_far[0]:
            best_so_far[0] = rec.epsilon
        log.debug("eval %d: epsilon=%.4f (best %.4f)", i, rec.epsilon, best_so_far[0])
        if i % 10 == 0:
            log.info("%d/%d evaluations, best epsilon %.4f", i, args.budget,
                     best_so_far[0])

    result = optimize(
        objective,
        budget=args.budget,
        seed=args.seed,
        design_size=args.design_size,
        checkpoint_path=checkpoint,
        resume=args.resume,
        callback=progress,
    )
    write_eval_log(result.records, out / "eval_log.csv")
    best = {
        "epsilon": result.best_epsilon,
        "params": config.registry.vector(result.best_values).to_dict(),
    }
    with open(out / "best_params.json", "w", encoding="utf-8") as fh:
        json.dump(best, fh, indent=2)
        fh.write("\n")
    outputs = {
        "eval_log": "eval_log.csv",
        "best_params": "best_params.json",
        "checkpoint": "checkpoint.json",
    }
    if cases_out:
        outputs["cases"] = cases_out
    _write_manifest(out, args, outputs)
    log.info("best epsilon %.4f after %d evaluations", result.best_epsilon,
             result.n_evaluations)
    return 0


def _pick_contour_vars(args, config, report, tree):
    if args.vars:
        parts = [v.strip() for v in args.vars.split(",")]
        if len(parts) != 2:
            raise ParameterError(f"--vars needs exactly two names, got {args.vars!r}")
        return parts[0], parts[1]
    ranked = sorted(
        (r for r in report.rows if r.variable != "(Intercept)"),
        key=lambda r: (r.p_value, r.variable),
    )
    names = [r.variable for r in ranked]
    for name in tree.used_features():
        if name not in names:
            names.append(name)
    for name in config.registry.names():
        if name not in names:
            names.append(name)
    if len(names) < 2:
        raise AnalysisError("fewer than two candidate variables for the contour")
    return names[0], names[1]


def cmd_analyze(args) -> int:
    config = _load_config(args.config)
    out = _run_dir(args)
    frame = read_eval_log(args.log)
    d = len(config.registry)
    x_cols = [f"x_{j}" for j in range(1, d + 1)]
    missing = [c for c in x_cols if c not in frame.columns]
    if missing:
        raise StructuralError(
            f"evaluation log has {sum(c.startswith('x_') for c in frame.columns)} "
            f"coordinate columns but the scenario needs {d}"
        )
    X = frame[x_cols].to_numpy(dtype=float)
    y = frame["epsilon"].to_numpy(dtype=float)
    names = list(config.registry.names())

    report = stepwise_regression(X, y, feature_names=names, alpha=args.alpha)
    with open(out / "regression.md", "w", encoding="utf-8") as fh:
        fh.write(report.to_markdown())
    report.to_csv(out / "regression.csv")

    tree = fit_tree(X, y, feature_names=names, max_depth=args.max_depth,
                    min_leaf=args.min_leaf)
    with open(out / "tree.txt", "w", encoding="utf-8") as fh:
        fh.write(tree_to_text(tree.tree_))
    with open(out / "tree.dot", "w", encoding="utf-8") as fh:
        fh.write(tree_to_dot(tree.tree_))

    var_x, var_y = _pick_contour_vars(args, config, report, tree)
    try:
        surrogate = Kriging(random_state=args.seed).fit(X, y)
    except FitError as exc:
        raise AnalysisError(f"cannot fit a surrogate to the log: {exc}") from exc
    grid = contour_grid(
        lambda p: float(surrogate.predict(p[None, :])[0]),
        config.registry,
        var_x,
        var_y,
        anchor=config.registry.vector(X[int(np.argmin(y))]),
        grid_size=args.grid,
    )
    grid.to_csv(out / "contour.csv")

    _write_manifest(out, args, {
        "regression_md": "regression.md",
        "regression_csv": "regression.csv",
        "tree_text": "tree.txt",
        "tree_dot": "tree.dot",
        "contour": "contour.csv",
    })
    log.info("selected variables: %s", ", ".join(report.selected) or "(none)")
    log.info("contour over %s and %s", var_x, var_y)
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wardflow",
        description="Hospital resource demand simulation and calibration.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="scenario JSON (defaults to the built-in scenario)")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out", default=None,
                       help="output directory (default runs/<stamp>-seed<seed>)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for replications")

    p = sub.add_parser("generate", help="write a synthetic daily case series")
    common(p)
    p.add_argument("--lam", type=float, default=4.0,
                   help="mean daily background case count")
    p.add_argument("--peak", action="append", type=_parse_peak, default=None,
                   metavar="DAY:COUNT", help="extra cases on one day (repeatable)")

    p = sub.add_parser("simulate", help="simulate demand at fixed parameters")
    common(p)
    p.add_argument("--cases", default=None, help="case series CSV (date,count)")
    p.add_argument("--params", default=None,
                   help="JSON parameter values (defaults otherwise)")
    p.add_argument("--trace", action="store_true",
                   help="also write per-patient paths as JSONL")

    p = sub.add_parser("optimize", help="calibrate parameters against the reference")
    common(p)
    p.add_argument("--cases", default=None, help="case series CSV (date,count)")
    p.add_argument("--budget", type=int, default=200, help="total evaluations")
    p.add_argument("--design-size", type=int, default=None,
                   help="initial space-filling design size (default max(2d, 10))")
    p.add_argument("--resume", action="store_true",
                   help="continue from the checkpoint in the output directory")

    p = sub.add_parser("analyze", help="sensitivity analysis of an evaluation log")
    common(p)
    p.add_argument("--log", required=True, help="evaluation log CSV")
    p.add_argument("--alpha", type=float, default=0.05,
                   help="significance level for backward elimination")
    p.add_argument("--max-depth", type=int, default=4, help="regression tree depth")
    p.add_argument("--min-leaf", type=int, default=20,
                   help="minimum samples per tree leaf")
    p.add_argument("--grid", type=int, default=11, help="contour grid points per axis")
    p.add_argument("--vars", default=None, metavar="NAME,NAME",
                   help="contour variables (default: two most significant)")
    return parser


_DISPATCH = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except _USAGE_ERRORS as exc:
        log.error("%s", exc)
        return 2
    except _RUNTIME_ERRORS as exc:
        log.error("%s", exc)
        return 1
    except WardflowError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
