"""Command-line entry point: ``scanb {calibrate,detect,generate,experiment}``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .calibration import ArlQuery, arl_approx, threshold_for_arl
from .detector import REBLOCK_POLICIES, SUBSAMPLING_SCHEMES, DetectorConfig, ScanBDetector
from .errors import (CalibrationError, ConfigurationError, CsvFormatError, InputError,
                     NumericalError, ScanBError)
from .harness import (GRID_AXES, ExperimentPlan, emit_results, emit_threshold_curve, run_edd,
                      run_sweep, threshold_curve)
from .kernel import KERNEL_FAMILIES, KernelSpec, median_bandwidth
from .simgen import CASES, StreamSpec, generate, generate_reference_pool, read_csv, write_csv

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("scanb")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

# strict config schema: section -> allowed keys
PLAN_KEYS = {"methods", "cases", "target_arl", "replications", "edd_cap", "base_seed",
             "reference_pool_size", "tuple_budget", "reblock_policy", "calibration_reps",
             "calibration_horizon", "glr_form", "grid"}
SCHEMA = {
    "plan": PLAN_KEYS,
    "threshold_curve": {"arl", "B0"},
    "detector": {"B0", "N", "kernel", "sigma", "sigma_multiplier", "threshold", "arl", "seed",
                 "subsampling", "tuple_budget", "reblock_policy"},
    "output": {"dir"},
    "run": {"workers", "sweep", "full_protocol", "verbosity"},
}
FULL_PROTOCOL = {"replications": 500, "target_arl": 5000.0}


class UsageError(Exception):
    pass


def load_config(path) -> dict:
    """Parse a TOML config and reject unknown sections or keys."""
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config {path} is not valid TOML: {exc}") from None
    return validate_config(cfg)


def validate_config(cfg: dict) -> dict:
    """Reject unknown sections or keys."""
    for section, body in cfg.items():
        if section not in SCHEMA:
            raise UsageError(f"unknown config key '{section}'")
        if not isinstance(body, dict):
            raise UsageError(f"config key '{section}' must be a section")
        for key in body:
            if key not in SCHEMA[section]:
                raise UsageError(f"unknown config key '{section}.{key}'")
    grid = cfg.get("plan", {}).get("grid", {})
    if not isinstance(grid, dict):
        raise UsageError("config key 'plan.grid' must be a section")
    for key in grid:
        if key not in GRID_AXES:
            raise UsageError(f"unknown config key 'plan.grid.{key}'")
    return cfg


def apply_overrides(cfg: dict, items) -> dict:
    """Apply ``section.key=value`` overrides; values are read as TOML, else as strings."""
    for item in items or ():
        path, sep, raw = item.partition("=")
        keys = path.strip().split(".")
        if not sep or len(keys) < 2 or not all(keys):
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw
        node = cfg
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise UsageError(f"--set {path}: '{k}' is not a section")
        node[keys[-1]] = value
    return cfg


def _setup_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr)


# ---- calibrate ----

def cmd_calibrate(args) -> int:
    if not args.arl > 1:
        raise UsageError(f"--arl must be > 1 (average run length), got {args.arl}")
    if args.b0 < 2:
        raise UsageError(f"--b0 must be >= 2, got {args.b0}")
    b = threshold_for_arl(ArlQuery(args.arl, args.b0))
    print(f"threshold={b!r}")
    print(f"arl_check={arl_approx(b, args.b0)!r}")
    return EXIT_OK


# ---- detect ----

def _detector_settings(args, cfg: dict) -> dict:
    section = cfg.get("detector", {})
    out = {
        "B0": 20, "N": 5, "kernel": "gaussian-rbf", "sigma": None, "sigma_multiplier": 1.0,
        "threshold": None, "arl": 5000.0, "seed": 0, "subsampling": "random",
        "tuple_budget": 5000, "reblock_policy": "fixed-at-init",
    }
    out.update(section)
    flags = {"B0": args.b0, "N": args.n_blocks, "kernel": args.kernel, "sigma": args.sigma,
             "sigma_multiplier": args.sigma_multiplier, "threshold": args.threshold,
             "arl": args.arl, "seed": args.seed, "subsampling": args.subsampling,
             "tuple_budget": args.tuples, "reblock_policy": args.reblock}
    out.update({k: v for k, v in flags.items() if v is not None})
    if args.threshold is None and args.arl is not None:
        out["threshold"] = None  # an explicit --arl beats a config threshold
    return out


def cmd_detect(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    cfg = validate_config(apply_overrides(cfg, args.set))
    s = _detector_settings(args, cfg)
    try:
        pool = read_csv(args.pool)
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if exc.width_mismatch else EXIT_RUNTIME
    try:
        stream = read_csv(args.stream, dim=pool.shape[1])
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if exc.width_mismatch else EXIT_RUNTIME

    if s["kernel"] == "polynomial":
        kernel = KernelSpec("polynomial")
    else:
        sigma = s["sigma"] if s["sigma"] is not None else (
            s["sigma_multiplier"] * median_bandwidth(pool))
        kernel = KernelSpec(s["kernel"], float(sigma))
    threshold = s["threshold"]
    if threshold is None:
        threshold = threshold_for_arl(ArlQuery(float(s["arl"]), int(s["B0"])))
    config = DetectorConfig(int(s["B0"]), int(s["N"]), kernel, float(threshold),
                            s["subsampling"], int(s["tuple_budget"]), s["reblock_policy"])
    print(f"seed={s['seed']}")
    print(f"threshold={threshold!r}")
    detector = ScanBDetector(pool, config, seed=int(s["seed"]))
    decision = None
    for x in stream:
        decision = detector.step(x)
        if decision.alarm:
            print(f"alarm at t={decision.t} statistic={decision.statistic!r}")
            return EXIT_OK
    final = "nan" if detector.last_statistic is None else repr(detector.last_statistic)
    print(f"no alarm final_statistic={final}")
    return EXIT_OK


# ---- generate ----

def cmd_generate(args) -> int:
    if args.pool:
        data = generate_reference_pool(args.case, args.length, args.seed)
    else:
        if args.tau is None:
            raise UsageError("--tau is required unless --pool is given")
        if not 0 <= args.tau <= args.length:
            raise UsageError(f"--tau must lie in [0, --length], got {args.tau} > {args.length}")
        data = generate(StreamSpec(args.case, args.tau, args.length, args.seed, args.mean_shift))
    write_csv(args.out, data, header=args.header)
    print(f"seed={args.seed}")
    print(f"wrote {data.shape[0]} rows x {data.shape[1]} columns to {args.out}")
    return EXIT_OK


# ---- experiment ----

def build_plan(cfg: dict, args) -> tuple[ExperimentPlan, dict]:
    plan_cfg = dict(cfg.get("plan", {}))
    grid = plan_cfg.pop("grid", {})
    run_cfg = dict(cfg.get("run", {}))
    if args.full_protocol or run_cfg.get("full_protocol", False):
        plan_cfg.update(FULL_PROTOCOL)
    overrides = {"base_seed": args.seed, "replications": args.replications,
                 "target_arl": args.arl}
    plan_cfg.update({k: v for k, v in overrides.items() if v is not None})
    for axis, values in grid.items():
        plan_cfg[axis] = tuple(values) if isinstance(values, list) else (values,)
    for key in ("methods", "cases"):
        if key in plan_cfg and isinstance(plan_cfg[key], list):
            plan_cfg[key] = tuple(plan_cfg[key])
    if args.b0 is not None:
        plan_cfg["B0"] = (args.b0,)
    if args.workers is not None:
        run_cfg["workers"] = args.workers
    if args.sweep:
        run_cfg["sweep"] = True
    return ExperimentPlan(**plan_cfg), run_cfg


def cmd_experiment(args) -> int:
    cfg = validate_config(apply_overrides(load_config(args.config), args.set))
    try:
        plan, run_cfg = build_plan(cfg, args)
    except (InputError, ConfigurationError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    out_dir = args.out or cfg.get("output", {}).get("dir")
    if not out_dir:
        raise UsageError("no output directory: pass --out or set output.dir")
    _setup_logging(int(run_cfg.get("verbosity", 1)))
    print(f"base_seed={plan.base_seed}")

    def report(res):
        s = res.summary()
        print(f"{res.cell.label}: threshold={s['threshold']:.4f} "
              f"censored={s['censored']}/{s['replications']} "
              f"mean_delay={s['mean_delay']:.2f} median_delay={s['median_delay']:.1f}",
              flush=True)

    runner = run_sweep if run_cfg.get("sweep", False) else run_edd
    try:
        results = runner(plan, workers=int(run_cfg.get("workers", 1)), progress=report)
    except InputError as exc:
        raise UsageError(str(exc)) from None
    rep_path, sum_path = emit_results(results, out_dir)
    curve = cfg.get("threshold_curve")
    if curve:
        rows = threshold_curve(curve.get("arl", [1e2, 1e3, 1e4, 1e5]), curve.get("B0", [20]))
        emit_threshold_curve(rows, os.path.join(out_dir, "threshold_curve.csv"))
    meta = {"plan": {k: (list(v) if isinstance(v, tuple) else v)
                     for k, v in vars(plan).items()},
            "note": "grid values (N, B0, kernel, sigma multiplier, mean shift) are "
                    "choices made for this package",
            "files": [os.path.basename(rep_path), os.path.basename(sum_path)]}
    with open(os.path.join(out_dir, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scanb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="threshold for a target ARL")
    p.add_argument("--arl", type=float, required=True)
    p.add_argument("--b0", type=int, default=20)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="run the scan B detector over a stream CSV")
    p.add_argument("--stream", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--config")
    p.add_argument("--b0", type=int)
    p.add_argument("--n-blocks", type=int)
    p.add_argument("--kernel", choices=KERNEL_FAMILIES)
    p.add_argument("--sigma", type=float, help="explicit bandwidth")
    p.add_argument("--sigma-multiplier", type=float, help="bandwidth as a multiple of the median")
    p.add_argument("--threshold", type=float)
    p.add_argument("--arl", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--subsampling", choices=SUBSAMPLING_SCHEMES)
    p.add_argument("--tuples", type=int)
    p.add_argument("--reblock", choices=REBLOCK_POLICIES)
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override any config key, e.g. detector.N=10 (repeatable)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("generate", help="write a synthetic stream CSV")
    p.add_argument("--case", required=True, choices=CASES)
    p.add_argument("--tau", type=int)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-shift", type=float, default=1.0)
    p.add_argument("--pool", action="store_true", help="write pre-change reference data")
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--arl", type=float)
    p.add_argument("--b0", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--sweep", action="store_true")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override any config key, e.g. plan.grid.N=[5,10] (repeatable)")
    p.add_argument("--full-protocol", action="store_true",
                   help="500 replications at target ARL 5000")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InputError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, CalibrationError, ScanBError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
