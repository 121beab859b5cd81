"""Monte Carlo detection-delay experiments and one-dimensional parameter sweeps.

Every random quantity is drawn from a generator keyed by
``(base_seed, case, replication, role)``, so a replication produces the same
numbers whatever order or process it runs in, and all methods and parameter
cells of a case see the same pools and streams (paired comparisons).
"""
from __future__ import annotations

import csv
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import fit_reference, glr_path, hotelling_path
from .calibration import (arl_approx, calibrate_threshold_by_simulation, first_exceedance,
                          threshold_for_arl)
from .detector import (REBLOCK_POLICIES, SUBSAMPLING_SCHEMES, DetectorConfig, ScanBDetector,
                       draw_reference_blocks, estimate_variance_null, scan_path)
from .errors import ConfigurationError, InputError, ScanBError
from .kernel import KERNEL_FAMILIES, KernelSpec, median_bandwidth
from .simgen import CASE_DIMENSION, CASES, make_rng, sample_post_change, sample_pre_change

__all__ = [
    "METHODS",
    "GRID_AXES",
    "ExperimentPlan",
    "Cell",
    "EddResult",
    "plan_cells",
    "calibrate_cell",
    "run_replication",
    "run_edd",
    "run_sweep",
    "threshold_curve",
    "emit_results",
    "emit_threshold_curve",
    "read_replications",
    "summarise_rows",
    "REPLICATION_COLUMNS",
    "SUMMARY_COLUMNS",
]

METHODS = ("scanB", "hotelling", "glr")
GRID_AXES = ("B0", "N", "kernel", "sigma_multiplier", "subsampling", "mean_shift")


@dataclass(frozen=True)
class ExperimentPlan:
    methods: tuple = ("scanB",)
    cases: tuple = ("case1-mean-shift",)
    target_arl: float = 500.0
    B0: tuple = (20,)
    N: tuple = (5,)
    kernel: tuple = ("gaussian-rbf",)
    sigma_multiplier: tuple = (1.0,)
    subsampling: tuple = ("random",)
    mean_shift: tuple = (1.0,)
    replications: int = 100
    edd_cap: int = 50
    base_seed: int = 0
    reference_pool_size: int = 500
    tuple_budget: int = 5000
    reblock_policy: str = "fixed-at-init"
    calibration_reps: int = 200
    calibration_horizon: int | None = None
    glr_form: str = "determinant"

    def __post_init__(self):
        for name in ("methods", "cases") + GRID_AXES:
            value = getattr(self, name)
            if isinstance(value, (str, int, float)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
            if not getattr(self, name):
                raise InputError(f"{name} must be non-empty")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise InputError(f"unknown methods {sorted(bad)}; expected {METHODS}")
        bad = set(self.cases) - set(CASES)
        if bad:
            raise InputError(f"unknown cases {sorted(bad)}")
        bad = set(self.kernel) - set(KERNEL_FAMILIES)
        if bad:
            raise InputError(f"unknown kernels {sorted(bad)}")
        bad = set(self.subsampling) - set(SUBSAMPLING_SCHEMES)
        if bad:
            raise InputError(f"unknown subsampling schemes {sorted(bad)}")
        if self.reblock_policy not in REBLOCK_POLICIES:
            raise InputError(f"unknown reblock policy {self.reblock_policy!r}")
        if self.glr_form not in ("determinant", "logdet"):
            raise InputError(f"unknown GLR form {self.glr_form!r}")
        if self.replications < 1 or self.edd_cap < 1:
            raise InputError("replications and edd_cap must be >= 1")
        if not self.target_arl > 1:
            raise InputError("target_arl must be > 1")
        if any(b < 2 for b in self.B0) or any(n < 1 for n in self.N):
            raise InputError("B0 entries must be >= 2 and N entries >= 1")
        if any(not s > 0 for s in self.sigma_multiplier):
            raise InputError("sigma multipliers must be > 0")
        need = max(self.N) * max(self.B0) + 6
        if "scanB" in self.methods and self.reference_pool_size < need:
            raise ConfigurationError(
                f"reference_pool_size {self.reference_pool_size} < N*B0 + 6 = {need}")

    @property
    def horizon(self) -> int:
        if self.calibration_horizon is not None:
            return int(self.calibration_horizon)
        return int(10 * self.target_arl)

    def varying_axes(self) -> list[str]:
        return [a for a in GRID_AXES if len(getattr(self, a)) > 1]


@dataclass(frozen=True)
class Cell:
    method: str
    case: str
    B0: int
    N: int | None = None
    kernel: str | None = None
    sigma_multiplier: float | None = None
    subsampling: str | None = None
    mean_shift: float = 1.0

    @property
    def label(self) -> str:
        parts = [self.method, self.case, f"B0={self.B0}"]
        if self.method == "scanB":
            parts += [f"N={self.N}", self.kernel, f"sigma={self.sigma_multiplier}xmedian",
                      self.subsampling]
        if self.case == "case1-mean-shift":
            parts.append(f"shift={self.mean_shift}")
        return " ".join(parts)


@dataclass
class EddResult:
    """Per-replication delays of one cell; ``None`` marks a censored run."""

    cell: Cell
    threshold: float
    edd_cap: int
    delays: list = field(default_factory=list)

    @property
    def replications(self) -> int:
        return len(self.delays)

    @property
    def detected(self) -> np.ndarray:
        return np.array([d for d in self.delays if d is not None], dtype=float)

    @property
    def n_censored(self) -> int:
        return sum(d is None for d in self.delays)

    @property
    def censoring_fraction(self) -> float:
        return self.n_censored / self.replications if self.delays else 0.0

    def summary(self) -> dict:
        return _summary(self.cell, self.threshold, self.delays)


def plan_cells(plan: ExperimentPlan) -> list[Cell]:
    """Cells in output order: method, then case, then grid axes in :data:`GRID_AXES` order.

    Baselines ignore the scan-statistic axes, so they get one cell per
    ``(B0, mean_shift)`` combination.
    """
    cells = []
    for method in plan.methods:
        for case in plan.cases:
            shifts = plan.mean_shift if case == "case1-mean-shift" else (plan.mean_shift[0],)
            if method == "scanB":
                grid = itertools.product(plan.B0, plan.N, plan.kernel, plan.sigma_multiplier,
                                         plan.subsampling, shifts)
                cells += [Cell(method, case, b, n, k, s, sub, mu)
                          for b, n, k, s, sub, mu in grid]
            else:
                cells += [Cell(method, case, b, mean_shift=mu)
                          for b, mu in itertools.product(plan.B0, shifts)]
    return cells


def _kernel_for(cell: Cell, pool: np.ndarray) -> KernelSpec:
    if cell.kernel == "polynomial":
        return KernelSpec("polynomial")
    return KernelSpec(cell.kernel, cell.sigma_multiplier * median_bandwidth(pool))


def _baseline_null_path(plan: ExperimentPlan, method: str, dim_case: str, B0: int):
    P = plan.reference_pool_size

    def path(rep: int, horizon: int) -> np.ndarray:
        pool = sample_pre_change(dim_case, P, make_rng(plan.base_seed, "calibration", method,
                                                      dim_case, B0, rep, "pool"))
        stream = sample_pre_change(dim_case, horizon + B0 - 1,
                                   make_rng(plan.base_seed, "calibration", method,
                                            dim_case, B0, rep, "stream"))
        if method == "hotelling":
            return hotelling_path(stream, fit_reference(pool), B0)
        return glr_path(np.vstack([pool, stream]), B0, P + B0, plan.glr_form)

    return path


def calibrate_cell(plan: ExperimentPlan, cell: Cell) -> float:
    """Threshold for ``plan.target_arl``: analytic for scanB, simulated for the baselines."""
    if cell.method == "scanB":
        return threshold_for_arl(plan.target_arl, cell.B0)
    # every case but case 5 shares the same 10-d standard normal null
    dim_case = "case5-laplace" if CASE_DIMENSION[cell.case] == 1 else "null-only"
    path = _baseline_null_path(plan, cell.method, dim_case, cell.B0)
    return calibrate_threshold_by_simulation(path, plan.target_arl, plan.calibration_reps,
                                             plan.horizon)


def _replication_data(plan: ExperimentPlan, cell: Cell, rep: int):
    key = (plan.base_seed, cell.case, rep)
    pool = sample_pre_change(cell.case, plan.reference_pool_size, make_rng(*key, "pool"))
    warmup = sample_pre_change(cell.case, cell.B0, make_rng(*key, "warmup"))
    post = sample_post_change(cell.case, plan.edd_cap, make_rng(*key, "stream"),
                              cell.mean_shift)
    return pool, warmup, post


def _scanb_path(plan: ExperimentPlan, cell: Cell, rep: int, pool, stream,
                threshold: float) -> np.ndarray:
    kernel = _kernel_for(cell, pool)
    rng = make_rng(plan.base_seed, cell.case, rep, "detector", cell.B0, cell.N)
    if plan.reblock_policy == "fixed-at-init":
        blocks = draw_reference_blocks(pool, cell.N, cell.B0, rng)
        var = estimate_variance_null(pool, cell.B0, cell.N, cell.subsampling,
                                     plan.tuple_budget, rng, kernel)
        return scan_path(blocks, stream, kernel) / math.sqrt(var.combined)
    config = DetectorConfig(cell.B0, cell.N, kernel, threshold, cell.subsampling,
                            plan.tuple_budget, plan.reblock_policy)
    detector = ScanBDetector(pool, config, seed=rng.bit_generator.seed_seq)
    values = [detector.step(x).statistic for x in stream]
    return np.asarray([v for v in values if v is not None])


def run_replication(plan: ExperimentPlan, cell: Cell, threshold: float, rep: int) -> int | None:
    """Delay in post-change samples for one replication, ``None`` if above the cap.

    The window is pre-filled with ``B0`` pre-change samples, so the first
    tested statistic already contains one post-change sample.
    """
    pool, warmup, post = _replication_data(plan, cell, rep)
    stream = np.vstack([warmup, post])
    if cell.method == "scanB":
        path = _scanb_path(plan, cell, rep, pool, stream, threshold)
    elif cell.method == "hotelling":
        path = hotelling_path(stream, fit_reference(pool), cell.B0)
    else:
        P = len(pool)
        path = np.concatenate([[-np.inf], glr_path(np.vstack([pool, stream]), cell.B0,
                                                    P + cell.B0 + 1, plan.glr_form)])
    # path[0] is the all-pre-change window
    return first_exceedance(path[1:], threshold)


def _run_chunk(args):
    plan, cell, threshold, reps = args
    return [run_replication(plan, cell, threshold, r) for r in reps]


def run_edd(plan: ExperimentPlan, workers: int = 1, order=None, progress=None) -> list[EddResult]:
    """Calibrate and run every cell of ``plan``.

    ``workers > 1`` spreads replications over processes; ``order`` may
    permute the replication indices.  Neither changes the results.
    ``progress(result)`` is called after each finished cell.
    """
    results = []
    thresholds: dict = {}
    pool_ctx = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for cell in plan_cells(plan):
            key = (cell.method, cell.case if cell.method == "scanB" else CASE_DIMENSION[cell.case],
                   cell.B0)
            try:
                if key not in thresholds:
                    thresholds[key] = calibrate_cell(plan, cell)
                threshold = thresholds[key]
                reps = list(range(plan.replications)) if order is None else list(order)
                if sorted(reps) != list(range(plan.replications)):
                    raise InputError("order must be a permutation of the replication indices")
                if pool_ctx is None:
                    delays = dict(zip(reps, _run_chunk((plan, cell, threshold, reps))))
                else:
                    chunks = [reps[i::workers] for i in range(workers)]
                    delays = {}
                    for chunk, out in zip(chunks, pool_ctx.map(
                            _run_chunk, [(plan, cell, threshold, c) for c in chunks])):
                        delays.update(zip(chunk, out))
            except ScanBError as exc:
                raise type(exc)(f"cell [{cell.label}]: {exc}") from exc
            result = EddResult(cell, threshold, plan.edd_cap,
                               [delays[r] for r in range(plan.replications)])
            results.append(result)
            if progress is not None:
                progress(result)
    finally:
        if pool_ctx is not None:
            pool_ctx.shutdown()
    return results


def run_sweep(plan: ExperimentPlan, **kwargs) -> list[EddResult]:
    """:func:`run_edd` restricted to plans varying at most one grid axis."""
    axes = plan.varying_axes()
    if len(axes) > 1:
        raise InputError(f"a sweep varies one grid axis, got {axes}")
    return run_edd(plan, **kwargs)


def threshold_curve(arls, B0s) -> list[dict]:
    """Analytic thresholds over a grid of target ARLs and block sizes."""
    rows = []
    for B0 in B0s:
        for arl in arls:
            b = threshold_for_arl(float(arl), int(B0))
            rows.append({"B0": int(B0), "target_arl": float(arl), "threshold": b,
                         "arl_check": arl_approx(b, int(B0))})
    return rows


# ---- CSV output ----

REPLICATION_COLUMNS = ("method", "case", "B0", "N", "kernel", "sigma_multiplier",
                       "replication", "delay", "censored", "subsampling", "mean_shift")
SUMMARY_COLUMNS = ("method", "case", "B0", "N", "kernel", "sigma_multiplier", "subsampling",
                   "mean_shift", "threshold", "replications", "detected", "censored",
                   "censoring_fraction", "median_delay", "mean_delay", "sd_delay")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _cell_fields(cell: Cell) -> dict:
    return {"method": cell.method, "case": cell.case, "B0": cell.B0, "N": cell.N,
            "kernel": cell.kernel, "sigma_multiplier": cell.sigma_multiplier,
            "subsampling": cell.subsampling, "mean_shift": float(cell.mean_shift)}


def _summary(cell: Cell, threshold: float, delays) -> dict:
    det = np.array([d for d in delays if d is not None], dtype=float)
    n = len(delays)
    row = _cell_fields(cell)
    row.update({
        "threshold": float(threshold),
        "replications": n,
        "detected": int(det.size),
        "censored": n - int(det.size),
        "censoring_fraction": (n - det.size) / n if n else 0.0,
        "median_delay": float(np.median(det)) if det.size else float("nan"),
        "mean_delay": float(np.mean(det)) if det.size else float("nan"),
        "sd_delay": float(np.std(det, ddof=1)) if det.size > 1 else float("nan"),
    })
    return row


def emit_results(results: list[EddResult], path) -> tuple[str, str]:
    """Write ``edd_replications.csv`` and ``edd_summary.csv`` into directory ``path``."""
    os.makedirs(path, exist_ok=True)
    rep_path = os.path.join(path, "edd_replications.csv")
    sum_path = os.path.join(path, "edd_summary.csv")
    try:
        with open(rep_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPLICATION_COLUMNS)
            for res in results:
                base = _cell_fields(res.cell)
                for r, d in enumerate(res.delays):
                    row = dict(base, replication=r, delay=d, censored=int(d is None))
                    writer.writerow([_fmt(row[c]) for c in REPLICATION_COLUMNS])
        with open(sum_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_COLUMNS)
            for res in results:
                row = res.summary()
                writer.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write results under {path}: {exc}") from exc
    return rep_path, sum_path


def emit_threshold_curve(rows: list[dict], path) -> str:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("B0", "target_arl", "threshold", "arl_check"))
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in ("B0", "target_arl", "threshold",
                                                     "arl_check")])
    return path


def _parse(value: str, kind):
    if value == "":
        return None
    return kind(value)


def read_replications(path) -> list[dict]:
    """Parse an ``edd_replications.csv`` back into typed rows."""
    kinds = {"B0": int, "N": int, "sigma_multiplier": float, "replication": int,
             "delay": int, "censored": int, "mean_shift": float}
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: _parse(v, kinds.get(k, str)) for k, v in row.items()}
                for row in csv.DictReader(fh)]


def summarise_rows(rows: list[dict], thresholds: dict) -> list[dict]:
    """Recompute summary rows from parsed replication rows.

    ``thresholds`` maps a :class:`Cell` to its threshold, which the
    per-replication file does not carry.
    """
    groups: dict = {}
    for row in rows:
        cell = Cell(row["method"], row["case"], row["B0"], row["N"], row["kernel"],
                    row["sigma_multiplier"], row["subsampling"], row["mean_shift"])
        groups.setdefault(cell, []).append(None if row["censored"] else row["delay"])
    return [_summary(cell, thresholds[cell], delays) for cell, delays in groups.items()]
