"""Online kernel change-point detection with the scan B-statistic.

Modules
-------
kernel       RBF and polynomial kernels, median bandwidth heuristic
mmd          four-point U-statistic kernel and the unbiased block MMD^2
detector     streaming scan B-statistic, null variance, stopping rule
calibration  analytic threshold-for-ARL map and Monte Carlo run lengths
baselines    Hotelling T^2 and Gaussian GLR comparison statistics
simgen       seeded synthetic streams for the benchmark scenarios
harness      detection-delay experiments, sweeps and CSV output
"""
from .baselines import StatisticDetector, fit_reference, glr_stat, hotelling_t2
from .calibration import (arl_approx, calibrate_threshold_by_simulation, nu, simulate_arl,
                          threshold_for_arl)
from .detector import (DetectorConfig, ScanBDetector, draw_reference_blocks,
                       estimate_variance_null, sample_tuples, scan_path, scan_statistic)
from .harness import ExperimentPlan, emit_results, run_edd, run_sweep
from .kernel import KernelSpec, eval_kernel, median_bandwidth
from .mmd import h_statistic, mmd2u_block
from .simgen import (StreamSpec, generate, generate_reference_pool, make_rng,
                     sample_post_change, sample_pre_change)

__version__ = "0.1.0"

__all__ = [
    "KernelSpec",
    "eval_kernel",
    "median_bandwidth",
    "h_statistic",
    "mmd2u_block",
    "DetectorConfig",
    "ScanBDetector",
    "draw_reference_blocks",
    "sample_tuples",
    "estimate_variance_null",
    "scan_statistic",
    "scan_path",
    "nu",
    "arl_approx",
    "threshold_for_arl",
    "simulate_arl",
    "calibrate_threshold_by_simulation",
    "fit_reference",
    "hotelling_t2",
    "glr_stat",
    "StatisticDetector",
    "StreamSpec",
    "generate",
    "generate_reference_pool",
    "make_rng",
    "sample_pre_change",
    "sample_post_change",
    "ExperimentPlan",
    "run_edd",
    "run_sweep",
    "emit_results",
]
