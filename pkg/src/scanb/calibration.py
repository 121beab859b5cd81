"""Threshold calibration: analytic ARL approximation and Monte Carlo run lengths."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erf, ndtr

from .errors import CalibrationError, InputError, NumericalError

__all__ = [
    "ArlQuery",
    "ArlResult",
    "nu",
    "arl_approx",
    "threshold_for_arl",
    "first_exceedance",
    "simulate_arl",
    "calibrate_threshold_by_simulation",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ArlQuery:
    target_arl: float
    B0: int = 20

    def __post_init__(self):
        if not self.target_arl > 1:
            raise InputError(f"target ARL must be > 1, got {self.target_arl}")
        if self.B0 < 2:
            raise InputError(f"B0 must be >= 2, got {self.B0}")


@dataclass(frozen=True)
class ArlResult:
    """Run lengths of ``reps`` null streams, censored at ``horizon``."""

    run_lengths: np.ndarray
    censored: np.ndarray
    threshold: float
    horizon: int

    @property
    def reps(self) -> int:
        return len(self.run_lengths)

    @property
    def mean(self) -> float:
        return float(np.mean(self.run_lengths))

    @property
    def stderr(self) -> float:
        if self.reps < 2:
            return float("nan")
        return float(np.std(self.run_lengths, ddof=1) / math.sqrt(self.reps))

    @property
    def n_censored(self) -> int:
        return int(np.sum(self.censored))

    @property
    def heavily_censored(self) -> bool:
        return self.n_censored > 0.2 * self.reps


def nu(mu: float) -> float:
    """Overshoot correction ``(2/mu)(Phi(mu/2) - 1/2) / ((mu/2) Phi(mu/2) + phi(mu/2))``."""
    mu = float(mu)
    if not mu > 0:
        raise InputError(f"nu is defined for mu > 0, got {mu}")
    half = mu / 2.0
    # Phi(x) - 1/2 via erf avoids cancellation for small mu
    numerator = (2.0 / mu) * 0.5 * erf(half / math.sqrt(2.0))
    denominator = half * ndtr(half) + math.exp(-0.5 * half * half) / _SQRT_2PI
    return float(numerator / denominator)


def _log_arl(b: float, B0: int) -> float:
    c = (2 * B0 - 1) / (_SQRT_2PI * B0 * (B0 - 1))
    mu = b * math.sqrt(2.0 * (2 * B0 - 1) / (B0 * (B0 - 1)))
    return b * b / 2.0 - math.log(b) - math.log(c * nu(mu))


def arl_approx(b: float, B0: int) -> float:
    """Approximate average run length of the normalised scan statistic at threshold ``b``."""
    if not b > 0:
        raise InputError(f"threshold must be > 0, got {b}")
    if B0 < 2:
        raise InputError(f"B0 must be >= 2, got {B0}")
    return math.exp(_log_arl(b, B0))


def _increasing_branch_start(B0: int) -> float:
    # arl_approx falls for small b (the 1/b factor) before rising; only the
    # rising branch is a usable threshold-to-ARL map.
    res = minimize_scalar(lambda b: _log_arl(b, B0), bounds=(1e-3, 10.0), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)


def threshold_for_arl(query: ArlQuery | float, B0: int | None = None, rtol: float = 1e-6) -> float:
    """Invert :func:`arl_approx` by bisection on its increasing branch.

    Accepts an :class:`ArlQuery` or ``(target_arl, B0)``.
    """
    if not isinstance(query, ArlQuery):
        query = ArlQuery(float(query), 20 if B0 is None else int(B0))
    B0 = query.B0
    target = math.log(query.target_arl)
    lo = max(0.1, _increasing_branch_start(B0))
    hi = 10.0
    if _log_arl(lo, B0) > target:
        raise NumericalError(
            f"target ARL {query.target_arl} is below the smallest value the approximation "
            f"attains on its increasing branch ({arl_approx(lo, B0):.4g} at b={lo:.4g}, B0={B0})")
    for _ in range(200):
        if _log_arl(hi, B0) >= target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalError(f"could not bracket target ARL {query.target_arl} for B0={B0}")
    # |log ratio| < rtol implies relative ARL error below ~rtol
    tol = math.log1p(rtol)
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        f = _log_arl(mid, B0) - target
        if abs(f) < tol:
            return mid
        if f < 0:
            lo = mid
        else:
            hi = mid
    raise NumericalError(f"bisection did not converge for target ARL {query.target_arl}")


def first_exceedance(path: np.ndarray, threshold: float) -> int | None:
    """1-based index of the first entry strictly above ``threshold``."""
    hits = np.flatnonzero(np.asarray(path) > threshold)
    return int(hits[0]) + 1 if hits.size else None


PathFn = Callable[[int, int], np.ndarray]


def simulate_arl(statistic_path: PathFn, threshold: float, reps: int, horizon: int,
                 paths: list[np.ndarray] | None = None) -> ArlResult:
    """Monte Carlo run lengths of a statistic on null streams.

    ``statistic_path(rep, horizon)`` returns the statistic's values on the
    ``rep``-th independent null stream, one per tested step (at most
    ``horizon`` of them).  The replication index is the only source of
    randomness, so results do not depend on evaluation order.  Pre-computed
    ``paths`` may be passed to reuse the same null streams.
    """
    if reps < 1 or horizon < 1:
        raise InputError("reps and horizon must be >= 1")
    if paths is None:
        paths = [statistic_path(r, horizon) for r in range(reps)]
    lengths = np.empty(reps, dtype=np.int64)
    censored = np.zeros(reps, dtype=bool)
    for r, path in enumerate(paths[:reps]):
        hit = first_exceedance(np.asarray(path)[:horizon], threshold)
        if hit is None:
            lengths[r], censored[r] = horizon, True
        else:
            lengths[r] = hit
    return ArlResult(lengths, censored, float(threshold), int(horizon))


def _empirical_arl(paths, threshold, horizon):
    return simulate_arl(None, threshold, len(paths), horizon, paths=paths).mean


def calibrate_threshold_by_simulation(statistic_path: PathFn, target_arl: float, reps: int,
                                      horizon: int | None = None, rtol: float = 0.1,
                                      max_iter: int = 100) -> float:
    """Threshold whose simulated ARL matches ``target_arl`` within ``rtol``.

    The null streams are simulated once and reused for every bisection
    step, so the empirical ARL is monotone in the threshold.  If the search
    still fails the replication count is doubled once before giving up.
    """
    if not target_arl >= 10:
        raise InputError(f"target ARL must be >= 10, got {target_arl}")
    if horizon is None:
        horizon = int(10 * target_arl)
    for attempt, n in enumerate((reps, 2 * reps)):
        paths = [np.asarray(statistic_path(r, horizon)) for r in range(n)]
        peak = max(float(np.max(p)) if len(p) else -np.inf for p in paths)
        lo = min(float(np.min(p)) if len(p) else np.inf for p in paths) - 1.0
        hi = peak + 1.0
        if _empirical_arl(paths, hi, horizon) < target_arl:
            raise CalibrationError(
                f"horizon {horizon} too short to reach target ARL {target_arl}")
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            arl = _empirical_arl(paths, mid, horizon)
            if abs(arl - target_arl) <= rtol * target_arl:
                return mid
            if arl < target_arl:
                lo = mid
            else:
                hi = mid
    raise CalibrationError(
        f"no threshold reproduces ARL {target_arl} within {rtol:.0%} "
        f"(last bracket [{lo:.6g}, {hi:.6g}])")
