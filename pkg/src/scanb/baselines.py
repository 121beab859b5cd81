"""Parametric comparison statistics: windowed Hotelling T^2 and Gaussian GLR."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .detector import Decision
from .errors import DegenerateDataError, InputError
from .kernel import as_samples

__all__ = [
    "GaussianReference",
    "fit_reference",
    "hotelling_t2",
    "hotelling_path",
    "glr_stat",
    "glr_path",
    "StatisticDetector",
]


@dataclass(frozen=True, eq=False)
class GaussianReference:
    mu0: np.ndarray
    sigma0: np.ndarray
    sigma0_inverse: np.ndarray

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]


def fit_reference(samples) -> GaussianReference:
    """Sample mean and (n-1)-denominator covariance of pre-change data."""
    X = as_samples(samples)
    n, d = X.shape
    if n <= d:
        raise InputError(f"need more samples than dimensions, got n={n}, d={d}")
    mu0 = X.mean(axis=0)
    sigma0 = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    try:
        factor = cho_factor(sigma0, lower=True)
    except np.linalg.LinAlgError:
        raise DegenerateDataError("reference covariance is singular") from None
    if np.min(np.diag(factor[0])) <= 1e-12 * np.sqrt(np.max(np.diag(sigma0)) or 1.0):
        raise DegenerateDataError("reference covariance is singular")
    inverse = cho_solve(factor, np.eye(d))
    return GaussianReference(mu0, sigma0, 0.5 * (inverse + inverse.T))


def hotelling_t2(window, ref: GaussianReference) -> float:
    """``B0 (xbar - mu0)^T Sigma0^{-1} (xbar - mu0)`` for the window mean ``xbar``."""
    W = as_samples(window)
    if W.shape[1] != ref.dim:
        raise InputError(f"window dimension {W.shape[1]} does not match reference {ref.dim}")
    diff = W.mean(axis=0) - ref.mu0
    return float(W.shape[0] * diff @ ref.sigma0_inverse @ diff)


def hotelling_path(stream, ref: GaussianReference, B0: int) -> np.ndarray:
    """T^2 for every full window of ``stream``; entry ``k`` ends at index ``B0 - 1 + k``."""
    S = as_samples(stream, ref.dim)
    if S.shape[0] < B0:
        return np.empty(0)
    c = np.vstack([np.zeros((1, ref.dim)), np.cumsum(S, axis=0)])
    diff = (c[B0:] - c[:-B0]) / B0 - ref.mu0
    return B0 * np.einsum("ij,jk,ik->i", diff, ref.sigma0_inverse, diff)


def _logdet_spd(covs: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        raise DegenerateDataError("segment covariance is singular") from None
    diag = np.diagonal(L, axis1=-2, axis2=-1)
    if np.any(diag <= 0):
        raise DegenerateDataError("segment covariance is singular")
    return 2.0 * np.log(diag).sum(axis=-1)


def _ml_cov(X: np.ndarray) -> np.ndarray:
    centered = X - X.mean(axis=0)
    return centered.T @ centered / X.shape[0]


def _det_terms(covs: np.ndarray, form: str) -> np.ndarray:
    if form == "logdet":
        return _logdet_spd(covs)
    if form == "determinant":
        return np.linalg.det(covs)
    raise InputError(f"unknown GLR form {form!r}; expected 'logdet' or 'determinant'")


def glr_stat(history, B0: int, form: str = "logdet") -> float:
    """Windowed GLR statistic for a covariance change in the last ``B0`` samples.

    With ``form="logdet"`` (default) this is twice the Gaussian
    log-likelihood ratio of a split at ``t - B0``::

        t logdet S_{1:t} - (t - B0) logdet S_{1:t-B0} - B0 logdet S_{t-B0+1:t}

    each ``S`` the maximum-likelihood covariance about its own segment mean.
    It is nonnegative.  ``form="determinant"`` uses the same combination of
    raw determinants; it reacts to variance increases and mean shifts but
    not to variance decreases, and may be negative.
    """
    H = as_samples(history)
    t, d = H.shape
    if t <= B0 + d or B0 <= d:
        raise InputError(
            f"GLR needs t > B0 + d and B0 > d, got t={t}, B0={B0}, d={d}")
    covs = np.stack([_ml_cov(H), _ml_cov(H[:t - B0]), _ml_cov(H[t - B0:])])
    ld = _det_terms(covs, form)
    return float(t * ld[0] - (t - B0) * ld[1] - B0 * ld[2])


def glr_path(history, B0: int, start: int, form: str = "logdet") -> np.ndarray:
    """:func:`glr_stat` at every ``t`` from ``start`` to ``len(history)`` inclusive.

    Segment moments come from running sums, so the whole path costs one
    batched factorisation (or determinant) per segment type.
    """
    H = as_samples(history)
    T, d = H.shape
    if start <= B0 + d or B0 <= d:
        raise InputError(f"GLR path must start after B0 + d, got start={start}")
    if start > T:
        return np.empty(0)
    # centring leaves every segment covariance unchanged and limits
    # cancellation in the running sums
    H = H - H[:start].mean(axis=0)
    c1 = np.vstack([np.zeros((1, d)), np.cumsum(H, axis=0)])
    c2 = np.concatenate([np.zeros((1, d, d)), np.cumsum(H[:, :, None] * H[:, None, :], axis=0)])
    t = np.arange(start, T + 1)

    def seg_cov(a, b):
        n = (b - a)[:, None]
        m = (c1[b] - c1[a]) / n
        cov = (c2[b] - c2[a]) / n[:, :, None] - m[:, :, None] * m[:, None, :]
        return 0.5 * (cov + np.swapaxes(cov, 1, 2))

    zero = np.zeros_like(t)
    ld_all = _det_terms(seg_cov(zero, t), form)
    ld_pre = _det_terms(seg_cov(zero, t - B0), form)
    ld_win = _det_terms(seg_cov(t - B0, t), form)
    return t * ld_all - (t - B0) * ld_pre - B0 * ld_win


class StatisticDetector:
    """Streaming stopping rule around a parametric statistic.

    ``method`` is ``"hotelling"`` or ``"glr"``.  For GLR the reference data
    is the start of the history.  Alarms when the statistic is strictly
    above ``threshold``.
    """

    def __init__(self, method: str, reference, B0: int, threshold: float,
                 glr_form: str = "logdet"):
        if method not in ("hotelling", "glr"):
            raise InputError(f"unknown method {method!r}")
        self.method = method
        self.B0 = B0
        self.threshold = threshold
        self.glr_form = glr_form
        self._reference = as_samples(reference)
        self.dim = self._reference.shape[1]
        self._ref_fit = fit_reference(self._reference) if method == "hotelling" else None
        self._history = list(self._reference) if method == "glr" else []
        self._window: list[np.ndarray] = []
        self.t = 0
        self.last_statistic: float | None = None

    def step(self, sample) -> Decision:
        x = np.atleast_1d(np.asarray(sample, dtype=np.float64))
        if x.shape != (self.dim,):
            raise InputError(f"sample has shape {x.shape}, expected ({self.dim},)")
        self.t += 1
        self._window = (self._window + [x])[-self.B0:]
        if self.method == "glr":
            self._history.append(x)
        if len(self._window) < self.B0:
            return Decision("not-ready", self.t)
        if self.method == "hotelling":
            value = hotelling_t2(np.array(self._window), self._ref_fit)
        else:
            value = glr_stat(np.array(self._history), self.B0, self.glr_form)
        self.last_statistic = value
        return Decision("alarm" if value > self.threshold else "continue", self.t, value)
