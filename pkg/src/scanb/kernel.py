"""RKHS kernels and the median bandwidth heuristic."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DegenerateDataError, InputError

__all__ = [
    "KERNEL_FAMILIES",
    "KernelSpec",
    "eval_kernel",
    "kernel_rows",
    "gram",
    "median_bandwidth",
    "as_samples",
]

KERNEL_FAMILIES = ("gaussian-rbf", "laplacian-rbf", "polynomial")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with its parameters.

    ``bandwidth`` is used by the two RBF families, ``offset`` and ``degree``
    by the polynomial kernel ``(<x, y> + offset) ** degree``.
    """

    family: str = "gaussian-rbf"
    bandwidth: float = 1.0
    offset: float = 1.0
    degree: int = 2

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InputError(
                f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}")
        if self.family == "polynomial":
            if not self.offset > 0:
                raise InputError(f"polynomial offset must be > 0, got {self.offset}")
            if int(self.degree) != self.degree or self.degree < 1:
                raise InputError(f"polynomial degree must be a positive integer, got {self.degree}")
        elif not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InputError(f"RBF bandwidth must be a positive finite number, got {self.bandwidth}")

    @property
    def is_rbf(self) -> bool:
        return self.family != "polynomial"

    def with_bandwidth(self, bandwidth: float) -> "KernelSpec":
        return KernelSpec(self.family, float(bandwidth), self.offset, self.degree)


def as_samples(samples, dim: int | None = None) -> np.ndarray:
    """Coerce ``samples`` to a float64 ``(n, d)`` array.

    A 1-d input is read as n scalar observations.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise InputError(f"samples must be 1-d or 2-d, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InputError(f"expected dimension {dim}, got {arr.shape[1]}")
    return arr


def _as_point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=np.float64))


def _from_sq_dists(spec: KernelSpec, sq: np.ndarray) -> np.ndarray:
    if spec.family == "gaussian-rbf":
        return np.exp(-sq / (2.0 * spec.bandwidth ** 2))
    # laplacian-rbf
    return np.exp(-np.sqrt(sq) / spec.bandwidth)


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """k(x, y) for two single observations."""
    x, y = _as_point(x), _as_point(y)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if spec.family == "polynomial":
        return float((x @ y + spec.offset) ** spec.degree)
    diff = x - y
    return float(_from_sq_dists(spec, diff @ diff))


def kernel_rows(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise kernel values ``k(A[i], B[i])`` for two ``(m, d)`` arrays."""
    if A.shape != B.shape:
        raise InputError(f"dimension mismatch: {A.shape} vs {B.shape}")
    if spec.family == "polynomial":
        return (np.einsum("ij,ij->i", A, B) + spec.offset) ** spec.degree
    diff = A - B
    return _from_sq_dists(spec, np.einsum("ij,ij->i", diff, diff))


def gram(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(A[i], B[j])``."""
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.family == "polynomial":
        return (A @ B.T + spec.offset) ** spec.degree
    # explicit differences keep k(x, x) == 1 exactly
    diff = A[:, None, :] - B[None, :, :]
    return _from_sq_dists(spec, np.einsum("ijk,ijk->ij", diff, diff))


def median_bandwidth(samples) -> float:
    """Median of all pairwise Euclidean distances between ``samples``.

    Raises
    ------
    InputError
        Fewer than two samples.
    DegenerateDataError
        The median distance is zero.
    """
    X = as_samples(samples)
    if X.shape[0] < 2:
        raise InputError("median bandwidth needs at least 2 samples")
    med = float(np.median(pdist(X)))
    if med <= 0.0:
        raise DegenerateDataError(
            "median pairwise distance is 0; supply an explicit bandwidth")
    return med
