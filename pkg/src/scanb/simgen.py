"""Seeded synthetic streams for the five distribution-shift scenarios."""
from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CsvFormatError, InputError

__all__ = [
    "CASES",
    "CASE_DIMENSION",
    "StreamSpec",
    "make_rng",
    "sample_pre_change",
    "sample_post_change",
    "generate",
    "generate_reference_pool",
    "write_csv",
    "read_csv",
]

CASES = (
    "case1-mean-shift",
    "case2-partial-cov",
    "case3-full-cov",
    "case4-mixture",
    "case5-laplace",
    "null-only",
)

CASE_DIMENSION = {case: 10 for case in CASES}
CASE_DIMENSION["case5-laplace"] = 1

_ROLES = {"pool": 0, "stream": 1, "detector": 2, "warmup": 3}


def make_rng(base_seed: int, *key) -> np.random.Generator:
    """Independent generator for a seed tuple such as ``(case, replication, role)``.

    String components are hashed with CRC-32 so keys are stable across runs.
    """
    parts = []
    for k in key:
        if isinstance(k, str):
            k = _ROLES[k] if k in _ROLES else zlib.crc32(k.encode())
        parts.append(int(k))
    return np.random.default_rng(np.random.SeedSequence(int(base_seed), spawn_key=tuple(parts)))


@dataclass(frozen=True)
class StreamSpec:
    """``tau`` pre-change samples followed by ``length - tau`` post-change samples.

    ``mean_shift`` is the per-coordinate post-change mean of case 1.
    """

    case_id: str
    tau: int
    length: int
    seed: int = 0
    mean_shift: float = 1.0

    def __post_init__(self):
        if self.case_id not in CASES:
            raise InputError(f"unknown case {self.case_id!r}; expected one of {CASES}")
        if self.length < 0 or not 0 <= self.tau <= self.length:
            raise InputError(f"need 0 <= tau <= length, got tau={self.tau}, length={self.length}")

    @property
    def dimension(self) -> int:
        return CASE_DIMENSION[self.case_id]


def sample_pre_change(case_id: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Standard normal samples in the case's dimension."""
    if case_id not in CASES:
        raise InputError(f"unknown case {case_id!r}")
    return rng.standard_normal((size, CASE_DIMENSION[case_id]))


def sample_post_change(case_id: str, size: int, rng: np.random.Generator,
                       mean_shift: float = 1.0) -> np.ndarray:
    if case_id not in CASES:
        raise InputError(f"unknown case {case_id!r}")
    d = CASE_DIMENSION[case_id]
    if case_id == "case5-laplace":
        # Var = 2 scale^2 = 1
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=(size, 1))
    z = rng.standard_normal((size, d))
    if case_id == "case1-mean-shift":
        return z + mean_shift
    if case_id == "case2-partial-cov":
        z[:, :5] *= np.sqrt(2.0)
        return z
    if case_id == "case3-full-cov":
        return z * np.sqrt(2.0)
    if case_id == "case4-mixture":
        narrow = rng.random(size) < 0.7
        z[narrow] *= np.sqrt(0.1)
        return z
    return z  # null-only


def generate(spec: StreamSpec) -> np.ndarray:
    """The ``(length, d)`` stream described by ``spec``."""
    rng = make_rng(spec.seed, "stream")
    pre = sample_pre_change(spec.case_id, spec.tau, rng)
    post = sample_post_change(spec.case_id, spec.length - spec.tau, rng, spec.mean_shift)
    return np.vstack([pre, post])


def generate_reference_pool(case_id: str, size: int, seed: int) -> np.ndarray:
    """``size`` pre-change samples, seeded independently of :func:`generate`."""
    if size < 1:
        raise InputError(f"pool size must be >= 1, got {size}")
    return sample_pre_change(case_id, size, make_rng(seed, "pool"))


def write_csv(path, samples, header: bool = False) -> None:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"x{i}" for i in range(samples.shape[1])])
        for row in samples:
            writer.writerow([repr(float(v)) for v in row])


def read_csv(path, dim: int | None = None) -> np.ndarray:
    """Load a stream CSV; a non-numeric first row is taken as a header.

    Raises :class:`CsvFormatError` carrying the 1-based file row on bad input.
    """
    rows = []
    width = dim
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise CsvFormatError(f"{path}: row {lineno} is not numeric", row=lineno) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise CsvFormatError(
                    f"{path}: row {lineno} has {len(values)} columns, expected {width}",
                    row=lineno, width_mismatch=True)
            rows.append(values)
    if not rows:
        raise CsvFormatError(f"{path}: no samples")
    return np.asarray(rows, dtype=np.float64)
