"""Online scan B-statistic: reference blocks, null variance and the stopping rule."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import ConfigurationError, InputError, NumericalError
from .kernel import KernelSpec, as_samples, gram, kernel_rows
from .mmd import mmd2u_block

__all__ = [
    "SUBSAMPLING_SCHEMES",
    "REBLOCK_POLICIES",
    "DetectorConfig",
    "VarianceEstimate",
    "Decision",
    "ScanBDetector",
    "draw_reference_blocks",
    "sample_tuples",
    "variance_from_tuples",
    "estimate_variance_null",
    "scan_statistic",
    "scan_path",
]

SUBSAMPLING_SCHEMES = ("random", "structured")
REBLOCK_POLICIES = ("fixed-at-init", "redraw-each-step")


@dataclass(frozen=True)
class DetectorConfig:
    B0: int = 20
    N: int = 5
    kernel: KernelSpec = field(default_factory=KernelSpec)
    threshold: float = 3.0
    subsampling: str = "random"
    tuple_budget: int = 5000
    reblock_policy: str = "fixed-at-init"

    def __post_init__(self):
        if self.B0 < 2:
            raise ConfigurationError(f"B0 must be >= 2, got {self.B0}")
        if self.N < 1:
            raise ConfigurationError(f"N must be >= 1, got {self.N}")
        if self.tuple_budget < 1:
            raise ConfigurationError(f"tuple_budget must be >= 1, got {self.tuple_budget}")
        if not self.threshold > 0:
            raise ConfigurationError(f"threshold must be > 0, got {self.threshold}")
        if self.subsampling not in SUBSAMPLING_SCHEMES:
            raise ConfigurationError(f"unknown subsampling scheme {self.subsampling!r}")
        if self.reblock_policy not in REBLOCK_POLICIES:
            raise ConfigurationError(f"unknown reblock policy {self.reblock_policy!r}")


@dataclass(frozen=True)
class VarianceEstimate:
    """Moment estimates feeding the null variance of the block statistic."""

    e_h2: float
    cov_hh: float
    combined: float
    tuples_used: int


@dataclass(frozen=True)
class Decision:
    kind: str  # "not-ready", "continue" or "alarm"
    t: int
    statistic: float | None = None

    @property
    def alarm(self) -> bool:
        return self.kind == "alarm"


def draw_reference_blocks(pool, N: int, B0: int, rng: np.random.Generator,
                          return_indices: bool = False):
    """Draw ``N`` disjoint blocks of ``B0`` pool samples without replacement.

    Returns an ``(N, B0, d)`` array, plus the ``(N, B0)`` pool indices when
    ``return_indices`` is set.
    """
    pool = as_samples(pool)
    if N * B0 > pool.shape[0]:
        raise ConfigurationError(
            f"reference pool of {pool.shape[0]} samples cannot supply N*B0 = {N * B0}")
    idx = rng.choice(pool.shape[0], size=N * B0, replace=False).reshape(N, B0)
    blocks = pool[idx]
    return (blocks, idx) if return_indices else blocks


def _random_tuples(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    out = rng.integers(0, n, size=(m, 6))
    while True:
        s = np.sort(out, axis=1)
        bad = np.flatnonzero((s[:, 1:] == s[:, :-1]).any(axis=1))
        if bad.size == 0:
            return out
        out[bad] = rng.integers(0, n, size=(bad.size, 6))


def _structured_tuples(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    # Concatenated random permutations cut into 6-tuples: every index is used
    # once per permutation, so each appears in at least floor(6m/n) tuples.
    # A tuple straddling two permutations must not repeat the carried-over
    # indices; those are pushed out of the head of the next permutation.
    need = 6 * m
    seq = np.empty(need + n, dtype=np.int64)
    filled = 0
    while filled < need:
        perm = rng.permutation(n)
        carry = filled % 6
        if carry:
            leftover = seq[filled - carry:filled]
            head = 6 - carry
            clash = np.isin(perm[:head], leftover)
            if clash.any():
                free = np.flatnonzero(~np.isin(perm, leftover))
                free = free[free >= head]
                for pos, swap in zip(np.flatnonzero(clash), free):
                    perm[pos], perm[swap] = perm[swap], perm[pos]
        seq[filled:filled + n] = perm
        filled += n
    return seq[:need].reshape(m, 6)


def sample_tuples(n: int, m: int, scheme: str, rng: np.random.Generator) -> np.ndarray:
    """``(m, 6)`` pool indices, distinct within each row.

    ``random`` draws rows i.i.d. uniformly over distinct-index 6-tuples.
    ``structured`` balances coverage so each index appears in at least
    ``6m // n`` rows.
    """
    if n < 6:
        raise ConfigurationError(f"need at least 6 pool samples, got {n}")
    if m < 1:
        raise ConfigurationError(f"tuple budget must be >= 1, got {m}")
    if scheme == "random":
        return _random_tuples(n, m, rng)
    if scheme == "structured":
        return _structured_tuples(n, m, rng)
    raise ConfigurationError(f"unknown subsampling scheme {scheme!r}")


def _assemble(e_h2: float, cov_hh: float, B0: int, N: int) -> float:
    return (e_h2 / N + (N - 1) * cov_hh / N) / comb(B0, 2)


def _role_orderings() -> np.ndarray:
    # swapping both members of every pair, or swapping the two x-pairs, leaves
    # the products below unchanged, so one ordering per orbit of that
    # four-element group is enough (180 of the 720)
    sigma, tau = (1, 0, 3, 2, 5, 4), (2, 3, 0, 1, 4, 5)
    keep = set()
    for p in itertools.permutations(range(6)):
        ps, pt = tuple(p[i] for i in sigma), tuple(p[i] for i in tau)
        keep.add(min(p, ps, pt, tuple(ps[i] for i in tau)))
    return np.array(sorted(keep))


_ORDERINGS = _role_orderings()
_PAIRS = list(itertools.combinations(range(6), 2))


def _tuple_moments(pool: np.ndarray, tuples: np.ndarray, kernel: KernelSpec):
    """Per-tuple means of h_a^2, h_a h_b and h_a over all 720 role orderings.

    Every ordering of a uniformly drawn index set is itself a uniform draw,
    so averaging over orderings keeps each moment unbiased while removing
    the noise from role assignment within a tuple.
    """
    m = len(tuples)
    K = np.zeros((m, 6, 6))
    for a, b in _PAIRS:
        K[:, a, b] = K[:, b, a] = kernel_rows(kernel, pool[tuples[:, a]], pool[tuples[:, b]])
    p = _ORDERINGS.T
    yy = K[:, p[4], p[5]]
    h_a = K[:, p[0], p[1]] + yy - K[:, p[0], p[5]] - K[:, p[1], p[4]]
    h_b = K[:, p[2], p[3]] + yy - K[:, p[2], p[5]] - K[:, p[3], p[4]]
    return (0.5 * (h_a ** 2 + h_b ** 2).mean(axis=1), (h_a * h_b).mean(axis=1),
            0.5 * (h_a + h_b).mean(axis=1))


def variance_from_tuples(pool, tuples: np.ndarray, kernel: KernelSpec,
                         B0: int, N: int, chunk: int = 2000) -> VarianceEstimate:
    """Null variance of the block statistic from sampled 6-tuples of pool indices.

    Both moments are averaged over the m tuples and, within each tuple,
    over every assignment of its six indices to the roles x, x', x'', x''', y, y'.
    """
    pool = as_samples(pool)
    tuples = np.asarray(tuples)
    m = len(tuples)
    if m < 2 and N > 1:
        raise ConfigurationError("covariance term needs a tuple budget of at least 2")
    sq = np.empty(m)
    cross = np.empty(m)
    mean = np.empty(m)
    for lo in range(0, m, chunk):
        sl = slice(lo, lo + chunk)
        sq[sl], cross[sl], mean[sl] = _tuple_moments(pool, tuples[sl], kernel)
    e_h2 = float(np.mean(sq))
    cov_hh = float(np.mean(cross) - np.mean(mean) ** 2) if N > 1 else 0.0
    combined = _assemble(e_h2, cov_hh, B0, N)
    if not combined > 0:
        raise NumericalError(
            f"estimated null variance is not positive (E[h^2]={e_h2:.3g}, "
            f"cov={cov_hh:.3g}); increase the tuple budget or check the pool")
    return VarianceEstimate(e_h2, cov_hh, combined, m)


def estimate_variance_null(pool, B0: int, N: int, scheme: str, m: int,
                           rng: np.random.Generator,
                           kernel: KernelSpec) -> VarianceEstimate:
    """Subsampled estimate of Var[Z_B] under the null, from the reference pool."""
    pool = as_samples(pool)
    tuples = sample_tuples(pool.shape[0], m, scheme, rng)
    return variance_from_tuples(pool, tuples, kernel, B0, N)


def scan_statistic(blocks, window, kernel: KernelSpec) -> float:
    """Average MMD^2_u of the window against each reference block, from scratch."""
    blocks = np.asarray(blocks, dtype=np.float64)
    return float(np.mean([mmd2u_block(kernel, X, window) for X in blocks]))


def scan_path(blocks, stream, kernel: KernelSpec) -> np.ndarray:
    """Z at every time the window is full, for fixed reference blocks.

    Entry ``k`` is the statistic for the window ending at stream index
    ``B0 - 1 + k``.  Vectorised over the whole stream; equivalent to running
    :class:`ScanBDetector` step by step.
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    N, B0, d = blocks.shape
    S = as_samples(stream, d)
    T = S.shape[0]
    if T < B0:
        return np.empty(0)
    n_win = T - B0 + 1
    sxx = np.array([gram(kernel, X, X).sum() - np.trace(gram(kernel, X, X)) for X in blocks])

    # G[i*B0 + r, s] = k(x_{i,r}, s)
    G = gram(kernel, blocks.reshape(N * B0, d), S).reshape(N, B0, T)
    colsum = G.sum(axis=(0, 1))
    csum = np.concatenate([[0.0], np.cumsum(colsum)])
    cross = csum[B0:] - csum[:n_win]
    D = G.sum(axis=0)
    diag = np.zeros(n_win)
    for j in range(B0):
        diag += D[j, j:j + n_win]

    syy = np.zeros(n_win)
    for lag in range(1, B0):
        a = S[:T - lag]
        kl = kernel_rows(kernel, a, S[lag:])
        c = np.concatenate([[0.0], np.cumsum(kl)])
        # pairs (a, a+lag) with both ends inside the window starting at w
        syy += c[np.arange(n_win) + B0 - lag] - c[:n_win]
    syy *= 2.0

    total = sxx.mean() + syy - 2.0 * (cross - diag) / N
    return total / (B0 * (B0 - 1))


class ScanBDetector:
    """Streaming scan B-statistic detector.

    Reference blocks and the null variance are fixed at construction from
    ``pool`` and ``seed``.  With the default ``fixed-at-init`` policy each
    :meth:`step` evaluates the kernel only between the incoming sample and
    the ``(N + 1) * B0`` stored samples.

    Parameters
    ----------
    pool : array_like, shape (n, d)
        Pre-change reference data.
    config : DetectorConfig
    seed : int or numpy.random.SeedSequence
        Drives block drawing and variance subsampling.
    variance : VarianceEstimate, optional
        Skip the variance estimation and use this value.
    """

    def __init__(self, pool, config: DetectorConfig, seed=0,
                 variance: VarianceEstimate | None = None):
        self.config = config
        self.pool = as_samples(pool)
        B0, N = config.B0, config.N
        if self.pool.shape[0] < N * B0 + 6:
            raise ConfigurationError(
                f"reference pool has {self.pool.shape[0]} samples; need at least "
                f"N*B0 + 6 = {N * B0 + 6}")
        self.dim = self.pool.shape[1]
        self._rng = np.random.default_rng(seed)
        self.reference_blocks = draw_reference_blocks(self.pool, N, B0, self._rng)
        if variance is None:
            variance = estimate_variance_null(
                self.pool, B0, N, config.subsampling, config.tuple_budget,
                self._rng, config.kernel)
        self.var_zb = variance
        self._scale = 1.0 / np.sqrt(variance.combined)

        self.t = 0
        self.last_statistic: float | None = None
        self._window = np.zeros((B0, self.dim))
        self._slot = -1
        self._filled = 0
        self._set_reference_cache()

    def _set_reference_cache(self):
        B0, N = self.config.B0, self.config.N
        k = self.config.kernel
        self._ref_flat = self.reference_blocks.reshape(N * B0, self.dim)
        self._sxx = np.array([gram(k, X, X).sum() - np.trace(gram(k, X, X))
                              for X in self.reference_blocks])
        # Kxy[i, r, slot] = k(x_{i,r}, window[slot]); Kyy holds window pairs, zero diagonal
        self._kxy = np.zeros((N, B0, B0))
        self._kyy = np.zeros((B0, B0))
        if self._filled:
            self._kxy[:] = gram(k, self._ref_flat, self._window).reshape(N, B0, B0)

    @property
    def window(self) -> np.ndarray:
        """Current window in chronological order (oldest first)."""
        if self._filled < self.config.B0:
            return self._window[:self._filled].copy()
        return np.roll(self._window, -(self._slot + 1), axis=0)

    @property
    def ready(self) -> bool:
        return self._filled == self.config.B0

    def _push(self, x: np.ndarray):
        B0, N = self.config.B0, self.config.N
        k = self.config.kernel
        self._slot = (self._slot + 1) % B0
        p = self._slot
        self._window[p] = x
        self._filled = min(self._filled + 1, B0)
        kx = gram(k, self._ref_flat, x[None, :])[:, 0]
        self._kxy[:, :, p] = kx.reshape(N, B0)
        ky = gram(k, self._window, x[None, :])[:, 0]
        ky[p] = 0.0
        self._kyy[p, :] = ky
        self._kyy[:, p] = ky

    def statistic(self) -> float:
        """Z for the current window using the cached kernel rows."""
        if not self.ready:
            raise InputError("window is not full")
        B0, N = self.config.B0, self.config.N
        order = (np.arange(B0) + self._slot + 1) % B0
        # x_{i,j} pairs with the j-th oldest window sample
        diag = self._kxy[:, np.arange(B0), order].sum(axis=1)
        cross = self._kxy.sum(axis=(1, 2))
        per_block = self._sxx + self._kyy.sum() - 2.0 * (cross - diag)
        return float(per_block.mean() / (B0 * (B0 - 1)))

    def redraw_blocks(self):
        self.reference_blocks = draw_reference_blocks(
            self.pool, self.config.N, self.config.B0, self._rng)
        self._ref_flat = self.reference_blocks.reshape(-1, self.dim)
        k = self.config.kernel
        self._sxx = np.array([gram(k, X, X).sum() - np.trace(gram(k, X, X))
                              for X in self.reference_blocks])
        self._kxy = gram(k, self._ref_flat, self._window).reshape(
            self.config.N, self.config.B0, self.config.B0)

    def step(self, sample) -> Decision:
        """Consume one observation and apply the stopping rule."""
        x = np.atleast_1d(np.asarray(sample, dtype=np.float64))
        if x.shape != (self.dim,):
            raise InputError(f"sample has shape {x.shape}, expected ({self.dim},)")
        self.t += 1
        self._push(x)
        if not self.ready:
            return Decision("not-ready", self.t)
        if self.config.reblock_policy == "redraw-each-step":
            self.redraw_blocks()
        z = self.statistic() * self._scale
        self.last_statistic = z
        kind = "alarm" if z > self.config.threshold else "continue"
        return Decision(kind, self.t, z)

    def run(self, stream) -> Decision:
        """Feed ``stream`` until the first alarm; returns the last decision."""
        decision = None
        for x in as_samples(stream, self.dim):
            decision = self.step(x)
            if decision.alarm:
                break
        return decision
