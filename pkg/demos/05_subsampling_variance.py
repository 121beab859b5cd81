"""Estimating the null variance of the block statistic from 6-tuples.

On a tiny pool every distinct 6-tuple can be enumerated, which gives the
exact value to compare against.
"""
import itertools
import math
import time

import numpy as np

from scanb import KernelSpec, estimate_variance_null, h_statistic, sample_tuples

pool = np.random.default_rng(8).standard_normal(8)[:, None]
spec = KernelSpec("gaussian-rbf", 1.0)
B0, N = 20, 5

t0 = time.time()
ha, hb = [], []
for x, x1, x2, x3, y, y1 in itertools.permutations(list(pool), 6):
    ha.append(h_statistic(spec, x, x1, y, y1))
    hb.append(h_statistic(spec, x2, x3, y, y1))
ha, hb = np.array(ha), np.array(hb)
cov = np.mean(ha * hb) - ha.mean() * hb.mean()
exact = (np.mean(ha ** 2) / N + (N - 1) * cov / N) / math.comb(B0, 2)
print(f"exact over {len(ha)} ordered 6-tuples: {exact:.6e}  ({time.time() - t0:.1f}s)")

for scheme in ("random", "structured"):
    for m in (100, 1000, 10000):
        est = [estimate_variance_null(pool, B0, N, scheme, m, np.random.default_rng(s), spec).combined
               for s in range(20)]
        err = np.array(est) / exact - 1
        print(f"{scheme:10s} m={m:>5}: mean rel. error {err.mean():+.4f}, sd {err.std():.4f}")

# How evenly do the two schemes spread pool indices over the tuples?
rng = np.random.default_rng(0)
for scheme in ("random", "structured"):
    counts = np.bincount(sample_tuples(100, 500, scheme, rng).ravel(), minlength=100)
    print(f"{scheme:10s} appearances per index: min {counts.min()}, max {counts.max()}")
