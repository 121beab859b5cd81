"""Watch a stream, raise an alarm.

A 10-dimensional Gaussian stream shifts its mean from 0 to 1 after 200
samples.  The detector compares the most recent 20 samples against 5
reference blocks drawn from pre-change data.
"""
import numpy as np

from scanb import (DetectorConfig, KernelSpec, ScanBDetector, StreamSpec, generate,
                   generate_reference_pool, median_bandwidth, threshold_for_arl)

# reference data and a stream with the change at t = 200
pool = generate_reference_pool("case1-mean-shift", 500, seed=1)
stream = generate(StreamSpec("case1-mean-shift", tau=200, length=400, seed=1))
print("pool", pool.shape, "stream", stream.shape)

# bandwidth from the median pairwise distance
sigma = median_bandwidth(pool)
print("median bandwidth:", round(sigma, 3))

# threshold for roughly one false alarm per 5000 samples
b = threshold_for_arl(5000, 20)
print("threshold b =", round(b, 4))

config = DetectorConfig(B0=20, N=5, kernel=KernelSpec("gaussian-rbf", sigma), threshold=b)
det = ScanBDetector(pool, config, seed=1)
print("estimated Var[Z] under the null:", det.var_zb.combined)

for x in stream:
    d = det.step(x)
    if d.alarm:
        print(f"alarm at t={d.t}, {d.t - 200} samples after the change, Z'={d.statistic:.2f}")
        break
else:
    print("no alarm")

# the same run as a whole path, handy for plotting
det = ScanBDetector(pool, config, seed=1)
path = np.array([det.step(x).statistic or np.nan for x in stream])
print("largest Z' before the change:", np.nanmax(path[:200]).round(3))
print("largest Z' after the change: ", np.nanmax(path[200:]).round(3))
