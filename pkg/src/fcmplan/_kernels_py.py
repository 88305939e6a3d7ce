"""Pure-Python/numpy versions of the counting kernels in ``_kernels.pyx``."""

import numpy as np


def footprint_counts(height, width, rects):
    counts = np.zeros((height, width), dtype=np.int64)
    for r0, r1, c0, c1 in np.asarray(rects, dtype=np.int64).reshape(-1, 4):
        counts[r0:r1, c0:c1] += 1
    return counts


def count_stats(counts):
    counts = np.asarray(counts)
    read = counts[counts > 0]
    multi = read[read > 1]
    return int(read.size), int(read.sum()), int(multi.sum())
