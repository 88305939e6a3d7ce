# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counting kernels for the tiled-execution simulator."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def footprint_counts(Py_ssize_t height, Py_ssize_t width, cnp.int64_t[:, ::1] rects):
    """Count, per element of a ``height x width`` plane, how many work units read it.

    ``rects`` holds half-open rectangles ``(r0, r1, c0, c1)``, one per unit.
    """
    counts_arr = np.zeros((height, width), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef Py_ssize_t k, r, c
    cdef cnp.int64_t r0, r1, c0, c1
    for k in range(rects.shape[0]):
        r0 = rects[k, 0]
        r1 = rects[k, 1]
        c0 = rects[k, 2]
        c1 = rects[k, 3]
        for r in range(r0, r1):
            for c in range(c0, c1):
                counts[r, c] += 1
    return counts_arr


def count_stats(cnp.int64_t[:, ::1] counts):
    """Return ``(distinct, total, shared)`` for a multiplicity plane.

    ``shared`` sums the multiplicities of elements read by two or more units.
    """
    cdef Py_ssize_t r, c
    cdef cnp.int64_t v, distinct = 0, total = 0, shared = 0
    for r in range(counts.shape[0]):
        for c in range(counts.shape[1]):
            v = counts[r, c]
            if v > 0:
                distinct += 1
                total += v
                if v > 1:
                    shared += v
    return distinct, total, shared
