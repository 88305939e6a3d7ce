"""Counting kernels, compiled when available.

The Cython build is optional; without it the numpy versions are used.
Set ``FCMPLAN_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("FCMPLAN_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass


def footprint_counts(height: int, width: int, rects) -> np.ndarray:
    rects = np.ascontiguousarray(rects, dtype=np.int64).reshape(-1, 4)
    return _impl.footprint_counts(height, width, rects)


def count_stats(counts) -> tuple[int, int, int]:
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    d, t, s = _impl.count_stats(counts)
    return int(d), int(t), int(s)
