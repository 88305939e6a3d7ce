"""Compare the compiled counting kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Kernel timings call both implementations directly. End-to-end timings run
the simulator and a MobileNetV1 plan in a subprocess per backend, since the
backend is chosen once at import.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from fcmplan import _kernels_py

try:
    from fcmplan import _kernels
except ImportError:
    _kernels = None


def tile_rects(size: int, tile: int, halo: int) -> np.ndarray:
    rects = []
    for r in range(0, size, tile):
        for c in range(0, size, tile):
            rects.append((max(r - halo, 0), min(r + tile + halo, size), max(c - halo, 0), min(c + tile + halo, size)))
    return np.array(rects, dtype=np.int64)


E2E = r"""
import json, sys, time
sys.path.insert(0, {tests!r})
from fcmplan import PRESETS, Tiling, kernels, plan, simulate_lbl
from fcmplan.zoo import mobilenet_v1
from helpers import dw
layer = dw("d", 112, 112, 32)
t0 = time.perf_counter()
for tile in (2, 4, 7, 8, 14, 16):
    simulate_lbl(layer, Tiling(tile, tile, 32))
t1 = time.perf_counter()
plan(mobilenet_v1(), PRESETS["rtx_a4000"])
t2 = time.perf_counter()
print(json.dumps({{"backend": kernels.BACKEND, "simulate_s": t1 - t0, "plan_s": t2 - t1}}))
"""


def end_to_end(force_python: bool) -> dict:
    env = dict(os.environ)
    if force_python:
        env["FCMPLAN_PURE_PYTHON"] = "1"
    else:
        env.pop("FCMPLAN_PURE_PYTHON", None)
    tests = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "tests")
    out = subprocess.run([sys.executable, "-c", E2E.format(tests=os.path.abspath(tests))],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cases = [(112, 2, 1), (112, 7, 1), (56, 4, 2), (28, 1, 1)]
    print(f"{'case':<22}{'rects':>7}{'numpy ms':>12}{'cython ms':>12}{'speedup':>9}")
    for size, tile, halo in cases:
        rects = tile_rects(size, tile, halo)

        def run_py():
            _kernels_py.count_stats(_kernels_py.footprint_counts(size, size, rects))

        t_py = min(timeit.repeat(run_py, number=10, repeat=args.repeat)) / 10
        if _kernels is not None:
            def run_cy():
                _kernels.count_stats(_kernels.footprint_counts(size, size, rects))
            t_cy = min(timeit.repeat(run_cy, number=10, repeat=args.repeat)) / 10
            cy, ratio = f"{t_cy * 1e3:12.3f}", f"{t_py / t_cy:8.1f}x"
        else:
            cy, ratio = f"{'n/a':>12}", f"{'':>9}"
        label = f"{size}x{size} tile {tile} halo {halo}"
        print(f"{label:<22}{len(rects):>7}{t_py * 1e3:12.3f}{cy}{ratio}")

    print()
    for force in (False, True):
        r = end_to_end(force)
        print(f"end to end [{r['backend']:>6}]: simulate {r['simulate_s'] * 1e3:8.1f} ms, "
              f"MobileNetV1 plan {r['plan_s'] * 1e3:8.1f} ms")


if __name__ == "__main__":
    main()
