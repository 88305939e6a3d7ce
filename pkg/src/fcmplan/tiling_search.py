"""Exhaustive tiling search over a declared candidate grid."""

from __future__ import annotations

import functools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .cost_models import (
    EquationMode,
    GmaEstimate,
    TileGeometry,
    Tiling,
    check_pair,
    fcm_gma,
    fcm_geometry,
    lbl_geometry,
    lbl_gma,
    redundancy_ratio,
)
from .gpu import GpuSpec
from .model_ir import ConvLayer, FcmKind, LayerKind

Target = Union[ConvLayer, tuple]  # a layer, or (first, second, kind)


@dataclass(frozen=True)
class SearchGrid:
    """Candidate tile sizes.

    Spatial sizes are powers of two up to ``max_pow2``, the full extent, and
    every divisor of the extent up to ``max_divisor``. Depth sizes are
    multiples of ``min(warp, depth)`` plus the full depth.
    """

    max_pow2: int = 64
    max_divisor: int = 64
    spatial: Optional[tuple[int, ...]] = None  # explicit override
    depth: Optional[tuple[int, ...]] = None  # explicit override

    def spatial_sizes(self, extent: int) -> list[int]:
        if self.spatial is not None:
            vals = {v for v in self.spatial if 1 <= v <= extent}
        else:
            vals = {extent}
            p = 1
            while p <= min(self.max_pow2, extent):
                vals.add(p)
                p *= 2
            vals.update(d for d in range(1, min(self.max_divisor, extent) + 1) if extent % d == 0)
        return sorted(vals)

    def depth_sizes(self, depth: int, warp: int) -> list[int]:
        if self.depth is not None:
            return sorted({v for v in self.depth if 1 <= v <= depth})
        step = min(warp, depth)
        return sorted(set(range(step, depth + 1, step)) | {depth})

    @classmethod
    def from_json(cls, doc: dict) -> "SearchGrid":
        allowed = {"max_pow2", "max_divisor", "spatial", "depth"}
        unknown = set(doc) - allowed
        if unknown:
            raise ValueError(f"unknown grid fields {sorted(unknown)}")
        kw = dict(doc)
        for k in ("spatial", "depth"):
            if kw.get(k) is not None:
                kw[k] = tuple(int(v) for v in kw[k])
        return cls(**kw)


DEFAULT_GRID = SearchGrid()


@dataclass(frozen=True)
class SearchResult:
    feasible: bool
    candidates_evaluated: int
    tiling: Optional[Tiling] = None
    estimate: Optional[GmaEstimate] = None
    geometry: Optional[TileGeometry] = None
    kind: Optional[FcmKind] = None
    redundancy_ratio: float = 0.0
    grid_points: int = 0
    violation_counts: dict = field(default_factory=dict, compare=False)

    @property
    def total_bytes(self) -> Optional[int]:
        return self.estimate.total_bytes if self.estimate else None

    def infeasibility_reason(self) -> str:
        if self.feasible:
            return ""
        if not self.grid_points:
            return "no candidate tiling on the grid"
        clauses = ", ".join(f"{k} in {v}/{self.grid_points}" for k, v in sorted(self.violation_counts.items()))
        return f"infeasible at all {self.grid_points} grid points ({clauses})"


def _parts(target: Target):
    if isinstance(target, ConvLayer):
        return target, None, None
    first, second, kind = target
    return first, second, kind


def _halo_layer(target: Target) -> Optional[ConvLayer]:
    first, second, kind = _parts(target)
    if kind is None:
        return first if first.kind is LayerKind.DW else None
    if kind is FcmKind.DWPW:
        return first
    if kind in (FcmKind.PWDW, FcmKind.PWDW_R):
        return second
    return None


def _spatial_ok(size: int, layer: Optional[ConvLayer], filt_attr: str) -> bool:
    # a tile narrower than its halo puts one input element in 3+ tiles
    if layer is None:
        return True
    return size * layer.strides >= getattr(layer, filt_attr) - layer.strides


def candidate_tilings(target: Target, gpu: Optional[GpuSpec], grid: SearchGrid = DEFAULT_GRID,
                      feasible_only: bool = True, warp_rule: bool = True) -> list[Tiling]:
    return list(_iter_grid(target, gpu, grid, feasible_only, warp_rule, Counter()))


def _geometry(target: Target, t: Tiling) -> TileGeometry:
    first, second, kind = _parts(target)
    if kind is None:
        return lbl_geometry(first, t)
    return fcm_geometry(first, second, kind, t)


def _iter_grid(target: Target, gpu: Optional[GpuSpec], grid: SearchGrid, feasible_only: bool,
               warp_rule: bool, violations: Counter, counter: Optional[list] = None) -> Iterator[Tiling]:
    first, second, kind = _parts(target)
    ofm = (second or first).ofm
    warp = gpu.warp_size if gpu is not None else 1
    halo = _halo_layer(target)
    if kind is FcmKind.PWDW:
        hs, ws = [ofm.height], [ofm.width]
    else:
        hs = [h for h in grid.spatial_sizes(ofm.height) if _spatial_ok(h, halo, "filter_h")]
        ws = [w for w in grid.spatial_sizes(ofm.width) if _spatial_ok(w, halo, "filter_w")]
    # largest tiles first, so ties go to the tiling with fewer work units
    for td in reversed(grid.depth_sizes(ofm.depth, warp)):
        for th in reversed(hs):
            for tw in reversed(ws):
                if warp_rule and (th * tw * td) % warp:
                    continue
                t = Tiling(th, tw, td)
                if counter is not None:
                    counter[0] += 1
                if feasible_only and gpu is not None:
                    report = _geometry(target, t).check(gpu)
                    if not report.ok:
                        for name, _ in report.violations:
                            violations[name] += 1
                        continue
                yield t


def enumerate_tilings(target: Target, gpu: GpuSpec, grid: SearchGrid = DEFAULT_GRID) -> Iterator[Tiling]:
    """Yield grid tilings obeying the warp-multiple rule and the resource constraints.

    Order is descending lexicographic in (depth, height, width).
    """
    return _iter_grid(target, gpu, grid, True, True, Counter())


def _search(target: Target, gpu: GpuSpec, grid: SearchGrid, mode: EquationMode) -> SearchResult:
    first, second, kind = _parts(target)
    violations: Counter = Counter()
    counter = [0]
    best = None
    n = 0
    for t in _iter_grid(target, gpu, grid, True, True, violations, counter):
        n += 1
        if kind is None:
            est = lbl_gma(first, t, None, mode)
        else:
            est = fcm_gma(first, second, kind, t, None, mode)
        if best is None or est.total_bytes < best[1].total_bytes:
            best = (t, est)
    if best is None:
        return SearchResult(False, 0, kind=kind, grid_points=counter[0], violation_counts=dict(violations))
    t, est = best
    ratio = redundancy_ratio(first, second, kind, t) if kind is not None else 0.0
    return SearchResult(
        feasible=True, candidates_evaluated=n, tiling=t, estimate=est,
        geometry=_geometry(target, t), kind=kind, redundancy_ratio=ratio,
        grid_points=counter[0], violation_counts=dict(violations),
    )


@functools.lru_cache(maxsize=4096)
def best_lbl(layer: ConvLayer, gpu: GpuSpec, grid: SearchGrid = DEFAULT_GRID,
             mode: EquationMode = EquationMode.CONSISTENT) -> SearchResult:
    """Minimum-GMA layer-by-layer tiling; the first minimum in grid order wins."""
    return _search(layer, gpu, grid, mode)


@functools.lru_cache(maxsize=4096)
def best_fcm(first: ConvLayer, second: ConvLayer, kind: FcmKind, gpu: GpuSpec,
             grid: SearchGrid = DEFAULT_GRID,
             mode: EquationMode = EquationMode.CONSISTENT) -> SearchResult:
    """Minimum-GMA tiling of one fused-module kind for a layer pair."""
    check_pair(first, second, kind)
    return _search((first, second, kind), gpu, grid, mode)
