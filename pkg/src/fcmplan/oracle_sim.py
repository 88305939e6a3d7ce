"""Exact tiled-execution traffic counter.

Executes a tiling symbolically: every work unit (one OFM tile, i.e. one
thread block) is enumerated, the input rectangle it must read is derived
from the real convolution geometry (padding, stride, truncated edge tiles),
and element reads are accumulated on a multiplicity plane. Nothing is
shared between work units because L1 is private to an SM.

Accounting
----------
Units that hold the same weight partition form a *replica*. Inside a
replica the spatial tiles of a feature map overlap only in their halos.
For every plane the simulator reports

* ``distinct`` elements read at least once,
* ``shared`` = the summed multiplicity of elements read by two or more
  units (a 4-way corner counts 4, a 2-way edge element counts 2).

Input traffic is charged as ``distinct + shared``, i.e. every shared
element is charged once per reading unit on top of its base read. Half of
``shared`` is the halo measure reported as ``halo_loads``. The raw number
of element reads (``ifm_loads_raw``) is reported alongside so either
convention can be audited.

Recomputed intermediates follow the same rule: ``macs_redundant`` charges
the halo measure of the intermediate plane times the per-element MAC cost
of the first layer. Recomputation of a whole intermediate tile by several
weight partitions is reported separately as ``macs_replicated``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .cost_models import (
    CostModelError,
    EquationMode,
    Tiling,
    check_fcm_tiling,
    check_pair,
    fcm_gma,
    lbl_gma,
)
from .gpu import GpuSpec
from .model_ir import ConvLayer, FcmKind, LayerKind


def _half(n: int) -> Union[int, float]:
    return n // 2 if n % 2 == 0 else n / 2


@dataclass(frozen=True)
class SimReport:
    ifm_loads: int
    halo_loads: Union[int, float]
    weight_loads: int
    ofm_stores: int
    macs_total: Union[int, float]
    macs_redundant: Union[int, float]
    bytes_total: int
    ifm_loads_raw: int = 0
    macs_replicated: int = 0
    work_units: int = 0
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def redundancy_ratio(self) -> float:
        return self.macs_redundant / self.macs_total if self.macs_total else 0.0

    def to_json(self) -> dict:
        return {
            "ifm_loads": self.ifm_loads,
            "halo_loads": self.halo_loads,
            "ifm_loads_raw": self.ifm_loads_raw,
            "weight_loads": self.weight_loads,
            "ofm_stores": self.ofm_stores,
            "macs_total": self.macs_total,
            "macs_redundant": self.macs_redundant,
            "macs_replicated": self.macs_replicated,
            "work_units": self.work_units,
            "bytes_total": self.bytes_total,
        }


def _intervals(length: int, tile: int) -> list[tuple[int, int]]:
    return [(s, min(s + tile, length)) for s in range(0, length, tile)]


def _input_span(o0: int, o1: int, filt: int, stride: int, pad: int, in_len: int) -> tuple[int, int]:
    lo = o0 * stride - pad
    hi = (o1 - 1) * stride - pad + filt  # exclusive
    return max(lo, 0), min(hi, in_len)


@dataclass(frozen=True)
class _Plane:
    distinct: int
    raw: int
    shared: int


def _plane(height: int, width: int, rows: Sequence[tuple[int, int]],
           cols: Sequence[tuple[int, int]]) -> _Plane:
    rects = np.array([(r0, r1, c0, c1) for r0, r1 in rows for c0, c1 in cols], dtype=np.int64)
    counts = kernels.footprint_counts(height, width, rects)
    d, t, s = kernels.count_stats(counts)
    return _Plane(d, t, s)


def _read_plane(layer: ConvLayer, tiling: Tiling) -> _Plane:
    """Multiplicity stats of ``layer``'s input plane under an OFM tiling."""
    ofm = layer.ofm
    rows = [_input_span(a, b, layer.filter_h, layer.strides, layer.pad_top, layer.ifm.height)
            for a, b in _intervals(ofm.height, tiling.ofm_tile_h)]
    cols = [_input_span(a, b, layer.filter_w, layer.strides, layer.pad_left, layer.ifm.width)
            for a, b in _intervals(ofm.width, tiling.ofm_tile_w)]
    return _plane(layer.ifm.height, layer.ifm.width, rows, cols)


def _check_dims(ofm, tiling: Tiling) -> None:
    try:
        tiling.check_fits(ofm)
    except CostModelError as e:
        raise CostModelError(f"invalid tiling: {e}") from None


def simulate_lbl(layer: ConvLayer, tiling: Tiling) -> SimReport:
    _check_dims(layer.ofm, tiling)
    ofm = layer.ofm
    plane = _read_plane(layer, tiling)
    n_spatial = len(_intervals(ofm.height, tiling.ofm_tile_h)) * len(_intervals(ofm.width, tiling.ofm_tile_w))
    groups = [b - a for a, b in _intervals(ofm.depth, tiling.ofm_tile_d)]

    if layer.kind is LayerKind.DW:
        # each depth group reads only its own channels
        channels_read = sum(groups)
        w_per_filter = layer.filter_h * layer.filter_w
    else:
        # each weight partition re-reads every input channel
        channels_read = len(groups) * layer.ifm.depth
        w_per_filter = layer.ifm.depth

    ifm = channels_read * plane.distinct
    shared = channels_read * plane.shared
    weights = n_spatial * sum(g * w_per_filter for g in groups)
    stores = 0
    for a, b in _intervals(ofm.height, tiling.ofm_tile_h):
        for c, d in _intervals(ofm.width, tiling.ofm_tile_w):
            stores += (b - a) * (d - c) * sum(groups)
    macs = stores * layer.macs_per_output
    return SimReport(
        ifm_loads=ifm,
        halo_loads=_half(shared),
        weight_loads=weights,
        ofm_stores=stores,
        macs_total=macs,
        macs_redundant=0,
        bytes_total=(ifm + shared + weights + stores) * layer.byte_width,
        ifm_loads_raw=channels_read * plane.raw,
        work_units=n_spatial * len(groups),
    )


def simulate_fcm(first: ConvLayer, second: ConvLayer, kind: FcmKind, tiling: Tiling,
                 mode: EquationMode = EquationMode.CONSISTENT) -> SimReport:
    check_pair(first, second, kind)
    _check_dims(second.ofm, tiling)
    check_fcm_tiling(first, second, kind, tiling)
    out = second.ofm
    rows_o = _intervals(out.height, tiling.ofm_tile_h)
    cols_o = _intervals(out.width, tiling.ofm_tile_w)
    groups = [b - a for a, b in _intervals(out.depth, tiling.ofm_tile_d)]
    n_spatial = len(rows_o) * len(cols_o)
    b1, b2 = first.byte_width, second.byte_width

    if kind in (FcmKind.PWDW, FcmKind.PWDW_R):
        # the intermediate tile is the DW input footprint; the PW reads the
        # same spatial footprint (1x1 filter) across all its input channels
        mid = _read_plane(second, tiling)
        src = mid
        ifm_channels = len(groups) * first.ifm.depth
        mid_channels = sum(groups)
        w1 = n_spatial * sum(g * first.ifm.depth for g in groups)
        w2 = n_spatial * sum(g * second.filter_h * second.filter_w for g in groups)
        first_macs_exec = first.macs_per_output * mid_channels * mid.raw
        nominal_first = first.macs
    else:
        # second layer is PW: every unit needs all intermediate channels on
        # its own spatial tile
        mid_rows = rows_o
        mid_cols = cols_o
        mid = _plane(second.ifm.height, second.ifm.width, mid_rows, mid_cols)
        if kind is FcmKind.DWPW:
            src = _read_plane(first, tiling)
        else:
            src = mid
        ifm_channels = len(groups) * first.ifm.depth
        mid_channels = first.out_depth
        w1 = n_spatial * len(groups) * first.weights_size_elements
        w2 = n_spatial * sum(g * second.ifm.depth for g in groups)
        # the whole intermediate tile is recomputed by every partition
        first_macs_exec = first.macs_per_output * mid_channels * mid.raw * len(groups)
        nominal_first = first.macs

    ifm = ifm_channels * src.distinct
    shared = ifm_channels * src.shared
    stores = sum((b - a) * (d - c) for a, b in rows_o for c, d in cols_o) * sum(groups)
    charged_stores = 0 if (mode is EquationMode.PAPER_VERBATIM and kind in (FcmKind.PWDW, FcmKind.PWDW_R)) else stores

    if kind in (FcmKind.PWDW, FcmKind.PWDW_R):
        red = _half(first.macs_per_output * mid_channels * mid.shared)
        replicated = 0
    else:
        red = _half(first.macs_per_output * mid_channels * mid.shared * len(groups))
        replicated = first_macs_exec - nominal_first
    macs_total = nominal_first + second.macs + red

    return SimReport(
        ifm_loads=ifm,
        halo_loads=_half(shared),
        weight_loads=w1 + w2,
        ofm_stores=charged_stores,
        macs_total=macs_total,
        macs_redundant=red,
        bytes_total=(ifm + shared + w1) * b1 + (w2 + charged_stores) * b2,
        ifm_loads_raw=ifm_channels * src.raw,
        macs_replicated=replicated,
        work_units=n_spatial * len(groups),
        extras={"intermediate_reads_raw": mid_channels * mid.raw, "first_macs_executed": first_macs_exec},
    )


# ---------------------------------------------------------------------------
# Validation harness


@dataclass(frozen=True)
class VerifyRow:
    tiling: Tiling
    analytic_bytes: int
    sim_bytes: int
    even_division: bool

    @property
    def abs_dev(self) -> int:
        return abs(self.analytic_bytes - self.sim_bytes)

    @property
    def rel_dev(self) -> float:
        return self.abs_dev / self.sim_bytes if self.sim_bytes else 0.0


@dataclass
class VerifyTable:
    rows: list[VerifyRow]

    @property
    def max_even_deviation(self) -> int:
        return max((r.abs_dev for r in self.rows if r.even_division), default=0)

    @property
    def max_deviation(self) -> int:
        return max((r.abs_dev for r in self.rows), default=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tiling", "analytic_bytes", "sim_bytes", "abs_dev", "rel_dev", "even_division"])
        for r in self.rows:
            w.writerow([r.tiling.label(), r.analytic_bytes, r.sim_bytes, r.abs_dev,
                        f"{r.rel_dev:.6g}", str(r.even_division).lower()])
        return buf.getvalue()


def verify(subject: Union[ConvLayer, tuple], gpu: Optional[GpuSpec] = None,
           grid: Union[str, Iterable[Tiling]] = "all",
           mode: EquationMode = EquationMode.CONSISTENT) -> VerifyTable:
    """Sweep tilings and compare analytic bytes to simulated bytes.

    ``subject`` is a layer or a ``(first, second, kind)`` triple. ``grid``
    is ``"all"``, ``"even-only"`` or an explicit iterable of tilings.
    With a ``gpu`` the sweep is limited to tilings passing its constraints.
    """
    from .tiling_search import SearchGrid, candidate_tilings

    if isinstance(subject, ConvLayer):
        ofm = subject.ofm
        def analytic(t): return lbl_gma(subject, t, None, mode).total_bytes
        def simulated(t): return simulate_lbl(subject, t).bytes_total
        target = subject
    else:
        first, second, kind = subject
        check_pair(first, second, kind)
        ofm = second.ofm
        def analytic(t): return fcm_gma(first, second, kind, t, None, mode).total_bytes
        def simulated(t): return simulate_fcm(first, second, kind, t, mode).bytes_total
        target = (first, second, kind)

    if isinstance(grid, str):
        if grid not in ("all", "even-only"):
            raise ValueError(f"unknown grid {grid!r}")
        tilings = candidate_tilings(target, gpu, SearchGrid(), feasible_only=gpu is not None,
                                    warp_rule=gpu is not None)
        if grid == "even-only":
            tilings = [t for t in tilings if t.divides(ofm)]
    else:
        tilings = list(grid)

    rows = [VerifyRow(t, analytic(t), simulated(t), t.divides(ofm)) for t in tilings]
    return VerifyTable(rows)
