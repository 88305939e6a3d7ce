"""Analytic global-memory-access (GMA) estimators.

All estimators count element traffic per array and scale each array by the
byte width of the layer that owns it. Element counts stay available in
``GmaEstimate.elements``.

Two accounting modes exist:

``CONSISTENT`` (default)
    Weight tiles of a pointwise layer are charged once per *spatial* OFM
    tile, since a work unit only holds the filters of its own output
    channels. Every module writes its final output once. Under these
    rules the estimates equal the tiled-execution counts of
    :mod:`fcmplan.oracle_sim` whenever tiles divide the tensors evenly.

``PAPER_VERBATIM``
    Pointwise weights are charged once per OFM tile including depth tiles,
    and PWDW/PWDW_R modules carry no output-store term.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .gpu import GpuSpec
from .model_ir import ADMISSIBLE_KINDS, ConvLayer, FcmKind, LayerKind


class EquationMode(str, enum.Enum):
    PAPER_VERBATIM = "paper"
    CONSISTENT = "consistent"


class CostModelError(ValueError):
    pass


class ConstraintViolation(CostModelError):
    def __init__(self, report: "ConstraintReport"):
        self.report = report
        super().__init__("tiling violates resource constraints: " + report.describe())


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class Tiling:
    """OFM tile of a layer, or of the second layer of a fused pair."""

    ofm_tile_h: int
    ofm_tile_w: int
    ofm_tile_d: int

    def __post_init__(self):
        for f in ("ofm_tile_h", "ofm_tile_w", "ofm_tile_d"):
            v = getattr(self, f)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise CostModelError(f"{f} must be a positive integer, got {v!r}")

    @property
    def elements(self) -> int:
        return self.ofm_tile_h * self.ofm_tile_w * self.ofm_tile_d

    @property
    def hw(self) -> int:
        return self.ofm_tile_h * self.ofm_tile_w

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.ofm_tile_h, self.ofm_tile_w, self.ofm_tile_d)

    def label(self) -> str:
        return f"{self.ofm_tile_h}x{self.ofm_tile_w}x{self.ofm_tile_d}"

    def check_fits(self, ofm) -> None:
        if self.ofm_tile_h > ofm.height or self.ofm_tile_w > ofm.width or self.ofm_tile_d > ofm.depth:
            raise CostModelError(f"tile {self.label()} exceeds OFM {ofm.height}x{ofm.width}x{ofm.depth}")

    def divides(self, ofm) -> bool:
        return (
            ofm.height % self.ofm_tile_h == 0
            and ofm.width % self.ofm_tile_w == 0
            and ofm.depth % self.ofm_tile_d == 0
        )


@dataclass(frozen=True)
class GmaEstimate:
    ifm_bytes: int
    weight_bytes: int
    ofm_bytes: int
    overlap_bytes: int
    equation_mode: EquationMode = EquationMode.CONSISTENT
    elements: dict = field(default_factory=dict, compare=False)

    @property
    def total_bytes(self) -> int:
        return self.ifm_bytes + self.weight_bytes + self.ofm_bytes + self.overlap_bytes

    @property
    def total_elements(self) -> int:
        return sum(self.elements.values())

    def breakdown(self) -> dict:
        return {
            "ifm_bytes": self.ifm_bytes,
            "overlap_bytes": self.overlap_bytes,
            "weight_bytes": self.weight_bytes,
            "ofm_bytes": self.ofm_bytes,
            "elements": dict(self.elements),
        }


# ---------------------------------------------------------------------------
# Overlap


def overlap_from_counts(n_h: int, n_w: int, channel_h: int, channel_w: int,
                        filter_h: int, filter_w: int, strides: int) -> int:
    return (
        (n_w - 1) * max(filter_w - strides, 0) * channel_h
        + (n_h - 1) * max(filter_h - strides, 0) * channel_w
    )


def overlap(channel_h: int, channel_w: int, tile_h: int, tile_w: int,
            filter_h: int, filter_w: int, strides: int) -> int:
    """Per-channel halo of a tiled feature map, in elements.

    Each interior tile boundary contributes a strip ``filter - strides`` wide
    spanning the whole channel; strips crossing in both directions are
    counted once per direction.
    """
    for name, v in (("channel_h", channel_h), ("channel_w", channel_w), ("tile_h", tile_h),
                    ("tile_w", tile_w), ("filter_h", filter_h), ("filter_w", filter_w),
                    ("strides", strides)):
        if v < 1:
            raise CostModelError(f"{name} must be >= 1, got {v}")
    if tile_h > channel_h or tile_w > channel_w:
        raise CostModelError("tile larger than channel")
    return overlap_from_counts(
        ceil_div(channel_h, tile_h), ceil_div(channel_w, tile_w),
        channel_h, channel_w, filter_h, filter_w, strides,
    )


def touched_extent(in_len: int, out_len: int, filt: int, strides: int, pad: int) -> int:
    """Number of input positions along one axis read by at least one window.

    Assumes ``filt >= strides`` so the windows leave no gaps.
    """
    lo = max(0, -pad)
    hi = min(in_len, (out_len - 1) * strides + filt - pad)
    return max(0, hi - lo)


def touched_hw(layer: ConvLayer) -> tuple[int, int]:
    """Input rows and columns ``layer`` actually reads.

    Smaller than the input only when VALID padding leaves a trailing
    remainder the last window does not reach.
    """
    ofm = layer.ofm
    return (
        touched_extent(layer.ifm.height, ofm.height, layer.filter_h, layer.strides, layer.pad_top),
        touched_extent(layer.ifm.width, ofm.width, layer.filter_w, layer.strides, layer.pad_left),
    )


def layer_overlap(layer: ConvLayer, tiling: Tiling, touched: bool = True) -> int:
    """Per-channel input halo of ``layer`` under an OFM tiling.

    Halo strips span the touched input extent unless ``touched`` is false,
    in which case they span the full input channel.
    """
    ofm = layer.ofm
    h, w = touched_hw(layer) if touched else (layer.ifm.height, layer.ifm.width)
    return overlap_from_counts(
        ceil_div(ofm.height, tiling.ofm_tile_h), ceil_div(ofm.width, tiling.ofm_tile_w),
        h, w, layer.filter_h, layer.filter_w, layer.strides,
    )


def ifm_read_elements(layer: ConvLayer, mode: "EquationMode") -> int:
    if mode is EquationMode.PAPER_VERBATIM:
        return layer.ifm.size_elements
    h, w = touched_hw(layer)
    return h * w * layer.ifm.depth


# ---------------------------------------------------------------------------
# Tile geometry and resource constraints


@dataclass(frozen=True)
class ConstraintReport:
    l1_used: int
    l1_limit: int
    comm_used: int
    shared_limit: int
    num_output_tiles: int
    num_sms: int

    @property
    def l1_slack(self) -> int:
        return self.l1_limit - self.l1_used

    @property
    def shared_slack(self) -> int:
        return self.shared_limit - self.comm_used

    @property
    def occupancy_slack(self) -> int:
        return self.num_output_tiles - self.num_sms

    @property
    def violations(self) -> list[tuple[str, int]]:
        out = []
        if self.l1_slack < 0:
            out.append(("l1_capacity", self.l1_slack))
        if self.shared_slack < 0:
            out.append(("shared_capacity", self.shared_slack))
        if self.occupancy_slack < 0:
            out.append(("sm_occupancy", self.occupancy_slack))
        return out

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "ok"
        return ", ".join(f"{name} (slack {slack})" for name, slack in self.violations)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [{"clause": n, "slack": s} for n, s in self.violations],
            "l1_used_bytes": self.l1_used,
            "comm_buffer_bytes": self.comm_used,
            "num_output_tiles": self.num_output_tiles,
        }


def constraint_check(tiles: Sequence[int], comm_buffer_bytes: int, num_output_tiles: int,
                     gpu: GpuSpec) -> ConstraintReport:
    return ConstraintReport(
        l1_used=sum(tiles) + comm_buffer_bytes,
        l1_limit=gpu.l1_bytes_per_sm,
        comm_used=comm_buffer_bytes,
        shared_limit=gpu.shared_mem_bytes_per_sm,
        num_output_tiles=num_output_tiles,
        num_sms=gpu.num_sms,
    )


def _ifm_span(out_tile: int, in_len: int, filt: int, strides: int) -> int:
    return min((out_tile - 1) * strides + filt, in_len)


@dataclass(frozen=True)
class TileGeometry:
    """On-chip tile sizes (bytes) of one work unit, plus derived counts."""

    tile_bytes: dict
    comm_buffer_bytes: int
    num_output_tiles: int
    first_weight_tile_filters: int
    second_weight_tile_filters: Optional[int] = None

    def check(self, gpu: GpuSpec) -> ConstraintReport:
        return constraint_check(list(self.tile_bytes.values()), self.comm_buffer_bytes,
                                self.num_output_tiles, gpu)


def _num_tiles(ofm, t: Tiling) -> int:
    return ceil_div(ofm.height, t.ofm_tile_h) * ceil_div(ofm.width, t.ofm_tile_w) * ceil_div(ofm.depth, t.ofm_tile_d)


def lbl_geometry(layer: ConvLayer, tiling: Tiling) -> TileGeometry:
    th, tw, td = tiling.as_tuple()
    bw = layer.byte_width
    if layer.kind is LayerKind.DW:
        ih = _ifm_span(th, layer.ifm.height, layer.filter_h, layer.strides)
        iw = _ifm_span(tw, layer.ifm.width, layer.filter_w, layer.strides)
        ifm_tile = ih * iw * td
        w_tile = td * layer.filter_h * layer.filter_w
    else:
        ifm_tile = th * tw * layer.ifm.depth
        w_tile = td * layer.ifm.depth
    return TileGeometry(
        tile_bytes={"ifm": ifm_tile * bw, "weights": w_tile * bw, "ofm": th * tw * td * bw},
        comm_buffer_bytes=0,
        num_output_tiles=_num_tiles(layer.ofm, tiling),
        first_weight_tile_filters=td,
    )


def fcm_geometry(first: ConvLayer, second: ConvLayer, kind: FcmKind, tiling: Tiling) -> TileGeometry:
    """Tile sizes of a fused work unit; ``tiling`` is the second layer's OFM tile.

    Weight-tile filter counts are implied by the module structure: a work
    unit must hold every filter contributing to its output channels.
    """
    th, tw, td = tiling.as_tuple()
    b1, b2 = first.byte_width, second.byte_width
    mid = first.out_depth
    if kind in (FcmKind.PWDW, FcmKind.PWDW_R):
        ih = _ifm_span(th, second.ifm.height, second.filter_h, second.strides)
        iw = _ifm_span(tw, second.ifm.width, second.filter_w, second.strides)
        tiles = {
            "ifm": ih * iw * first.ifm.depth * b1,
            "weights_first": td * first.ifm.depth * b1,
            "weights_second": td * second.filter_h * second.filter_w * b2,
            "ofm": th * tw * td * b2,
        }
        comm = ih * iw * td * b1
        f1, f2 = td, td
    elif kind is FcmKind.DWPW:
        ih = _ifm_span(th, first.ifm.height, first.filter_h, first.strides)
        iw = _ifm_span(tw, first.ifm.width, first.filter_w, first.strides)
        tiles = {
            "ifm": ih * iw * first.ifm.depth * b1,
            "weights_first": first.weights_size_elements * b1,
            "weights_second": td * mid * b2,
            "ofm": th * tw * td * b2,
        }
        comm = th * tw * mid * b1
        f1, f2 = mid, td
    else:  # PWPW
        tiles = {
            "ifm": th * tw * first.ifm.depth * b1,
            "weights_first": first.weights_size_elements * b1,
            "weights_second": td * mid * b2,
            "ofm": th * tw * td * b2,
        }
        comm = th * tw * mid * b1
        f1, f2 = mid, td
    return TileGeometry(tiles, comm, _num_tiles(second.ofm, tiling), f1, f2)


# ---------------------------------------------------------------------------
# Layer-by-layer estimators


def _check(geom: TileGeometry, gpu: Optional[GpuSpec]) -> None:
    if gpu is None:
        return
    report = geom.check(gpu)
    if not report.ok:
        raise ConstraintViolation(report)


def _estimate(elements: dict, byte_widths: dict, mode: EquationMode) -> GmaEstimate:
    def b(*keys):
        return sum(elements[k] * byte_widths[k] for k in keys if k in elements)

    return GmaEstimate(
        ifm_bytes=b("ifm"),
        overlap_bytes=b("overlap"),
        weight_bytes=b("weights", "weights_first", "weights_second"),
        ofm_bytes=b("ofm"),
        equation_mode=mode,
        elements=elements,
    )


def tile_counts(ofm, tiling: Tiling, mode: EquationMode) -> tuple[int, int]:
    """(spatial tiles, all tiles) of an OFM tiling.

    The verbatim forms divide tensor size by tile size; the consistent forms
    count the actual tile grid, which agrees whenever the tiles divide evenly
    and counts partial edge tiles correctly otherwise.
    """
    if mode is EquationMode.PAPER_VERBATIM:
        return ceil_div(ofm.hw, tiling.hw), ceil_div(ofm.size_elements, tiling.elements)
    spatial = ceil_div(ofm.height, tiling.ofm_tile_h) * ceil_div(ofm.width, tiling.ofm_tile_w)
    return spatial, spatial * ceil_div(ofm.depth, tiling.ofm_tile_d)


def pw_gma(layer: ConvLayer, tiling: Tiling, gpu: Optional[GpuSpec] = None,
           mode: EquationMode = EquationMode.CONSISTENT) -> GmaEstimate:
    if layer.kind is not LayerKind.PW:
        raise CostModelError(f"pw_gma needs a pointwise layer, {layer.id!r} is {layer.kind.value}")
    tiling.check_fits(layer.ofm)
    _check(lbl_geometry(layer, tiling), gpu)
    ofm = layer.ofm
    weights = layer.weights_size_elements
    partitions = ceil_div(weights, tiling.ofm_tile_d * layer.ifm.depth)
    spatial_tiles, all_tiles = tile_counts(ofm, tiling, mode)
    weight_loads = all_tiles if mode is EquationMode.PAPER_VERBATIM else spatial_tiles
    el = {
        "ifm": partitions * layer.ifm.size_elements,
        "overlap": 0,
        "weights": weight_loads * weights,
        "ofm": ofm.size_elements,
    }
    bw = layer.byte_width
    return _estimate(el, dict.fromkeys(el, bw), mode)


def dw_gma(layer: ConvLayer, tiling: Tiling, gpu: Optional[GpuSpec] = None,
           mode: EquationMode = EquationMode.CONSISTENT) -> GmaEstimate:
    if layer.kind is not LayerKind.DW:
        raise CostModelError(f"dw_gma needs a depthwise layer, {layer.id!r} is {layer.kind.value}")
    tiling.check_fits(layer.ofm)
    _check(lbl_geometry(layer, tiling), gpu)
    ofm = layer.ofm
    paper = mode is EquationMode.PAPER_VERBATIM
    el = {
        "ifm": ifm_read_elements(layer, mode),
        "overlap": 2 * layer.ifm.depth * layer_overlap(layer, tiling, not paper),
        "weights": tile_counts(ofm, tiling, mode)[0] * layer.weights_size_elements,
        "ofm": ofm.size_elements,
    }
    bw = layer.byte_width
    return _estimate(el, dict.fromkeys(el, bw), mode)


def lbl_gma(layer: ConvLayer, tiling: Tiling, gpu: Optional[GpuSpec] = None,
            mode: EquationMode = EquationMode.CONSISTENT) -> GmaEstimate:
    fn = dw_gma if layer.kind is LayerKind.DW else pw_gma
    return fn(layer, tiling, gpu, mode)


# ---------------------------------------------------------------------------
# Fused-module estimators


def check_pair(first: ConvLayer, second: ConvLayer, kind: FcmKind) -> None:
    if kind not in ADMISSIBLE_KINDS[(first.kind, second.kind)]:
        raise CostModelError(
            f"{kind.value} cannot fuse {first.kind.value} {first.id!r} with {second.kind.value} {second.id!r}"
        )
    if first.ofm != second.ifm:
        raise CostModelError(f"{second.id!r} does not consume the output of {first.id!r}")


def check_fcm_tiling(first: ConvLayer, second: ConvLayer, kind: FcmKind, tiling: Tiling) -> None:
    tiling.check_fits(second.ofm)
    if kind is FcmKind.PWDW and (
        tiling.ofm_tile_h != second.ofm.height or tiling.ofm_tile_w != second.ofm.width
    ):
        raise CostModelError("pwdw needs full-spatial tiles; spatial tiling requires pwdw_r")


def fcm_gma(first: ConvLayer, second: ConvLayer, kind: FcmKind, tiling: Tiling,
            gpu: Optional[GpuSpec] = None,
            mode: EquationMode = EquationMode.CONSISTENT) -> GmaEstimate:
    """GMA of two convolutions fused into one module.

    The first layer's output and the second layer's input live in the
    on-chip communication buffer and cost nothing. Every weight partition
    of the module forces the first layer's inputs to be re-read.
    """
    check_pair(first, second, kind)
    check_fcm_tiling(first, second, kind, tiling)
    _check(fcm_geometry(first, second, kind, tiling), gpu)

    out = second.ofm
    spatial_tiles, all_tiles = tile_counts(out, tiling, mode)
    paper = mode is EquationMode.PAPER_VERBATIM
    w1, w2 = first.weights_size_elements, second.weights_size_elements

    if kind in (FcmKind.PWDW, FcmKind.PWDW_R):
        parts = max(ceil_div(w1, tiling.ofm_tile_d * first.ifm.depth),
                    ceil_div(w2, tiling.ofm_tile_d * second.filter_h * second.filter_w))
        halo = layer_overlap(second, tiling, not paper) if kind is FcmKind.PWDW_R else 0
        # the fused PW only produces the intermediate rows the DW reads
        pw_in = first.ifm.size_elements if paper else ifm_read_elements(second, mode) // second.ifm.depth * first.ifm.depth
        el = {
            "ifm": pw_in * parts,
            "overlap": 2 * first.ifm.depth * halo * parts,
            "weights_first": (all_tiles if paper else spatial_tiles) * w1,
            "weights_second": spatial_tiles * w2,
            "ofm": 0 if paper else out.size_elements,
        }
    elif kind is FcmKind.DWPW:
        parts = ceil_div(w2, tiling.ofm_tile_d * second.ifm.depth)
        el = {
            "ifm": ifm_read_elements(first, mode) * parts,
            "overlap": 2 * first.ifm.depth * layer_overlap(first, tiling, not paper) * parts,
            "weights_first": spatial_tiles * parts * w1,
            "weights_second": (all_tiles if paper else spatial_tiles) * w2,
            "ofm": out.size_elements,
        }
    else:  # PWPW; the first layer's weights are never partitioned
        parts = max(1, ceil_div(w2, tiling.ofm_tile_d * second.ifm.depth))
        el = {
            "ifm": first.ifm.size_elements * parts,
            "overlap": 0,
            "weights_first": all_tiles * w1,
            "weights_second": (all_tiles if paper else spatial_tiles) * w2,
            "ofm": out.size_elements,
        }
    b1, b2 = first.byte_width, second.byte_width
    widths = {"ifm": b1, "overlap": b1, "weights_first": b1, "weights_second": b2, "ofm": b2}
    return _estimate(el, widths, mode)


# ---------------------------------------------------------------------------
# Redundant computation


def redundant_macs(first: ConvLayer, second: ConvLayer, kind: FcmKind, tiling: Tiling) -> int:
    check_pair(first, second, kind)
    if kind is not FcmKind.PWDW_R:
        return 0
    halo = layer_overlap(second, tiling)
    return halo * first.out_depth * first.macs_per_output


def redundancy_ratio(first: ConvLayer, second: ConvLayer, kind: FcmKind, tiling: Tiling) -> float:
    """Fraction of a fused module's MACs spent recomputing shared intermediates."""
    red = redundant_macs(first, second, kind, tiling)
    if red == 0:
        return 0.0
    return red / (first.macs + second.macs + red)
