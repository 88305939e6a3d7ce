"""Layer and graph data model for chains of depthwise/pointwise convolutions.

A model is a DAG of :class:`ConvLayer` nodes. Non-convolution layers
(normalization, activation) are not represented; they travel with the
convolution that precedes them.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable


class ModelError(ValueError):
    """Raised when a model document or graph is malformed."""


class LayerKind(str, enum.Enum):
    DW = "dw"
    PW = "pw"


class Padding(str, enum.Enum):
    SAME = "same"
    VALID = "valid"


class Precision(enum.Enum):
    FP32 = ("fp32", 4)
    INT8 = ("int8", 1)

    def __init__(self, label: str, byte_width: int):
        self.label = label
        self.byte_width = byte_width

    @classmethod
    def parse(cls, text: str) -> "Precision":
        for p in cls:
            if p.label == str(text).lower():
                return p
        raise ModelError(f"unknown precision {text!r} (expected 'fp32' or 'int8')")


class FcmKind(str, enum.Enum):
    DWPW = "dwpw"
    PWDW = "pwdw"
    PWDW_R = "pwdw_r"
    PWPW = "pwpw"


# (first kind, second kind) -> admissible fused modules
ADMISSIBLE_KINDS: dict[tuple[LayerKind, LayerKind], tuple[FcmKind, ...]] = {
    (LayerKind.DW, LayerKind.PW): (FcmKind.DWPW,),
    (LayerKind.PW, LayerKind.DW): (FcmKind.PWDW, FcmKind.PWDW_R),
    (LayerKind.PW, LayerKind.PW): (FcmKind.PWPW,),
    (LayerKind.DW, LayerKind.DW): (),
}


@dataclass(frozen=True)
class TensorDims:
    height: int
    width: int
    depth: int

    def __post_init__(self):
        for name in ("height", "width", "depth"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ModelError(f"tensor {name} must be a positive integer, got {v!r}")

    @property
    def hw(self) -> int:
        return self.height * self.width

    @property
    def size_elements(self) -> int:
        return self.height * self.width * self.depth

    def as_list(self) -> list[int]:
        return [self.height, self.width, self.depth]


def _out_extent(in_len: int, filt: int, stride: int, padding: Padding) -> int:
    if padding is Padding.SAME:
        return math.ceil(in_len / stride)
    return (in_len - filt) // stride + 1


def _pad_before(in_len: int, out_len: int, filt: int, stride: int, padding: Padding) -> int:
    if padding is Padding.VALID:
        return 0
    total = max((out_len - 1) * stride + filt - in_len, 0)
    return total // 2


@dataclass(frozen=True)
class ConvLayer:
    id: str
    kind: LayerKind
    ifm: TensorDims
    out_depth: int
    filter_h: int = 1
    filter_w: int = 1
    strides: int = 1
    precision: Precision = Precision.FP32
    padding: Padding = Padding.SAME

    def __post_init__(self):
        for name in ("out_depth", "filter_h", "filter_w", "strides"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ModelError(f"layer {self.id!r}: {name} must be a positive integer, got {v!r}")
        if self.kind is LayerKind.PW:
            if (self.filter_h, self.filter_w, self.strides) != (1, 1, 1):
                raise ModelError(f"layer {self.id!r}: pointwise layers need a 1x1 filter and stride 1")
        elif self.out_depth != self.ifm.depth:
            raise ModelError(
                f"layer {self.id!r}: depthwise out_depth {self.out_depth} != input depth {self.ifm.depth}"
            )
        elif min(self.filter_h, self.filter_w) < self.strides:
            # windows would skip input positions, which tiled loads cannot express
            raise ModelError(f"layer {self.id!r}: depthwise filter smaller than its stride")
        if self.padding is Padding.VALID and (self.filter_h > self.ifm.height or self.filter_w > self.ifm.width):
            raise ModelError(f"layer {self.id!r}: VALID filter larger than the input")

    @property
    def ofm(self) -> TensorDims:
        return TensorDims(
            _out_extent(self.ifm.height, self.filter_h, self.strides, self.padding),
            _out_extent(self.ifm.width, self.filter_w, self.strides, self.padding),
            self.out_depth,
        )

    @property
    def pad_top(self) -> int:
        return _pad_before(self.ifm.height, self.ofm.height, self.filter_h, self.strides, self.padding)

    @property
    def pad_left(self) -> int:
        return _pad_before(self.ifm.width, self.ofm.width, self.filter_w, self.strides, self.padding)

    @property
    def weights_size_elements(self) -> int:
        if self.kind is LayerKind.DW:
            return self.filter_h * self.filter_w * self.ifm.depth
        return self.ifm.depth * self.out_depth

    @property
    def macs_per_output(self) -> int:
        if self.kind is LayerKind.DW:
            return self.filter_h * self.filter_w
        return self.ifm.depth

    @property
    def macs(self) -> int:
        return self.ofm.size_elements * self.macs_per_output

    @property
    def byte_width(self) -> int:
        return self.precision.byte_width

    def with_precision(self, precision: Precision) -> "ConvLayer":
        return _replace(self, precision=precision)

    def renamed(self, new_id: str) -> "ConvLayer":
        return _replace(self, id=new_id)


def _replace(layer: ConvLayer, **changes) -> ConvLayer:
    from dataclasses import replace

    return replace(layer, **changes)


@dataclass(frozen=True)
class FusionCandidate:
    first: str
    second: str
    admissible_kinds: tuple[FcmKind, ...]


@dataclass(frozen=True)
class ModelGraph:
    layers: tuple[ConvLayer, ...]
    edges: tuple[tuple[str, str], ...] = ()
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _topo: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        index: dict[str, ConvLayer] = {}
        for layer in self.layers:
            if layer.id in index:
                raise ModelError(f"duplicate layer id {layer.id!r}")
            index[layer.id] = layer
        for a, b in self.edges:
            for end in (a, b):
                if end not in index:
                    raise ModelError(f"edge ({a!r}, {b!r}) references unknown layer {end!r}")
            if a == b:
                raise ModelError(f"self-loop on layer {a!r}")
            produced, consumed = index[a].ofm, index[b].ifm
            if produced != consumed:
                raise ModelError(
                    f"shape mismatch on edge ({a!r}, {b!r}): {a!r} produces "
                    f"{produced.as_list()} but {b!r} expects {consumed.as_list()}"
                )
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_topo", self._toposort())

    def _toposort(self) -> tuple[str, ...]:
        # Kahn's algorithm, ties resolved by declaration order
        order_of = {l.id: i for i, l in enumerate(self.layers)}
        indeg = {l.id: 0 for l in self.layers}
        for _, b in self.edges:
            indeg[b] += 1
        ready = sorted((i for i, d in indeg.items() if d == 0), key=order_of.get)
        out = []
        while ready:
            n = ready.pop(0)
            out.append(n)
            for c in self.consumers(n):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
                    ready.sort(key=order_of.get)
        if len(out) != len(self.layers):
            stuck = sorted(set(indeg) - set(out), key=order_of.get)
            raise ModelError(f"graph has a cycle through layers {stuck}")
        return tuple(out)

    def __getitem__(self, layer_id: str) -> ConvLayer:
        return self._index[layer_id]

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def topological_order(self) -> tuple[str, ...]:
        return self._topo

    def consumers(self, layer_id: str) -> list[str]:
        return [b for a, b in self.edges if a == layer_id]

    def producers(self, layer_id: str) -> list[str]:
        return [a for a, b in self.edges if b == layer_id]


def fusion_candidates(graph: ModelGraph) -> list[FusionCandidate]:
    """Adjacent (producer, consumer) pairs that some fused module can cover.

    Only producers with exactly one consumer qualify. DW->DW pairs have no
    fused module and are skipped.
    """
    out = []
    for lid in graph.topological_order:
        cons = graph.consumers(lid)
        if len(cons) != 1:
            continue
        first, second = graph[lid], graph[cons[0]]
        kinds = ADMISSIBLE_KINDS[(first.kind, second.kind)]
        if kinds:
            out.append(FusionCandidate(first.id, second.id, kinds))
    return out


# ---------------------------------------------------------------------------
# JSON model format

_TOP_FIELDS = {"precision", "layers", "edges"}
_LAYER_FIELDS = {"id", "kind", "ifm", "filter", "strides", "out_depth", "padding", "precision"}
_REQUIRED_LAYER_FIELDS = {"id", "kind", "ifm", "out_depth"}


def _expect_int_list(value: Any, n: int, what: str) -> list[int]:
    if (
        not isinstance(value, list)
        or len(value) != n
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ModelError(f"{what} must be a list of {n} integers, got {value!r}")
    return value


def _parse_layer(raw: Any, default_precision: Precision, pos: int) -> ConvLayer:
    if not isinstance(raw, dict):
        raise ModelError(f"layers[{pos}] must be an object")
    lid = raw.get("id", f"#{pos}")
    unknown = set(raw) - _LAYER_FIELDS
    if unknown:
        raise ModelError(f"layer {lid!r}: unknown fields {sorted(unknown)}")
    missing = _REQUIRED_LAYER_FIELDS - set(raw)
    if missing:
        raise ModelError(f"layer {lid!r}: missing fields {sorted(missing)}")
    if not isinstance(raw["id"], str) or not raw["id"]:
        raise ModelError(f"layers[{pos}]: id must be a non-empty string")
    try:
        kind = LayerKind(raw["kind"])
    except ValueError:
        raise ModelError(f"layer {lid!r}: kind must be 'dw' or 'pw', got {raw['kind']!r}") from None
    ifm = TensorDims(*_expect_int_list(raw["ifm"], 3, f"layer {lid!r}: ifm"))
    if "filter" in raw:
        fh, fw = _expect_int_list(raw["filter"], 2, f"layer {lid!r}: filter")
    elif kind is LayerKind.PW:
        fh, fw = 1, 1
    else:
        raise ModelError(f"layer {lid!r}: depthwise layers need a 'filter'")
    strides = raw.get("strides", 1)
    if not isinstance(strides, int) or isinstance(strides, bool):
        raise ModelError(f"layer {lid!r}: strides must be a single integer, got {strides!r}")
    try:
        padding = Padding(raw.get("padding", "same"))
    except ValueError:
        raise ModelError(f"layer {lid!r}: padding must be 'same' or 'valid', got {raw.get('padding')!r}") from None
    precision = Precision.parse(raw["precision"]) if "precision" in raw else default_precision
    out_depth = raw["out_depth"]
    if not isinstance(out_depth, int) or isinstance(out_depth, bool):
        raise ModelError(f"layer {lid!r}: out_depth must be an integer")
    return ConvLayer(
        id=raw["id"], kind=kind, ifm=ifm, out_depth=out_depth, filter_h=fh, filter_w=fw,
        strides=strides, precision=precision, padding=padding,
    )


def parse_model(text: str | bytes | dict) -> ModelGraph:
    """Parse and validate a JSON model document."""
    if isinstance(text, dict):
        doc = text
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ModelError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise ModelError(f"unknown top-level fields {sorted(unknown)}")
    if "layers" not in doc or not isinstance(doc["layers"], list):
        raise ModelError("'layers' must be a list")
    precision = Precision.parse(doc.get("precision", "fp32"))
    layers = tuple(_parse_layer(raw, precision, i) for i, raw in enumerate(doc["layers"]))
    edges_raw = doc.get("edges", [])
    if not isinstance(edges_raw, list):
        raise ModelError("'edges' must be a list")
    edges = []
    for e in edges_raw:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e)):
            raise ModelError(f"edge {e!r} must be a pair of layer ids")
        edges.append((e[0], e[1]))
    return ModelGraph(layers, tuple(edges))


def serialize_model(graph: ModelGraph) -> dict:
    precisions = {l.precision for l in graph.layers}
    common = precisions.pop() if len(precisions) == 1 else Precision.FP32
    layers = []
    for l in graph.layers:
        entry: dict[str, Any] = {
            "id": l.id,
            "kind": l.kind.value,
            "ifm": l.ifm.as_list(),
            "filter": [l.filter_h, l.filter_w],
            "strides": l.strides,
            "out_depth": l.out_depth,
            "padding": l.padding.value,
        }
        if l.precision is not common:
            entry["precision"] = l.precision.label
        layers.append(entry)
    return {"precision": common.label, "layers": layers, "edges": [list(e) for e in graph.edges]}


def chain(layers: Iterable[ConvLayer]) -> ModelGraph:
    """Build a linear graph connecting ``layers`` in order."""
    layers = tuple(layers)
    edges = tuple((a.id, b.id) for a, b in zip(layers, layers[1:]))
    return ModelGraph(layers, edges)
