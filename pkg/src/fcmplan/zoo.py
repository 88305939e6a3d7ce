"""Reference model graphs built from published architectures."""

from __future__ import annotations

from .model_ir import ConvLayer, LayerKind, ModelGraph, Precision, TensorDims

# (stride of the depthwise layer, pointwise output channels) per block
_MOBILENET_V1_BLOCKS = [
    (1, 64), (2, 128), (1, 128), (2, 256), (1, 256), (2, 512),
    (1, 512), (1, 512), (1, 512), (1, 512), (1, 512),
    (2, 1024), (1, 1024),
]


def mobilenet_v1(precision: Precision = Precision.FP32, classifier: bool = True) -> ModelGraph:
    """Depthwise-separable body of MobileNetV1 at 224x224 input.

    The first (standard) convolution is not representable; the body starts
    from its 112x112x32 output. The classifier is a 1x1 pointwise layer on
    the pooled 1x1x1024 map, disconnected from the body by the pooling.
    """
    layers: list[ConvLayer] = []
    edges: list[tuple[str, str]] = []
    h = w = 112
    c = 32
    for i, (s, out) in enumerate(_MOBILENET_V1_BLOCKS, start=1):
        dw = ConvLayer(f"dw{i}", LayerKind.DW, TensorDims(h, w, c), c, 3, 3, s, precision)
        pw = ConvLayer(f"pw{i}", LayerKind.PW, dw.ofm, out, precision=precision)
        if layers:
            edges.append((layers[-1].id, dw.id))
        edges.append((dw.id, pw.id))
        layers += [dw, pw]
        h, w, c = pw.ofm.height, pw.ofm.width, pw.ofm.depth
    if classifier:
        layers.append(ConvLayer("fc", LayerKind.PW, TensorDims(1, 1, 1024), 1000, precision=precision))
    return ModelGraph(tuple(layers), tuple(edges))
