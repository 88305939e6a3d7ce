"""Layer builders and random generators shared by the test modules."""

from __future__ import annotations

import random

from fcmplan import ConvLayer, FcmKind, LayerKind, Padding, Precision, TensorDims, Tiling


def pw(lid, h, w, c, out, precision=Precision.FP32):
    return ConvLayer(lid, LayerKind.PW, TensorDims(h, w, c), out, precision=precision)


def dw(lid, h, w, c, f=3, s=1, precision=Precision.FP32, padding=Padding.SAME):
    return ConvLayer(lid, LayerKind.DW, TensorDims(h, w, c), c, f, f, s, precision, padding)


def divisors(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def random_even_tiling(rng, ofm, min_spatial=1):
    """A tiling whose every dimension divides the OFM and is at least ``min_spatial`` wide."""
    th = rng.choice([d for d in divisors(ofm.height) if d >= min(min_spatial, ofm.height)])
    tw = rng.choice([d for d in divisors(ofm.width) if d >= min(min_spatial, ofm.width)])
    td = rng.choice(divisors(ofm.depth))
    return Tiling(th, tw, td)


def halo_min(layer):
    """Smallest tile extent that keeps every input element within two tiles."""
    if layer is None or layer.kind is LayerKind.PW:
        return 1
    return max(1, -(-(layer.filter_h - layer.strides) // layer.strides))


def random_padding(rng, extent, f):
    return rng.choice(list(Padding)) if extent >= f else Padding.SAME


def random_pair(rng, kind, precision=Precision.FP32):
    """A random layer pair admissible for ``kind`` whose final OFM has composite extents."""
    h = rng.choice([4, 6, 8, 12, 16])
    c = rng.choice([2, 4, 8, 16])
    mid = rng.choice([2, 4, 8, 16])
    f = rng.choice([3, 5])
    if kind is FcmKind.DWPW:
        s = rng.choice([1, 2])
        a = dw("a", h, h, c, f, s, precision, random_padding(rng, h, f))
        b = pw("b", a.ofm.height, a.ofm.width, c, mid, precision)
    elif kind is FcmKind.PWPW:
        a = pw("a", h, h, c, mid, precision)
        b = pw("b", h, h, mid, rng.choice([2, 4, 8, 16]), precision)
    else:
        s = rng.choice([1, 2]) if kind is FcmKind.PWDW_R else 1
        a = pw("a", h, h, c, mid, precision)
        b = dw("b", h, h, mid, f, s, precision, random_padding(rng, h, f))
    return a, b


def halo_layer(a, b, kind):
    if kind is FcmKind.DWPW:
        return a
    if kind in (FcmKind.PWDW, FcmKind.PWDW_R):
        return b
    return None


def random_fcm_config(rng, kind):
    a, b = random_pair(rng, kind)
    ofm = b.ofm
    if kind is FcmKind.PWDW:
        return a, b, Tiling(ofm.height, ofm.width, rng.choice(divisors(ofm.depth)))
    return a, b, random_even_tiling(rng, ofm, halo_min(halo_layer(a, b, kind)))


def rng(seed=0):
    return random.Random(seed)
