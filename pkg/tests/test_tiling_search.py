import itertools

import pytest
from hypothesis import given, settings, strategies as st

from fcmplan import FcmKind, GpuSpec, PRESETS, Precision, SearchGrid, Tiling, best_fcm, best_lbl, enumerate_tilings, fcm_gma, lbl_gma
from fcmplan.cost_models import fcm_geometry, lbl_geometry

from helpers import dw, pw, random_pair

BIG = 1 << 30


def gpu(sms, l1=BIG, shared=None, warp=1):
    return GpuSpec("test", sms, l1, l1 if shared is None else shared, warp_size=warp)


def test_single_sm_single_tile():
    r = best_lbl(dw("d", 6, 6, 4), gpu(1))
    assert r.tiling == Tiling(6, 6, 4)
    assert r.estimate.total_bytes == 324 * 4


def test_four_sms_forces_split():
    r = best_lbl(dw("d", 6, 6, 4), gpu(4))
    assert r.geometry.num_output_tiles >= 4
    # a depth split avoids halos entirely and beats any spatial split
    assert r.estimate.total_elements == 324
    assert lbl_gma(dw("d", 6, 6, 4), Tiling(3, 3, 4)).total_elements == 624


def test_warp_rule_excludes_non_multiples():
    layer = pw("p", 8, 6, 8, 64)
    tilings = list(enumerate_tilings(layer, gpu(1, warp=32)))
    assert tilings
    assert all(t.elements % 32 == 0 for t in tilings)
    assert Tiling(2, 3, 8) not in tilings


def test_tiny_l1_gives_empty_stream():
    layer = pw("p", 8, 8, 64, 64)
    assert list(enumerate_tilings(layer, gpu(1, l1=1024, warp=32))) == []
    r = best_lbl(layer, gpu(1, l1=1024, warp=32))
    assert not r.feasible and r.tiling is None
    assert "l1_capacity" in r.infeasibility_reason()


def test_pwdw_pair_unconstrained_and_occupancy_bound():
    a, b = pw("a", 6, 6, 4, 8), dw("b", 6, 6, 8)
    one = best_fcm(a, b, FcmKind.PWDW, gpu(1))
    assert one.tiling == Tiling(6, 6, 8) and one.redundancy_ratio == 0
    four = best_fcm(a, b, FcmKind.PWDW_R, gpu(4))
    assert four.feasible and four.geometry.num_output_tiles >= 4


def test_fp32_pwpw_infeasible_on_small_l1():
    # 512x256 weights per layer = 512 KB in FP32
    a, b = pw("a", 16, 16, 512, 256), pw("b", 16, 16, 256, 512)
    assert a.weights_size_elements * 4 == 512 * 1024
    r = best_fcm(a, b, FcmKind.PWPW, PRESETS["gtx1660"])
    assert not r.feasible
    assert r.grid_points > 0


def test_results_pass_constraints_and_are_deterministic():
    g = PRESETS["rtx_a4000"]
    layer = pw("p", 28, 28, 128, 128)
    r1 = best_lbl.__wrapped__(layer, g)
    r2 = best_lbl.__wrapped__(layer, g)
    assert r1 == r2
    assert lbl_geometry(layer, r1.tiling).check(g).ok


def _brute(target, g, grid):
    first, second, kind = target if isinstance(target, tuple) else (target, None, None)
    out = (second or first).ofm
    best = None
    for td, th, tw in itertools.product(grid.depth_sizes(out.depth, g.warp_size),
                                        grid.spatial_sizes(out.height), grid.spatial_sizes(out.width)):
        t = Tiling(th, tw, td)
        if t.elements % g.warp_size:
            continue
        if kind is None:
            if first.kind.value == "dw" and min(th, tw) * first.strides < first.filter_h - first.strides:
                continue
            if not lbl_geometry(first, t).check(g).ok:
                continue
            v = lbl_gma(first, t).total_bytes
        else:
            halo = first if kind is FcmKind.DWPW else second if kind in (FcmKind.PWDW, FcmKind.PWDW_R) else None
            if kind is FcmKind.PWDW and (th, tw) != (out.height, out.width):
                continue
            if halo is not None and min(th, tw) * halo.strides < halo.filter_h - halo.strides:
                continue
            if not fcm_geometry(first, second, kind, t).check(g).ok:
                continue
            v = fcm_gma(first, second, kind, t).total_bytes
        best = v if best is None else min(best, v)
    return best


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), kind=st.sampled_from(list(FcmKind)), sms=st.sampled_from([1, 2, 4, 8]),
       l1=st.sampled_from([4096, 16384, BIG]), warp=st.sampled_from([1, 4]))
def test_argmin_matches_brute_force(seed, kind, sms, l1, warp):
    import random
    a, b = random_pair(random.Random(seed), kind)
    g = gpu(sms, l1=l1, warp=warp)
    grid = SearchGrid()
    r = best_fcm(a, b, kind, g, grid)
    assert r.total_bytes == _brute((a, b, kind), g, grid)
    for layer in (a, b):
        assert best_lbl(layer, g, grid).total_bytes == _brute(layer, g, grid)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), kind=st.sampled_from(list(FcmKind)), sms=st.sampled_from([1, 4]))
def test_grid_subset_never_lowers_minimum(seed, kind, sms):
    import random
    a, b = random_pair(random.Random(seed), kind)
    full = best_fcm(a, b, kind, gpu(sms))
    sub = best_fcm(a, b, kind, gpu(sms), SearchGrid(max_pow2=2, max_divisor=2))
    if sub.feasible:
        assert full.feasible and full.total_bytes <= sub.total_bytes


def test_grid_from_json_rejects_unknown():
    assert SearchGrid.from_json({"spatial": [1, 2]}).spatial == (1, 2)
    with pytest.raises(ValueError):
        SearchGrid.from_json({"step": 3})


def test_default_grid_sets():
    grid = SearchGrid()
    assert grid.spatial_sizes(12) == [1, 2, 3, 4, 6, 8, 12]
    assert grid.depth_sizes(96, 32) == [32, 64, 96]
    assert grid.depth_sizes(40, 32) == [32, 40]
    assert grid.depth_sizes(16, 32) == [16]
