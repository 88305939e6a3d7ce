import pytest
from hypothesis import given, settings, strategies as st

from fcmplan import (
    ConstraintViolation,
    CostModelError,
    EquationMode,
    FcmKind,
    PRESETS,
    Precision,
    Tiling,
    constraint_check,
    dw_gma,
    fcm_gma,
    lbl_gma,
    overlap,
    pw_gma,
    redundancy_ratio,
)
from fcmplan.cost_models import ceil_div, redundant_macs, fcm_geometry, lbl_geometry

from helpers import dw, pw, random_fcm_config, rng

PAPER = EquationMode.PAPER_VERBATIM
CONS = EquationMode.CONSISTENT


def test_overlap_reference_case():
    assert overlap(6, 6, 3, 3, 3, 3, 1) == 24


def test_overlap_single_tile_is_zero():
    assert overlap(9, 9, 9, 9, 3, 3, 1) == 0


def test_overlap_clamps_when_stride_exceeds_filter():
    assert overlap(8, 8, 2, 2, 1, 1, 2) == 0


def test_pw_single_tile_counts_each_array_once():
    layer = pw("p", 4, 4, 8, 16)
    est = pw_gma(layer, Tiling(4, 4, 16))
    assert est.total_elements == 4 * 4 * 8 + 8 * 16 + 4 * 4 * 16
    assert est.total_bytes == 4 * est.total_elements


def test_pw_depth_tiling_modes_differ_only_in_weights():
    layer = pw("p", 4, 4, 8, 16)
    t = Tiling(4, 4, 8)
    cons, paper = pw_gma(layer, t, mode=CONS), pw_gma(layer, t, mode=PAPER)
    assert cons.total_elements == 640
    assert paper.total_elements == 768
    assert cons.elements["ifm"] == paper.elements["ifm"] == 2 * 128
    assert paper.elements["weights"] - cons.elements["weights"] == 128


def test_dw_reference_tiling():
    layer = dw("d", 6, 6, 4)
    est = dw_gma(layer, Tiling(3, 3, 4))
    # 2 * depth * overlap + ifm + ofm + 4 weight loads of 36
    assert est.elements["overlap"] == 2 * 4 * 24
    assert est.total_elements == 192 + 144 + 144 + 4 * 36


def test_pwdw_single_tile_modes():
    a, b = pw("a", 6, 6, 4, 8), dw("b", 6, 6, 8)
    t = Tiling(6, 6, 8)
    assert fcm_gma(a, b, FcmKind.PWDW, t, mode=CONS).total_elements == 536
    assert fcm_gma(a, b, FcmKind.PWDW, t, mode=PAPER).total_elements == 248


def test_pwdw_requires_full_spatial_tiles():
    a, b = pw("a", 4, 4, 8, 16), dw("b", 4, 4, 16)
    with pytest.raises(CostModelError):
        fcm_gma(a, b, FcmKind.PWDW, Tiling(2, 4, 16))


def test_inadmissible_kind_rejected():
    a, b = pw("a", 4, 4, 8, 16), dw("b", 4, 4, 16)
    with pytest.raises(CostModelError):
        fcm_gma(a, b, FcmKind.DWPW, Tiling(4, 4, 16))


def test_pair_must_be_connected():
    a, b = pw("a", 4, 4, 8, 16), dw("b", 4, 4, 8)
    with pytest.raises(CostModelError):
        fcm_gma(a, b, FcmKind.PWDW_R, Tiling(2, 2, 8))


def test_pwdw_r_reference_redundancy():
    a, b = pw("a", 6, 6, 4, 8), dw("b", 6, 6, 8)
    t = Tiling(3, 3, 8)
    assert redundant_macs(a, b, FcmKind.PWDW_R, t) == 24 * 8 * 4
    assert redundancy_ratio(a, b, FcmKind.PWDW_R, t) == pytest.approx(768 / (1152 + 2592 + 768), abs=1e-12)
    assert redundancy_ratio(a, b, FcmKind.PWDW, Tiling(6, 6, 8)) == 0.0


def test_gpu_violation_names_clause():
    a, b = pw("a", 16, 16, 512, 512), pw("b", 16, 16, 512, 512)
    with pytest.raises(ConstraintViolation) as exc:
        fcm_gma(a, b, FcmKind.PWPW, Tiling(4, 4, 32), PRESETS["gtx1660"])
    names = [n for n, _ in exc.value.report.violations]
    assert "l1_capacity" in names


def test_constraint_check_slacks():
    gpu = PRESETS["gtx1660"]
    rep = constraint_check([1000, 2000], 500, gpu.num_sms, gpu)
    assert rep.ok
    assert rep.l1_slack == gpu.l1_bytes_per_sm - 3500
    assert rep.occupancy_slack == 0
    bad = constraint_check([1000], 0, gpu.num_sms - 1, gpu)
    assert [n for n, _ in bad.violations] == ["sm_occupancy"]


def test_geometry_tile_sizes():
    layer = pw("p", 8, 8, 16, 32)
    g = lbl_geometry(layer, Tiling(4, 4, 8))
    assert g.num_output_tiles == 2 * 2 * 4
    assert g.comm_buffer_bytes == 0
    a, b = pw("a", 8, 8, 16, 32), dw("b", 8, 8, 32)
    g2 = fcm_geometry(a, b, FcmKind.PWDW_R, Tiling(4, 4, 8))
    assert g2.comm_buffer_bytes > 0


# ---------------------------------------------------------------------------
# properties

dims = st.sampled_from([4, 6, 8, 12, 16, 24])


@settings(max_examples=60, deadline=None)
@given(c=dims, tile=st.integers(1, 24), f=st.sampled_from([3, 5, 7]))
def test_overlap_monotone_in_tile_size(c, tile, f):
    tile = min(tile, c)
    smaller = overlap(c, c, tile, tile, f, f, 1)
    bigger = overlap(c, c, min(c, tile + 1), min(c, tile + 1), f, f, 1)
    assert bigger <= smaller


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), kind=st.sampled_from(list(FcmKind)), mode=st.sampled_from(list(EquationMode)))
def test_precision_scales_bytes_not_elements(seed, kind, mode):
    a, b, t = random_fcm_config(rng(seed), kind)
    f32 = fcm_gma(a, b, kind, t, mode=mode)
    i8 = fcm_gma(a.with_precision(Precision.INT8), b.with_precision(Precision.INT8), kind, t, mode=mode)
    assert f32.elements == i8.elements
    assert f32.total_bytes == 4 * i8.total_bytes
    for layer in (a, b):
        e32 = lbl_gma(layer, Tiling(*layer.ofm.as_list()), mode=mode)
        e8 = lbl_gma(layer.with_precision(Precision.INT8), Tiling(*layer.ofm.as_list()), mode=mode)
        assert e32.total_bytes == 4 * e8.total_bytes


@settings(max_examples=40, deadline=None)
@given(h=dims, c=st.sampled_from([1, 3, 8]), out=st.sampled_from([1, 5, 16]))
def test_single_tile_identity(h, c, out):
    p = pw("p", h, h, c, out)
    assert pw_gma(p, Tiling(h, h, out)).total_elements == p.ifm.size_elements + p.weights_size_elements + p.ofm.size_elements
    d = dw("d", h, h, c)
    assert dw_gma(d, Tiling(h, h, c)).total_elements == d.ifm.size_elements + d.weights_size_elements + d.ofm.size_elements


@settings(max_examples=40, deadline=None)
@given(h=dims, c=st.sampled_from([2, 8]), mid=st.sampled_from([4, 16]), mode=st.sampled_from(list(EquationMode)))
def test_pwdw_r_equals_pwdw_without_spatial_split(h, c, mid, mode):
    a, b = pw("a", h, h, c, mid), dw("b", h, h, mid)
    for td in (1, mid):
        t = Tiling(h, h, td)
        assert fcm_gma(a, b, FcmKind.PWDW, t, mode=mode) .total_bytes == fcm_gma(a, b, FcmKind.PWDW_R, t, mode=mode).total_bytes


@settings(max_examples=40, deadline=None)
@given(h=dims, c=st.sampled_from([2, 8, 16]), mid=st.sampled_from([4, 16]))
def test_single_tile_fusion_beats_layer_by_layer(h, c, mid):
    # with one work unit the intermediate round trip is the only difference
    cases = [
        (pw("a", h, h, c, mid), dw("b", h, h, mid), FcmKind.PWDW),
        (dw("a", h, h, c), pw("b", h, h, c, mid), FcmKind.DWPW),
        (pw("a", h, h, c, mid), pw("b", h, h, mid, c), FcmKind.PWPW),
    ]
    for a, b, kind in cases:
        fused = fcm_gma(a, b, kind, Tiling(*b.ofm.as_list()))
        lbl = lbl_gma(a, Tiling(*a.ofm.as_list())).total_bytes + lbl_gma(b, Tiling(*b.ofm.as_list())).total_bytes
        assert fused.total_bytes == lbl - 2 * 4 * a.ofm.size_elements


def test_ceil_div():
    assert ceil_div(7, 2) == 4
    assert ceil_div(8, 2) == 4


def test_dw_single_tile_and_depth_split():
    layer = dw("d", 6, 6, 4)
    assert dw_gma(layer, Tiling(6, 6, 4)).total_elements == 324
    split = dw_gma(layer, Tiling(6, 6, 2))
    assert split.elements["overlap"] == 0
    assert split.elements["weights"] == 36
    assert split.total_elements == 324


def test_pw_int8_single_tile_bytes():
    layer = pw("p", 4, 4, 8, 16, Precision.INT8)
    assert pw_gma(layer, Tiling(4, 4, 16)).total_bytes == 512


def test_pwdw_r_halo_surcharge_over_pwdw():
    a, b = pw("a", 6, 6, 4, 8), dw("b", 6, 6, 8)
    r = fcm_gma(a, b, FcmKind.PWDW_R, Tiling(3, 3, 8))
    assert r.elements["overlap"] == 2 * 4 * 24 == 192


def test_rtx_occupancy_slack():
    gpu = PRESETS["rtx_a4000"]
    rep = constraint_check([1024], 0, 100, gpu)
    assert rep.violations == [("sm_occupancy", -28)]


def test_constraint_boundaries_and_clause_independence():
    gpu = PRESETS["gtx1660"]
    assert constraint_check([gpu.l1_bytes_per_sm], 0, gpu.num_sms, gpu).ok
    comm = gpu.shared_mem_bytes_per_sm + 1
    rep = constraint_check([0], comm, gpu.num_sms, gpu)
    assert [n for n, _ in rep.violations] == ["shared_capacity"]


def test_valid_remainder_is_not_charged_in_consistent_mode():
    from fcmplan import Padding
    layer = dw("d", 12, 12, 2, f=5, s=2, padding=Padding.VALID)  # reads rows 0..10 only
    t = Tiling(*layer.ofm.as_list())
    assert dw_gma(layer, t).elements["ifm"] == 11 * 11 * 2
    assert dw_gma(layer, t, mode=PAPER).elements["ifm"] == 12 * 12 * 2


def test_partial_edge_tiles_counted_in_consistent_mode():
    a, b = pw("a", 6, 6, 16, 16), pw("b", 6, 6, 16, 4)
    t = Tiling(4, 1, 3)  # 2 x 6 x 2 = 24 work units
    cons = fcm_gma(a, b, FcmKind.PWPW, t)
    paper = fcm_gma(a, b, FcmKind.PWPW, t, mode=PAPER)
    assert cons.elements["weights_first"] == 24 * 256
    assert paper.elements["weights_first"] == 12 * 256
