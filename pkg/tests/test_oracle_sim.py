import pytest

from fcmplan import EquationMode, FcmKind, PRESETS, Tiling, fcm_gma, lbl_gma, simulate_fcm, simulate_lbl, verify
from fcmplan.cost_models import redundant_macs

from helpers import dw, pw, random_fcm_config, rng


def test_dw_reference_halo_count():
    layer = dw("d", 6, 6, 1)
    rep = simulate_lbl(layer, Tiling(3, 3, 1))
    assert rep.halo_loads == 24


def test_dw_reference_bytes():
    layer = dw("d", 6, 6, 4)
    rep = simulate_lbl(layer, Tiling(3, 3, 4))
    assert rep.bytes_total == 624 * 4
    assert rep.halo_loads == 96


def test_pw_depth_split_loads():
    layer = pw("p", 4, 4, 8, 16)
    rep = simulate_lbl(layer, Tiling(4, 4, 8))
    assert rep.ifm_loads == 2 * 128
    assert rep.weight_loads == 128
    assert rep.ofm_stores == 256
    assert rep.bytes_total == 640 * 4


def test_store_count_arbitrates_the_mode():
    a, b = pw("a", 6, 6, 4, 8), dw("b", 6, 6, 8)
    t = Tiling(6, 6, 8)
    rep = simulate_fcm(a, b, FcmKind.PWDW, t)
    assert rep.ofm_stores == 288
    assert rep.bytes_total == fcm_gma(a, b, FcmKind.PWDW, t).total_bytes == 536 * 4
    paper = simulate_fcm(a, b, FcmKind.PWDW, t, EquationMode.PAPER_VERBATIM)
    assert paper.bytes_total == 248 * 4


def test_pwdw_r_redundant_macs_reference():
    a, b = pw("a", 6, 6, 4, 8), dw("b", 6, 6, 8)
    t = Tiling(3, 3, 8)
    rep = simulate_fcm(a, b, FcmKind.PWDW_R, t)
    assert rep.macs_redundant == 768
    assert rep.macs_total == 1152 + 2592 + 768


def test_non_dividing_tiles_clip_at_edges():
    layer = dw("d", 7, 7, 2)
    rep = simulate_lbl(layer, Tiling(3, 3, 2))
    # halo is the shared-element measure and still matches the overlap formula
    assert rep.halo_loads * 2 == lbl_gma(layer, Tiling(3, 3, 2)).elements["overlap"]
    assert rep.ifm_loads_raw > rep.ifm_loads


def test_tiling_larger_than_tensor_rejected():
    with pytest.raises(ValueError):
        simulate_lbl(dw("d", 4, 4, 2), Tiling(5, 4, 2))


@pytest.mark.parametrize("kind", list(FcmKind))
def test_even_division_exactness_random(kind):
    r = rng(list(FcmKind).index(kind))
    for _ in range(25):
        a, b, t = random_fcm_config(r, kind)
        assert simulate_fcm(a, b, kind, t).bytes_total == fcm_gma(a, b, kind, t).total_bytes
        assert simulate_fcm(a, b, kind, t).macs_redundant == redundant_macs(a, b, kind, t)


def test_verify_even_only_has_zero_deviation():
    layer = dw("d", 12, 12, 8, f=3)
    table = verify(layer, PRESETS["gtx1660"], grid="even-only")
    assert table.rows
    assert table.max_even_deviation == 0
    assert all(r.even_division for r in table.rows)


def test_verify_csv_header():
    a, b = pw("a", 8, 8, 4, 8), pw("b", 8, 8, 8, 8)
    csv = verify((a, b, FcmKind.PWPW), grid=[Tiling(4, 4, 8), Tiling(3, 3, 8)]).to_csv()
    lines = csv.splitlines()
    assert lines[0] == "tiling,analytic_bytes,sim_bytes,abs_dev,rel_dev,even_division"
    assert lines[1].endswith("true") and lines[2].endswith("false")


def test_report_json_keys():
    rep = simulate_lbl(pw("p", 4, 4, 4, 4), Tiling(4, 4, 4)).to_json()
    for k in ("ifm_loads", "halo_loads", "weight_loads", "ofm_stores", "macs_total", "macs_redundant", "bytes_total"):
        assert k in rep
