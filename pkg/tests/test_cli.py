import json

import jsonschema
import pytest

from fcmplan import cli, schemas

TWO = {
    "layers": [
        {"id": "a", "kind": "pw", "ifm": [8, 8, 8], "out_depth": 32},
        {"id": "b", "kind": "dw", "ifm": [8, 8, 32], "filter": [3, 3], "out_depth": 32},
    ],
    "edges": [["a", "b"]],
}
ONE_SM = {"name": "one", "num_sms": 1, "l1_kb": 1024, "shared_kb": 512, "warp_size": 1,
          "peak_gflops": 100, "peak_gbps": 10}


@pytest.fixture
def files(tmp_path):
    model = tmp_path / "m.json"
    model.write_text(json.dumps(TWO))
    gpu = tmp_path / "g.json"
    gpu.write_text(json.dumps(ONE_SM))
    return str(model), str(gpu)


def run(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_plan_two_layer_chain(capsys, files):
    model, gpu = files
    code, out, _ = run(capsys, "plan", model, "--gpu", gpu, "--roofline")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schemas.PLAN)
    assert len(doc["entries"]) == 1 and doc["entries"][0]["mode"] == "pwdw"
    assert doc["fused_fraction"] == 1.0
    assert doc["warnings"] == []


def test_plan_is_byte_identical(capsys, files):
    model, _ = files
    outs = [run(capsys, "plan", model, "--gpu", "rtx_a4000")[1] for _ in range(2)]
    assert outs[0] == outs[1]
    assert "generated_at" not in outs[0]


def test_stamp_opts_in(capsys, files):
    model, gpu = files
    doc = json.loads(run(capsys, "plan", model, "--gpu", gpu, "--stamp")[1])
    assert "generated_at" in doc


def test_plan_text_format(capsys, files):
    model, gpu = files
    code, out, _ = run(capsys, "plan", model, "--gpu", gpu, "--format", "text")
    assert code == 0 and "pwdw" in out


def test_out_file(capsys, files, tmp_path):
    model, gpu = files
    target = tmp_path / "plan.json"
    assert run(capsys, "plan", model, "--gpu", gpu, "--out", str(target))[0] == 0
    jsonschema.validate(json.loads(target.read_text()), schemas.PLAN)


def test_unplannable_layer_is_a_warning(capsys, tmp_path):
    model = tmp_path / "fc.json"
    model.write_text(json.dumps({"layers": [{"id": "fc", "kind": "pw", "ifm": [1, 1, 1024], "out_depth": 1000}]}))
    code, out, _ = run(capsys, "plan", str(model), "--gpu", "rtx_a4000")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schemas.PLAN)
    assert doc["warnings"][0]["type"] == "unplannable_layer"


def test_estimate_layer_and_pair(capsys, files):
    model, gpu = files
    code, out, _ = run(capsys, "estimate", model, "--gpu", gpu, "--layer", "b", "--tiling", "4,4,32")
    assert code == 0
    jsonschema.validate(json.loads(out), schemas.ESTIMATE)
    code, out, _ = run(capsys, "estimate", model, "--gpu", gpu, "--pair", "a", "b", "--kind", "pwdw_r",
                       "--tiling", "4,4,32", "--mode", "paper")
    doc = json.loads(out)
    jsonschema.validate(doc, schemas.ESTIMATE)
    assert doc["redundancy"] > 0


def test_estimate_violation_names_clause(capsys, files):
    model, _ = files
    code, _, err = run(capsys, "estimate", model, "--gpu", "rtx_a4000", "--layer", "a", "--tiling", "8,8,32")
    assert code != 0
    doc = json.loads(err)
    jsonschema.validate(doc, schemas.ERROR)
    names = [v["clause"] if isinstance(v, dict) else v for v in doc["error"]["constraints"]["violations"]]
    assert any("sm_occupancy" in json.dumps(n) for n in names)


def test_search_and_simulate(capsys, files):
    model, gpu = files
    code, out, _ = run(capsys, "search", model, "--gpu", gpu, "--pair", "a", "b")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schemas.SEARCH)
    assert {r["kind"] for r in doc["results"]} == {"pwdw", "pwdw_r"}
    code, out, _ = run(capsys, "simulate", model, "--gpu", gpu, "--layer", "b", "--tiling", "4,4,32")
    assert code == 0
    jsonschema.validate(json.loads(out), schemas.SIMULATE)


def test_verify_even_only_zero_deviation(capsys, files):
    model, gpu = files
    code, out, _ = run(capsys, "verify", model, "--gpu", gpu, "--layer", "b", "--grid", "even-only")
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0].startswith("tiling,analytic_bytes,sim_bytes,abs_dev")
    assert len(rows) > 1
    assert all(r.split(",")[3] == "0" for r in rows[1:])


def test_classify(capsys, files):
    model, gpu = files
    code, out, _ = run(capsys, "classify", model, "--gpu", gpu)
    assert code == 0
    jsonschema.validate(json.loads(out), schemas.CLASSIFY)
    code, out, _ = run(capsys, "classify", "--gpu", gpu, "--macs", "1000", "--bytes", "10")
    assert json.loads(out)["kernels"][0]["roofline"]["bound"] == "compute"


@pytest.mark.parametrize("argv", [
    ["plan", "/nonexistent.json", "--gpu", "rtx_a4000"],
    ["plan", "MODEL", "--gpu", "no_such_gpu"],
    ["estimate", "MODEL", "--gpu", "rtx_a4000", "--layer", "zz", "--tiling", "1,1,1"],
    ["estimate", "MODEL", "--gpu", "rtx_a4000", "--layer", "a", "--tiling", "1,1"],
    ["estimate", "MODEL", "--gpu", "rtx_a4000", "--pair", "a", "b", "--kind", "dwpw", "--tiling", "1,1,32"],
    ["frobnicate"],
])
def test_input_errors_exit_two(capsys, files, argv):
    model, _ = files
    argv = [model if a == "MODEL" else a for a in argv]
    code, _, err = run(capsys, *argv)
    assert code == 2
    if argv[0] != "frobnicate":
        jsonschema.validate(json.loads(err), schemas.ERROR)


def test_malformed_model_exit_two(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "plan", str(bad), "--gpu", "rtx_a4000")
    assert code == 2
    jsonschema.validate(json.loads(err), schemas.ERROR)


def test_model_schema_accepts_zoo_files():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "models"
    for f in root.glob("*.json"):
        jsonschema.validate(json.loads(f.read_text()), schemas.MODEL)


def test_verify_empty_sweep_warns(capsys, files):
    model, _ = files
    code, out, err = run(capsys, "verify", model, "--gpu", "gtx1660", "--layer", "b", "--grid", "even-only")
    assert code == 0
    assert out.strip().count("\n") == 0
    assert json.loads(err)["warnings"][0]["type"] == "empty_sweep"
