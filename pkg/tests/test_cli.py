import json
import subprocess
import sys

import numpy as np
import pytest

from dephaselab.cli import main, render_report
from dephaselab.errors import ScenarioError
from dephaselab.scenario import bundled_names, load_scenario, parse_scenario, scenario_digest

BUNDLED = ["cutoff-gsb", "dfs-qudit", "flat-spin-boson", "half-line-spin-boson", "positive-split", "shallow-pocket"]


def write(path, doc):
    path.write_text(json.dumps(doc, indent=1))
    return str(path)


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_bundled_names():
    assert bundled_names() == BUNDLED


@pytest.mark.parametrize("name", ["flat-spin-boson", "half-line-spin-boson", "dfs-qudit", "cutoff-gsb", "positive-split"])
def test_bundled_scenarios_pass(name, tmp_path):
    assert main(["run", "--scenario", name, "--out", str(tmp_path)]) == 0
    m = manifest(tmp_path)
    assert m["passed"] and m["scenario"] == name and m["version"]
    for c in m["checks"]:
        assert (tmp_path / c["file"]).is_file()


def test_shallow_pocket_documented_residual(tmp_path):
    assert main(["run", "--scenario", "shallow-pocket", "--out", str(tmp_path)]) == 0
    checks = {c["name"]: c for c in manifest(tmp_path)["checks"]}
    assert checks["semigroup"]["summary"]["semigroup"]
    reg = checks["regression-m2"]["summary"]
    assert not reg["holds"]
    assert abs(reg["expected_residual"]["observed"] - (1 - np.exp(-1))) < 1e-3


def test_flat_spin_boson_rates_in_report(tmp_path):
    main(["run", "--scenario", "flat-spin-boson", "--out", str(tmp_path)])
    checks = {c["name"]: c for c in manifest(tmp_path)["checks"]}
    assert checks["regression-m3"]["passed"] and checks["semigroup"]["passed"]
    rows = (tmp_path / "semigroup.csv").read_text().splitlines()
    gamma = float(rows[1].split(",")[3])
    assert abs(gamma - 1) < 1e-6
    text = render_report(tmp_path)
    assert "dephasing rates" in text and "semigroup  0  1" in text


def test_dfs_report_two_groups(tmp_path):
    main(["run", "--scenario", "dfs-qudit", "--out", str(tmp_path)])
    text = render_report(tmp_path)
    block = text.split("modulus-1 groups")[1]
    assert "0 1" in block and "2 3" in block
    assert (tmp_path / "series_trajectory_abs_phi.csv").is_file()
    assert (tmp_path / "series_residual_vs_m.csv").is_file()


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["run", "--scenario", "flat-spin-boson", "--out", str(out), "--seed", "17"])
    for f in sorted(p.name for p in a.iterdir()):
        if f == "manifest.json":
            ma, mb = manifest(a), manifest(b)
            ma.pop("wall_clock_seconds"), mb.pop("wall_clock_seconds")
            assert ma == mb
        else:
            assert (a / f).read_bytes() == (b / f).read_bytes()


def test_seed_override_changes_random_grids(tmp_path):
    main(["regression", "--scenario", "flat-spin-boson", "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["regression", "--scenario", "flat-spin-boson", "--out", str(tmp_path / "b"), "--seed", "2"])
    assert manifest(tmp_path / "a")["seed"] == 1
    assert (tmp_path / "a" / "regression-m3.csv").read_bytes() != (tmp_path / "b" / "regression-m3.csv").read_bytes()


def test_subcommand_selects_checks(tmp_path):
    main(["divisibility", "--scenario", "shallow-pocket", "--out", str(tmp_path)])
    assert {c["type"] for c in manifest(tmp_path)["checks"]} == {"divisibility", "semigroup", "blp", "coherence"}
    main(["simulate", "--scenario", "shallow-pocket", "--out", str(tmp_path / "sim")])
    rows = (tmp_path / "sim" / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,j,l,re_phi,im_phi" and len(rows) == 52


def test_pvint_default_suite(tmp_path):
    assert main(["pvint", "--out", str(tmp_path)]) == 0
    assert manifest(tmp_path)["checks"][0]["passed"]


def test_failing_check_exit_one(tmp_path):
    doc = json.loads(open(_bundled_path("shallow-pocket")).read())
    doc["checks"] = [{"type": "regression", "name": "reg", "m": 2, "grids": [[1.0, 2.0]], "expect": "holds"}]
    assert main(["run", "--scenario", write(tmp_path / "s.json", doc), "--out", str(tmp_path / "o")]) == 1
    assert not manifest(tmp_path / "o")["passed"]


def _bundled_path(name):
    from importlib import resources

    return str(resources.files("dephaselab").joinpath("scenarios", f"{name}.json"))


def test_tol_override(tmp_path):
    doc = {"model": {"source": "gsb", "energies": [0, 0], "form": {"kind": "flat-half-line", "gamma": 1}},
           "checks": [{"type": "regression", "name": "reg", "m": 2, "grids": [[1.0, 2.0]], "expect": "holds"}]}
    path = write(tmp_path / "s.json", doc)
    assert main(["run", "--scenario", path, "--out", str(tmp_path / "a")]) == 1
    assert main(["run", "--scenario", path, "--out", str(tmp_path / "b"), "--tol", "1.0"]) == 0
    assert manifest(tmp_path / "b")["tol"] == 1.0


def test_budget_flag(tmp_path, capsys):
    assert main(["regression", "--scenario", "flat-spin-boson", "--out", str(tmp_path), "--budget", "100"]) == 2
    assert "budget of 100" in capsys.readouterr().err


def test_empty_checks(tmp_path):
    doc = {"name": "empty", "model": {"source": "gsb", "energies": [0, 0], "form": {"kind": "flat-full-line", "gamma": 1}}, "checks": []}
    assert main(["run", "--scenario", write(tmp_path / "e.json", doc), "--out", str(tmp_path / "o")]) == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["manifest.json"]
    text = render_report(tmp_path / "o")
    assert text.count("\n") == 3 and text.startswith("scenario: empty")


def test_report_errors(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(ScenarioError, match="corrupt"):
        render_report(tmp_path)


def test_parse_error_has_line_and_path(tmp_path, capsys):
    text = '{\n  "model": {\n    "source": "gsb",\n    "energies": [0, 0],\n    "form": {"kind": "flat-full-line", "gama": 1}\n  }\n}\n'
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert main(["run", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "bad.json:5" in err and "model.form" in err and "gama" in err


def test_invalid_json_reports_position(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n "model": [1,\n}')
    with pytest.raises(ScenarioError, match="broken.json:3"):
        load_scenario(str(p))


@pytest.mark.parametrize(
    "doc,needle",
    [
        ({"model": {"source": "gsb", "energies": [0, 0], "form": {"kind": "flat-full-line", "gamma": 1}}, "extra": 1}, "extra"),
        ({"model": {"source": "nope"}}, "source"),
        ({"model": {"source": "gsb", "energies": [0, 0], "form": {"kind": "flat-full-line", "gamma": 1, "value": 0.1}}}, "exactly one"),
        ({"model": {"source": "measure", "measure": {"kind": "cauchy"}, "h_funcs": [{"kind": "cubic"}, {"kind": "linear"}]}}, "h_funcs[0]"),
        ({"model": {"source": "blocks", "d": 2, "bath_dim": 1, "blocks": [[[[0, 0]]], [[[1, 0]]]], "bath_state": [[[2, 0]]]}}, "bath_state"),
        ({"model": {"source": "gsb", "energies": [0, 0], "form": {"kind": "flat-full-line", "gamma": 1}},
          "checks": [{"type": "regression", "m": 2, "grids": [[1, 2]], "expect": "maybe"}]}, "expect"),
        ({"model": {"source": "gsb", "energies": [0, 0], "form": {"kind": "flat-full-line", "gamma": 1}},
          "checks": [{"type": "warp"}]}, "unknown check type"),
        ({"model": {"source": "gsb", "energies": [0, 0], "form": {"kind": "flat-full-line", "gamma": 1}},
          "times": [0, 2, 1]}, "strictly increasing"),
    ],
)
def test_parser_rejections(doc, needle):
    with pytest.raises(ScenarioError, match=needle.replace("[", r"\[").replace("]", r"\]")):
        parse_scenario(doc, origin="x.json")


def test_blocks_model_roundtrip():
    doc = {"model": {"source": "blocks", "d": 2, "bath_dim": 2,
                     "blocks": [[[[0, 0], [0, 0]], [[0, 0], [1, 0]]], [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]],
                     "bath_state": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}}
    sc = parse_scenario(doc)
    assert sc.model.d == 2 and sc.model.bath_dim == 2


def test_digest_stable_across_reserialization():
    doc = json.loads(open(_bundled_path("dfs-qudit")).read())
    again = json.loads(json.dumps(doc, indent=4, sort_keys=False))
    assert scenario_digest(doc) == scenario_digest(again)
    assert load_scenario("dfs-qudit").digest == scenario_digest(doc)
    doc["seed"] = 100
    assert scenario_digest(doc) != scenario_digest(again)


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "dephaselab.cli", "pvint", "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0 and "PASS" in out.stdout
