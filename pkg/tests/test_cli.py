import csv
import json

import numpy as np
import pytest

from blochhom.cli import main

LAMINATE = {"dim": 1, "kind": "laminate", "payload": {"values": [1, 4], "fraction": 0.5}}


def _config(tmp_path, name="cfg.json", **kw):
    cfg = {"version": 1, "coefficient": LAMINATE, "numerics": {"N": 16}}
    cfg.update(kw)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_bands_identity_closed_form(tmp_path):
    cfg = _config(tmp_path, coefficient={"dim": 1, "kind": "constant", "payload": {"value": 1.0}},
                  scenario_params={"rho": 0.5, "n_eta": 11, "modes": 2})
    assert main(["bands", "--config", cfg, "--output", str(tmp_path / "out")]) == 0
    with open(tmp_path / "out" / "bands.csv") as fh:
        rows = [r for r in csv.DictReader(fh) if r["m"] == "1"]
    assert len(rows) == 11
    for r in rows:
        e = float(r["eta_1"])
        assert float(r["lambda"]) == pytest.approx(e ** 2 + 0.25 * e ** 4, abs=1e-13)
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["scenario"] == "bands" and man["config"]["numerics"]["N"] == 16
    assert "timestamp" not in man


@pytest.mark.parametrize("bad", [
    {"version": 1, "coefficient": LAMINATE, "numerics": {"N": 8}, "extra": 1},
    {"version": 2, "coefficient": LAMINATE, "numerics": {"N": 8}},
    {"version": 1, "coefficient": LAMINATE, "numerics": {"N": 8, "n_per_axis": 20}},
    {"version": 1, "coefficient": LAMINATE, "numerics": {"N": 8}, "scenario_params": {"nope": 1}},
    {"version": 1, "coefficient": LAMINATE, "numerics": {"N": 8}, "scenario": "tensor"},
])
def test_malformed_config_exits_2(tmp_path, bad):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    out = tmp_path / "out"
    assert main(["cell", "--config", str(path), "--output", str(out)]) == 2
    assert not out.exists()


def test_unreadable_config(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    assert main(["cell", "--config", str(tmp_path / "x.json"), "--output", str(tmp_path / "o")]) == 2


def test_compute_error_exits_1_without_outputs(tmp_path):
    cfg = _config(tmp_path, scenario_params={"eps_list": [0.3, 0.15]})
    out = tmp_path / "out"
    assert main(["supercell", "--config", cfg, "--output", str(out)]) == 1
    assert not out.exists()


def test_deterministic_outputs(tmp_path):
    cfg = _config(tmp_path, scenario_params={"rhos": [0.0, 1.0], "routes": ["cell", "derivs"]})
    for name in ("a", "b"):
        assert main(["tensor", "--config", cfg, "--output", str(tmp_path / name), "--seed", "5"]) == 0
    for f in ("tensors.csv", "tensor_summary.json", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["seed"] == 5


@pytest.mark.parametrize("scenario,files", [
    ("cell", ["correctors.csv", "correctors_energies.json"]),
    ("derivs", ["derivatives.json"]),
    ("sweep-rho", ["tensors.csv", "sweep.json"]),
    ("supercell", ["convergence.csv", "identities.json"]),
    ("transform-limit", ["transform_limit.csv", "transform_limit.json"]),
])
def test_scenarios_write_artifacts(tmp_path, scenario, files):
    cfg = _config(tmp_path)
    out = tmp_path / "out"
    assert main([scenario, "--config", cfg, "--output", str(out)]) == 0
    for f in files + ["manifest.json", "run_info.json"]:
        assert (out / f).exists(), f


def test_verify_all_laminate(tmp_path):
    cfg = _config(tmp_path, numerics={"N": 32}, scenario="verify-all")
    out = tmp_path / "out"
    assert main(["verify-all", "--config", cfg, "--output", str(out)]) == 0
    rep = json.loads((out / "verify.json").read_text())
    assert rep["passed"] and all(r["passed"] for r in rep["records"])
    assert not (out / "failure.json").exists()


def test_verify_all_failure_record(tmp_path):
    cfg = _config(tmp_path, numerics={"N": 16, "tolerances": {"hermitian": 0.0, "evenness": 0.0}})
    out = tmp_path / "out"
    assert main(["verify-all", "--config", cfg, "--output", str(out)]) == 1
    fail = json.loads((out / "failure.json").read_text())
    assert fail["passed"] is False and "name" in fail


def test_output_dir_from_config(tmp_path):
    out = tmp_path / "from_cfg"
    cfg = _config(tmp_path, output_dir=str(out))
    assert main(["derivs", "--config", cfg]) == 0
    assert (out / "derivatives.json").exists()


def test_samples_path_relative_to_config(tmp_path):
    np.save(tmp_path / "a.npy", 2.0 + np.cos(2 * np.pi * np.arange(17) / 17))
    cfg = _config(tmp_path, coefficient={"dim": 1, "kind": "samples", "n_per_axis": 17,
                                         "payload": {"path": "a.npy"}}, numerics={"N": 8})
    assert main(["cell", "--config", cfg, "--output", str(tmp_path / "o")]) == 0
