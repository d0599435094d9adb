import csv
import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest
from numpy.testing import assert_allclose

from pointspectra.cli import main


def schema(name):
    return json.loads(resources.files("pointspectra").joinpath("schemas", name).read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_spectrum_two_centers(capsys):
    code, out, _ = run(capsys, "spectrum", "--geometry", "flat3", "--mu", "1,1",
                       "--dist-line", "2.0")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("spectrum.json"))
    assert doc["count"] == 2 and len(doc["states"]) == 2


def test_spectrum_single_center(capsys):
    code, out, _ = run(capsys, "spectrum", "--geometry", "flat3", "--mu", "1")
    doc = json.loads(out)
    assert code == 0 and doc["count"] == 1
    assert_allclose(doc["states"][0]["nu"], 1.0, rtol=1e-10)


def test_spectrum_relativistic_uses_energy_key(capsys):
    code, out, _ = run(capsys, "spectrum", "--geometry", "relflat2", "--m", "1", "--mu",
                       "0.2,0.4", "--d", "2")
    doc = json.loads(out)
    jsonschema.validate(doc, schema("spectrum.json"))
    assert code == 0 and "E" in doc["states"][0]


def test_spectrum_csv(capsys):
    code, out, _ = run(capsys, "spectrum", "--geometry", "flat2", "--mu", "1,1", "--d", "3",
                       "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["nu", "energy", "multiplicity", "normalization", "det_ratio"]
    assert len(rows) == 3
    # 17 significant digits round-trip
    assert float(rows[1][0]) ** 2 == pytest.approx(-float(rows[1][1]), rel=1e-15)


def test_malformed_distance_matrix(capsys, tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,1\n1\n")
    code, out, err = run(capsys, "spectrum", "--geometry", "flat3", "--mu", "1,1",
                         "--dist-matrix", str(path))
    assert code == 2 and out == "" and "not square" in err


def test_distance_matrix_file(capsys, tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,2\n2,0\n")
    code, out, _ = run(capsys, "spectrum", "--geometry", "flat3", "--mu", "1,1",
                       "--dist-matrix", str(path))
    assert code == 0 and json.loads(out)["count"] == 2


def test_config_file(capsys, tmp_path):
    cfg = {"mu": [1, 1], "dist": [[0, 1], [1, 0]], "geometry": {"kind": "h3", "kappa": 1}}
    jsonschema.validate(cfg, schema("config.json"))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "spectrum", "--config", str(path))
    assert code == 0 and json.loads(out)["count"] == 2


def test_invalid_configuration_exit_code(capsys):
    code, out, err = run(capsys, "spectrum", "--geometry", "relflat2", "--m", "1", "--mu", "1.5")
    assert code == 2 and out == "" and "outside (-m, m)" in err


def test_criteria_verify(capsys):
    code, out, _ = run(capsys, "criteria", "--geometry", "h3", "--kappa", "1", "--mu", "1",
                       "--d", "1", "--n", "2", "--verify")
    doc = json.loads(out)
    jsonschema.validate(doc, schema("criteria.json"))
    h3 = next(r for r in doc["criteria"] if r["criterion_id"] == "h3")
    assert code == 0 and h3["satisfied"]
    assert doc["exact_count"] == 2 and doc["agreement"] is True


def test_criteria_flat_dichotomy(capsys):
    code, out, _ = run(capsys, "criteria", "--geometry", "flat2", "--mu", "1,1", "--d", "1")
    doc = json.loads(out)
    flat = next(r for r in doc["criteria"] if r["criterion_id"] == "flat_two_center")
    assert code == 0 and flat["predicted_count"] == 1


def test_criteria_unsupported_pairing(capsys):
    code, out, err = run(capsys, "criteria", "--geometry", "flat2", "--mu", "1,1", "--d", "1",
                         "--criterion", "h3")
    assert code == 2 and out == "" and "does not apply" in err


def test_sweep_d_flat2(capsys):
    code, out, _ = run(capsys, "sweep", "--geometry", "flat2", "--mu", "1,1", "--d", "1",
                       "--axis", "d", "--range", "0.5:4:8")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert list(rows[0]) == ["param", "count", "nu_max", "gerschgorin", "cassini",
                             "flat_two_center"]
    d = np.array([float(r["param"]) for r in rows])
    count = np.array([int(r["count"]) for r in rows])
    assert np.all(np.diff(count) >= 0) and count[0] == 1 and count[-1] == 2
    # exact two-center threshold in the plane: sqrt(mu1 mu2) d = 2 e^{-gamma} = 1.1229
    assert d[count == 1].max() < 1.1229 < d[count == 2].min()


def test_sweep_kappa_log(capsys):
    code, out, _ = run(capsys, "sweep", "--geometry", "h3", "--kappa", "1", "--mu", "1,1",
                       "--d", "1.5", "--axis", "kappa", "--range", "1:1e-3:4", "--scale", "log")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [int(r["count"]) for r in rows] == [2, 2, 2, 2]
    assert_allclose([float(r["param"]) for r in rows], [1, 0.1, 0.01, 0.001])


@pytest.mark.parametrize("rng", ["1:2:0", "1:2", "a:b:3"])
def test_sweep_bad_range(capsys, rng):
    code, out, _ = run(capsys, "sweep", "--geometry", "flat2", "--mu", "1,1", "--d", "1",
                       "--axis", "d", "--range", rng)
    assert code == 2 and out == ""


def test_sweep_deterministic_across_threads(capsys, monkeypatch):
    argv = ["sweep", "--geometry", "h2", "--kappa", "1", "--mu", "1,2,1.5", "--d", "1",
            "--axis", "mu", "--range", "0.5:3:6"]
    outs = []
    for threads in ("1", "4", "4"):
        monkeypatch.setenv("SPECTRA_THREADS", threads)
        code, out, _ = run(capsys, *argv)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1] == outs[2]


def test_bad_thread_setting(capsys, monkeypatch):
    monkeypatch.setenv("SPECTRA_THREADS", "zero")
    code, _, err = run(capsys, "sweep", "--geometry", "flat2", "--mu", "1,1", "--d", "1",
                       "--axis", "d", "--range", "1:2:2")
    assert code == 2 and "SPECTRA_THREADS" in err


def test_sweep_nu_axis(capsys):
    code, out, _ = run(capsys, "sweep", "--geometry", "flat3", "--mu", "1,2", "--d", "1",
                       "--axis", "nu", "--range", "0.1:3:5", "--format", "json")
    doc = json.loads(out)
    counts = [r["count"] for r in doc["rows"]]
    assert code == 0 and counts[0] == 2 and counts[-1] == 0
    assert counts == sorted(counts, reverse=True)


def test_heatkernel(capsys):
    code, out, _ = run(capsys, "heatkernel", "--geometry", "h2", "--kappa", "1", "--d", "0",
                       "--t", "1")
    doc = json.loads(out)
    assert code == 0
    assert doc["diag_lower_bound"] <= doc["value"] <= doc["upper_bound"]


def test_resolvent_kernel_and_correction(capsys):
    code, out, _ = run(capsys, "resolvent", "--geometry", "flat3", "--nu", "1", "--d", "1")
    assert code == 0
    assert_allclose(json.loads(out)["value"], np.exp(-1) / (4 * np.pi), rtol=1e-14)
    code, out, _ = run(capsys, "resolvent", "--geometry", "flat3", "--mu", "1", "--nu", "2",
                       "--x-dists", "1", "--y-dists", "1")
    doc = json.loads(out)
    assert code == 0 and not doc["near_pole"]
    assert_allclose(doc["correction"], np.exp(-4) / (4 * np.pi), rtol=1e-12)


def test_missing_command_exit_code(capsys):
    code, _, _ = run(capsys)
    assert code == 2


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "pointspectra.cli", "spectrum", "--geometry",
                          "flat3", "--mu", "1"], capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["count"] == 1
