import csv
import json

import numpy as np
import pytest

from gssmp.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def _report(path):
    return json.loads(path.read_text())


def test_simulate_drift_rows(tmp_path):
    model = _write(tmp_path / "drift1.json", {"dim": 1, "drift": 1.0})
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--model", model, "--horizon", "2", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert rows[-1]["t"] == "2.0"
    assert all(float(r["x1"]) == float(r["t"]) for r in rows)


def test_canonicalize_pssmp(tmp_path):
    rep = tmp_path / "r.json"
    assert main(["canonicalize", "--component", "pssmp", "--alpha", "0.5", "--report", str(rep)]) == EXIT_OK
    r = _report(rep)
    assert r["kind"] == "LINE" and abs(r["alpha"] - 0.5) < 1e-8


def test_canonicalize_csv_is_log(tmp_path):
    out = tmp_path / "g.csv"
    main(["canonicalize", "--component", "pssmp", "--alpha", "0.5", "--out", str(out), "--report",
          str(tmp_path / "r.json")])
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1], np.log(data[:, 0]), atol=1e-8)


def test_verify_pass_and_fail(tmp_path):
    rep = tmp_path / "r.json"
    assert main(["verify", "--component", "t_law", "--beta", "0.7", "--report", str(rep)]) == EXIT_OK
    assert main(["verify", "--component", "pssmp_bad_c", "--alpha", "0.5", "--report", str(rep)]) == EXIT_FAIL
    assert not _report(rep)["passed"]


def test_frag_equivalence(tmp_path):
    nu = _write(tmp_path / "binary.json", {"atoms": [{"masses": [0.5, 0.5], "weight": 1.0}], "alpha": 0.5})
    rep = tmp_path / "r.json"
    assert main(["frag", "--mode", "equivalence", "--nu", nu, "--n-paths", "2000", "--report", str(rep)]) == EXIT_OK
    r = _report(rep)
    assert r["passed"] and set(r["passed_each"]) == {"Y", "Z", "death_time"}


def test_frag_samples_csv(tmp_path):
    nu = _write(tmp_path / "nu.json", {"atoms": [{"masses": [0.5], "weight": 1.0}]})
    out = tmp_path / "s.csv"
    assert main(["frag", "--mode", "direct", "--nu", nu, "--n-paths", "100", "--out", str(out),
                 "--report", str(tmp_path / "r.json")]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 100 and {r["status"] for r in rows} <= {"dead", "alive", "floor", "capped"}


def test_tgroup(tmp_path):
    model = _write(tmp_path / "m.json", {"dim": 2, "drift": [0.1, 0.5],
                                         "jumps": [{"rate": 1.0, "displacement": [0.3, 0.4]}]})
    rep = tmp_path / "r.json"
    assert main(["tgroup", "--model", model, "--n-paths", "1000", "--report", str(rep)]) == EXIT_OK
    assert _report(rep)["alpha_M"]["exact"] == pytest.approx(0.9)


def test_lamperti_lifetime(tmp_path):
    spec = _write(tmp_path / "s.json", {"psi": {"name": "exp"}, "alpha": -1.0,
                                        "driver": {"dim": 1, "drift": 1.0}})
    rep = tmp_path / "r.json"
    out = tmp_path / "x.csv"
    assert main(["lamperti", "--spec", spec, "--horizon", "3", "--out", str(out), "--report", str(rep)]) == EXIT_OK
    r = _report(rep)
    assert r["status"] == "dead" and r["lifetime"] == pytest.approx(1.0)


def test_config_file_supplies_defaults(tmp_path):
    model = _write(tmp_path / "m.json", {"dim": 1, "drift": 1.0})
    cfg = _write(tmp_path / "cfg.json", {"seed": 3, "horizon": 0.5, "spec_version": "1.0"})
    out = tmp_path / "t.csv"
    assert main(["simulate", "--model", model, "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert list(csv.DictReader(out.open()))[-1]["t"] == "0.5"


def test_deterministic_outputs(tmp_path):
    model = _write(tmp_path / "m.json", {"dim": 2, "drift": [0.1, 0.0], "diffusion": [[1, 0], [0, 1]],
                                         "jumps": [{"rate": 2.0, "displacement": [1.0, -1.0]}]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--model", model, "--seed", "7", "--n-paths", "3", "--out", str(a)])
    main(["simulate", "--model", model, "--seed", "7", "--n-paths", "3", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("doc,msg", [
    ({"dim": 3}, "field dim"),
    ({"dim": 1, "jumps": [{"rate": 1.0}]}, "field jumps/0"),
])
def test_config_errors_exit_2(tmp_path, capsys, doc, msg):
    model = _write(tmp_path / "bad.json", doc)
    assert main(["simulate", "--model", model]) == EXIT_CONFIG
    assert msg in capsys.readouterr().err


def test_other_config_errors(tmp_path, capsys):
    assert main(["simulate", "--model", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["verify", "--component", "nope"]) == EXIT_CONFIG
    assert main(["simulate"]) == EXIT_CONFIG
    cfg = _write(tmp_path / "cfg.json", {"bogus": 1})
    assert main(["verify", "--component", "pssmp", "--config", cfg]) == EXIT_CONFIG
    assert "field bogus" in capsys.readouterr().err
