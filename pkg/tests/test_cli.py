"""End-to-end command-line runs over the shipped model files."""

import json
import os

import pytest

from rockland.cli import main

MODELS = os.path.join(os.path.dirname(__file__), os.pardir, "models")


def model(name):
    return os.path.join(MODELS, name + ".model")


def run(args):
    return main(args)


# -- analyze --------------------------------------------------------------------------

def test_analyze_grushin(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert run(["analyze", "--model", model("grushin"),
                "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == "1"
    res = doc["results"]
    assert res["nu"] == [1, 1] and res["q"] == 3
    assert res["N"] == 3 and res["p"] == 1 and res["step"] == 2
    assert all(row["rank"] == 2 for row in res["rank_table"])
    assert "[pass]" in capsys.readouterr().out


def test_analyze_chain_r5(tmp_path):
    out = tmp_path / "r.json"
    assert run(["analyze", "--model", model("chain_r5"),
                "--json", str(out)]) == 0
    res = json.loads(out.read_text())["results"]
    assert res["q"] == 15 and res["N"] == 6 and res["step"] == 5


def test_analyze_detects_rank_deficit(tmp_path):
    """A system that never spans d3 fails the rank check with exit 1."""
    bad = tmp_path / "bad.model"
    bad.write_text("dilation [1,2,3]; field X1 = d1; field X2 = x1*d2; "
                   "operator L = X1^2 + X2^2;")
    assert run(["analyze", "--model", str(bad)]) == 1


# -- lift -----------------------------------------------------------------------------

def test_lift_grushin(tmp_path):
    out = tmp_path / "r.json"
    assert run(["lift", "--model", model("grushin"),
                "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["results"]["dimensions"] == {
        "n": 2, "p": 1, "N": 3, "q": 3, "E": 1, "Q": 4}
    names = [c["name"] for c in doc["checks"]]
    assert "lift_identity_random_polys" in names
    assert "saturable_structure" in names


def test_lift_three_var_step5():
    assert run(["lift", "--model", model("three_var_step5")]) == 0


# -- gamma and its gates ---------------------------------------------------------------

def test_gamma_refuses_nu_geq_q(capsys):
    assert run(["gamma", "--model", model("quartic_k2")]) == 2
    err = capsys.readouterr().err
    assert "nu < q" in err and "nu=4" in err and "q=4" in err
    assert run(["gamma", "--model", model("grushin_quartic")]) == 2
    assert "nu < q" in capsys.readouterr().err


def test_gamma_requires_kernel(capsys):
    # k=3 passes the existence gate (nu=4 < q=5) but ships no kernel
    assert run(["gamma", "--model", model("quartic_k3")]) == 2
    assert "kernel" in capsys.readouterr().err


def test_gamma_grushin_values(tmp_path):
    out, csvf = tmp_path / "g.json", tmp_path / "g.csv"
    assert run(["gamma", "--model", model("grushin"), "--at", "1,0;0,0",
                "--json", str(out), "--csv", str(csvf)]) == 0
    doc = json.loads(out.read_text())
    row = doc["results"]["values"][0]
    assert row["gamma"] == pytest.approx(0.41731342, rel=1e-5)
    assert row["error_bound"] < 1e-6
    assert doc["results"]["homogeneity_degree"] == -1
    header = csvf.read_text().splitlines()[0]
    assert header == "x,y,gamma,error_bound,dX1,dX2"


# -- verify ---------------------------------------------------------------------------

def test_verify_grushin(tmp_path):
    out = tmp_path / "v.json"
    assert run(["verify", "--model", model("grushin"),
                "--at", "0.9,0.3;-0.4,0.6", "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    names = [c["name"] for c in doc["checks"]]
    for expected in ("calibration_pole_1", "joint_homogeneity", "symmetry",
                     "left_inverse", "tail_doubling_within_error_bars"):
        assert expected in names
    assert all(c["status"] == "pass" for c in doc["checks"])


# -- metric commands --------------------------------------------------------------------

def test_distance_grushin(tmp_path):
    out = tmp_path / "d.json"
    assert run(["distance", "--model", model("grushin"),
                "--at", "0,0;1,0", "--json", str(out)]) == 0
    row = json.loads(out.read_text())["results"]["pairs"][0]
    assert abs(row["upper"] - 1.0) <= 1e-3
    assert row["lower"] <= row["upper"]


def test_ballvol_grushin(tmp_path):
    out, csvf = tmp_path / "b.json", tmp_path / "b.csv"
    assert run(["ballvol", "--model", model("grushin"), "--radius", "1.0",
                "--samples", "80", "--json", str(out),
                "--csv", str(csvf)]) == 0
    res = json.loads(out.read_text())["results"]
    assert res["volume"] > 0
    assert res["confidence_interval"][0] <= res["volume"] \
        <= res["confidence_interval"][1]
    assert len(res["curve"]) == 6
    assert csvf.read_text().splitlines()[0] == \
        "r,volume,ci_lo,ci_hi,hits,samples,seed"


# -- heat -----------------------------------------------------------------------------

def test_heat_quartic(tmp_path):
    out = tmp_path / "h.json"
    assert run(["heat", "--model", model("grushin_quartic"),
                "--json", str(out)]) == 0
    res = json.loads(out.read_text())["results"]
    assert res["extended_dilation"] == [1, 2, 4]
    assert res["t_exponent"] == 4 and res["q_extended"] == 7
    assert res["spatial_positive_pattern"] is True


# -- report ---------------------------------------------------------------------------

def test_report_grushin_full_pipeline(tmp_path):
    out = tmp_path / "rep.json"
    assert run(["report", "--model", model("grushin"),
                "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == "1"
    assert len(doc["checks"]) >= 12
    assert all(c["status"] == "pass" for c in doc["checks"])
    assert set(doc["results"]) == {"analyze", "lift", "heat", "verify"}


def test_report_skips_verify_when_gate_fails(tmp_path):
    out = tmp_path / "rep.json"
    assert run(["report", "--model", model("quartic_k2"),
                "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert "skipped" in doc["results"]["verify"]


# -- error handling and report hygiene ---------------------------------------------------

def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.model"
    bad.write_text("dilation [1,2]; field X1 = x1^(1/2)*d1; operator L=X1;")
    assert run(["analyze", "--model", str(bad)]) == 2
    assert "non-integer exponent" in capsys.readouterr().err


def test_missing_model_exit_code(capsys):
    assert run(["analyze", "--model", "/nonexistent.model"]) == 2
    assert "not found" in capsys.readouterr().err


def test_json_report_key_order(tmp_path):
    out = tmp_path / "r.json"
    run(["analyze", "--model", model("grushin"), "--json", str(out)])
    doc = json.loads(out.read_text())
    assert list(doc) == ["schema_version", "command", "model", "flags",
                         "checks", "results", "artifacts"]
    assert doc["flags"]["defaults"] == {
        "tol": 1e-3, "seed": 0, "samples": 200, "radius": 1.0}
