import csv
import json
import math

import pytest

from averon.cli import main
from averon.report import ChecksumError, checksum, dumps, loads_checked, with_checksum

from conftest import SYSTEM_A, SYSTEM_B, paper_R_a

B_ARGS = [str(SYSTEM_B), "--param", "b=-1.1267", "--zero-guess", "4,1"]


@pytest.fixture(autouse=True)
def serial(monkeypatch):
    monkeypatch.setenv("AVERON_THREADS", "1")


@pytest.fixture(scope="module")
def analyzed(tmp_path_factory):
    out = tmp_path_factory.mktemp("analyze")
    assert main(["analyze", *B_ARGS, "--out", str(out), "--format", "csv"]) == 0
    return out


def test_analyze_writes_a_checked_report(analyzed):
    data = loads_checked((analyzed / "report.json").read_text())
    orbit = data["orbits"][0]
    assert orbit["alpha_star"] == pytest.approx([4.0, 1.0], abs=1e-10)
    st = orbit["stability"]
    assert st["verdict"] == "Stable" and st["case"] == "Reduced"
    assert st["R"] == pytest.approx(math.pi * (16485 * -1.1267 - 122880 * math.pi - 157337) / 3920, rel=1e-8)
    assert all("source" in m for m in st["matrices"].values())
    assert data["hypotheses"]["H1"]["ok"] and data["hypotheses"]["H2"]["ok"]
    rows = list(csv.reader((analyzed / "report.csv").open()))
    assert rows[0][:3] == ["orbit", "alpha_star", "verdict"] and rows[1][2] == "Stable"


def test_analyze_is_byte_identical(analyzed, tmp_path):
    assert main(["analyze", *B_ARGS, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").read_bytes() == (analyzed / "report.json").read_bytes()


def test_verify_agrees_and_writes_artifacts(analyzed, tmp_path, capsys):
    code = main(["verify", *B_ARGS, "--report", str(analyzed / "report.json"),
                 "--eps", "1/100", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "verify.json").read_text())
    table = summary["orbits"][0]["comparison"]
    assert table["agreement"] == table["total"] == 3
    assert [r["eps"] for r in table["rows"]] == pytest.approx([1 / 400, 1 / 200, 1 / 100])
    assert (tmp_path / "multipliers.csv").exists()
    header = (tmp_path / "trajectory_0.csv").read_text().splitlines()[0]
    assert header == "t,rho,z,w,x,y,z,w"
    assert "agreement 3/3" in capsys.readouterr().out


def test_verify_rejects_a_tampered_report(analyzed, tmp_path, capsys):
    text = (analyzed / "report.json").read_text().replace('"Stable"', '"Unstable"', 1)
    bad = tmp_path / "report.json"
    bad.write_text(text)
    assert main(["verify", *B_ARGS, "--report", str(bad), "--out", str(tmp_path)]) == 2
    assert "checksum mismatch" in capsys.readouterr().err


def test_sweep_empty_range(tmp_path):
    assert main(["sweep", *B_ARGS, "--range", "b=0:1:0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep.csv").read_text().splitlines() == ["b,verdict,real_part_verdict,R,modulus_coefficient,error"]


def test_sweep_locates_the_sign_change_of_R(tmp_path):
    assert main(["sweep", *B_ARGS, "--range", "b=32:34:3", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "sweep.json").read_text())
    (x,) = data["R_zero_crossings"]
    assert x == pytest.approx((122880 * math.pi + 157337) / 16485, abs=1e-6)


def test_sweep_parallel_matches_serial(tmp_path, monkeypatch):
    args = ["sweep", *B_ARGS, "--range", "b=0:10:2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("AVERON_THREADS", "2")
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "sweep.json").read_bytes() == (tmp_path / "b" / "sweep.json").read_bytes()


def test_input_errors_exit_with_code_2(tmp_path, capsys):
    bad = tmp_path / "bad.avsys"
    bad.write_text("[states]\nx\n[period]\n1\n[order 0]\ndx/dt = x + * 2\n")
    assert main(["analyze", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 6" in capsys.readouterr().err
    assert main(["analyze", str(SYSTEM_B), "--param", "b", "--out", str(tmp_path)]) == 2
    assert main(["analyze", str(tmp_path / "missing.avsys"), "--out", str(tmp_path)]) == 2
    assert main(["sweep", *B_ARGS, "--range", "b=1:2", "--out", str(tmp_path)]) == 2


def test_zero_scan_finds_both_orbits(tmp_path):
    assert main(["analyze", str(SYSTEM_B), "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "report.json").read_text())
    stars = sorted(tuple(round(v, 8) for v in o["alpha_star"]) for o in data["orbits"])
    assert stars == [(4.0, -1.0), (4.0, 1.0)]


def test_checksum_helpers():
    d = with_checksum({"a": 1.0, "z": [1 + 2j]})
    assert d["z"] == [{"re": 1.0, "im": 2.0}]
    assert loads_checked(dumps(d)) == d
    d["a"] = 2.0
    with pytest.raises(ChecksumError):
        loads_checked(dumps(d))
    assert checksum({"b": 1, "a": 0.1}) == checksum({"a": 0.1, "b": 1})


A_ARGS = [str(SYSTEM_A), "--param", "b=0.004,c=150,d=-1,e=-1", "--zero-guess", "1.05,0.95,1.5"]


def test_fixture_a_sweep_crossing_follows_closed_form(tmp_path):
    # R is linear in b, so two sweep points pin the crossing exactly
    assert main(["sweep", *A_ARGS, "--range", "b=200:300:2", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "sweep.json").read_text())
    b0, b1 = 200.0, 300.0
    r0, r1 = paper_R_a(b0, 150, -1, -1), paper_R_a(b1, 150, -1, -1)
    want = b0 - r0 * (b1 - b0) / (r1 - r0)
    (x,) = data["R_zero_crossings"]
    assert x == pytest.approx(want, abs=1e-6)


def test_fixture_a_verify_at_figure_eps(tmp_path, monkeypatch):
    monkeypatch.setenv("AVERON_THREADS", "2")
    code = main(["verify", *A_ARGS, "--eps", "1/45,1/90", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "verify.json").read_text())
    orbit = summary["orbits"][0]
    assert orbit["predicted_verdict"] == "Stable"
    assert [o["verdict"] for o in orbit["oracle"]] == ["Stable", "Stable"]
    lines = (tmp_path / "trajectory_0.csv").read_text().splitlines()
    assert lines[0] == "t,rho,r,alpha,x,y,z,w" and len(lines) > 100
