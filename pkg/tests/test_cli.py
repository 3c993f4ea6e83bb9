import json
import math
from pathlib import Path

import pytest

from matrix_hill import cli, verify
from matrix_hill.spectrum.bands import BandResolutionError

POTENTIALS = Path(__file__).resolve().parent.parent / "potentials"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def pot(name):
    return POTENTIALS / f"{name}.json"


def test_bands_free(capsys):
    code, out, _ = run(capsys, "bands", "--potential", pot("free"), "--window", -1, 100)
    doc = json.loads(out)
    assert code == 0
    assert len(doc["results"]["bands"]) == 1 and doc["results"]["gaps"] == []
    assert set(doc) == {"meta", "results", "diagnostics"}
    assert doc["meta"]["potential"]["rotation"] == [[1, 0], [0, 1]]


def test_bands_constant_default_window(capsys):
    code, out, _ = run(capsys, "bands", "--potential", pot("const_a3"))
    doc = json.loads(out)
    assert code == 0 and doc["results"]["gaps"] == []


def test_bands_delta_classified(capsys):
    code, out, _ = run(capsys, "bands", "--potential", pot("delta_a10_g05"), "--window", 0, 150)
    kinds = {g["kind"] for g in json.loads(out)["results"]["gaps"]}
    assert code == 0 and kinds == {"resonance"}
    code, out, _ = run(capsys, "bands", "--potential", pot("delta_a10_g05"), "--window", -1, 150)
    kinds = {g["kind"] for g in json.loads(out)["results"]["gaps"]}
    assert kinds == {"resonance", "stable"}


def test_eigs_free(capsys):
    code, out, _ = run(capsys, "eigs", "--potential", pot("free"), "--window", 0, 200, "--which", "periodic")
    eigs = json.loads(out)["results"]["eigenvalues"]
    assert code == 0
    assert [e["multiplicity"] for e in eigs] == [2, 4, 4]
    assert eigs[1]["re"] == pytest.approx(4 * math.pi ** 2, rel=1e-12)


def test_resonances_constant(capsys):
    code, out, _ = run(capsys, "resonances", "--potential", pot("const_a3"), "--rect", 0, 400, -5, 5)
    doc = json.loads(out)
    zs = doc["results"]["resonances"]
    assert code == 0 and doc["diagnostics"]["contour_count"] == 12
    assert all(z["multiplicity"] == 2 for z in zs)
    assert zs[0]["re"] == pytest.approx(math.pi ** 2 + 9 / (4 * math.pi ** 2), rel=1e-9)


def test_resonances_delta_a25(capsys):
    code, out, _ = run(capsys, "resonances", "--potential", pot("delta_a25_g02"), "--rect", 0, 120, -10, 10)
    zs = json.loads(out)["results"]["resonances"]
    complex_ = [z for z in zs if z["im"] != 0]
    assert code == 0 and len(complex_) == 2
    assert complex_[0]["im"] == pytest.approx(-complex_[1]["im"])
    assert len(zs) - len(complex_) == 4


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--potential", pot("fourier"), "--window", 0, 10, "--points", 3,
                       "--format", "csv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "lambda,delta1,delta2,rho,d_plus,d_minus" and len(lines) == 4


def test_reconstruct(capsys):
    code, out, _ = run(capsys, "reconstruct", "--potential", pot("delta_a10_g05"), "--truncate", 20,
                       "--points", 11)
    doc = json.loads(out)
    assert code == 0
    assert doc["diagnostics"]["eigenvalue_lists_complete"]
    assert doc["diagnostics"]["errors"]["d_plus"] < 1e-3
    assert len(doc["results"]["resonances_direct"]) == 4


def test_deterministic_output(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for f in (a, b):
        assert cli.main(["bands", "--potential", str(pot("fourier")), "--window", "-5", "60", "--out", str(f)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_float_formatting():
    assert cli.dumps({"x": 0.1, "z": 1 + 2j, "n": float("nan")}) == \
        '{\n  "n": null,\n  "x": 0.10000000000000001,\n  "z": [1, 2]\n}\n'


def test_inline_potential(capsys):
    code, out, _ = run(capsys, "eigs", "--potential", '{"smooth": {"builtin": "zero"}}', "--window", -1, 10)
    assert code == 0 and json.loads(out)["results"]["total_multiplicity"] == 2


@pytest.mark.parametrize("argv", [
    ["bands", "--potential", "missing.json"],
    ["bands", "--window", "0", "1"],
    ["bands", "--potential", str(POTENTIALS / "free.json"), "--window", "5", "1"],
    ["bands", "--potential", str(POTENTIALS / "free.json"), "--grid", "-1"],
    ["resonances", "--potential", str(POTENTIALS / "free.json")],
    ["bands", "--potential", '{"smooth": {"builtin": "bogus"}}'],
])
def test_config_errors(capsys, argv):
    assert cli.main(argv) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["verify", "bogus"], ["nope"], ["bands", "--window", "x", "1"]])
def test_argparse_errors_exit_with_config_code(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == cli.EXIT_CONFIG


def test_resolution_failure(capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise BandResolutionError("band edge not separable near lambda=1", (0.5, 1.5))

    monkeypatch.setattr(cli, "scan_bands", boom)
    code, out, err = run(capsys, "bands", "--potential", pot("free"))
    assert code == cli.EXIT_RESOLUTION and out == ""
    assert json.loads(err)["diagnostics"]["interval"] == [0.5, 1.5]


def test_verify_pass_and_fail(capsys, monkeypatch):
    code, out, _ = run(capsys, "verify", "delta-oracle")
    doc = json.loads(out)
    assert code == 0 and doc["diagnostics"]["passed"] and doc["results"][0]["criterion"] == 3

    def failing(**kwargs):
        return verify.CheckResult("forced", 3, False, {"err": 1.0}, {"rel": 1e-9})

    monkeypatch.setitem(cli.SUITES, "delta-oracle", failing)
    monkeypatch.setitem(verify.SUITES, "delta-oracle", failing)
    code, out, _ = run(capsys, "verify", "delta-oracle")
    assert code == cli.EXIT_VERIFY and not json.loads(out)["diagnostics"]["passed"]
