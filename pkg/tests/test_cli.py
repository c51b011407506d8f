import json

import numpy as np
import pytest

from qflab import spread_sets as ss
from qflab.cli import EXIT_MISMATCH, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, parse_family_params


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_family_list(capsys):
    code, out, _ = run(capsys, "family", "list")
    assert code == EXIT_OK and len(json.loads(out)) == 14


def test_family_show(capsys):
    code, out, _ = run(capsys, "family", "show", "P16b")
    d = json.loads(out)
    assert code == EXIT_OK and d["constraints"] == ["4d^2 >= 1"] and d["defaults"] == {"d": 1.0}


def test_unknown_family_is_usage_error(capsys):
    code, _, err = run(capsys, "family", "show", "P99")
    assert code == EXIT_USAGE and "unknown family" in err


def test_invalid_parameters_are_usage_error(capsys):
    code, _, err = run(capsys, "classify", "--family", "P16b", "--d", "0.4")
    assert code == EXIT_USAGE and "4d^2 >= 1" in err


def test_bad_subcommand(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE


def test_export_and_verify_spread(capsys, tmp_path):
    path = tmp_path / "p11c.json"
    assert run(capsys, "family", "export", "P11c", "--out", str(path))[0] == EXIT_OK
    assert len(ss.SpreadSample.from_json(path.read_text())) == 200
    code, out, _ = run(capsys, "verify", "spread", "--spread", str(path))
    assert code == EXIT_OK and json.loads(out)["M1"]["ok"]


def test_export_csv(capsys):
    code, out, _ = run(capsys, "family", "export", "P11a", "--format", "csv")
    lines = out.splitlines()
    assert code == EXIT_OK and lines[0] == "family,w,r,t,a,b,m11,m12,m21,m22"
    assert len(lines) == 1 + 33 * 256


def test_malformed_spread_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "verify", "spread", "--spread", str(bad))
    assert code == EXIT_USAGE and "cannot read" in err


def test_both_sources_rejected(capsys, tmp_path):
    code, _, _ = run(capsys, "classify", "--family", "P11a", "--spread", str(tmp_path / "x.json"))
    assert code == EXIT_USAGE


def test_classify_family(capsys):
    code, out, _ = run(capsys, "classify", "--family", "P11a", "--w", "3")
    d = json.loads(out)
    assert code == EXIT_OK and d["mismatches"] == []
    assert d["verdicts"]["decomposable"] and not d["verdicts"]["quasi_simple"]
    assert d["params"] == {"w": 3.0}


def test_classify_from_spread_file(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(ss.sample_family(ss.complex_spread()).to_json()))
    code, out, _ = run(capsys, "classify", "--spread", str(path))
    d = json.loads(out)
    assert code == EXIT_OK and d["verdicts"]["proper"] is False


def test_classify_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["classify", "--family", "P13a", "--seed", "0", "--out", str(p)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_mul_complex(capsys):
    code, out, _ = run(capsys, "mul", "--family", "complex", "--lhs", "0,1", "--rhs", "0,1")
    assert code == EXIT_OK and out.strip() == "-1,0"


def test_ldiv_rdiv_round_trip(capsys):
    code, out, _ = run(capsys, "mul", "--family", "P14", "--lhs", "0.5,0.3", "--rhs=-1,2")
    w = out.strip()
    _, out, _ = run(capsys, "ldiv", "--family", "P14", "--lhs", "0.5,0.3", f"--rhs={w}")
    assert np.allclose([float(x) for x in out.strip().split(",")], [-1, 2], atol=1e-9)
    _, out, _ = run(capsys, "rdiv", "--family", "P14", f"--lhs={w}", "--rhs=-1,2")
    p = out.splitlines()[0]
    assert np.allclose([float(x) for x in p.split(",")], [0.5, 0.3], atol=1e-9)


def test_operand_parsing(capsys):
    code, _, err = run(capsys, "mul", "--family", "complex", "--lhs", "1,2,3", "--rhs", "0,1")
    assert code == EXIT_USAGE and "two comma-separated" in err
    code, _, _ = run(capsys, "ldiv", "--family", "complex", "--lhs", "0,0", "--rhs", "0,1")
    assert code == EXIT_USAGE


def test_verify_section(capsys):
    code, out, _ = run(capsys, "verify", "section", "--family", "P11b", "--samples", "30")
    assert code == EXIT_OK and json.loads(out)["sharp_transitivity"]["failures"] == []


def test_verify_c1_profile(capsys, tmp_path):
    t = np.linspace(0, 2 * np.pi, 401)
    prof = tmp_path / "p.json"
    prof.write_text(json.dumps({"t": t.tolist(), "a": [1.0] * 401, "b": (-t).tolist()}))
    code, out, _ = run(capsys, "verify", "c1", "--profile", str(prof))
    d = json.loads(out)
    assert code == EXIT_MISMATCH and d["c1"]["status"] == "boundary"


def test_verify_c1_family(capsys):
    code, out, _ = run(capsys, "verify", "c1", "--family", "complex")
    d = json.loads(out)
    assert code == EXIT_OK and d["exp_band"]["status"] == "pass"


def test_export_translations(capsys):
    code, out, _ = run(capsys, "export-translations", "--family", "P16b")
    rows = out.splitlines()
    assert code == EXIT_OK and len(rows) == 1 + 33 * 256


def test_tolerance_env(monkeypatch, capsys):
    monkeypatch.setenv("QFLAB_TOL", "not-a-number")
    code = main(["classify", "--family", "complex"])
    capsys.readouterr()
    assert code == EXIT_USAGE


def test_parse_family_params():
    assert parse_family_params(["--m", "1", "--n=3", "--coeffs", "1,0,2"]) == {"m": 1, "n": 3, "coeffs": (1.0, 0.0, 2.0)}


def test_numeric_exit_code_constant():
    assert EXIT_NUMERIC == 3
