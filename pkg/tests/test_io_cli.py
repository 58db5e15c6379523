"""Configuration, report serialisation and the command-line contract."""
import json
from pathlib import Path

import jsonschema
import pytest

from varifoldkit import CONFIG_SCHEMA, REPORT_SCHEMA, ConfigurationError, Report, config_hash
from varifoldkit.cli import COMMANDS, main
from varifoldkit.io import load_config, parse_config, render_report, thread_count, write_report

DOCS = Path(__file__).resolve().parents[1] / "docs"


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_published_schema_matches_code():
    assert json.loads((DOCS / "config_schema.json").read_text()) == CONFIG_SCHEMA
    assert json.loads((DOCS / "report_schema.json").read_text()) == REPORT_SCHEMA
    jsonschema.Draft202012Validator.check_schema(CONFIG_SCHEMA)


def test_unknown_fields_rejected():
    with pytest.raises(ConfigurationError, match="example"):
        parse_config({"example": {"n": 2, "bogus": 1}})
    with pytest.raises(ConfigurationError):
        parse_config({"i_min": 5, "i_max": 3})


def test_malformed_json_reports_line_and_column(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "seed": 1,\n  "i_min": ,\n}\n')
    with pytest.raises(ConfigurationError, match="line 3 column 12"):
        load_config(p)


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": [1.5]}) == config_hash({"b": [1.5], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_thread_count(monkeypatch):
    monkeypatch.delenv("VARIFOLDKIT_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("VARIFOLDKIT_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("VARIFOLDKIT_THREADS", "0")
    with pytest.raises(ConfigurationError):
        thread_count()


def test_report_rendering_is_bit_stable(tmp_path):
    rep = Report("t", "pass", {"config_sha256": "0" * 64, "seed": 0, "quadrature_order": 64,
                               "version": "0"},
                 {"x": 0.1, "inf": float("inf")}, ("i", "radius"), ((1, 0.1), (2, 1 / 3)))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_report(rep, "csv", a)
    write_report(rep, "csv", b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() == b"i,radius\n1,0.10000000000000001\n2,0.33333333333333331\n"
    doc = json.loads(render_report(rep, "json"))
    assert doc["result"]["inf"] is None
    jsonschema.validate(doc, REPORT_SCHEMA)


def test_write_failure_has_path(tmp_path):
    rep = Report("t", "pass", {}, {}, ("i",), ((1,),))
    target = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError, match="missing"):
        write_report(rep, "csv", target)


# ------------------------------------------------------------------ CLI

def test_derive_default(capsys):
    code, out, err = _run(capsys, "derive")
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["derived"]["a_float"] == 2.5
    assert doc["result"]["derived"]["b_float"] == 1.0
    assert "a=2.5 b=1" in err
    jsonschema.validate(doc, REPORT_SCHEMA)


def test_report_scaling_csv(capsys, tmp_path):
    code, out, err = _run(capsys, "report-scaling", "--kind", "mass", "--format", "csv")
    assert code == 0
    lines = out.split("\n")
    assert lines[0] == "i,radius,lower,upper,log2_lower,log2_upper"
    assert [ln.split(",")[0] for ln in lines[1:-1]] == [str(i) for i in range(2, 9)]
    assert "verdict=pass" in err
    # the same run twice is byte-identical, through --out as well
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _run(capsys, "report-scaling", "--kind", "mass", "--format", "csv", "--out", str(a))
    _run(capsys, "report-scaling", "--kind", "mass", "--format", "csv", "--out", str(b))
    assert a.read_bytes() == b.read_bytes() == out.encode()


def test_json_report_is_deterministic_and_has_provenance(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 7, "kind": "height", "i_min": 2, "i_max": 6}))
    _, out1, _ = _run(capsys, "report-scaling", "--config", str(cfg))
    _, out2, _ = _run(capsys, "report-scaling", "--config", str(cfg))
    assert out1 == out2
    prov = json.loads(out1)["provenance"]
    assert prov["seed"] == 7
    assert set(prov) >= {"config_sha256", "derived", "tail_bounds", "quadrature_order", "version"}
    assert set(prov["tail_bounds"]) == {"2", "3", "4", "5", "6"}


def test_failing_verdict_exits_one(capsys):
    code, _, err = _run(capsys, "report-scaling", "--kind", "curvature", "--tolerance", "1e-3")
    assert code == 1 and "verdict=fail" in err


@pytest.mark.parametrize("argv", [["nosuch"], [], ["derive", "--seed", "x"],
                                  ["report-scaling", "--kind", "bogus"],
                                  ["derive", "--config", "/nonexistent/cfg.json"]])
def test_usage_and_config_errors_exit_two(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2 and err


def test_malformed_config_exits_two_with_position(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"seed": 1,\n "example": {"n": }}')
    code, _, err = _run(capsys, "derive", "--config", str(cfg))
    assert code == 2 and "line 2 column" in err


def test_parameter_errors_exit_two(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"example": {"alpha1": "3/4"}}))
    code, _, err = _run(capsys, "derive", "--config", str(cfg))
    assert code == 2 and "alpha2*q2" in err


def test_csv_without_table_is_a_usage_error(capsys):
    code, _, _ = _run(capsys, "derive", "--format", "csv")
    assert code == 2


def test_every_command_runs(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"iso": {"tau_grid": [0.25, 0.5], "mc_count": 20000},
                               "scan": {"probes": [[0, 0, 0]], "i_values": [2, 4]},
                               "i_max": 6}))
    for cmd in COMMANDS:
        code, out, err = _run(capsys, cmd, "--config", str(cfg))
        assert code == 0, (cmd, err)
        jsonschema.validate(json.loads(out), REPORT_SCHEMA)
    # thread count does not change the report
    _, single, _ = _run(capsys, "scan-excess", "--config", str(cfg))
    monkeypatch.setenv("VARIFOLDKIT_THREADS", "4")
    _, multi, _ = _run(capsys, "scan-excess", "--config", str(cfg))
    assert single == multi
