import json
import os
import subprocess
import sys

import jsonschema
import pytest

from cpecheck import catalog, cli
from cpecheck.errors import ManifestError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCHEMA_PATH = os.path.join(ROOT, "docs", "report.schema.json")


def run_cli(args):
    return cli.main(args)


def run_report(tmp_path, args, name="out.json"):
    out = tmp_path / name
    code = cli.main(args + ["--out", str(out)])
    with open(out) as fh:
        return code, json.load(fh)


@pytest.fixture(scope="module")
def schema():
    with open(SCHEMA_PATH) as fh:
        return json.load(fh)


def test_expand_checks():
    assert cli.expand_checks("prop21:0") == ["prop21:0"]
    assert cli.expand_checks("prop21") == [f"prop21:{k}" for k in range(5)]
    assert set(cli.expand_checks("prop2*")) >= {"prop21:0", "prop22", "prop23"}
    got = cli.expand_checks("all")
    assert set(got) == set(cli.idn.IDENTITY_IDS) | set(cli.GROUPS)
    assert cli.expand_checks("matrix,matrix") == ["matrix"]
    with pytest.raises(ManifestError):
        cli.expand_checks("bogus")
    with pytest.raises(ManifestError):
        cli.expand_checks("prop99:*")


def test_unknown_check_is_config_error(capsys):
    assert run_cli(["--case", "sphere3", "--checks", "nope"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_case_is_config_error(capsys):
    assert run_cli(["--case", "mystery", "--checks", "curvature"]) == 2
    assert "unknown case" in capsys.readouterr().err


def test_case_required_for_identities(capsys):
    assert run_cli(["--checks", "prop21:0"]) == 2
    assert "--case" in capsys.readouterr().err


def test_bad_order_rejected(capsys):
    assert run_cli(["--case", "sphere3", "--checks", "curvature",
                    "--order", "2"]) == 2


def test_matrix_and_lemma_checks_pass(tmp_path, schema):
    code, rep = run_report(
        tmp_path, ["--checks", "matrix,lemma31", "--samples", "20000",
                   "--seed", "7", "--n", "3..5"])
    assert code == 0
    jsonschema.validate(rep, schema)
    kinds = {b["kind"] for b in rep["checks"]}
    assert kinds == {"matrix", "lemma31"}
    ids = [b["check"] for b in rep["checks"]]
    assert "lemma31:n3" in ids and "lemma31:n5" in ids and "lemma31:n6" not in ids
    assert all(b["verdict"] == "pass" for b in rep["checks"])
    n3 = next(b for b in rep["checks"] if b["check"] == "lemma31:n3")
    assert n3["bound_constant"] == pytest.approx(1.0 / 6.0**0.5)


def test_sphere3_full_run_schema_and_exit(tmp_path, schema):
    code, rep = run_report(
        tmp_path, ["--case", "sphere3", "--checks", "all", "--order", "8",
                   "--samples", "5000", "--seed", "1"])
    assert code == 0
    assert rep["exit_code"] == 0
    jsonschema.validate(rep, schema)
    assert rep["summary"]["fail"] == 0
    assert rep["config"]["order"] == 8
    assert rep["config"]["seed"] == 1
    assert rep["manifest"]["manifold"]["kind"] == "sphere"
    identity = [b for b in rep["checks"] if b["kind"] == "identity"]
    assert {b["check"] for b in identity} == set(cli.idn.IDENTITY_IDS)
    for b in identity:
        assert b["verdict"] == "pass"
        assert set(b["tolerances"]) == {"total", "divergence"}


def test_trace_only_identity_is_not_applicable(tmp_path, schema):
    code, rep = run_report(
        tmp_path, ["--case", "product-trace-only", "--checks", "prop21:0",
                   "--order", "8"])
    assert code == 0
    jsonschema.validate(rep, schema)
    blk = rep["checks"][0]
    assert blk["verdict"] == "not-applicable"
    assert blk["diagnostics"]["exactness"] == "trace_only"
    assert abs(blk["total"]) > 1.0
    assert abs(blk["divergence_check"]) < blk["tolerances"]["divergence"]


def test_manifest_file_input(tmp_path, schema):
    man = catalog.get_manifest("sphere3")
    man["potential"]["amplitude"] = 2.5
    path = tmp_path / "custom-case.json"
    path.write_text(json.dumps(man))
    code, rep = run_report(
        tmp_path, ["--case", str(path), "--checks", "prop22", "--order", "8"])
    assert code == 0
    jsonschema.validate(rep, schema)
    assert rep["config"]["case"] == "custom-case"
    assert rep["checks"][0]["verdict"] == "pass"


def test_malformed_manifest_exit2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run_cli(["--case", str(path), "--checks", "prop22"]) == 2
    assert "parse error" in capsys.readouterr().err
    man = catalog.get_manifest("sphere3")
    man["manifold"]["radius"] = "one"
    path.write_text(json.dumps(man))
    assert run_cli(["--case", str(path), "--checks", "prop22"]) == 2
    assert "radius" in capsys.readouterr().err


def test_csv_summary_format(tmp_path):
    out = tmp_path / "report.csv"
    code = cli.main(["--case", "sphere3", "--checks", "prop23", "--order", "8",
                     "--format", "csv-summary", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "case,check,total,divergence_check,verdict"
    assert lines[1].startswith("sphere3,prop23,")
    assert lines[1].endswith(",pass")


def test_reports_are_deterministic(tmp_path):
    args = ["--case", "sphere3", "--checks", "prop21:0,prop22,matrix",
            "--order", "8", "--samples", "3000", "--seed", "3"]
    _, rep1 = run_report(tmp_path, args, name="a.json")
    _, rep2 = run_report(tmp_path, args, name="b.json")
    rep1.pop("timestamp")
    rep2.pop("timestamp")
    assert json.dumps(rep1, sort_keys=True) == json.dumps(rep2, sort_keys=True)


def test_env_override_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("CPECHECK_ORDER", "8")
    monkeypatch.setenv("CPECHECK_SAMPLES", "2000")
    code, rep = run_report(tmp_path, ["--checks", "matrix", "--seed", "2"])
    assert code == 0
    assert rep["config"]["order"] == 8
    assert rep["config"]["samples"] == 2000


def test_list_subcommand(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for name in catalog.case_names():
        assert name in out
    for cid in cli.idn.IDENTITY_IDS:
        assert cid in out
    assert cli.main(["list"]) == 0
    assert capsys.readouterr().out == out  # stable across runs


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "cpecheck", "list"],
        capture_output=True, text=True, cwd=ROOT)
    assert proc.returncode == 0
    assert "catalog cases" in proc.stdout


def test_jobs_flag_parallel_matches_serial(tmp_path):
    base = ["--case", "sphere3", "--checks", "prop23,matrix,lemma31",
            "--order", "8", "--samples", "2000", "--n", "3..4"]
    _, rep1 = run_report(tmp_path, base + ["--jobs", "1"], name="serial.json")
    _, rep2 = run_report(tmp_path, base + ["--jobs", "4"], name="par.json")
    rep1.pop("timestamp")
    rep2.pop("timestamp")
    assert json.dumps(rep1, sort_keys=True) == json.dumps(rep2, sort_keys=True)


def test_tolerance_scale_loosens(tmp_path):
    code, rep = run_report(
        tmp_path, ["--case", "sphere3", "--checks", "prop23", "--order", "8",
                   "--tolerance-scale", "100.0"])
    assert code == 0
    blk = rep["checks"][0]
    assert blk["tolerances"]["total"] > 1e-5
