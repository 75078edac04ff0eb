import json
import subprocess
import sys
from pathlib import Path

import pytest

from ltearp.cli import main

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def test_analytic_json(tmp_path, capsys):
    out = tmp_path / "a.json"
    rc = main(["analytic", "--bandwidth", "1.4", "--payload-bytes", "100", "--rate-per-s", "500", "--format", "json", "--out", str(out)])
    assert rc == 0
    rec = json.loads(out.read_text())
    assert rec["p_outage"] < 0.1
    assert rec["scenario_id"] == "1.4MHz-rao20-short-100B"
    assert "p_outage" in capsys.readouterr().out


def test_analytic_tiny_rate(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["analytic", "--rate-per-subframe", "0.0001", "--out", str(out)]) == 0
    header, row = out.read_text().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert float(rec["p_outage"]) < 1e-12


def test_scenario_file_with_overrides(tmp_path):
    out = tmp_path / "a.json"
    scen = SCENARIOS / "bw5-1000B-full.yaml"
    assert main(["analytic", "--scenario", str(scen), "--rate-per-s", "500", "--format", "json", "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["scenario_id"] == "5MHz-rao5-full-1000B"
    assert rec["lambda_i"] == pytest.approx(0.5)


def test_every_shipped_scenario_loads():
    for path in sorted(SCENARIOS.glob("*.yaml")):
        assert main(["analytic", "--scenario", str(path)]) == 0, path


def test_validation_error_exit(capsys):
    assert main(["analytic", "--delta-rao", "25"]) == 1
    assert "delta_rao" in capsys.readouterr().err


def test_usage_error_exit():
    assert main(["analytic", "--no-such-flag"]) == 1
    assert main(["analytic", "--rate-per-s", "1", "--rate-per-subframe", "1"]) == 1


def test_unknown_key_in_file(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("delta_roa: 5\n")
    assert main(["analytic", "--scenario", str(p)]) == 1


def test_runtime_error_exit(tmp_path):
    assert main(["analytic", "--scenario", str(tmp_path / "missing.yaml")]) == 2


def test_empty_engine_set():
    assert main(["sweep", "--engines", ""]) == 1


def test_bracket_not_found_exit():
    assert main(["breaking-point", "--lo-per-s", "1", "--hi-per-s", "100"]) == 3


def test_breaking_point_output(tmp_path):
    out = tmp_path / "bp.json"
    rc = main(["breaking-point", "--bandwidth", "5", "--payload-bytes", "1000", "--format", "json", "--out", str(out)])
    assert rc == 0
    rec = json.loads(out.read_text())
    assert 700 / 1.3 <= rec["rate_per_s"] <= 700 * 1.3
    assert rec["p_below"] <= 0.1 < rec["p_above"]


def test_sweep_csv_deterministic(tmp_path):
    args = ["sweep", "--points", "3", "--min-rate-per-s", "500", "--max-rate-per-s", "5000",
            "--engines", "analytic,simulation", "--duration", "2000", "--seeds", "2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_and_trace(tmp_path):
    out, trace = tmp_path / "s.csv", tmp_path / "t.log"
    rc = main(["simulate", "--rate-per-s", "100", "--duration", "2000", "--seeds", "2", "--out", str(out), "--trace", str(trace)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert trace.read_text()


def test_compare_json(tmp_path):
    out = tmp_path / "c.json"
    rc = main(["compare", "--rates-per-s", "100,300", "--duration", "3000", "--seeds", "2", "--format", "json", "--out", str(out)])
    assert rc == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["lambda_i_per_s"] for r in rows] == [100.0, 300.0]
    assert all(r["abs_diff"] < 0.02 for r in rows)


def test_validate_quick(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["validate", "--quick", "--out", str(out)]) == 0
    assert out.read_text().startswith("check,passed,detail")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ltearp", "analytic", "--rate-per-s", "10"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "p_outage" in proc.stdout
