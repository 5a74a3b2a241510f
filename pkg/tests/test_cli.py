import csv
import hashlib
import json
import subprocess
import sys

import pytest

from ou_lab.cli import CSV_COLUMNS, main

SMALL_VERIFY = """\
seed = 1
[verify]
random_cases = 6
density_cases = 3
backend_max_degree = 3
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture
def evolve_cfg(tmp_path):
    return write(tmp_path, "evolve.toml", '[experiment]\ninitial = "first-chaos(0.01)"\n')


class TestEvolve:
    def test_outputs(self, tmp_path, evolve_cfg, capsys):
        out = tmp_path / "run"
        assert main(["evolve", evolve_cfg, "--out", str(out)]) == 0
        rows = list(csv.reader((out / "trajectory.csv").open()))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 32
        summary = json.loads((out / "summary.json").read_text())
        assert summary["all_pass"] is True
        assert summary["fitted_exponent"] == pytest.approx(2.0, abs=0.01)
        assert set(summary["pass"]) >= {"decay_bound", "entropy_production", "mass_conservation"}
        assert "fitted decay exponent" in capsys.readouterr().out

    def test_byte_identical_reruns(self, tmp_path, evolve_cfg):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["evolve", evolve_cfg, "--out", str(a)]) == 0
        assert main(["evolve", evolve_cfg, "--out", str(b)]) == 0
        for name in ("trajectory.csv", "summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_manifest_digests(self, tmp_path, evolve_cfg):
        out = tmp_path / "m"
        main(["evolve", evolve_cfg, "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 0
        for entry in manifest["files"]:
            assert hashlib.sha256((out / entry["path"]).read_bytes()).hexdigest() == entry["sha256"]

    def test_source_date_epoch(self, tmp_path, evolve_cfg, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        out = tmp_path / "e"
        main(["evolve", evolve_cfg, "--out", str(out)])
        assert json.loads((out / "manifest.json").read_text())["timestamp"].startswith("1970-01-01")

    def test_uniform_has_undefined_exponent(self, tmp_path):
        cfg = write(tmp_path, "u.toml", '[experiment]\ninitial = "uniform"\n')
        out = tmp_path / "u"
        main(["evolve", cfg, "--out", str(out)])
        summary = json.loads((out / "summary.json").read_text())
        assert summary["fitted_exponent"] is None
        rows = list(csv.DictReader((out / "trajectory.csv").open()))
        assert rows[0]["ratio"] == "nan"

    def test_positivity_failure_exit_1(self, tmp_path, capsys):
        cfg = write(tmp_path, "p.toml", '[experiment]\ninitial = "first-chaos(0.5)"\n')
        assert main(["evolve", cfg, "--out", str(tmp_path / "p")]) == 1
        assert "positivity" in capsys.readouterr().err

    def test_tight_tolerance_fails(self, tmp_path, evolve_cfg):
        assert main(["evolve", evolve_cfg, "--out", str(tmp_path / "t"), "--tolerance-scale", "1e-30"]) == 1


class TestConfigErrors:
    @pytest.mark.parametrize("text", [
        "[experiment]\nfloor = -1.0\n",
        "[experiment]\ndimension = 50\n",
        "[experiment\n",
        "[experiment]\nunknown = 3\n",
    ])
    def test_exit_2(self, tmp_path, text, capsys):
        assert main(["evolve", write(tmp_path, "bad.toml", text), "--out", str(tmp_path / "x")]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_budget_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OU_LAB_NODE_BUDGET", "5")
        cfg = write(tmp_path, "e.toml", "[experiment]\n")
        assert main(["evolve", cfg, "--out", str(tmp_path / "x")]) == 2

    def test_bad_flags(self, tmp_path, evolve_cfg):
        assert main(["evolve", evolve_cfg, "--seed", "-1"]) == 2
        assert main(["evolve", evolve_cfg, "--tolerance-scale", "0"]) == 2
        assert main(["frobnicate"]) == 2


class TestVerifyAndReport:
    def test_verify_then_report(self, tmp_path, capsys):
        cfg = write(tmp_path, "v.toml", SMALL_VERIFY)
        out = tmp_path / "v"
        assert main(["verify", cfg, "--out", str(out)]) == 0
        doc = json.loads((out / "verify_report.json").read_text())
        assert doc["all_pass"] and doc["seed"] == 1
        names = {r["identity_name"] for r in doc["records"]}
        assert {"weitzenbock", "bochner_entropy", "backend_agreement", "contraction", "entropy_bound"} <= names
        assert all(set(r) >= {"identity_name", "max_abs_residual", "max_rel_residual", "nodes_checked",
                              "tolerance", "pass"} for r in doc["records"])

        evolve = write(tmp_path, "e.toml", "[experiment]\n")
        main(["evolve", evolve, "--out", str(out)])
        capsys.readouterr()
        assert main(["report", str(out / "verify_report.json"), str(out / "summary.json")]) == 0
        text = capsys.readouterr().out
        assert "## Input 1: verify" in text and "## Input 2: evolve" in text
        assert "| weitzenbock | pass |" in text

        assert main(["report", str(out / "verify_report.json"), "--out", str(tmp_path / "r")]) == 0
        assert (tmp_path / "r" / "summary.md").read_text().startswith("# OU identity verification summary")

    def test_verify_deterministic(self, tmp_path):
        cfg = write(tmp_path, "v.toml", SMALL_VERIFY)
        main(["verify", cfg, "--out", str(tmp_path / "a")])
        main(["verify", cfg, "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "verify_report.json").read_bytes() == \
            (tmp_path / "b" / "verify_report.json").read_bytes()

    def test_verify_seed_override_changes_output(self, tmp_path):
        cfg = write(tmp_path, "v.toml", SMALL_VERIFY)
        main(["verify", cfg, "--out", str(tmp_path / "a")])
        main(["verify", cfg, "--out", str(tmp_path / "b"), "--seed", "9"])
        assert json.loads((tmp_path / "b" / "verify_report.json").read_text())["seed"] == 9
        assert (tmp_path / "a" / "verify_report.json").read_bytes() != \
            (tmp_path / "b" / "verify_report.json").read_bytes()

    def test_report_errors(self, tmp_path):
        assert main(["report"]) == 2
        assert main(["report", str(tmp_path / "missing.json")]) == 2
        empty = write(tmp_path, "empty.json", "")
        assert main(["report", empty]) == 2
        other = write(tmp_path, "other.json", '{"kind": "other"}')
        assert main(["report", other]) == 2

    def test_report_flags_failures(self, tmp_path):
        doc = {"kind": "verify", "seed": 0, "all_pass": False, "records": [
            {"identity_name": "weitzenbock", "max_abs_residual": 1.0, "max_rel_residual": 1.0,
             "nodes_checked": 1, "tolerance": 1e-10, "pass": False}]}
        f = write(tmp_path, "f.json", json.dumps(doc))
        assert main(["report", f, "--out", str(tmp_path / "r")]) == 1
        assert "| weitzenbock | FAIL |" in (tmp_path / "r" / "summary.md").read_text()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ou_lab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "verify" in proc.stdout
