"""Tests for the command-line front end: exit codes, emission, determinism."""

import json
import subprocess
import sys

import pytest

from stretchwalk import cli


def run_cli(argv, capsys):
    rc = cli.main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


class TestExitCodes:
    def test_no_command_is_usage_error(self, capsys):
        rc, _, err = run_cli([], capsys)
        assert rc == 1
        assert "usage" in err

    def test_unknown_flag_is_usage_error(self, capsys):
        rc, _, _ = run_cli(["bounds", "--bogus", "1"], capsys)
        assert rc == 1

    def test_help_exits_zero(self, capsys):
        rc, out, _ = run_cli(["--help"], capsys)
        assert rc == 0
        assert "bounds" in out

    def test_missing_required_flag(self, capsys):
        rc, _, err = run_cli(["bounds", "--model", "exp"], capsys)
        assert rc == 1
        assert "--n" in err

    def test_unknown_plan(self, capsys):
        rc, _, err = run_cli(["conditions", "--plan", "nope"], capsys)
        assert rc == 1
        assert "example1-case2" in err

    def test_numeric_failure_names_error_class(self, capsys):
        rc, _, err = run_cli(
            ["localize", "--model", "weibull:k=3", "--n", "5", "--a", "2",
             "--eps", "0.5", "--trials", "500"],
            capsys,
        )
        assert rc == 2
        assert err.startswith("DomainError")

    def test_bad_model_spec(self, capsys):
        rc, _, err = run_cli(
            ["rate", "--model", "cauchy", "--a", "5"], capsys
        )
        assert rc == 2
        assert "DomainError" in err


class TestBounds:
    def test_oracle_agreement_json(self, capsys):
        rc, out, _ = run_cli(
            ["bounds", "--model", "weibull:k=3", "--n", "4", "--a", "3",
             "--eps", "0.5", "--oracle", "--format", "json"],
            capsys,
        )
        assert rc == 0
        data = json.loads(out)
        row = data["rows"][0]
        assert row["oracle_rel_gap"] <= 1e-4
        assert row["escape_infimum"] == min(row["high_exit"], row["low_exit"])

    def test_grid_expands(self, capsys):
        rc, out, _ = run_cli(
            ["bounds", "--model", "power:beta=2", "--n", "2,3", "--a", "2,3",
             "--eps", "0.4"],
            capsys,
        )
        assert rc == 0
        lines = out.strip().splitlines()
        assert lines[0] == "# seed=0"
        assert lines[1].startswith("n,a,eps,")
        assert len(lines) == 2 + 4

    def test_perturbed_model_rejected(self, capsys):
        rc, _, err = run_cli(
            ["bounds", "--model", "power:beta=2/sin", "--n", "2", "--a", "2",
             "--eps", "0.4"],
            capsys,
        )
        assert rc == 1
        assert "pure" in err


class TestConditions:
    def test_case2_with_documented_overrides(self, capsys):
        rc, out, _ = run_cli(
            ["conditions", "--plan", "example1-case2", "--beta", "3",
             "--alpha", "0.5", "--format", "json"],
            capsys,
        )
        assert rc == 0
        data = json.loads(out)
        assert data["c32_trend"] == "decreasing"
        assert data["c33_trend"] == "decreasing"
        assert data["final_ratio32"] < 1e-2

    def test_csv_columns(self, capsys):
        rc, out, _ = run_cli(
            ["conditions", "--plan", "example1-case1"], capsys
        )
        assert rc == 0
        lines = out.strip().splitlines()
        assert lines[1] == "n,a,eps,ratio_growth,ratio32,ratio33,H,G"

    def test_custom_grid(self, capsys):
        rc, out, _ = run_cli(
            ["conditions", "--plan", "example1-case2", "--n", "100,1000"],
            capsys,
        )
        assert rc == 0
        assert len(out.strip().splitlines()) == 4


class TestLocalize:
    def test_csv_rows_per_n(self, capsys):
        rc, out, _ = run_cli(
            ["localize", "--model", "weibull:k=3", "--n", "5,10", "--a", "2",
             "--eps", "0.5", "--trials", "5000", "--seed", "11"],
            capsys,
        )
        assert rc == 0
        lines = out.strip().splitlines()
        assert lines[0] == "# seed=11"
        assert lines[1] == "n,p_hat,std_err,n_eff,replications"
        assert len(lines) == 4

    def test_gibbs_method(self, capsys):
        rc, out, _ = run_cli(
            ["localize", "--model", "power:beta=2", "--n", "4", "--a", "2",
             "--eps", "1.0", "--method", "FixedSumGibbs", "--trials", "300",
             "--format", "json"],
            capsys,
        )
        assert rc == 0
        row = json.loads(out)["rows"][0]
        assert 0.0 <= row["p_hat"] <= 1.0


class TestPaths:
    def test_json_summary(self, capsys):
        rc, out, _ = run_cli(
            ["paths", "--model", "weibull:k=3", "--n", "50", "--a", "2",
             "--k", "5", "--alpha", "1.5", "--trials", "10",
             "--format", "json", "--seed", "3"],
            capsys,
        )
        assert rc == 0
        data = json.loads(out)
        assert set(data) >= {"argmax_j", "max_slope", "a_k_event",
                             "p_ak", "p_ak_std_err", "note"}
        assert 0 <= data["argmax_j"] <= 45

    def test_csv_trajectory(self, capsys):
        rc, out, _ = run_cli(
            ["paths", "--model", "weibull:k=3", "--n", "20", "--a", "2",
             "--k", "4", "--alpha", "1.5", "--trials", "5", "--seed", "3"],
            capsys,
        )
        assert rc == 0
        lines = out.strip().splitlines()
        assert lines[1] == "j,increment,partial_sum"
        assert len(lines) == 2 + 20


class TestDeterminism:
    def test_stdout_byte_identical(self, capsys):
        argv = ["localize", "--model", "weibull:k=3", "--n", "5", "--a", "2",
                "--eps", "0.5", "--trials", "5000", "--seed", "4"]
        _, first, _ = run_cli(argv, capsys)
        _, second, _ = run_cli(argv, capsys)
        assert first == second

    def test_seed_changes_output(self, capsys):
        base = ["localize", "--model", "weibull:k=3", "--n", "5", "--a", "2",
                "--eps", "0.5", "--trials", "5000"]
        _, first, _ = run_cli(base + ["--seed", "4"], capsys)
        _, second, _ = run_cli(base + ["--seed", "5"], capsys)
        assert first != second

    def test_file_output_with_sidecar(self, tmp_path, capsys):
        argv = ["conditions", "--plan", "example1-case1", "--out", str(tmp_path)]
        rc, out, _ = run_cli(argv, capsys)
        assert rc == 0
        assert out == ""
        primary = tmp_path / "conditions.csv"
        meta = tmp_path / "conditions.meta.json"
        assert primary.exists() and meta.exists()
        sidecar = json.loads(meta.read_text())
        assert "written_at" in sidecar
        assert "written_at" not in primary.read_text()


class TestConfigFile:
    def test_config_overrides_flags(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": [4], "a": 2.5}))
        rc, out, _ = run_cli(
            ["localize", "--model", "power:beta=2", "--n", "99", "--a", "1.0",
             "--eps", "1.0", "--trials", "2000", "--format", "json",
             "--config", str(cfg)],
            capsys,
        )
        assert rc == 0
        data = json.loads(out)
        assert data["a"] == 2.5
        assert data["rows"][0]["n"] == 4

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        rc, _, err = run_cli(
            ["localize", "--model", "power:beta=2", "--n", "4", "--a", "2",
             "--eps", "1.0", "--config", str(cfg)],
            capsys,
        )
        assert rc == 1
        assert "bogus" in err


class TestVerifySubcommand:
    def test_single_fast_criterion(self, capsys):
        rc, out, _ = run_cli(["verify", "--criteria", "9"], capsys)
        assert rc == 0
        data = json.loads(out)
        assert data["all_passed"] is True
        assert data["criteria"][0]["index"] == 9
        assert data["criteria"][0]["passed"] is True

    def test_bad_criteria_range(self, capsys):
        rc, _, err = run_cli(["verify", "--criteria", "0,12"], capsys)
        assert rc == 1
        assert "1..11" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "stretchwalk.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "stretchwalk" in proc.stdout
