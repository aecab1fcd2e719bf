import json
import math
import subprocess
import sys

import numpy as np
import pytest

from projclt import empirics
from projclt.cli import ExperimentConfig, main
from projclt.errors import ConfigError


def write_config(tmp_path, overrides=None, name="cfg.json"):
    cfg = {
        "model": {"kind": "rademacher"},
        "directions": {"kind": "hypercube", "n": 64, "k": 2},
        "test_function": {"kind": "cosine", "a": "ones-normalized"},
        "theorem": "T2",
        "samples": 20_000,
        "seed": 11,
    }
    if overrides:
        cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "# schema=1"
    header = lines[1].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[2:]]


class TestConfigValidation:
    def test_round_trip(self, tmp_path):
        path = write_config(tmp_path)
        cfg = ExperimentConfig.from_file(str(path))
        assert cfg.samples == 20_000 and cfg.seed == 11
        assert len(cfg.digest) == 12

    def test_digest_is_stable(self, tmp_path):
        a = ExperimentConfig.from_file(str(write_config(tmp_path, name="a.json")))
        b = ExperimentConfig.from_file(str(write_config(tmp_path, name="b.json")))
        assert a.digest == b.digest

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"model": {}, "directions": {}, "test_function": {}, "bogus": 1}))
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(path))

    def test_exchangeable_theorem_cross_checks(self, tmp_path):
        path = write_config(tmp_path, {"theorem": "T4"})
        with pytest.raises(ConfigError, match="exchangeable"):
            ExperimentConfig.from_file(str(path))

    def test_t4_requires_centered_directions(self, tmp_path):
        path = write_config(
            tmp_path,
            {
                "theorem": "T4",
                "model": {"kind": "exchangeable", "family": "ramp"},
                "directions": {"kind": "hypercube", "n": 64, "k": 2, "centered": False},
            },
        )
        with pytest.raises(ConfigError, match="centered"):
            ExperimentConfig.from_file(str(path))


class TestExitCodes:
    def test_verify_pass_is_zero(self, tmp_path):
        path = write_config(tmp_path, {"output": str(tmp_path / "out.csv")})
        assert main(["verify", str(path)]) == 0

    def test_negative_control_is_one(self, tmp_path):
        path = write_config(
            tmp_path,
            {
                "directions": {"kind": "hypercube", "n": 16, "k": 2},
                "samples": 400_000,
                "output": str(tmp_path / "out.csv"),
            },
        )
        assert main(["verify", str(path), "--shrink-bound", "1e-6"]) == 1

    def test_missing_config_is_two(self, capsys):
        assert main(["verify", "/definitely/not/here.json"]) == 2
        assert "not found" in capsys.readouterr().err

    def test_unknown_theorem_is_two(self, tmp_path, capsys):
        path = write_config(tmp_path)
        assert main(["bound", str(path), "--theorem", "T7"]) == 2
        assert "unknown theorem" in capsys.readouterr().err

    def test_missing_population_file_is_two(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            {
                "theorem": "T4",
                "model": {"kind": "exchangeable", "population_file": str(tmp_path / "gone.txt")},
                "directions": {"kind": "hypercube", "n": 16, "k": 2, "centered": True},
            },
        )
        assert main(["moments", str(path)]) == 2
        assert "not found" in capsys.readouterr().err

    def test_empty_scan_values_is_two(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["scan", str(path), "--axis", "n", "--values", ""]) == 2


class TestBoundCommand:
    def test_hand_value_row(self, tmp_path):
        out = tmp_path / "bound.csv"
        path = write_config(
            tmp_path,
            {
                "theorem": "T1",
                "model": {"kind": "rademacher"},
                "directions": {"kind": "hypercube", "n": 256, "k": 1},
                "test_function": {"kind": "cosine", "a": [1.0]},
                "output": str(out),
            },
        )
        assert main(["bound", str(path)]) == 0
        (row,) = read_rows(out)
        assert row["theorem"] == "T1"
        assert float(row["term_fourth"]) == 0.0
        # 4/3 * 1 * 1 * 1 * (1/16)
        assert float(row["total"]) == pytest.approx(4.0 / 48.0, abs=1e-15)

    def test_multiple_theorems(self, tmp_path):
        out = tmp_path / "bound.csv"
        path = write_config(
            tmp_path, {"theorem": ["T1", "T2", "T3"], "output": str(out),
                       "model": {"kind": "uniform"}}
        )
        assert main(["bound", str(path)]) == 0
        rows = read_rows(out)
        assert [r["theorem"] for r in rows] == ["T1", "T2", "T3"]
        # orthonormal directions: T3 lambda column is 1
        assert float(rows[2]["lambda"]) == pytest.approx(1.0, abs=1e-9)

    def test_t4_bound_row(self, tmp_path):
        out = tmp_path / "bound.csv"
        path = write_config(
            tmp_path,
            {
                "theorem": "T4",
                "model": {"kind": "exchangeable", "family": "ramp"},
                "directions": {"kind": "hypercube", "n": 64, "k": 2, "centered": True},
                "constants": {"a": 1.0, "b": 1.0, "c": 1.0},
                "output": str(out),
            },
        )
        assert main(["bound", str(path)]) == 0
        (row,) = read_rows(out)
        assert float(row["term_mixed"]) > 0


class TestScanCommand:
    def test_hypercube_bound_ratios_halve(self, tmp_path):
        out = tmp_path / "scan.csv"
        path = write_config(tmp_path, {"samples": 5_000, "output": str(out)})
        assert main(["scan", str(path), "--axis", "n", "--values", "16,64,256,1024"]) == 0
        rows = read_rows(out)
        totals = [float(r["bound"]) for r in rows]
        for a, b in zip(totals, totals[1:]):
            assert b / a == pytest.approx(0.5, rel=1e-12)

    def test_k_scan_with_adaptive_direction(self, tmp_path):
        out = tmp_path / "scan.csv"
        path = write_config(
            tmp_path,
            {"samples": 5_000, "output": str(out),
             "directions": {"kind": "random", "n": 256, "k": 1, "seed": 3}},
        )
        assert main(["scan", str(path), "--axis", "k", "--values", "1,2,3"]) == 0
        rows = read_rows(out)
        assert [int(r["k"]) for r in rows] == [1, 2, 3]

    def test_k_scan_with_fixed_vector_rejected(self, tmp_path):
        path = write_config(
            tmp_path, {"test_function": {"kind": "cosine", "a": [1.0, 0.0]}}
        )
        assert main(["scan", str(path), "--axis", "k", "--values", "1,2"]) == 2


class TestCheckCommand:
    def test_default_config_passes(self, tmp_path, capsys):
        path = write_config(tmp_path)
        assert main(["check", str(path)]) == 0
        out = capsys.readouterr().out
        assert out.count(": ok") == 3

    def test_exchangeable_config_passes(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            {
                "theorem": "T4",
                "model": {"kind": "exchangeable", "family": "ramp"},
                "directions": {"kind": "hypercube", "n": 16, "k": 2, "centered": True},
            },
        )
        assert main(["check", str(path)]) == 0

    def test_tampered_lambda_fails(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(empirics, "_LINEARITY_LAMBDA_SCALE", 1.01)
        path = write_config(tmp_path)
        assert main(["check", str(path)]) == 1
        assert "FAIL" in capsys.readouterr().out


class TestMomentsCommand:
    def test_uniform_row(self, tmp_path):
        out = tmp_path / "m.csv"
        path = write_config(tmp_path, {"model": {"kind": "uniform"}, "output": str(out)})
        assert main(["moments", str(path)]) == 0
        (row,) = read_rows(out)
        assert float(row["fourth"]) == pytest.approx(1.8, abs=1e-15)
        assert float(row["abs3"]) == pytest.approx(3 * math.sqrt(3) / 4, abs=1e-15)
        assert row["mixed_4"] == ""

    def test_exchangeable_row_has_mixed_moments(self, tmp_path):
        out = tmp_path / "m.csv"
        path = write_config(
            tmp_path,
            {
                "theorem": "T4",
                "model": {"kind": "exchangeable", "population": [-1.0, -1.0, 1.0, 1.0]},
                "directions": {"kind": "hypercube", "n": 4, "k": 2, "centered": True},
                "output": str(out),
            },
        )
        assert main(["moments", str(path)]) == 0
        (row,) = read_rows(out)
        assert float(row["mixed_4"]) == 1.0
        assert float(row["mixed_var"]) == 0.0


class TestReproducibility:
    def test_byte_identical_output_across_runs_and_workers(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        path = write_config(tmp_path)
        assert main(["verify", str(path), "--output", str(out1), "--workers", "1"]) == 0
        assert main(["verify", str(path), "--output", str(out2), "--workers", "2"]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_seed_override_changes_digest_not_determinism(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        path = write_config(tmp_path)
        main(["verify", str(path), "--seed", "99", "--output", str(out1)])
        main(["verify", str(path), "--seed", "99", "--output", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_console_entry_point(self, tmp_path):
        path = write_config(tmp_path, {"output": None})
        proc = subprocess.run(
            [sys.executable, "-m", "projclt", "moments", str(path)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("# schema=1")
