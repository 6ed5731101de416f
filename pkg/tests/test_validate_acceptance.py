from __future__ import annotations

import json

import degenspec
import validate_acceptance

CONFIG = {
    "symbol": {"kind": "lattice-bcs", "d": 2, "mu": 0.5},
    "grid": {"L": 8},
    "potential": {"family": "gaussian", "amplitude": 1.0, "width": 1.5},
}


def _spectrum_run(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(CONFIG), encoding="utf-8")
    out_dir = tmp_path / "run"
    assert degenspec.main(["spectrum", "--config", str(config), "--out", str(out_dir)]) == 0
    return out_dir


def _digest(out_dir):
    return json.loads((out_dir / "resolved_config.json").read_text(encoding="utf-8"))["config_hash"]


def test_clean_run_passes(tmp_path, capsys):
    out_dir = _spectrum_run(tmp_path)
    assert validate_acceptance.main([str(out_dir)]) == 0
    assert "[PASS]" in capsys.readouterr().out


def test_tampered_csv_hash_fails(tmp_path, capsys):
    out_dir = _spectrum_run(tmp_path)
    path = out_dir / "eigenvalues.csv"
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(["# config_hash=deadbeef", *lines[1:]]) + "\n", encoding="utf-8")
    assert validate_acceptance.main([str(out_dir)]) == 1
    assert "eigenvalues.csv" in capsys.readouterr().out


def test_error_file_fails(tmp_path):
    out_dir = _spectrum_run(tmp_path)
    (out_dir / "error.json").write_text(json.dumps({"error": "RuntimeError", "message": "x"}), encoding="utf-8")
    assert validate_acceptance.main([str(out_dir)]) == 1


def test_missing_run_fails(tmp_path):
    assert validate_acceptance.main([str(tmp_path / "nothing")]) == 1


def test_threshold_regressions_are_reported(tmp_path, capsys):
    out_dir = _spectrum_run(tmp_path)
    digest = _digest(out_dir)
    decay = {"config_hash": digest, "levels": [{"t": 0.5, "decay": {"rate": 0.2}}]}
    (out_dir / "decay.json").write_text(json.dumps(decay), encoding="utf-8")
    weak = {"config_hash": digest, "fits": [{"j": 1, "conclusive": True, "mismatch_affine": 0.3}]}
    (out_dir / "weak_coupling.json").write_text(json.dumps(weak), encoding="utf-8")
    bs = {"config_hash": digest, "summary": {"cases": 10, "indeterminate_fraction": 0.0, "mismatches": 1}}
    (out_dir / "bs_check.json").write_text(json.dumps(bs), encoding="utf-8")
    assert validate_acceptance.main([str(out_dir)]) == 1
    out = capsys.readouterr().out
    assert "decay rate" in out
    assert "weak_coupling j=1" in out
    assert "counting mismatches" in out


def test_clr_study_thresholds(tmp_path, capsys):
    out_dir = _spectrum_run(tmp_path)
    report = {
        "config_hash": _digest(out_dir),
        "pass": True,
        "c_hat": 1.0,
        "clr_studies": [{"growth_vs_norm": 1.6, "expected_halving_factor": 16.0, "halving_factors": [15.2]}],
    }
    (out_dir / "report_clr-lattice.json").write_text(json.dumps(report), encoding="utf-8")
    assert validate_acceptance.main([str(out_dir)]) == 1
    out = capsys.readouterr().out
    assert "CLR growth exponent" in out
    assert "halving factor" not in out


def test_norm_sweep_thresholds(tmp_path, capsys):
    out_dir = _spectrum_run(tmp_path)
    report = {
        "config_hash": _digest(out_dir),
        "pass": True,
        "c_hat": 1.0,
        "sweeps": {
            "00-gaussian": {"m": 3.0, "slope": -0.4, "log_ratio_growth": 1.3},
            "01-delta": {"m": 3.0, "slope": -2.1, "log_ratio_growth": 43.9},
        },
    }
    (out_dir / "report_bs-norm-curved-lattice.json").write_text(json.dumps(report), encoding="utf-8")
    flat = {
        "config_hash": _digest(out_dir),
        "pass": True,
        "c_hat": 1.0,
        "sweeps": {"00-gaussian": {"m": 2.0, "slope": -1.9, "log_ratio_growth": 1.0}},
    }
    (out_dir / "report_bs-norm-lattice.json").write_text(json.dumps(flat), encoding="utf-8")
    assert validate_acceptance.main([str(out_dir)]) == 1
    out = capsys.readouterr().out
    assert "01-delta e-sweep log-ratio growth 43.9" in out
    assert "00-gaussian e-sweep log-ratio growth" not in out
    assert "e-sweep slope -1.9" in out


def test_norm_sweep_within_thresholds_passes(tmp_path):
    out_dir = _spectrum_run(tmp_path)
    report = {
        "config_hash": _digest(out_dir),
        "pass": True,
        "c_hat": 1.0,
        "sweeps": {
            "00-gaussian": {"m": 3.0, "slope": -0.6, "log_ratio_growth": 1.8},
            "01-plateau": {"m": 2.0, "slope": -0.95, "log_ratio_growth": 2.5},
        },
    }
    (out_dir / "report_bs-norm-curved-lattice.json").write_text(json.dumps(report), encoding="utf-8")
    assert validate_acceptance.main([str(out_dir)]) == 0
