#!/usr/bin/env python3
"""Validate degenspec run outputs against acceptance thresholds and fail fast on regressions."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent
DATA_DIR = BASE_DIR / "data"
BASELINE_PATH = DATA_DIR / "acceptance_baseline.json"
DEFAULT_THRESHOLDS = {
    "max_indeterminate_fraction": 0.05,
    "max_bs_mismatches": 0,
    "decay_rate_min": 0.4,
    "decay_rate_max": 0.75,
    "max_weak_coupling_mismatch": 0.1,
    "max_clr_growth_vs_norm": 1.25,
    "min_sublevel_factor_fraction": 0.7,
    "max_residual": 1e-8,
    "max_sweep_log_ratio_growth": 4.0,
    "min_sweep_slope": -1.15,
}


def _load_json(path: Path) -> object:
    if not path.exists():
        raise FileNotFoundError(f"Missing required file: {path}")
    with path.open("r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path} is not valid JSON: {exc}") from exc


def _check_spectrum(payload: dict, thresholds: dict, errors: list[str]) -> str:
    limit = float(thresholds["max_residual"])
    values = payload.get("negative_eigenvalues", [])
    residuals = payload.get("residuals", [])
    if any(v is None or float(v) <= 0 for v in values):
        errors.append("spectrum lists a non-positive eigenvalue")
    worst = max((float(r) for r in residuals if r is not None), default=0.0)
    if worst > limit:
        errors.append(f"spectrum residual {worst:.3g} > allowed {limit:g}")
    return f"spectrum: {len(values)} eigenvalues, worst residual {worst:.3g}"


def _check_bs(payload: dict, thresholds: dict, errors: list[str]) -> str:
    summary = payload.get("summary", {})
    fraction = float(summary.get("indeterminate_fraction", 1.0))
    mismatches = int(summary.get("mismatches", 0))
    if fraction > float(thresholds["max_indeterminate_fraction"]):
        errors.append(f"bs_check indeterminate fraction regressed: {fraction:.3f} > {thresholds['max_indeterminate_fraction']}")
    if mismatches > int(thresholds["max_bs_mismatches"]):
        errors.append(f"bs_check counting mismatches: {mismatches} > allowed {thresholds['max_bs_mismatches']}")
    return f"bs_check: {summary.get('cases', 0)} cases, {mismatches} mismatches, indeterminate {fraction:.3f}"


def _check_decay(payload: dict, thresholds: dict, errors: list[str]) -> str:
    lo, hi = float(thresholds["decay_rate_min"]), float(thresholds["decay_rate_max"])
    rates = []
    for level in payload.get("levels", []):
        rate = level.get("decay", {}).get("rate")
        if rate is None or not lo <= float(rate) <= hi:
            errors.append(f"decay rate at t={level.get('t')} outside [{lo}, {hi}]: {rate}")
        rates.append(rate)
    return f"decay: rates {rates}"


def _check_weak_coupling(payload: dict, thresholds: dict, errors: list[str]) -> str:
    limit = float(thresholds["max_weak_coupling_mismatch"])
    fits = [fit for fit in payload.get("fits", []) if fit.get("conclusive")]
    if not fits:
        errors.append("weak_coupling has no conclusive fit")
    for fit in fits:
        mismatch = fit.get("mismatch_affine")
        if mismatch is None or float(mismatch) > limit:
            errors.append(f"weak_coupling j={fit.get('j')} mismatch {mismatch} > allowed {limit}")
    return f"weak_coupling: {[fit.get('mismatch_affine') for fit in fits]}"


def _check_report(name: str, payload: dict, thresholds: dict, errors: list[str]) -> str:
    if not payload.get("pass"):
        errors.append(f"{name} did not pass (c_hat={payload.get('c_hat')}, spreads={payload.get('spreads')})")
    growth_limit = float(thresholds["max_clr_growth_vs_norm"])
    factor_fraction = float(thresholds["min_sublevel_factor_fraction"])
    for study in payload.get("clr_studies", []):
        growth = study.get("growth_vs_norm")
        if growth is not None and float(growth) > growth_limit:
            errors.append(f"{name} CLR growth exponent {growth:.3f} > allowed {growth_limit}")
        expected = float(study.get("expected_halving_factor", 0.0))
        for factor in study.get("halving_factors", []):
            if float(factor) < factor_fraction * expected:
                errors.append(f"{name} sub-level halving factor {factor:.3f} < {factor_fraction} x {expected:g}")
    ratio_limit = float(thresholds["max_sweep_log_ratio_growth"])
    slope_floor = float(thresholds["min_sweep_slope"])
    for instance, sweep in sorted(payload.get("sweeps", {}).items()):
        growth, slope, m = sweep.get("log_ratio_growth"), sweep.get("slope"), float(sweep.get("m", 0.0))
        if m >= 3.0:
            if growth is None or float(growth) > ratio_limit:
                errors.append(f"{name} {instance} e-sweep log-ratio growth {growth} > allowed {ratio_limit}")
        elif m == 2.0:
            if slope is None or float(slope) < slope_floor:
                errors.append(f"{name} {instance} e-sweep slope {slope} < allowed {slope_floor}")
    return f"{name}: pass={payload.get('pass')} c_hat={payload.get('c_hat')}"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Validate degenspec run outputs.")
    parser.add_argument("run_dir", help="Directory written by degenspec.py")
    parser.add_argument("--baseline", default=str(BASELINE_PATH), help="Threshold baseline JSON")
    args = parser.parse_args(argv)

    run_dir = Path(args.run_dir)
    errors: list[str] = []
    notes: list[str] = []
    try:
        baseline = _load_json(Path(args.baseline))
        resolved = _load_json(run_dir / "resolved_config.json")
    except (FileNotFoundError, ValueError) as exc:
        print(f"[FAIL] {exc}")
        return 1
    thresholds = {**DEFAULT_THRESHOLDS, **baseline.get("thresholds", {})}
    expected_hash = resolved.get("config_hash")

    if (run_dir / "error.json").exists():
        error = _load_json(run_dir / "error.json")
        errors.append(f"run failed: {error.get('error')}: {error.get('message')}")

    checks = 0
    for path in sorted(run_dir.glob("*.json")):
        if path.name in ("resolved_config.json", "error.json"):
            continue
        try:
            payload = _load_json(path)
        except ValueError as exc:
            errors.append(str(exc))
            continue
        if payload.get("config_hash") != expected_hash:
            errors.append(f"{path.name} carries config_hash {payload.get('config_hash')} != {expected_hash}")
        if path.name == "spectrum.json":
            notes.append(_check_spectrum(payload, thresholds, errors))
        elif path.name == "bs_check.json":
            notes.append(_check_bs(payload, thresholds, errors))
        elif path.name == "decay.json":
            notes.append(_check_decay(payload, thresholds, errors))
        elif path.name == "weak_coupling.json":
            notes.append(_check_weak_coupling(payload, thresholds, errors))
        elif path.name.startswith("report_"):
            notes.append(_check_report(path.stem, payload, thresholds, errors))
        else:
            continue
        checks += 1

    for path in sorted(run_dir.glob("*.csv")):
        with path.open("r", encoding="utf-8") as f:
            first = f.readline().strip()
        if first != f"# config_hash={expected_hash}":
            errors.append(f"{path.name} does not carry the resolved config hash")

    if checks == 0 and not errors:
        errors.append(f"no checkable outputs found in {run_dir}")

    if errors:
        print("[FAIL] Acceptance validation failed:")
        for issue in errors:
            print(f" - {issue}")
        return 1

    print("[PASS] Acceptance validation succeeded.")
    for note in notes:
        print(f" - {note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
