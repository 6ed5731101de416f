#!/usr/bin/env python3
"""Command line for degenerate-symbol spectral runs.

Subcommands:
- spectrum       negative eigenvalues of T(-i grad) - V  -> spectrum.json, eigenvalues.csv
- bs             counting identity N_e = n(1, BS(e))      -> bs_check.json
- surface        level sets and Fourier decay             -> mesh.csv, decay.json
- weak-coupling  e_j(lambda) against the surface operator -> weak_coupling.json
- bounds         eigenvalue bounds over potential families -> report_<tag>.json, summary.csv

Every run also writes resolved_config.json and run_manifest.json into the output directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from bounds import (  # noqa: E402
    DEFAULT_KAPPAS,
    DEFAULT_RATIO_FACTOR,
    THEOREM_TAGS,
    BoundParams,
    HypothesisError,
    clr_scaling_study,
    cluster_rate_check,
    map_ordered,
    run_bound_family,
    weak_coupling_sweep,
)
from run_config import ConfigError, RunConfig, load_run_config  # noqa: E402
from run_io import _write_json, write_csv, write_run_manifest  # noqa: E402
from schatten import BS_GUARD, DEFAULT_DROP_LARGEST, verify_bs_principle  # noqa: E402
from spectra import log_moment, negative_eigenvalues, riesz_mean  # noqa: E402
from surface import decay_rate, extract_level_set, nyquist_guard, surface_measure_total  # noqa: E402
from symbols import sigma_exponent_general, symbol_diagnostics  # noqa: E402
from torus import DEFAULT_ALIASING_FACTOR, build_potential, check_frequency_cutoff, lq_norm  # noqa: E402

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
CLI_SAFE_DISTANCE = 0.05
DEFAULT_E_GRID = (0.01, 0.05, 0.2, 1.5)
DEFAULT_RESOLUTION = 256

logger = logging.getLogger("degenspec")


def _potential(cfg: RunConfig, block: dict | None = None):
    V = build_potential(cfg.grid, cfg.potential if block is None else block, cfg.base_dir)
    check_frequency_cutoff(cfg.symbol, V, cfg.grid, float(cfg.task.get("aliasing_factor", DEFAULT_ALIASING_FACTOR)))
    return V


def cmd_spectrum(cfg: RunConfig) -> list[str]:
    task = cfg.task
    V = _potential(cfg)
    result = negative_eigenvalues(cfg.symbol, V, cfg.grid, cfg.dense_cap)
    payload = {"config_hash": cfg.config_hash, **result.to_dict()}
    if "gamma" in task:
        payload["riesz_mean"] = riesz_mean(result, float(task["gamma"]))
        payload["log_moment"] = log_moment(result, float(task["gamma"]))
    table = cfg.exponent_table()
    if "q" in task:
        sigma_q = sigma_exponent_general(table, float(task["q"])) if table is not None else None
        payload["cluster"] = cluster_rate_check(
            result, float(task["q"]), sigma_q, lq_norm(V, float(task["q"]), cfg.grid)
        ).to_dict()

    written = []
    if cfg.wants("json"):
        _write_json(cfg.output_dir / "spectrum.json", payload)
        written.append("spectrum.json")
    if cfg.wants("csv"):
        rows = [[j + 1, e, r] for j, (e, r) in enumerate(zip(result.negative_eigenvalues, result.residuals))]
        write_csv(cfg.output_dir / "eigenvalues.csv", ["j", "e", "residual"], rows, cfg.config_hash)
        written.append("eigenvalues.csv")
    print(f"Found {result.count} negative eigenvalues on N={cfg.grid.size}")
    return written


def _bs_potentials(cfg: RunConfig) -> list[tuple[str, dict]]:
    seeds = cfg.task.get("seeds")
    if not seeds:
        return [("potential", cfg.potential)]
    return [(f"seed-{seed}", {**cfg.potential, "family": "random", "seed": seed}) for seed in seeds]


def cmd_bs(cfg: RunConfig) -> list[str]:
    e_grid = [float(e) for e in cfg.task.get("e_grid", DEFAULT_E_GRID)]
    guard = float(cfg.task.get("guard", BS_GUARD))
    potentials = [(name, _potential(cfg, block)) for name, block in _bs_potentials(cfg)]

    def check(item) -> list[dict]:
        name, V = item
        spectrum = negative_eigenvalues(cfg.symbol, V, cfg.grid, cfg.dense_cap)
        return [
            {"potential": name, **verify_bs_principle(cfg.symbol, V, cfg.grid, e, guard, cfg.dense_cap, spectrum).to_dict()}
            for e in e_grid
        ]

    rows = [row for chunk in map_ordered(check, potentials, cfg.workers) for row in chunk]
    indeterminate = sum(1 for row in rows if row["indeterminate"])
    mismatches = sum(1 for row in rows if not row["indeterminate"] and not row["agree"])
    fraction = indeterminate / len(rows) if rows else 0.0
    summary = {
        "cases": len(rows),
        "indeterminate": indeterminate,
        "indeterminate_fraction": fraction,
        "mismatches": mismatches,
        "pass": mismatches == 0 and fraction <= 0.05,
    }
    _write_json(cfg.output_dir / "bs_check.json", {"config_hash": cfg.config_hash, "rows": rows, "summary": summary})
    print(f"Checked {len(rows)} cases: {mismatches} mismatches, {indeterminate} indeterminate")
    return ["bs_check.json"]


def cmd_surface(cfg: RunConfig) -> list[str]:
    task = cfg.task
    levels = [float(t) for t in task.get("t_levels", (0.5,))]
    resolution = int(task.get("resolutions", [DEFAULT_RESOLUTION])[0])
    allow_critical = bool(task.get("allow_critical", False))
    safe = float(task.get("safe_distance", CLI_SAFE_DISTANCE))
    refine = bool(task.get("refine", True))
    n_radii = int(task.get("n_radii", 12))

    def run_level(t: float):
        mesh = extract_level_set(cfg.symbol, t, resolution, allow_critical, safe)
        mass = surface_measure_total(mesh)
        entry = {
            "t": t,
            "sheets": list(mesh.sheets),
            "points": mesh.size,
            "resolution": resolution,
            "mass": mass,
            "nyquist_guard": nyquist_guard(mesh),
            "decay": decay_rate(mesh, n_radii=n_radii).to_dict(),
        }
        if refine:
            fine = surface_measure_total(extract_level_set(cfg.symbol, t, 2 * resolution, allow_critical, safe))
            entry["mass_refined"] = fine
            entry["refinement_delta"] = abs(fine - mass) / abs(fine) if fine else None
        return mesh, entry

    results = map_ordered(run_level, levels, cfg.workers)
    written = []
    if cfg.wants("csv"):
        d = cfg.symbol.dimension
        header = ["t", "sheet", *[f"xi_{i + 1}" for i in range(d)], "weight"]
        rows = [row for mesh, _ in results for row in mesh.rows()]
        write_csv(cfg.output_dir / "mesh.csv", header, rows, cfg.config_hash)
        written.append("mesh.csv")
    payload = {
        "config_hash": cfg.config_hash,
        "symbol": cfg.symbol.descriptor(),
        "diagnostics": symbol_diagnostics(cfg.symbol),
        "levels": [entry for _, entry in results],
    }
    _write_json(cfg.output_dir / "decay.json", payload)
    written.append("decay.json")
    for _, entry in results:
        print(f"t={entry['t']:g}: mass={entry['mass']:.6g}, decay rate={entry['decay']['rate']:.4f}")
    return written


def cmd_weak_coupling(cfg: RunConfig) -> list[str]:
    task = cfg.task
    if "lambdas" not in task:
        raise ConfigError("task.lambdas: required for weak-coupling")
    resolution = int(task.get("resolutions", [DEFAULT_RESOLUTION])[0])
    V = _potential(cfg)
    mesh = extract_level_set(cfg.symbol, 0.0, resolution, bool(task.get("allow_critical", False)))
    fit = weak_coupling_sweep(
        cfg.symbol,
        V,
        cfg.grid,
        mesh,
        task["lambdas"],
        tracked=task.get("tracked", [1]),
        method=task.get("method", "dense"),
        floor=float(task.get("floor", 1e-12)),
        window_factor=float(task.get("window_factor", 0.1)),
        dense_cap=cfg.dense_cap,
        workers=cfg.workers,
    )
    payload = {"config_hash": cfg.config_hash, "surface_mass": surface_measure_total(mesh), **fit.to_dict()}
    _write_json(cfg.output_dir / "weak_coupling.json", payload)
    for tracked in fit.fits:
        print(f"j={tracked.j}: a_fit={tracked.a_fit} a_affine={tracked.a_affine} a_S={tracked.a_surface}")
    return ["weak_coupling.json"]


def _bound_params(task: dict) -> BoundParams:
    keys = ("e", "gamma", "m", "q", "r", "delta", "s", "p")
    return BoundParams(**{k: float(task[k]) for k in keys if k in task})


def cmd_bounds(cfg: RunConfig) -> list[str]:
    task = cfg.task
    mode = "lattice" if cfg.symbol.is_lattice else "continuum"
    tags = task.get("tags") or [tag for tag, (_, m) in THEOREM_TAGS.items() if m == mode and not tag.startswith("clr")]
    blocks = task.get("families") or [cfg.potential]
    family = [_potential(cfg, block) for block in blocks]
    params = _bound_params(task)
    kappas = task.get("kappas", list(DEFAULT_KAPPAS))

    written, summary_rows = [], []
    for tag in tags:
        if tag not in THEOREM_TAGS:
            raise HypothesisError(f"task.tags: unknown theorem tag {tag!r}")
        report = run_bound_family(
            tag,
            cfg.symbol,
            cfg.grid,
            family,
            params,
            kappas=kappas,
            ratio_factor=float(task.get("ratio_factor", DEFAULT_RATIO_FACTOR)),
            e_grid=task.get("e_grid"),
            workers=cfg.workers,
            dense_cap=cfg.dense_cap,
            aliasing_factor=float(task.get("aliasing_factor", DEFAULT_ALIASING_FACTOR)),
            drop_largest=int(task.get("drop_largest", DEFAULT_DROP_LARGEST)),
        )
        payload = {"config_hash": cfg.config_hash, **report.to_dict()}
        if THEOREM_TAGS[tag][0] == "clr" and cfg.symbol.s > 1:
            studies = [
                clr_scaling_study(
                    cfg.symbol,
                    V,
                    cfg.grid,
                    float(task.get("p", cfg.symbol.s)),
                    kappas=kappas,
                    alphas=task.get("alphas", (0.3, 0.15)),
                    sublevel_resolution=int(task.get("sublevel_resolution", 4096)),
                    compare_unit_power=bool(task.get("compare_unit_power", False)),
                    workers=cfg.workers,
                    dense_cap=cfg.dense_cap,
                ).to_dict()
                for V in family
            ]
            payload["clr_studies"] = studies
            payload["pass"] = report.passed and all(s["within_bound"] and s["sublevel_ok"] for s in studies)
        name = f"report_{tag}.json"
        _write_json(cfg.output_dir / name, payload)
        written.append(name)
        summary_rows.extend(report.summary_rows())
        print(f"{tag}: c_hat={report.c_hat:.4g} pass={payload['pass']}")

    if cfg.wants("csv"):
        header = ["theorem", "instance", "lhs", "rhs", "ratio", "slope", "pass"]
        write_csv(cfg.output_dir / "summary.csv", header, summary_rows, cfg.config_hash)
        written.append("summary.csv")
    return written


COMMANDS = {
    "spectrum": cmd_spectrum,
    "bs": cmd_bs,
    "surface": cmd_surface,
    "weak-coupling": cmd_weak_coupling,
    "bounds": cmd_bounds,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Spectral experiments for degenerate kinetic symbols on a torus.")
    parser.add_argument("command", choices=sorted(COMMANDS), help="Subcommand to run")
    parser.add_argument("--config", required=True, help="Run config JSON path")
    parser.add_argument("--out", default=None, help="Output directory (overrides output.directory)")
    parser.add_argument("--workers", type=int, default=None, help="Worker threads (fallback: DEGENSPEC_WORKERS)")
    parser.add_argument("--seed", type=int, default=None, help="Override the potential seed")
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging")
    return parser


def _fail(out_dir: Path, exc: Exception, digest: str | None, code: int) -> int:
    _write_json(out_dir / "error.json", {"error": type(exc).__name__, "message": str(exc), "config_hash": digest})
    print(f"[FAIL] {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    out_dir = Path(args.out) if args.out else Path("out")
    cfg = None
    try:
        cfg = load_run_config(Path(args.config), args.out, args.workers, args.seed)
        out_dir = cfg.output_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "resolved_config.json", {"config_hash": cfg.config_hash, **cfg.resolved})
        written = COMMANDS[args.command](cfg)
    except (ValueError, OSError) as exc:
        return _fail(out_dir, exc, cfg.config_hash if cfg else None, EXIT_VALIDATION)
    except RuntimeError as exc:
        return _fail(out_dir, exc, cfg.config_hash if cfg else None, EXIT_NUMERIC)

    write_run_manifest(out_dir, args.command, cfg.config_hash, ["resolved_config.json", *written])
    print(f"Wrote {len(written)} file(s) to {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
