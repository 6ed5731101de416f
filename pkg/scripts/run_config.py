"""Load and validate run configs for the degenspec command line."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

from run_io import _read_json, config_hash
from symbols import ExponentTable, SymbolSpec
from torus import DEFAULT_DENSE_CAP, POTENTIAL_FAMILIES, TorusGrid

BASE_DIR = Path(__file__).resolve().parent.parent
DATA_DIR = BASE_DIR / "data"
WORKERS_ENV = "DEGENSPEC_WORKERS"
OUTPUT_FORMATS = ("json", "csv")

NUMBER = (int, float)
NUMBER_LIST = "number-list"
INT_LIST = "int-list"
STR_LIST = "str-list"
BLOCK_LIST = "block-list"

SYMBOL_KEYS = {"kind": str, "d": int, "mu": NUMBER, "s": NUMBER, "base": str, "tau": NUMBER, "epsilon": NUMBER, "r": NUMBER}
GRID_KEYS = {"d": int, "L": int, "h": NUMBER}
POTENTIAL_KEYS = {
    "family": str,
    "amplitude": NUMBER,
    "width": NUMBER,
    "radius": NUMBER,
    "seed": int,
    "csv": str,
    "center": NUMBER_LIST,
}
TASK_KEYS = {
    "e_grid": NUMBER_LIST,
    "lambdas": NUMBER_LIST,
    "kappas": NUMBER_LIST,
    "alphas": NUMBER_LIST,
    "t_levels": NUMBER_LIST,
    "resolutions": INT_LIST,
    "tracked": INT_LIST,
    "seeds": INT_LIST,
    "tags": STR_LIST,
    "families": BLOCK_LIST,
    "gamma": NUMBER,
    "q": NUMBER,
    "m": NUMBER,
    "delta": NUMBER,
    "s": NUMBER,
    "p": NUMBER,
    "r": NUMBER,
    "e": NUMBER,
    "guard": NUMBER,
    "floor": NUMBER,
    "window_factor": NUMBER,
    "ratio_factor": NUMBER,
    "aliasing_factor": NUMBER,
    "safe_distance": NUMBER,
    "n_radii": int,
    "drop_largest": int,
    "sublevel_resolution": int,
    "method": str,
    "allow_critical": bool,
    "compare_unit_power": bool,
    "refine": bool,
}
OUTPUT_KEYS = {"directory": str, "formats": STR_LIST}
TOP_KEYS = {"symbol": dict, "grid": dict, "potential": dict, "task": dict, "output": dict, "dense_cap": int}
REQUIRED_TOP = ("symbol", "grid")


class ConfigError(ValueError):
    """Raised when a run config is malformed; messages carry the dotted key path."""


def _is_number(value: object) -> bool:
    return isinstance(value, NUMBER) and not isinstance(value, bool)


def _check_value(path: str, value: object, expected: object) -> None:
    if expected is NUMBER:
        ok = _is_number(value)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is bool:
        ok = isinstance(value, bool)
    elif expected is str:
        ok = isinstance(value, str)
    elif expected is dict:
        ok = isinstance(value, dict)
    elif expected == NUMBER_LIST:
        ok = isinstance(value, list) and all(_is_number(v) for v in value)
    elif expected == INT_LIST:
        ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    elif expected == STR_LIST:
        ok = isinstance(value, list) and all(isinstance(v, str) for v in value)
    elif expected == BLOCK_LIST:
        ok = isinstance(value, list) and all(isinstance(v, dict) for v in value)
    else:
        raise AssertionError(f"no type rule for {expected!r}")
    if not ok:
        name = expected if isinstance(expected, str) else getattr(expected, "__name__", "number")
        raise ConfigError(f"{path}: expected {name}, got {type(value).__name__} {value!r}")
    if isinstance(expected, str) and expected.endswith("-list") and not value:
        raise ConfigError(f"{path}: expected a non-empty {expected}")


def _check_block(path: str, block: object, schema: dict, allow_null: tuple[str, ...] = ()) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object, got {type(block).__name__}")
    unknown = sorted(set(block) - set(schema))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; allowed {sorted(schema)}")
    for key, value in block.items():
        if value is None and key in allow_null:
            continue
        _check_value(f"{path}.{key}" if path else key, value, schema[key])
    return block


def _check_potential(path: str, block: object) -> dict:
    block = _check_block(path, block, POTENTIAL_KEYS)
    family = block.get("family", "zero")
    if family not in POTENTIAL_FAMILIES:
        raise ConfigError(f"{path}.family: unknown family {family!r}; expected one of {POTENTIAL_FAMILIES}")
    if family == "csv" and "csv" not in block:
        raise ConfigError(f"{path}.csv: required when family is 'csv'")
    return block


@dataclass
class RunConfig:
    symbol: SymbolSpec
    grid: TorusGrid
    potential: dict
    task: dict
    output_dir: Path
    formats: tuple[str, ...]
    dense_cap: int
    epsilon: float
    decay_r: float | None
    workers: int = 1
    resolved: dict = field(default_factory=dict)
    base_dir: Path = DATA_DIR

    @property
    def config_hash(self) -> str:
        """Hash of the resolved config minus output placement and worker count."""
        hashed = copy.deepcopy(self.resolved)
        hashed.get("output", {}).pop("directory", None)
        return config_hash(hashed)

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats

    def exponent_table(self) -> ExponentTable | None:
        if self.decay_r is None:
            return None
        return ExponentTable(self.symbol.dimension, self.decay_r, self.epsilon)


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        workers = flag
    else:
        raw = os.environ.get(WORKERS_ENV, "").strip()
        try:
            workers = int(raw) if raw else 1
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {raw!r}") from exc
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    return workers


def parse_run_config(
    raw: object,
    out: str | None = None,
    workers: int | None = None,
    seed: int | None = None,
    base_dir: Path = DATA_DIR,
) -> RunConfig:
    """Validate a raw config mapping, apply CLI overrides and fill defaults."""
    raw = _check_block("", raw, TOP_KEYS)
    for key in REQUIRED_TOP:
        if key not in raw:
            raise ConfigError(f"{key}: required block is missing")
    raw = copy.deepcopy(raw)

    symbol_block = _check_block("symbol", raw["symbol"], SYMBOL_KEYS, allow_null=("tau",))
    grid_block = _check_block("grid", raw["grid"], GRID_KEYS)
    potential_block = _check_potential("potential", raw.get("potential", {"family": "zero"}))
    task_block = _check_block("task", raw.get("task", {}), TASK_KEYS)
    output_block = _check_block("output", raw.get("output", {}), OUTPUT_KEYS)
    for i, fam in enumerate(task_block.get("families", [])):
        _check_potential(f"task.families[{i}]", fam)

    for key in ("kind", "d"):
        if key not in symbol_block:
            raise ConfigError(f"symbol.{key}: required")
    if "L" not in grid_block:
        raise ConfigError("grid.L: required")
    d = symbol_block["d"]
    grid_d = grid_block.get("d", d)
    if grid_d != d:
        raise ConfigError(f"grid.d: {grid_d} does not match symbol.d {d}")

    if seed is not None:
        if seed < 0 or seed >= 2**64:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {seed}")
        potential_block["seed"] = seed
        if "seeds" in task_block:
            task_block["seeds"] = [seed + i for i in range(len(task_block["seeds"]))]

    formats = output_block.get("formats", list(OUTPUT_FORMATS))
    bad = sorted(set(formats) - set(OUTPUT_FORMATS))
    if bad:
        raise ConfigError(f"output.formats: unsupported {bad}; allowed {list(OUTPUT_FORMATS)}")
    directory = out if out is not None else output_block.get("directory", "out")

    try:
        spec = SymbolSpec(
            symbol_block["kind"],
            d,
            float(symbol_block.get("mu", 0.0)),
            float(symbol_block.get("s", 1.0)),
            symbol_block.get("base", "standard"),
            None if symbol_block.get("tau") is None else float(symbol_block["tau"]),
        )
        grid = TorusGrid(d, grid_block["L"], float(grid_block.get("h", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"symbol/grid: {exc}") from exc

    epsilon = float(symbol_block.get("epsilon", 1e-2))
    if epsilon < 0:
        raise ConfigError(f"symbol.epsilon: must be >= 0, got {epsilon}")
    decay_r = symbol_block.get("r")
    dense_cap = raw.get("dense_cap", DEFAULT_DENSE_CAP)
    if dense_cap < 1:
        raise ConfigError(f"dense_cap: must be positive, got {dense_cap}")

    resolved = {
        "symbol": {**spec.descriptor(), "epsilon": epsilon, "r": decay_r},
        "grid": grid.descriptor(),
        "potential": potential_block,
        "task": task_block,
        "output": {"directory": str(directory), "formats": sorted(formats)},
        "dense_cap": dense_cap,
    }
    return RunConfig(
        symbol=spec,
        grid=grid,
        potential=potential_block,
        task=task_block,
        output_dir=Path(directory),
        formats=tuple(sorted(formats)),
        dense_cap=dense_cap,
        epsilon=epsilon,
        decay_r=None if decay_r is None else float(decay_r),
        workers=resolve_workers(workers),
        resolved=resolved,
        base_dir=base_dir,
    )


def load_run_config(
    path: Path,
    out: str | None = None,
    workers: int | None = None,
    seed: int | None = None,
) -> RunConfig:
    raw = _read_json(Path(path))
    return parse_run_config(raw, out, workers, seed, base_dir=Path(path).resolve().parent)
