"""Deterministic JSON/CSV emission, config hashing and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _plain(value: object) -> object:
    """Convert numpy scalars/arrays to Python types and non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def _read_json(path: Path, default: object = None) -> object:
    if not path.exists():
        if default is None:
            raise FileNotFoundError(f"{path} does not exist")
        return default
    with path.open("r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path} is not valid JSON: {exc}") from exc


def _dumps(payload: object) -> str:
    return json.dumps(_plain(payload), ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_json(path: Path, payload: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(_dumps(payload))


def config_hash(resolved: dict) -> str:
    canonical = json.dumps(_plain(resolved), sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return format(value, ".17g") if math.isfinite(value) else ""
    return str(value)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
    digest: str | None = None,
) -> int:
    """Write rows in fixed column order; returns the number of data rows.

    With a digest, the first line is ``# config_hash=<digest>``.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as f:
        if digest is not None:
            f.write(f"# config_hash={digest}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{path}: row has {len(row)} cells, header has {len(header)}")
            writer.writerow([_cell(v) for v in row])
            count += 1
    return count


def write_run_manifest(out_dir: Path, command: str, digest: str, files: Sequence[str]) -> Path:
    """Record what ran; the only output carrying wall-clock time."""
    path = out_dir / "run_manifest.json"
    _write_json(
        path,
        {
            "generated_at": datetime.now(timezone.utc).replace(microsecond=0).isoformat(),
            "command": command,
            "config_hash": digest,
            "files": sorted(files),
        },
    )
    return path
