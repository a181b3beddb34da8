"""Manifests, report emission (JSON/CSV), run directories and metadata."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError
from .fields import Grid, PhysicalParams
from .integrators import DIAGNOSTIC_COLUMNS, RunConfig, TimeSeries
from .snapshot import read_state, write_state

SCHEMA_VERSION = 1
SNAPSHOT_DIR = "snapshots"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def config_hash(obj) -> str:
    blob = json.dumps(_clean(obj), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_json(path, obj):
    _write_text(Path(path), canonical_json(obj))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, header, rows):
    """RFC-4180 CSV with LF line endings and '.' decimals."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(header))
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


@dataclass
class ExperimentManifest:
    """Everything needed to reproduce one CLI invocation."""

    run: dict
    schema_version: int = SCHEMA_VERSION
    sweep: Optional[dict] = None
    dispersion: Optional[dict] = None
    output: Optional[str] = None
    seed: int = 0
    threads: int = 1

    def to_dict(self) -> dict:
        d = {"schema_version": self.schema_version, "run": self.run, "seed": self.seed, "threads": self.threads}
        if self.sweep is not None:
            d["sweep"] = self.sweep
        if self.dispersion is not None:
            d["dispersion"] = self.dispersion
        if self.output is not None:
            d["output"] = self.output
        return _clean(d)

    def run_config(self, workers: Optional[int] = None) -> RunConfig:
        return RunConfig.from_dict(self.run, workers=workers or self.threads)


def parse_manifest(d: dict) -> ExperimentManifest:
    if not isinstance(d, dict):
        raise ConfigError("manifest must be a JSON object")
    if "run" not in d and "grid" in d:
        d = {"run": d}
    if "run" not in d:
        raise ConfigError("manifest needs a 'run' section")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {version} does not match tool schema {SCHEMA_VERSION}")
    known = {"schema_version", "run", "sweep", "dispersion", "output", "seed", "threads"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    threads = d.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError("threads must be a positive integer")
    manifest = ExperimentManifest(
        run=d["run"],
        schema_version=version,
        sweep=d.get("sweep"),
        dispersion=d.get("dispersion"),
        output=d.get("output"),
        seed=seed,
        threads=threads,
    )
    # validate eagerly so configuration errors surface before any work
    manifest.run_config()
    return manifest


def load_manifest(path) -> ExperimentManifest:
    return parse_manifest(load_json(path))


def write_meta(directory, manifest: dict, seed: int, threads: int):
    write_json(Path(directory) / "meta.json", {
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash(manifest),
        "config": manifest,
        "seed": int(seed),
        "threads": int(threads),
    })


def diagnostics_rows(series: TimeSeries) -> list:
    return [[d[c] for c in DIAGNOSTIC_COLUMNS] for d in series.diagnostics]


def write_series(series: TimeSeries, directory, grid: Grid, params: PhysicalParams):
    directory = Path(directory)
    snap = directory / SNAPSHOT_DIR
    snap.mkdir(parents=True, exist_ok=True)
    for i, (t, st) in enumerate(zip(series.times, series.snapshots)):
        write_state(snap / f"snap_{i:05d}.emlb", grid, params, t, st, extra={"system": series.meta.get("system")})
    write_csv(directory / "diagnostics.csv", DIAGNOSTIC_COLUMNS, diagnostics_rows(series))


def load_series(directory, workers: int = 1):
    """Return ``(grid, params, times, states)`` from a run directory (or a
    directory that directly holds ``.emlb`` files)."""
    directory = Path(directory)
    snap = directory / SNAPSHOT_DIR if (directory / SNAPSHOT_DIR).is_dir() else directory
    files = sorted(snap.glob("*.emlb"))
    if not files:
        raise ConfigError(f"no EMLB snapshots found in {directory}")
    grid = params = None
    times, states = [], []
    for f in files:
        g, p, t, st = read_state(f, workers=workers)
        if grid is None:
            grid, params = g, p
        elif g != grid:
            raise ConfigError(f"{f}: grid differs from the first snapshot")
        times.append(t)
        states.append(st)
    order = np.argsort(times, kind="stable")
    return grid, params, [times[i] for i in order], [states[i] for i in order]


def emit_report(report, directory, name: str = "report", manifest: Optional[dict] = None, seed: int = 0, threads: int = 1) -> list:
    """Write ``report`` as JSON (plus CSV where tabular) and ``meta.json``."""
    from .experiments import LIMIT_COLUMNS, EnergyReport, LimitReport

    directory = Path(directory)
    written = []
    if isinstance(report, LimitReport):
        write_json(directory / f"{name}.json", report.to_dict())
        write_csv(directory / f"{name}.csv", LIMIT_COLUMNS, report.csv_rows())
        written += [directory / f"{name}.json", directory / f"{name}.csv"]
    elif isinstance(report, TimeSeries):
        write_csv(directory / "diagnostics.csv", DIAGNOSTIC_COLUMNS, diagnostics_rows(report))
        written.append(directory / "diagnostics.csv")
    elif isinstance(report, EnergyReport):
        write_json(directory / f"{name}.json", report.to_dict())
        written.append(directory / f"{name}.json")
    else:
        write_json(directory / f"{name}.json", report)
        written.append(directory / f"{name}.json")
    write_meta(directory, manifest if manifest is not None else {}, seed, threads)
    written.append(directory / "meta.json")
    return written
