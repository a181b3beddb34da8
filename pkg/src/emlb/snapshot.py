"""Binary "EMLB" snapshot files.

Layout: ``b"EMLB"``, format version (u32 LE), header length (u64 LE), a UTF-8
JSON header ``{grid, params, time, fields: [{name, shape}], ...}`` and then each
field as contiguous little-endian float64 values in row-major order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import Grid, PhysicalParams, State

MAGIC = b"EMLB"
FORMAT_VERSION = 1

STATE_FIELDS = ("n", "u", "e_field", "b_field")


def write_snapshot(path, grid: Grid, params: PhysicalParams, time: float, fields: dict, extra: dict = None):
    """Write named arrays to ``path``. ``fields`` preserves insertion order."""
    arrays = [(name, np.ascontiguousarray(np.asarray(a, dtype="<f8"))) for name, a in fields.items()]
    header = {
        "grid": grid.to_dict(),
        "params": params.to_dict(),
        "time": float(time),
        "fields": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", FORMAT_VERSION))
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for _, a in arrays:
                fh.write(a.tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path, workers: int = 1):
    """Return ``(grid, params, time, fields, header)``."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise ConfigError(f"{path}: not an EMLB snapshot")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported EMLB version {version}")
    (hlen,) = struct.unpack_from("<Q", data, 8)
    offset = 16
    header = json.loads(data[offset:offset + hlen].decode("utf-8"))
    offset += hlen
    fields = {}
    for entry in header["fields"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(data):
            raise ConfigError(f"{path}: truncated field {entry['name']}")
        fields[entry["name"]] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float)
        offset += nbytes
    grid = Grid.from_dict(header["grid"], workers=workers)
    params = PhysicalParams.from_dict(header["params"])
    return grid, params, float(header["time"]), fields, header


def write_state(path, grid, params, time, state: State, extra: dict = None):
    write_snapshot(path, grid, params, time, state.as_dict(), extra=extra)


def read_state(path, workers: int = 1):
    grid, params, time, fields, _ = read_snapshot(path, workers=workers)
    missing = [f for f in STATE_FIELDS if f not in fields]
    if missing:
        raise ConfigError(f"{path}: snapshot lacks fields {missing}")
    return grid, params, time, State(*(fields[f] for f in STATE_FIELDS))
