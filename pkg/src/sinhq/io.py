"""On-disk formats: field snapshots, ensemble manifests, JSON and CSV tables.

Snapshot layout::

    bytes 0..7    magic  b"SINHQFLD"
    bytes 8..11   format version, uint32 little-endian
    bytes 12..19  length of the JSON preamble in bytes, uint64 little-endian
    bytes 20..31  zero padding
    preamble      UTF-8 JSON: grid, shape, dtype, byte order, index order, extra
    payload       little-endian float64 values in C (row-major) order
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .lattice import Grid, grid_from_dict

MAGIC = b"SINHQFLD"
VERSION = 1
HEADER = struct.Struct("<8sIQ12x")
assert HEADER.size == 32


def write_field(path, grid: Grid, values: np.ndarray, extra: dict | None = None) -> Path:
    """Write one field (or a stacked block of fields) to ``path``."""
    values = np.ascontiguousarray(values, dtype="<f8")
    pre = {"grid": grid.to_dict(), "shape": list(values.shape), "dtype": "float64",
           "endianness": "little", "order": "C", "extra": extra or {}}
    blob = json.dumps(pre, sort_keys=True).encode()
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, len(blob)))
        fh.write(blob)
        fh.write(values.tobytes())
    return path


def read_field(path):
    """Return (grid, values, preamble)."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ValueError("truncated snapshot header")
        magic, version, n = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError("not a field snapshot")
        if version != VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        pre = json.loads(fh.read(n).decode())
        data = np.frombuffer(fh.read(), dtype="<f8")
    shape = tuple(pre["shape"])
    if data.size != int(np.prod(shape)):
        raise ValueError("payload size does not match the preamble shape")
    return grid_from_dict(pre["grid"]), data.reshape(shape).astype(np.float64), pre


def seed_hash(seed: int, n: int = 8) -> str:
    return hashlib.sha256(str(int(seed)).encode()).hexdigest()[:n]


def artifact_name(command: str, seed: int, grid: Grid) -> str:
    return f"{command}-{seed_hash(seed)}-{grid.tag}"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")
    return path


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def read_json(path):
    return json.loads(Path(path).read_text())


class Manifest:
    """JSON list of (seed, stream, file) triples, rewritten after every entry
    so an interrupted run can resume."""

    def __init__(self, path):
        self.path = Path(path)
        self.entries = read_json(self.path)["entries"] if self.path.exists() else []

    def done(self, seed: int, stream: int) -> bool:
        for e in self.entries:
            if e["seed"] == seed and e["stream"] == stream:
                return (self.path.parent / e["file"]).exists()
        return False

    def add(self, seed: int, stream: int, file: str):
        self.entries = [e for e in self.entries if not (e["seed"] == seed and e["stream"] == stream)]
        self.entries.append({"seed": int(seed), "stream": int(stream), "file": str(file)})
        write_json(self.path, {"entries": self.entries})


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in columns})
    return path
