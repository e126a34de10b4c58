"""CVF1 field dumps: one JSON header line, then raw little-endian float64."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .torus import ComplexField, RealField, TorusGrid

MAGIC = "CVF1"


def dumps(f: RealField | ComplexField) -> bytes:
    g = f.grid
    kind = "complex" if isinstance(f, ComplexField) else "real"
    header = {"magic": MAGIC, "nx": g.nx, "ny": g.ny, "lx": g.lx, "ly": g.ly, "kind": kind}
    if kind == "complex":
        payload = np.ascontiguousarray(f.values, dtype="<c16").view("<f8")
    else:
        payload = np.ascontiguousarray(f.values, dtype="<f8")
    return json.dumps(header).encode("utf-8") + b"\n" + payload.tobytes()


def loads(data: bytes) -> RealField | ComplexField:
    nl = data.index(b"\n")
    header = json.loads(data[:nl].decode("utf-8"))
    if header.get("magic") != MAGIC:
        raise ValueError(f"not a CVF1 stream (magic={header.get('magic')!r})")
    grid = TorusGrid(header["nx"], header["ny"], header["lx"], header["ly"])
    raw = np.frombuffer(data[nl + 1 :], dtype="<f8")
    kind = header["kind"]
    count = grid.nx * grid.ny * (2 if kind == "complex" else 1)
    if raw.size != count:
        raise ValueError(f"expected {count} float64 values, found {raw.size}")
    if kind == "complex":
        return ComplexField(grid, raw.view("<c16").reshape(grid.shape))
    if kind == "real":
        return RealField(grid, raw.reshape(grid.shape))
    raise ValueError(f"unknown field kind {kind!r}")


def save(path, f: RealField | ComplexField) -> None:
    Path(path).write_bytes(dumps(f))


def load(path) -> RealField | ComplexField:
    return loads(Path(path).read_bytes())
