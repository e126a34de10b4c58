"""On-disk layout for solutions: CVF1 fields plus small JSON manifests."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import cvf1
from .sections import ComplexSection, Divisor, LineBundle, UnitaryConnection
from .torus import ComplexField, RealField
from .vortex import Configuration


def write_json(path: Path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_section(path: Path, s: ComplexSection) -> None:
    cvf1.save(path, ComplexField(s.grid, s.values))


def load_section(path: Path, bundle: LineBundle) -> ComplexSection:
    f = cvf1.load(path)
    if not isinstance(f, ComplexField) or f.grid != bundle.grid:
        raise ValueError(f"{path}: expected a complex field on {bundle.grid}")
    return ComplexSection(bundle, f.values)


def save_connection(out: Path, A: UnitaryConnection, stem: str = "A") -> dict:
    """Write ``A.cvf1`` (``a_x + i a_y``) and ``curvature.cvf1``."""
    g = A.bundle.grid
    cvf1.save(out / f"{stem}.cvf1", ComplexField(g, A.a_x.values + 1j * A.a_y.values))
    cvf1.save(out / "curvature.cvf1", A.curvature)
    return {"a": f"{stem}.cvf1", "curvature": "curvature.cvf1"}


def load_connection(base: Path, entry: dict, bundle: LineBundle) -> UnitaryConnection:
    a = cvf1.load(base / entry["a"])
    curv = cvf1.load(base / entry["curvature"])
    g = bundle.grid
    return UnitaryConnection(bundle, RealField(g, a.values.real), RealField(g, a.values.imag), curv)


def save_solution(out: Path, cfg: Configuration, stems: list[str] | None = None) -> dict:
    """Write every component, the connection and ``solution.json``."""
    out = Path(out)
    stems = stems or [f"u{k}" for k in range(cfg.n)]
    files = []
    for stem, s in zip(stems, cfg.u):
        save_section(out / f"{stem}.cvf1", s)
        files.append(f"{stem}.cvf1")
    manifest = {
        "kind": "solution",
        "tau": cfg.tau,
        "n": cfg.n,
        "bundle": cfg.A.bundle.to_dict(),
        "sections": files,
        "connection": save_connection(out, cfg.A),
    }
    write_json(out / "bundle.json", cfg.A.bundle.to_dict())
    write_json(out / "solution.json", manifest)
    return manifest


def load_solution(path) -> Configuration:
    path = Path(path)
    if path.is_dir():
        path = path / "solution.json"
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("kind") != "solution":
        raise ValueError(f"{path} is not a solution manifest")
    base = path.parent
    bundle = LineBundle.from_dict(manifest["bundle"])
    u = tuple(load_section(base / name, bundle) for name in manifest["sections"])
    A = load_connection(base, manifest["connection"], bundle)
    return Configuration(u, A, manifest["tau"])


def divisor_from_dict(d: dict) -> Divisor:
    return Divisor(tuple((float(x), float(y)) for x, y in d["points"]), tuple(int(m) for m in d["multiplicities"]))


def coeffs_from_json(raw) -> np.ndarray:
    """Numbers or ``[re, im]`` pairs to a complex vector."""
    out = []
    for c in raw:
        out.append(complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c))
    return np.array(out, dtype=complex)
