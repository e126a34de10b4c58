"""Command-line front end.

Exit codes: 0 success, 2 infeasible / below threshold, 3 non-convergence,
64 usage or configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, cvf1
from .artifacts import coeffs_from_json, load_solution, save_connection, save_section, save_solution, write_json
from .cone import WeightedCircleAction
from .errors import (
    BelowThreshold,
    InfeasibleProblem,
    MaxIterationsExceeded,
    NonReebAction,
    NotCertified,
    Unstable,
)
from .kazdan_warner import KWProblem, kw_solve, kw_solve_picard
from .schemas import SCHEMAS
from .sections import DEFAULT_ORIGIN, LineBundle, background_connection, section_from_coeffs
from .torus import RealField, TorusGrid, integrate
from .vortex import hk_gauge_fix, pi_map, tau_vortex_solve

log = logging.getLogger("conevortex")

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", type=Path, default=d(None), help="JSON experiment config")
    p.add_argument("--out", type=Path, default=d(None), help="output directory")
    p.add_argument("--seed", type=int, default=d(None), help="64-bit seed (overrides config)")
    p.add_argument("--backend", choices=["spectral", "stencil"], default=d(None))
    p.add_argument("--quiet", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conevortex", description="Vortices with cone targets on a flat torus.")
    parser.add_argument("--version", action="version", version=f"conevortex {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("kw-solve", "solve laplacian(f) + B e^{2f} = w from CVF1 inputs"),
        ("vortex-make", "construct a tau-vortex from theta coefficients"),
        ("sv-gaugefix", "gauge-fix a holomorphic map into C^n to a symplectic vortex"),
        ("pi-map", "send a solution to |phi|^2 and its divisor"),
        ("threshold-scan", "integral identity across a list of tau values"),
    ]:
        _global_flags(sub.add_parser(name, help=help_), suppress=True)
    sch = sub.add_parser("schema", help="print the JSON schema of a subcommand config")
    sch.add_argument("name", choices=sorted(SCHEMAS))
    return parser


# --- config handling ---------------------------------------------------------


def load_config(args) -> tuple[dict, Path]:
    if args.config is None:
        raise UsageError("--config is required")
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.backend is not None:
        cfg["backend"] = args.backend
    validator = jsonschema.Draft202012Validator(SCHEMAS[args.command])
    problems = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if problems:
        lines = [f"  {'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in problems]
        raise UsageError("config failed schema validation:\n" + "\n".join(lines))
    base = Path(args.config).resolve().parent
    return cfg, base


def _out_dir(args, cfg: dict, base: Path) -> Path:
    if args.out is not None:
        out = Path(args.out)
    elif "out_dir" in cfg:
        out = base / cfg["out_dir"]
    else:
        raise UsageError("no output directory: pass --out or set out_dir")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid(cfg: dict) -> TorusGrid:
    g = {"nx": 128, "ny": 128, "lx": 1.0, "ly": 1.0, **cfg.get("grid", {})}
    return TorusGrid(g["nx"], g["ny"], g["lx"], g["ly"])


def _coeffs(cfg: dict, d: int, rng: np.random.Generator, raw=None) -> np.ndarray:
    raw = cfg.get("coeffs") if raw is None else raw
    if raw is None:
        return rng.normal(size=d) + 1j * rng.normal(size=d)
    c = coeffs_from_json(raw)
    if c.size != d:
        raise UsageError(f"expected {d} coefficients, got {c.size}")
    return c


def _write_manifest(out: Path, command: str, cfg: dict, status: str) -> None:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    files = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    write_json(
        out / "manifest.json",
        {
            "tool": "conevortex",
            "version": __version__,
            "subcommand": command,
            "config_sha256": hashlib.sha256(canonical).hexdigest(),
            "seed": cfg.get("seed"),
            "backend": cfg.get("backend", "spectral"),
            "status": status,
            "files": files,
        },
    )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CONEVORTEX_THREADS", "1")))
    except ValueError:
        return 1


# --- subcommands ---------------------------------------------------------------


def cmd_kw_solve(args, cfg: dict, base: Path, out: Path) -> int:
    paths = {k: base / cfg[k] for k in ("B", "w")}
    for k, p in paths.items():
        if not p.is_file():
            raise UsageError(f"field file for {k} not found: {p}")
    B, w = cvf1.load(paths["B"]), cvf1.load(paths["w"])
    if not (isinstance(B, RealField) and isinstance(w, RealField)):
        raise UsageError("B and w must be real CVF1 fields")
    backend = cfg.get("backend", "spectral")
    method = cfg.get("method", "newton")
    kwargs = {"backend": backend}
    if "tol" in cfg:
        kwargs["tol"] = cfg["tol"]
    if "max_iter" in cfg:
        kwargs["max_iter"] = cfg["max_iter"]
    solver = kw_solve if method == "newton" else kw_solve_picard
    try:
        sol = solver(KWProblem(B, w), **kwargs)
    except InfeasibleProblem as exc:
        write_json(out / "certificate.json", {"status": "Infeasible", "reason": exc.reason, "detail": str(exc)})
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except MaxIterationsExceeded as exc:
        if exc.best is not None:
            cvf1.save(out / "f.cvf1", exc.best.f)
        write_json(out / "certificate.json", {"status": "MaxIterations", "detail": str(exc)})
        log.error("%s", exc)
        return EXIT_NO_CONVERGENCE
    cvf1.save(out / "f.cvf1", sol.f)
    write_json(out / "certificate.json", {"status": "ok", **sol.certificate()})
    lines = ["iteration,energy,residual_sup"]
    energies = sol.energy_trace or [float("nan")] * len(sol.residual_trace)
    for i, (e, r) in enumerate(zip(energies, sol.residual_trace)):
        lines.append(f"{i},{e!r},{r!r}")
    (out / "energy_trace.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("kw-solve: residual %.3e after %d iterations", sol.residual_sup, sol.iterations)
    return EXIT_OK


def _solve_kwargs(cfg: dict) -> dict:
    kw = {"backend": cfg.get("backend", "spectral")}
    if "tol" in cfg:
        kw["tol"] = cfg["tol"]
    return kw


def cmd_vortex_make(args, cfg: dict, base: Path, out: Path) -> int:
    grid = _grid(cfg)
    d = cfg["degree"]
    rng = np.random.default_rng(cfg.get("seed", 0))
    coeffs = _coeffs(cfg, d, rng)
    origin = tuple(cfg.get("origin", DEFAULT_ORIGIN))
    try:
        tv = tau_vortex_solve(coeffs, d, cfg["tau"], grid, origin=origin, **_solve_kwargs(cfg))
    except BelowThreshold as exc:
        write_json(out / "certificate.json", {"status": "BelowThreshold", "tau": exc.tau, "threshold": exc.threshold})
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    save_solution(out, tv.cfg, stems=["phi"])
    div = pi_map(tv.cfg, check=False).divisor
    write_json(out / "divisor.json", div.to_dict())
    write_json(
        out / "certificate.json",
        {"status": "ok", **tv.gauge_fix.certificate(), "integral_identity": tv.integral_identity(),
         "coeffs": [[c.real, c.imag] for c in coeffs]},
    )
    log.info("vortex-make: divisor degree %d, %s", div.degree, tv.integral_identity())
    return EXIT_OK


def cmd_sv_gaugefix(args, cfg: dict, base: Path, out: Path) -> int:
    grid = _grid(cfg)
    d, n = cfg["degree"], cfg["n"]
    rng = np.random.default_rng(cfg.get("seed", 0))
    origin = tuple(cfg.get("origin", DEFAULT_ORIGIN))
    raw = cfg.get("coeffs")
    if raw is not None and len(raw) != n:
        raise UsageError(f"coeffs must list {n} coefficient vectors")
    action = WeightedCircleAction(tuple(cfg.get("weights", [1] * n)))
    u0 = tuple(
        section_from_coeffs(_coeffs(cfg, d, rng, raw[k] if raw else None), d, grid, origin) for k in range(n)
    )
    A0 = background_connection(LineBundle(d, grid, origin))
    try:
        res = hk_gauge_fix(u0, A0, cfg["tau"], action=action, **_solve_kwargs(cfg))
    except (BelowThreshold, Unstable, NonReebAction, InfeasibleProblem) as exc:
        write_json(out / "certificate.json", {"status": type(exc).__name__, "detail": str(exc)})
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    save_solution(out, res.cfg)
    cvf1.save(out / "f.cvf1", res.f)
    write_json(out / "certificate.json", {"status": "ok", **res.certificate()})
    log.info("sv-gaugefix: %s", res.residual)
    return EXIT_OK


def cmd_pi_map(args, cfg: dict, base: Path, out: Path) -> int:
    path = base / cfg["solution"]
    if not path.exists():
        raise UsageError(f"solution not found: {path}")
    sol = load_solution(path)
    try:
        result = pi_map(sol)
    except NotCertified as exc:
        write_json(out / "certificate.json", {"status": "NotCertified", "detail": str(exc)})
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    cvf1.save(out / "modulus_sq.cvf1", result.modulus_sq)
    name = "divisor.json" if result.has_divisor else "nodivisor.json"
    write_json(out / name, result.to_dict())
    log.info("pi-map: %s", result.to_dict()["kind"])
    return EXIT_OK


def cmd_threshold_scan(args, cfg: dict, base: Path, out: Path) -> int:
    grid = _grid(cfg)
    d = cfg["degree"]
    rng = np.random.default_rng(cfg.get("seed", 0))
    coeffs = _coeffs(cfg, d, rng)
    origin = tuple(cfg.get("origin", DEFAULT_ORIGIN))
    tau_star = 2 * math.pi * d / grid.vol
    kwargs = _solve_kwargs(cfg)

    def run(tau: float) -> str:
        predicted = 2 * grid.vol * (tau - tau_star)
        try:
            tv = tau_vortex_solve(coeffs, d, tau, grid, origin=origin, **kwargs)
        except BelowThreshold:
            return f"{tau!r},,{predicted!r},,BelowThreshold"
        measured = integrate(tv.phi.pointwise_norm2())
        rel = abs(measured - predicted) / abs(predicted)
        return f"{tau!r},{measured!r},{predicted!r},{rel!r},ok"

    taus = sorted(cfg["tau_list"])
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(run, taus))
    (out / "scan.csv").write_text(
        "tau,integral_mu,predicted,rel_err,status\n" + "\n".join(rows) + "\n", encoding="utf-8"
    )
    log.info("threshold-scan: %d rows", len(rows))
    return EXIT_OK


COMMANDS = {
    "kw-solve": cmd_kw_solve,
    "vortex-make": cmd_vortex_make,
    "sv-gaugefix": cmd_sv_gaugefix,
    "pi-map": cmd_pi_map,
    "threshold-scan": cmd_threshold_scan,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(SCHEMAS[args.name], indent=2, sort_keys=True))
        return EXIT_OK
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg, base = load_config(args)
        out = _out_dir(args, cfg, base)
        code = COMMANDS[args.command](args, cfg, base, out)
    except UsageError as exc:
        print(f"conevortex: {exc}", file=sys.stderr)
        return EXIT_USAGE
    status = {EXIT_OK: "ok", EXIT_INFEASIBLE: "infeasible", EXIT_NO_CONVERGENCE: "no-convergence"}[code]
    _write_manifest(out, args.command, cfg, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
