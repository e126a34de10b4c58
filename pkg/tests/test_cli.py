import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conevortex import cvf1
from conevortex.cli import main
from conevortex.torus import RealField, TorusGrid, laplacian

TWO_PI = 2 * math.pi


def run(*argv) -> int:
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


def write_config(path, cfg):
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def kw_fixture(tmp_path, B, w, **extra):
    cvf1.save(tmp_path / "B.cvf1", B)
    cvf1.save(tmp_path / "w.cvf1", w)
    return write_config(tmp_path / "kw.json", {"B": "B.cvf1", "w": "w.cvf1", **extra})


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestKwSolve:
    def test_constant(self, tmp_path):
        g = TorusGrid.square(32)
        cfg = kw_fixture(tmp_path, RealField.constant(g, 1.0), RealField.constant(g, 2.0))
        assert run("kw-solve", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 0
        f = cvf1.load(tmp_path / "o" / "f.cvf1")
        assert np.abs(f.values - 0.5 * math.log(2)).max() <= 1e-12
        assert (tmp_path / "o" / "energy_trace.csv").read_text().startswith("iteration")
        man = read_json(tmp_path / "o" / "manifest.json")
        assert man["status"] == "ok" and man["subcommand"] == "kw-solve"
        assert {"config_sha256", "seed", "backend", "version"} <= set(man)

    def test_infeasible(self, tmp_path):
        g = TorusGrid.square(32)
        cfg = kw_fixture(tmp_path, RealField.constant(g, 1.0), RealField.constant(g, 0.0))
        assert run("kw-solve", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 2
        cert = read_json(tmp_path / "o" / "certificate.json")
        assert cert["reason"] == "NonPositiveMeanW"

    def test_manufactured(self, tmp_path):
        g = TorusGrid.square(64)
        fstar = RealField.from_function(g, lambda x, y: 0.3 * np.cos(TWO_PI * x) * np.sin(TWO_PI * y))
        B = RealField.from_function(g, lambda x, y: 1 + 0.5 * np.cos(TWO_PI * y))
        w = RealField(g, laplacian(fstar).values + B.values * np.exp(2 * fstar.values))
        cfg = kw_fixture(tmp_path, B, w)
        assert run("kw-solve", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 0
        assert read_json(tmp_path / "o" / "certificate.json")["residual_sup"] <= 1e-8

    def test_max_iterations(self, tmp_path):
        g = TorusGrid.square(32)
        B = RealField.from_function(g, lambda x, y: 1 + 0.5 * np.cos(TWO_PI * y))
        w = RealField.from_function(g, lambda x, y: 3 + np.sin(TWO_PI * x))
        cfg = kw_fixture(tmp_path, B, w, max_iter=1)
        assert run("kw-solve", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 3
        assert read_json(tmp_path / "o" / "manifest.json")["status"] == "no-convergence"

    def test_picard_method(self, tmp_path):
        g = TorusGrid.square(32)
        cfg = kw_fixture(tmp_path, RealField.constant(g, 1.0), RealField.constant(g, 2.0), method="picard")
        assert run("kw-solve", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 0


class TestVortexMake:
    def test_degree_one(self, tmp_path):
        cfg = write_config(tmp_path / "v.json", {"degree": 1, "tau": 10.0, "grid": {"nx": 64, "ny": 64}})
        assert run("vortex-make", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 0
        out = tmp_path / "o"
        assert read_json(out / "divisor.json")["degree"] == 1
        ident = read_json(out / "certificate.json")["integral_identity"]
        assert ident["predicted"] == pytest.approx(7.433629, rel=1e-6)
        assert ident["rel_err"] <= 1e-4
        for name in ("phi.cvf1", "A.cvf1", "curvature.cvf1", "solution.json", "manifest.json"):
            assert (out / name).exists()

    def test_below_threshold(self, tmp_path):
        cfg = write_config(tmp_path / "v.json", {"degree": 1, "tau": 6.0, "grid": {"nx": 32, "ny": 32}})
        assert run("vortex-make", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 2
        assert read_json(tmp_path / "o" / "certificate.json")["status"] == "BelowThreshold"

    def test_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "v.json", {"degree": 2, "tau": 20.0, "seed": 7, "grid": {"nx": 64, "ny": 64}})
        for o in ("a", "b"):
            assert run("vortex-make", "--config", cfg, "--out", tmp_path / o, "--quiet") == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_seed_flag_overrides(self, tmp_path):
        cfg = write_config(tmp_path / "v.json", {"degree": 2, "tau": 20.0, "seed": 7, "grid": {"nx": 32, "ny": 32}})
        run("vortex-make", "--config", cfg, "--out", tmp_path / "a", "--quiet")
        run("vortex-make", "--config", cfg, "--out", tmp_path / "b", "--seed", 8, "--quiet")
        ca = read_json(tmp_path / "a" / "certificate.json")["coeffs"]
        cb = read_json(tmp_path / "b" / "certificate.json")["coeffs"]
        assert ca != cb
        assert read_json(tmp_path / "b" / "manifest.json")["seed"] == 8

    def test_out_dir_relative_to_config(self, tmp_path):
        (tmp_path / "cfgs").mkdir()
        cfg = write_config(
            tmp_path / "cfgs" / "v.json", {"degree": 1, "tau": 10.0, "grid": {"nx": 32, "ny": 32}, "out_dir": "res"}
        )
        assert run("vortex-make", "--config", cfg, "--quiet") == 0
        assert (tmp_path / "cfgs" / "res" / "divisor.json").exists()


class TestPipeline:
    def test_sv_gaugefix_then_pi_map_nodivisor(self, tmp_path):
        cfg = write_config(
            tmp_path / "sv.json",
            {"degree": 2, "tau": 20.0, "n": 2, "coeffs": [[1, 0], [0, 1]], "grid": {"nx": 64, "ny": 64}},
        )
        assert run("sv-gaugefix", "--config", cfg, "--out", tmp_path / "sol", "--quiet") == 0
        cert = read_json(tmp_path / "sol" / "certificate.json")
        assert cert["certified"] and cert["moment_sup"] <= 1e-8
        pi = write_config(tmp_path / "pi.json", {"solution": "sol"})
        assert run("pi-map", "--config", pi, "--out", tmp_path / "pi", "--quiet") == 0
        nd = read_json(tmp_path / "pi" / "nodivisor.json")
        assert nd["kind"] == "NoDivisor" and nd["min_mu"] > 0
        assert not (tmp_path / "pi" / "divisor.json").exists()

    def test_pi_map_degree(self, tmp_path):
        cfg = write_config(tmp_path / "v.json", {"degree": 2, "tau": 20.0, "seed": 3, "grid": {"nx": 64, "ny": 64}})
        assert run("vortex-make", "--config", cfg, "--out", tmp_path / "sol", "--quiet") == 0
        pi = write_config(tmp_path / "pi.json", {"solution": "sol/solution.json"})
        assert run("pi-map", "--config", pi, "--out", tmp_path / "pi", "--quiet") == 0
        assert read_json(tmp_path / "pi" / "divisor.json")["degree"] == 2
        mod = cvf1.load(tmp_path / "pi" / "modulus_sq.cvf1")
        assert mod.min() >= 0

    def test_sv_gaugefix_weighted_action(self, tmp_path):
        cfg = write_config(
            tmp_path / "sv.json",
            {"degree": 1, "tau": 10.0, "n": 2, "weights": [1, 2], "grid": {"nx": 32, "ny": 32}},
        )
        assert run("sv-gaugefix", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 2
        assert read_json(tmp_path / "o" / "certificate.json")["status"] == "NonReebAction"

    def test_threshold_scan(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CONEVORTEX_THREADS", "3")
        taus = [12.0, TWO_PI + 0.5, 8.0, 10.0, 6.0]
        cfg = write_config(tmp_path / "s.json", {"degree": 1, "tau_list": taus, "grid": {"nx": 64, "ny": 64}})
        assert run("threshold-scan", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 0
        with open(tmp_path / "o" / "scan.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [float(r["tau"]) for r in rows] == sorted(taus)
        assert rows[0]["status"] == "BelowThreshold"
        for r in rows[1:]:
            assert r["status"] == "ok"
            assert float(r["rel_err"]) <= 1e-4
            assert float(r["predicted"]) == pytest.approx(2 * (float(r["tau"]) - TWO_PI))


class TestUsage:
    def test_schema_violation(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "v.json", {"degree": 0, "tau": 10.0, "bogus": 1})
        assert run("vortex-make", "--config", cfg, "--out", tmp_path / "o") == 64
        err = capsys.readouterr().err
        assert "degree" in err and "bogus" in err

    def test_odd_grid_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "v.json", {"degree": 1, "tau": 10.0, "grid": {"nx": 33, "ny": 32}})
        assert run("vortex-make", "--config", cfg, "--out", tmp_path / "o") == 64

    def test_not_json(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        assert run("vortex-make", "--config", tmp_path / "bad.json", "--out", tmp_path / "o") == 64

    def test_missing_config(self, tmp_path):
        assert run("vortex-make", "--out", tmp_path / "o") == 64
        assert run("vortex-make", "--config", tmp_path / "nope.json", "--out", tmp_path / "o") == 64

    def test_unknown_subcommand(self):
        assert run("frobnicate") == 64

    def test_bad_backend(self, tmp_path):
        assert run("vortex-make", "--backend", "fem") == 64

    def test_wrong_coefficient_count(self, tmp_path):
        cfg = write_config(tmp_path / "v.json", {"degree": 2, "tau": 20.0, "coeffs": [1.0], "grid": {"nx": 32, "ny": 32}})
        assert run("vortex-make", "--config", cfg, "--out", tmp_path / "o", "--quiet") == 64

    def test_schema_subcommand(self, capsys):
        assert run("schema", "pi-map") == 0
        schema = json.loads(capsys.readouterr().out)
        assert schema["required"] == ["solution"]

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "conevortex", "--version"], capture_output=True, text=True)
        assert proc.returncode == 0 and "conevortex" in proc.stdout
