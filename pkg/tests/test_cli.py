import csv
import json
import math

import numpy as np
import pytest

from nlslab.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_OK, main
from nlslab.config import parse_config
from nlslab.io import ABORT_MARKER, CSV_COLUMNS, load_snapshot, read_series
from nlslab.oracles import eval_polynomial, gaussian_moments, variance_polynomial

BASE = """
grid.L = 40*pi
grid.M = 4096
time.dt = 0.005
time.t_end = {T}
time.snapshot_stride = 20
physics.lambda = {lam}
physics.alpha = {alpha}
init.a_im = 0.5
init.boost = 0.3
verify.keep_interval = 0.1
"""


def write_cfg(tmp_path, name="exp", lam=0, alpha=4, T=2, extra=""):
    p = tmp_path / f"{name}.cfg"
    p.write_text(BASE.format(lam=lam, alpha=alpha, T=T) + extra)
    return p


class TestRun:
    def test_linear_variance_matches_polynomial(self, tmp_path):
        cfg_path = write_cfg(tmp_path, extra="output.emit_snapshots = true\n")
        out = tmp_path / "out"
        assert main(["run", str(cfg_path), "--out", str(out)]) == EXIT_OK
        rows = read_series(out / "series.csv")
        assert list(rows[0]) == list(CSV_COLUMNS)
        assert len(rows) == 21
        cfg = parse_config(cfg_path.read_text())
        m = gaussian_moments(cfg.gaussian())
        from nlslab.functionals import Observables

        o = Observables(t=0, mass=m["mass"], grad_sq=m["grad_sq"], energy=0, h=m["h"], m1=m["m1"], lalpha2=0,
                        linf=0, xnorm_sq=0, pc_norm=0, boundary_frac=0, hi_spec_frac=0)
        coeffs = variance_polynomial(o)
        t = np.array([float(r["t"]) for r in rows])
        h = np.array([float(r["h"]) for r in rows])
        assert np.max(np.abs(h - eval_polynomial(coeffs, t)) / eval_polynomial(coeffs, t)) < 1e-8
        # the linear flow scatters to its datum, so both distances vanish
        assert max(float(r["forward_dist"]) for r in rows) < 1e-9
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "ok" and len(manifest["source_sha256"]) == 64
        assert "physics.lambda = 0.0" in (out / "config.cfg").read_text()
        assert load_snapshot(out / "final.nlss").time == pytest.approx(2.0)

    def test_zero_horizon_single_row(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", str(write_cfg(tmp_path, T=0)), "--out", str(out)]) == EXIT_OK
        rows = read_series(out / "series.csv")
        assert len(rows) == 1 and float(rows[0]["t"]) == 0.0

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["run", str(write_cfg(tmp_path)), "--out", str(blocker / "sub")]) == EXIT_IO

    def test_guard_abort(self, tmp_path):
        cfg = tmp_path / "box.cfg"
        cfg.write_text("grid.L = 4\ngrid.M = 256\nphysics.lambda = -1\nphysics.alpha = 4\ntime.t_end = 5\n"
                       "verify.keep_interval = 0.1\n")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == EXIT_ABORT
        rows = read_series(out / "series.csv")
        assert rows[-1]["t"] == ABORT_MARKER
        assert all(r["t"] != ABORT_MARKER for r in rows[:-1]) and len(rows) > 1
        assert json.loads((out / "manifest.json").read_text())["status"] == "aborted"

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("physics.lambda = -1\nphysics.alpha = -1\n")
        assert main(["run", str(cfg)]) == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "physics.alpha" in err and "line 2" in err

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.cfg")]) == EXIT_IO

    def test_csv_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path, lam=-1, alpha=4, T=1)
        main(["run", str(cfg), "--out", str(tmp_path / "a")])
        main(["run", str(cfg), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()


class TestVerify:
    def test_passing_suite(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, lam=-1, alpha=5, T=2, extra="verify.checks = mass_drift, real_profile_moment\n"
                                                                "init.a_im = 0\ninit.boost = 0\n")
        out = tmp_path / "rep"
        assert main(["verify", str(cfg), "--out", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "mass_drift" in text and "pass=" in text
        payload = json.loads((out / "report.json").read_text())
        assert payload["counts"]["fail"] == 0
        with open(out / "report.csv", newline="") as fh:
            assert len(list(csv.reader(fh))) == 3

    def test_zero_tolerance_fails(self, tmp_path):
        cfg = write_cfg(tmp_path, lam=-1, alpha=5, T=1,
                        extra="verify.checks = mass_drift\nverify.tol.mass_drift = 0\n")
        assert main(["verify", str(cfg), "--out", str(tmp_path / "r")]) == EXIT_FAIL

    def test_inconclusive_only_warns(self, tmp_path, capsys):
        # the pullback rate needs alpha > 4/(d+2); below it the check is inconclusive, not failed
        cfg = write_cfg(tmp_path, lam=-1, alpha=2.5, T=1, extra="verify.checks = decay_pullback\n")
        assert main(["verify", str(cfg), "--out", str(tmp_path / "r")]) == EXIT_OK
        assert "inconclusive" in capsys.readouterr().err

    def test_outside_standing_hypothesis(self, tmp_path):
        cfg = write_cfg(tmp_path, lam=-1, alpha=1.5, T=1)
        assert main(["verify", str(cfg)]) == EXIT_CONFIG

    def test_multiple_configs(self, tmp_path, capsys):
        extra = "verify.checks = mass_drift\n"
        a = write_cfg(tmp_path, "a", lam=-1, alpha=5, T=1, extra=extra)
        b = write_cfg(tmp_path, "b", lam=1, alpha=5, T=1, extra=extra)
        assert main(["verify", str(a), str(b), "--out", str(tmp_path / "r"), "--jobs", "2"]) == EXIT_OK
        rows = json.loads((tmp_path / "r" / "report.json").read_text())["reports"]
        assert sorted(r["diagnostics"]["experiment"] for r in rows) == ["a", "b"]


class TestSweep:
    def test_alpha_sweep(self, tmp_path):
        cfg = write_cfg(tmp_path, lam=-1, alpha=4, T=1, extra="verify.checks = mass_drift, energy_drift\n"
                                                                "time.dt = 0.001\ntime.snapshot_stride = 100\n")
        out = tmp_path / "sw"
        code = main(["sweep", str(cfg), "--set", "physics.alpha=3,4,5", "--out", str(out)])
        assert code == EXIT_OK
        subdirs = sorted(p.name for p in out.iterdir() if p.is_dir())
        assert subdirs == ["alpha=3", "alpha=4", "alpha=5"]
        with open(out / "summary.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["physics.alpha"] for r in rows] == ["3", "4", "5"]
        assert all(r["status"] == "ok" and r["accuracy"] == "full" for r in rows)
        for d in subdirs:
            assert (out / d / "series.csv").exists() and (out / d / "report.json").exists()

    def test_dimension_sweep_marks_reduced_accuracy(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLSLAB_JOBS", "2")
        cfg = write_cfg(tmp_path, lam=-1, alpha=2.5, T=2, extra="verify.checks = mass_drift\n")
        out = tmp_path / "sw"
        main(["sweep", str(cfg), "--set", "grid.d=1,2", "--out", str(out)])
        with open(out / "summary.csv", newline="") as fh:
            rows = {r["grid.d"]: r for r in csv.DictReader(fh)}
        assert rows["1"]["accuracy"] == "full"
        assert rows["2"]["accuracy"] == "reduced-accuracy"
        assert "grid.M = 256" in (out / "d=2" / "config.cfg").read_text()

    def test_cartesian_product(self, tmp_path):
        cfg = write_cfg(tmp_path, lam=-1, alpha=4, T=0.2, extra="verify.checks = mass_drift\n")
        out = tmp_path / "sw"
        main(["sweep", str(cfg), "--set", "physics.alpha=4,5", "--set", "physics.lambda=-1,1", "--out", str(out)])
        with open(out / "summary.csv", newline="") as fh:
            assert len(list(csv.DictReader(fh))) == 4

    def test_no_overrides_runs_base(self, tmp_path):
        out = tmp_path / "sw"
        assert main(["sweep", str(write_cfg(tmp_path, T=0.2)), "--out", str(out)]) == EXIT_OK
        assert (out / "series.csv").exists()

    def test_bad_override(self, tmp_path):
        assert main(["sweep", str(write_cfg(tmp_path)), "--set", "physics.alpha"]) == EXIT_CONFIG
        assert main(["sweep", str(write_cfg(tmp_path)), "--set", "grid.M=1000",
                     "--out", str(tmp_path / "x")]) == EXIT_CONFIG

    def test_bad_jobs_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLSLAB_JOBS", "many")
        assert main(["sweep", str(write_cfg(tmp_path, T=0.2)), "--set", "physics.alpha=4,5",
                     "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_print_defaults(capsys):
    assert main(["print-defaults"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "grid.M = 32768" in text and "time.dt = 0.005" in text
    assert f"grid.L = {200 * math.pi!r}" in text
