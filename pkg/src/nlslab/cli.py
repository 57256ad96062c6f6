"""Command-line entry point: ``nlslab run|verify|sweep|print-defaults``."""
from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, GridConfig, TimeConfig, defaults_text, load_config, to_text
from .errors import ConfigurationError, ExtractionError, GuardViolation, NLSLabError
from .experiment import initial_field, keep_times, run_experiment
from .io import SeriesWriter, fmt, save_snapshot, source_hash, write_rows
from .runs import simulate
from .scattering import distances
from .verifier import FAIL, INCONCLUSIVE, PASS, SuiteReport, checks_for, run_suite

EXIT_OK, EXIT_FAIL, EXIT_IO, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3, 4

# accuracy policy for two-dimensional sweep points
D2_MAX_M = 256
D2_MAX_L = 8 * math.pi
D2_MAX_T = 1.0


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _manifest(cfg: ExperimentConfig, status: str, wall: float, **extra) -> dict:
    return {
        "name": cfg.name,
        "status": status,
        "config": to_text(cfg),
        "nlslab_version": __version__,
        "source_sha256": source_hash(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "wall_time_s": wall,
        **extra,
    }


@dataclass
class RunOutcome:
    status: str                 # "ok" | "aborted" | "error"
    exit_code: int
    suite: SuiteReport | None = None
    message: str = ""


def _prepare_dir(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")


def write_suite(suite: SuiteReport, out: Path, stem: str = "report") -> None:
    (out / f"{stem}.txt").write_text(suite.to_text(), encoding="utf-8")
    (out / f"{stem}.json").write_text(json.dumps(suite.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_rows(out / f"{stem}.csv", suite.to_csv_rows())


def execute(cfg: ExperimentConfig, out: Path, verify: bool = False) -> RunOutcome:
    """One experiment into ``out``: CSV series, manifest, optional snapshots and report."""
    start = time.perf_counter()
    _prepare_dir(out)
    (out / "config.cfg").write_text(to_text(cfg), encoding="utf-8")
    csv_path = out / "series.csv"
    writer = SeriesWriter(csv_path) if cfg.output.emit_csv else None
    extra: dict = {}
    try:
        try:
            result = run_experiment(cfg, observer=(lambda obs, f: writer.write(obs)) if writer else None,
                                    negative=verify)
        except GuardViolation as exc:
            if writer:
                writer.abort(exc.time, str(exc))
            wall = time.perf_counter() - start
            (out / "manifest.json").write_text(json.dumps(_manifest(cfg, "aborted", wall, reason=str(exc)), indent=2) + "\n")
            return RunOutcome("aborted", EXIT_ABORT, message=str(exc))
        except ExtractionError as exc:
            result = None
            extra["extraction_error"] = str(exc)
    finally:
        if writer:
            writer.close()

    suite = None
    if result is not None:
        est = result.est
        if est is not None:
            extra.update(extraction_residual=est.residual, extraction_horizon=est.horizon,
                         extraction_converged=est.converged)
        if cfg.output.emit_snapshots:
            save_snapshot(result.run.initial, out / "initial.nlss")
            save_snapshot(result.run.final, out / "final.nlss")
            if est is not None:
                save_snapshot(est.u_plus, out / "u_plus.nlss")
        if verify:
            suite = SuiteReport(sorted(checks_for(result), key=lambda r: r.name), [cfg.name])
            write_suite(suite, out)
            extra["checks"] = {s: suite.count(s) for s in (PASS, FAIL, INCONCLUSIVE)}
        if writer and cfg.output.distances and est is not None:
            _fill_distances(cfg, est, csv_path)

    wall = time.perf_counter() - start
    (out / "manifest.json").write_text(json.dumps(_manifest(cfg, "ok", wall, **extra), indent=2) + "\n")
    code = EXIT_OK if suite is None or suite.ok else EXIT_FAIL
    return RunOutcome("ok", code, suite)


def _fill_distances(cfg: ExperimentConfig, est, csv_path: Path) -> None:
    """Second deterministic pass: the same rows, now with both distance columns."""
    tmp = csv_path.with_suffix(".tmp")
    with SeriesWriter(tmp) as w:
        def row(obs, f):
            d = distances(f, est, margin=cfg.guard.margin, tol=cfg.guard.tol)
            w.write(obs, d.forward, d.pulled)

        simulate(initial_field(cfg), cfg.physics_params(), cfg.segments(), (), row)
    tmp.replace(csv_path)


# -- commands ---------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else Path(cfg.output.directory)
    try:
        outcome = execute(cfg, out)
    except OSError as exc:
        _log(f"error: {exc}")
        return EXIT_IO
    if outcome.status == "aborted":
        _log(f"aborted: {outcome.message}")
    else:
        _log(f"wrote {out}")
    return outcome.exit_code


def cmd_verify(args) -> int:
    cfgs = [load_config(p) for p in args.config]
    for c in cfgs:
        c.physics_params().require_standing_hypothesis()
    suite = run_suite(cfgs, jobs=_jobs(args.jobs))
    text = suite.to_text()
    print(text, end="")
    out = Path(args.out) if args.out else Path(cfgs[0].output.directory if len(cfgs) == 1 else "out")
    try:
        _prepare_dir(out)
        write_suite(suite, out)
    except OSError as exc:
        _log(f"error: {exc}")
        return EXIT_IO
    n_inc = suite.count(INCONCLUSIVE)
    if n_inc and suite.ok:
        _log(f"warning: {n_inc} inconclusive check(s)")
    return suite.exit_status


def parse_overrides(items) -> dict[str, list[str]]:
    overrides: dict[str, list[str]] = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigurationError(item, "override must read key=v1,v2,...")
        key, values = item.split("=", 1)
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            raise ConfigurationError(key.strip(), "override has no values")
        overrides[key.strip()] = vals
    return overrides


def sweep_points(cfg: ExperimentConfig, overrides: dict[str, list[str]]):
    """Cartesian product of overrides; yields ``(label, assignments, config, reduced)``."""
    keys = list(overrides)
    for combo in itertools.product(*(overrides[k] for k in keys)):
        assign = dict(zip(keys, combo))
        point = cfg.with_overrides(assign)
        label = "__".join(f"{k.split('.')[-1]}={v}" for k, v in assign.items()) or "base"
        point = replace(point, name=f"{cfg.name}[{label}]")
        reduced = False
        if point.grid.d == 2:
            point, reduced = reduce_for_2d(point)
        yield label, assign, point, reduced


def reduce_for_2d(cfg: ExperimentConfig) -> tuple[ExperimentConfig, bool]:
    g, t = cfg.grid, cfg.time
    M, L, T = min(g.M, D2_MAX_M), min(g.L, D2_MAX_L), min(t.t_end, D2_MAX_T)
    changed = (M, L, T) != (g.M, g.L, t.t_end)
    late_from = t.late_from if t.late_from is not None and t.late_from < T else None
    new = replace(cfg, grid=GridConfig(L, M, 2), time=replace(t, t_end=T, late_from=late_from))
    return new, changed


def _safe_dirname(label: str) -> str:
    return "".join(c if c.isalnum() or c in "=._-" else "_" for c in label)


def _sweep_worker(args):
    label, point, out, reduced = args
    try:
        outcome = execute(point, out, verify=True)
    except (NLSLabError, OSError) as exc:
        return label, "error", EXIT_FAIL, None, f"{type(exc).__name__}: {exc}"
    counts = outcome.suite.to_json()["counts"] if outcome.suite else None
    return label, outcome.status, outcome.exit_code, counts, outcome.message


def _jobs(value) -> int:
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("NLSLAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError("NLSLAB_JOBS", f"must be an integer, got {env!r}") from None
    return 1


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    overrides = parse_overrides(args.set)
    out = Path(args.out) if args.out else Path(cfg.output.directory)
    if not overrides:
        args.out = str(out)
        return cmd_run(args)
    try:
        _prepare_dir(out)
    except OSError as exc:
        _log(f"error: {exc}")
        return EXIT_IO
    points = list(sweep_points(cfg, overrides))
    tasks = [(label, point, out / _safe_dirname(label), reduced) for label, _, point, reduced in points]
    jobs = _jobs(args.jobs)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    else:
        results = [_sweep_worker(t) for t in tasks]

    keys = list(overrides)
    rows = [keys + ["directory", "status", "exit_code", "pass", "fail", "inconclusive", "accuracy", "message"]]
    failed = False
    for (label, assign, point, reduced), (_, status, code, counts, msg) in zip(points, results):
        counts = counts or {}
        failed |= code != 0
        rows.append([assign[k] for k in keys] + [
            _safe_dirname(label), status, str(code), str(counts.get(PASS, "")), str(counts.get(FAIL, "")),
            str(counts.get(INCONCLUSIVE, "")), "reduced-accuracy" if reduced else "full", msg,
        ])
    write_rows(out / "summary.csv", rows)
    _log(f"wrote {out / 'summary.csv'} ({len(tasks)} runs)")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_print_defaults(args) -> int:
    print(defaults_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlslab", description="Pseudo-spectral NLS runs and scattering checks.")
    ap.add_argument("--version", action="version", version=f"nlslab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evolve one configuration and write its series")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: output.directory)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the configured checks; nonzero exit iff any fails")
    v.add_argument("config", nargs="+")
    v.add_argument("--out", help="report directory")
    v.add_argument("--jobs", type=int, default=None, help="parallel experiments (default: $NLSLAB_JOBS or 1)")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="Cartesian product of overrides, one subdirectory per point")
    s.add_argument("config")
    s.add_argument("--set", action="append", metavar="KEY=V1,V2", help="repeatable")
    s.add_argument("--jobs", type=int, default=None, help="parallel runs (default: $NLSLAB_JOBS or 1)")
    s.add_argument("--out", help="sweep directory (default: output.directory)")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("print-defaults", help="show the documented defaults")
    d.set_defaults(func=cmd_print_defaults)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _log(f"error: {exc}")
        return EXIT_IO
    except NLSLabError as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
