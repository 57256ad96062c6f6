#!/usr/bin/env python3
"""Run every configuration in configs/acceptance and write one combined report.

Usage: python scripts/run_acceptance.py [--out DIR] [--jobs N]

Exit status is nonzero iff any check fails or any run errors.  For the
criterion-by-criterion view run ``pytest tests/test_acceptance.py``.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from nlslab.cli import write_suite
from nlslab.config import load_config
from nlslab.verifier import run_suite

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "out" / "acceptance"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)

    configs = [load_config(p) for p in sorted((ROOT / "configs" / "acceptance").glob("*.cfg"))]
    start = time.perf_counter()
    suite = run_suite(configs, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_suite(suite, out)
    print(suite.to_text(), end="")
    print(f"{len(configs)} experiments in {time.perf_counter() - start:.0f} s; report in {out}")
    return suite.exit_status


if __name__ == "__main__":
    sys.exit(main())
