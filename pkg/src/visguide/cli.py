"""Command line: ``visguide run | plot | compare``.

Log verbosity comes from the ``VISGUIDE_LOG_LEVEL`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``...; default ``WARNING``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .harness import (RunConfig, RunLog, ScenarioError, SchemaMismatchError, emit_plots,
                      regression_compare, run)

EXIT_OK = 0
EXIT_DIFF = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="visguide", description="Vision-in-the-loop aircraft guidance workbench")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write CSV logs")
    r.add_argument("--scenario", required=True, type=Path)
    r.add_argument("--mode", choices=("vision", "truth"), default="vision")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--dump-frames", action="store_true")
    r.add_argument("--duration", type=float, default=None, help="override scenario duration [s]")
    r.add_argument("--dt", type=float, default=None, help="override frame period [s]")
    r.add_argument("--log-every", type=int, default=1, help="keep every Nth frame in the log")
    r.add_argument("--plots", action="store_true", help="also write the chart set")

    pl = sub.add_parser("plot", help="draw charts from a run CSV")
    pl.add_argument("--log", required=True, type=Path)
    pl.add_argument("--out", required=True, type=Path)

    c = sub.add_parser("compare", help="diff a run CSV against a golden CSV")
    c.add_argument("--log", required=True, type=Path)
    c.add_argument("--golden", required=True, type=Path)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("VISGUIDE_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)

    if args.command == "run":
        try:
            cfg = RunConfig(args.scenario, mode=args.mode, seed=args.seed, out_dir=args.out,
                            dump_frames=args.dump_frames, log_every=args.log_every,
                            duration=args.duration, dt=args.dt)
            runlog = run(cfg)
        except (ScenarioError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.plots:
            emit_plots(runlog, args.out / "plots")
        print(f"{len(runlog)} rows written to {args.out / 'run.csv'}")
        return EXIT_OK

    if args.command == "plot":
        try:
            runlog = RunLog.from_csv(args.log)
            paths = emit_plots(runlog, args.out)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"{len(paths)} charts written to {args.out}")
        return EXIT_OK

    try:
        report = regression_compare(RunLog.from_csv(args.log), RunLog.from_csv(args.golden))
    except (OSError, SchemaMismatchError, ValueError, StopIteration) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(report.summary())
    return EXIT_OK if report.identical else EXIT_DIFF


if __name__ == "__main__":
    sys.exit(main())
