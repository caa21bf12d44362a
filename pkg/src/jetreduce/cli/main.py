"""Command line entry point."""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

from .problem import BUNDLED, ProblemError, load_bundled, load_problem
from .runner import run

COMMANDS = ("reduce", "lagrange", "verify", "integrate", "nwaves")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", metavar="PATH", help="write the JSON report here ('-' for stdout)")
    p.add_argument("--csv-dir", metavar="PATH", help="directory for CSV trajectories")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized cross-checks (default 0)")
    p.add_argument("--h", type=float, default=None, help="override the RK4 step size")
    p.add_argument("-q", "--quiet", action="store_true", help="print only the overall verdict")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jetreduce",
                                 description="Finite-dimensional reductions of evolution PDEs on scaling-invariant manifolds.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline on a problem file")
        p.add_argument("file", help="problem file (TOML) or the name of a bundled example")
        _common(p)
    p = sub.add_parser("check", help="run every bundled example in parallel")
    _common(p)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: one per example)")
    return ap


def _resolve(file: str):
    if os.path.exists(file):
        return load_problem(file)
    if file in BUNDLED:
        return load_bundled(file)
    raise ProblemError(f"no such problem file: {file}")


def _emit_json(path: Optional[str], payload) -> None:
    if not path:
        return
    text = json.dumps(payload, indent=2) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _check_one(args):
    name, seed, h, csv_dir = args
    rep = run(load_bundled(name), "full", seed=seed, h=h, csv_dir=csv_dir)
    return name, rep.ok, rep.to_dict(), rep.summary_lines()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        jobs = [(name, args.seed, args.h, args.csv_dir) for name in BUNDLED]
        with ProcessPoolExecutor(max_workers=args.jobs or len(jobs)) as ex:
            results = list(ex.map(_check_one, jobs))
        ok = True
        for name, good, _, lines in results:
            ok &= good
            print(f"{'PASS' if good else 'FAIL'}  {name}")
            if not args.quiet:
                for ln in lines:
                    print("    " + ln)
        _emit_json(args.json, {name: rep for name, _, rep, _ in results})
        return 0 if ok else 1

    try:
        pb = _resolve(args.file)
    except (ProblemError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    rep = run(pb, args.command, seed=args.seed, h=args.h, csv_dir=args.csv_dir)
    if not args.quiet and args.json != "-":
        for ln in rep.summary_lines():
            print(ln)
    if args.json != "-":
        print("PASS" if rep.ok else "FAIL")
    _emit_json(args.json, rep.to_dict())
    return 0 if rep.ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
