#!/usr/bin/env python3
"""Sweep the solver over randomly generated instances.

Generates instances through the command line interface, solves each one,
and prints a per-instance result line.  With --oracle (sensible for n <= 8
after any rotation expansion) every result is compared against exhaustive
subset enumeration.

Example desk-scale sweep:

    python3 scripts/run_generated.py --n 5 10 --seeds 5 --time-scale 0.02 --oracle
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from circpack.cli import main as cli_main
from circpack.fss import FssConfig, run
from circpack.io import parse_instance
from circpack.oracle import oracle_best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[5, 10, 20])
    ap.add_argument("--seeds", type=int, default=3, help="seeds 1..S per size")
    ap.add_argument("--fraction", default="1/2", help="container area fraction")
    ap.add_argument("--objective", choices=("count", "area"), default="count")
    ap.add_argument("--shape", choices=("rect", "square"), default="rect")
    ap.add_argument("--rotate", action="store_true")
    ap.add_argument("--time-scale", type=float, default=0.02)
    ap.add_argument("--replications", type=int, default=3)
    ap.add_argument("--oracle", action="store_true",
                    help="also run exhaustive subset enumeration (small n only)")
    args = ap.parse_args(argv)

    print(f"objective {args.objective} | shape {args.shape} | "
          f"fraction {args.fraction} | rotate {args.rotate} | "
          f"time scale {args.time_scale:g} | {args.replications} replications")
    mismatches = 0
    with tempfile.TemporaryDirectory() as tmp:
        for n in args.n:
            for seed in range(1, args.seeds + 1):
                path = Path(tmp) / f"n{n}_s{seed}.txt"
                rc = cli_main([
                    "generate", str(n), "--seed", str(seed),
                    "--area-fraction", args.fraction, "--shape", args.shape,
                    "-o", str(path),
                ])
                if rc != 0:
                    return rc
                inst = parse_instance(
                    path.read_text(), args.objective, args.rotate,
                    args.shape == "square",
                )
                cfg = FssConfig(
                    time_scale=args.time_scale,
                    seed=0,
                    replications=args.replications,
                )
                t0 = time.perf_counter()
                report = run(inst, cfg)
                wall = time.perf_counter() - t0
                line = (
                    f"  n={n:3d} seed={seed:2d}: value {report.objective_value:g} "
                    f"({len(report.solution.placements)} packed, "
                    f"verified {report.solution.verified}) [{wall:.1f}s]"
                )
                if args.oracle:
                    orc = oracle_best(inst, seed=0)
                    line += f"  oracle {orc.value:g}"
                    if report.objective_value != orc.value:
                        mismatches += 1
                        line += " <-- differs"
                print(line, flush=True)
    if args.oracle:
        print(f"oracle mismatches: {mismatches}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
