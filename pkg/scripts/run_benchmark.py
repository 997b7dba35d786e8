#!/usr/bin/env python3
"""Solve the bundled 10-rectangle benchmark in all four variants.

Runs count and area objectives, each with and without rotation, through the
command line interface, writing solution JSON plus an SVG drawing per
variant.  Full-budget runs take a while; pass --time-scale 0.05 for a
desk-scale pass that still reaches the reference values on the fixed
orientation objectives.
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from circpack.cli import main as cli_main

DEFAULT_INSTANCE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "benchmark10.txt"

VARIANTS = (
    ("count", False),
    ("area", False),
    ("count", True),
    ("area", True),
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", type=Path, default=DEFAULT_INSTANCE)
    ap.add_argument("--out", type=Path, default=Path("benchmark_out"))
    ap.add_argument("--time-scale", type=float, default=1.0)
    ap.add_argument("--replications", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    args.out.mkdir(parents=True, exist_ok=True)
    print(f"instance {args.instance} | time scale {args.time_scale:g} | "
          f"{args.replications} replications | seed {args.seed}")

    for mode, rotate in VARIANTS:
        tag = f"{mode}{'_rot' if rotate else ''}"
        json_path = args.out / f"{tag}.json"
        argv_solve = [
            "solve", str(args.instance),
            "--objective", mode,
            "--seed", str(args.seed),
            "--replications", str(args.replications),
            "--time-scale", str(args.time_scale),
            "--json", str(json_path),
            "--svg", str(args.out / f"{tag}.svg"),
        ]
        if rotate:
            argv_solve.append("--rotate")
        t0 = time.perf_counter()
        rc = cli_main(argv_solve)
        wall = time.perf_counter() - t0
        if rc != 0:
            print(f"  {tag:10s} FAILED (exit {rc})")
            return rc
        doc = json.loads(json_path.read_text())
        ids = ",".join(
            f"{p['id']}r" if p.get("rotated") else str(p["id"])
            for p in doc["placements"]
        )
        print(
            f"  {tag:10s} value {doc['objective_value']:g} "
            f"({len(doc['placements'])} packed: {ids or '-'}) "
            f"[{doc['total_time_s']:.1f} model s, {wall:.1f} wall s]"
        )
    print(f"wrote JSON and SVG files to {args.out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
