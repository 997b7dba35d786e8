"""Command line interface: generate, solve, verify, oracle."""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .fss import FssConfig, run
from .geometry import StructuralError, verify_solution
from .io import (
    ParseError,
    load_instance,
    load_solution,
    placements_from_dict,
    render_instance,
    save_instance,
    save_solution,
    save_svg,
    solution_to_dict,
)
from .model import Instance, InstanceError, normalize_instance, solution_value
from .nlp import NlpConfig
from .oracle import MAX_ENUMERABLE, oracle_best

TIME_SCALE_ENV = "CIRCPACK_TIME_SCALE"


def _fraction(text: str) -> float:
    """Parse '0.5' or '1/2' style area fractions."""
    if "/" in text:
        num, _, den = text.partition("/")
        value = float(num) / float(den)
    else:
        value = float(text)
    if not (0.0 < value):
        raise argparse.ArgumentTypeError(f"area fraction must be positive, got {text!r}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circpack",
        description="Pack a best-value subset of rectangles into a circular container.",
    )
    parser.add_argument("--version", action="version", version=f"circpack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a random instance file")
    gen.add_argument("n", type=int, help="number of rectangles")
    gen.add_argument("--shape", choices=("rect", "square"), default="rect")
    gen.add_argument(
        "--area-fraction", type=_fraction, default=0.5, metavar="F",
        help="container area as a fraction of the total rectangle area (accepts 1/3 style); default 0.5",
    )
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument(
        "--with-values", nargs=2, type=float, metavar=("LO", "HI"),
        help="append a value column drawn uniformly from [LO, HI]",
    )
    gen.add_argument("-o", "--output", metavar="PATH", help="output file (default stdout)")

    def add_instance_flags(p):
        p.add_argument("instance", help="instance file")
        p.add_argument("--objective", choices=("count", "area", "value"), default="count")
        p.add_argument("--rotate", action="store_true", help="allow 90 degree rotation")
        p.add_argument("--squares", action="store_true", help="require all rectangles to be squares")

    slv = sub.add_parser("solve", help="run the packing search")
    add_instance_flags(slv)
    slv.add_argument("--seed", type=int, default=0)
    slv.add_argument("--replications", type=int, default=5)
    slv.add_argument(
        "--time-scale", type=float, default=1.0,
        help=f"scales every solve budget; the {TIME_SCALE_ENV} env var overrides this flag",
    )
    slv.add_argument("--json", metavar="PATH", help="write the solution JSON here")
    slv.add_argument("--svg", metavar="PATH", help="draw the packing here")
    slv.add_argument("--strict-rounding", action="store_true",
                     help="round the relaxed selection without repair steps")
    slv.add_argument("--fresh-incumbent", action="store_true",
                     help="do not carry the incumbent across replications")
    slv.add_argument("--feas-tol", type=float, default=1e-6)
    slv.add_argument("--opt-tol", type=float, default=1e-6)
    slv.add_argument("--restarts-feasibility", type=int, default=20)
    slv.add_argument("--restarts-selection", type=int, default=5)
    slv.add_argument("--delta-start", type=float, default=0.05)
    slv.add_argument("--delta-shrink", type=float, default=0.5)
    slv.add_argument("--delta-floor", type=float, default=1e-5)
    slv.add_argument("--stall-limit", type=int, default=3)

    ver = sub.add_parser("verify", help="check a solution file against an instance")
    ver.add_argument("instance", help="instance file")
    ver.add_argument("solution", help="solution JSON file")
    ver.add_argument("--tol", type=float, default=1e-6)

    orc = sub.add_parser("oracle", help="enumerate the best selection of a small instance")
    add_instance_flags(orc)
    orc.add_argument("--restarts", type=int, default=200)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--max-n", type=int, default=MAX_ENUMERABLE)
    orc.add_argument("--budget", type=float, default=4.0,
                     help="virtual seconds per enumerated selection")
    orc.add_argument("--json", metavar="PATH", help="write the best packing as solution JSON")

    return parser


def _check_instance_flags(parser: argparse.ArgumentParser, args) -> None:
    if getattr(args, "squares", False) and getattr(args, "rotate", False):
        parser.error("--squares and --rotate cannot be combined; turning a square changes nothing")


def _cmd_generate(args) -> int:
    if args.n < 1:
        raise InstanceError("need at least one rectangle")
    rng = np.random.default_rng(args.seed)
    rects = []
    for _ in range(args.n):
        length = round(rng.uniform(1.0, 5.0), 2)
        width = length if args.shape == "square" else round(rng.uniform(1.0, 5.0), 2)
        rects.append((length, width))
    total_area = sum(l * w for l, w in rects)
    radius = round(math.sqrt(args.area_fraction * total_area / math.pi), 2)
    if args.with_values is not None:
        lo, hi = args.with_values
        rects = [(l, w, round(rng.uniform(lo, hi), 2)) for l, w in rects]
        mode = "value"
    else:
        mode = "count"
    inst = normalize_instance(
        radius, rects, objective_mode=mode, square_mode=args.shape == "square"
    )
    comment = (
        f"random instance: n={args.n} shape={args.shape} "
        f"area_fraction={args.area_fraction:g} seed={args.seed}"
    )
    if args.output:
        save_instance(inst, args.output, comment=comment)
    else:
        sys.stdout.write(render_instance(inst, comment=comment))
    return 0


def _time_scale(args) -> float:
    env = os.environ.get(TIME_SCALE_ENV)
    if env is not None:
        try:
            return float(env)
        except ValueError:
            raise InstanceError(f"{TIME_SCALE_ENV} must be a number, got {env!r}") from None
    return args.time_scale


def _solver_config_echo(inst: Instance, cfg: FssConfig) -> Dict:
    return {
        "rotate": inst.rotation_allowed,
        "squares": inst.square_mode,
        "seed": cfg.seed,
        "replications": cfg.replications,
        "time_scale": cfg.time_scale,
        "delta_start": cfg.delta_start,
        "delta_shrink": cfg.delta_shrink,
        "delta_floor": cfg.delta_floor,
        "stall_limit": cfg.stall_limit,
        "strict_rounding": cfg.strict_rounding,
        "carry_incumbent": cfg.carry_incumbent,
        "feas_tol": cfg.nlp.feas_tol,
        "optimality_tol": cfg.nlp.optimality_tol,
        "restarts_feasibility": cfg.nlp.restarts_feasibility,
        "restarts_selection": cfg.nlp.restarts_selection,
        "version": __version__,
    }


def _cmd_solve(args) -> int:
    inst = load_instance(
        args.instance,
        objective_mode=args.objective,
        rotation_allowed=args.rotate,
        square_mode=args.squares,
    )
    nlp = NlpConfig(
        feas_tol=args.feas_tol,
        optimality_tol=args.opt_tol,
        restarts_feasibility=args.restarts_feasibility,
        restarts_selection=args.restarts_selection,
    )
    cfg = FssConfig(
        delta_start=args.delta_start,
        delta_shrink=args.delta_shrink,
        delta_floor=args.delta_floor,
        stall_limit=args.stall_limit,
        replications=args.replications,
        time_scale=_time_scale(args),
        seed=args.seed,
        strict_rounding=args.strict_rounding,
        carry_incumbent=not args.fresh_incumbent,
        nlp=nlp,
    )
    report = run(inst, cfg)
    sol = report.solution
    print(f"objective {inst.objective_mode}: {sol.objective_value:g}")
    print(f"placed {len(sol.placements)} of {len(inst.original_rectangles())} rectangles")
    print(f"replication {report.replication_found}, total time {report.total_time:.3f}s")
    doc = solution_to_dict(
        inst, sol, report.replication_found, report.total_time, _solver_config_echo(inst, cfg)
    )
    if args.json:
        save_solution(doc, args.json)
        print(f"solution written to {args.json}")
    if args.svg:
        save_svg(inst, sol.placements, args.svg)
        print(f"drawing written to {args.svg}")
    return 0


def _cmd_verify(args) -> int:
    doc = load_solution(args.solution)
    solver_config = doc.get("solver_config") or {}
    rotate = bool(solver_config.get("rotate", False))
    squares = bool(solver_config.get("squares", False))
    inst = load_instance(
        args.instance,
        objective_mode=doc["objective_mode"],
        rotation_allowed=rotate,
        square_mode=squares,
    )
    placements = placements_from_dict(doc)
    report = verify_solution(inst, placements, tol=args.tol)
    value = solution_value(inst, placements)
    print(f"objective {inst.objective_mode}: {value:g} from {len(placements)} placements")
    recorded = doc.get("objective_value")
    if recorded is not None and abs(float(recorded) - value) > 1e-6:
        print(f"note: file records objective {recorded}, placements give {value:g}")
    if report.feasible_within(args.tol):
        print(f"verified: max violation {report.max_violation:.3g} within tol {args.tol:g}")
        return 0
    print(f"INFEASIBLE: max violation {report.max_violation:.3g} exceeds tol {args.tol:g}")
    for rect_id, corner, excess in report.containment_violations:
        print(f"  rectangle {rect_id} corner {corner} outside by {excess:.3g} (squared units)")
    for id_a, id_b, depth in report.overlap_violations:
        print(f"  rectangles {id_a} and {id_b} overlap by {depth:.3g}")
    for msg in report.structure_violations:
        print(f"  {msg}")
    return 1


def _cmd_oracle(args) -> int:
    inst = load_instance(
        args.instance,
        objective_mode=args.objective,
        rotation_allowed=args.rotate,
        square_mode=args.squares,
    )
    result = oracle_best(
        inst,
        restarts=args.restarts,
        seed=args.seed,
        budget_per_subset=args.budget,
        max_n=args.max_n,
    )
    sol = result.solution
    ids = ", ".join(
        f"{p.rect_id}r" if p.rotated else str(p.rect_id) for p in sol.placements
    ) or "(none)"
    print(f"best {inst.objective_mode}: {result.value:g} using [{ids}]")
    print(f"checked {result.subsets_tried} selections")
    if args.json:
        doc = solution_to_dict(
            inst, sol, 0, result.total_time,
            {
                "oracle": True,
                "rotate": inst.rotation_allowed,
                "squares": inst.square_mode,
                "seed": args.seed,
                "restarts": args.restarts,
                "budget_per_subset": args.budget,
                "version": __version__,
            },
        )
        save_solution(doc, args.json)
        print(f"solution written to {args.json}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _check_instance_flags(parser, args)
    handlers = {
        "generate": _cmd_generate,
        "solve": _cmd_solve,
        "verify": _cmd_verify,
        "oracle": _cmd_oracle,
    }
    try:
        return handlers[args.command](args)
    except (ParseError, InstanceError, StructuralError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
