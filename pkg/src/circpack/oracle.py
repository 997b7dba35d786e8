"""Reference answers for small instances by subset enumeration.

Every selection of rectangles is screened against the cheap combinatorial
cuts, ordered by decreasing total value, and attacked with a heavy-restart
placement solve.  The first selection that verifies is returned: no later
selection can beat its value.  The answer is exact up to the placement
heuristic: a geometrically feasible selection could in principle fail all
its restarts, so the reported value is a certified lower bound that equals
the optimum whenever the placement solver is adequate, which the generous
restart budget makes the overwhelmingly common case at these sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np

from .fss import empty_solution
from .formulation import exclusion_pairs, expand_rotations
from .model import Instance, PackingSolution
from .nlp import NlpConfig, WorkClock, solve_feasibility

MAX_ENUMERABLE = 8


@dataclass
class OracleResult:
    value: float
    solution: PackingSolution
    subsets_tried: int
    status: str  # always "heuristic-complete"; see module docstring for the caveat
    total_time: float = 0.0  # virtual seconds across all placement solves


def _candidate_subsets(inst: Instance) -> List[Tuple[float, Tuple[int, ...]]]:
    """All selections surviving the combinatorial cuts, best value first."""
    n = inst.n
    values = [r.value for r in inst.rectangles]
    areas = [r.area for r in inst.rectangles]
    r_sq = inst.radius * inst.radius
    unfit = [0.25 * (r.length**2 + r.width**2) > r_sq for r in inst.rectangles]
    excl = set(exclusion_pairs(inst))
    L = [r.length for r in inst.rectangles]
    W = [r.width for r in inst.rectangles]
    square_ordered = inst.square_mode and inst.objective_mode == "count"

    out: List[Tuple[float, Tuple[int, ...]]] = [(0.0, ())]
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            if any(unfit[k] for k in subset):
                continue
            if sum(areas[k] for k in subset) > inst.area_capacity:
                continue
            if any((i, j) in excl for i, j in combinations(subset, 2)):
                continue
            if any(
                min(L[i] + L[j], W[i] + W[j]) > 2.0 * inst.radius
                for i, j in combinations(subset, 2)
            ):
                continue
            if square_ordered and subset != tuple(range(size)):
                continue
            out.append((sum(values[k] for k in subset), subset))
    out.sort(key=lambda item: (-item[0], len(item[1]), item[1]))
    return out


def oracle_best(
    inst: Instance,
    restarts: int = 200,
    seed: int = 0,
    budget_per_subset: float = 4.0,
    max_n: int = MAX_ENUMERABLE,
    nlp: Optional[NlpConfig] = None,
) -> OracleResult:
    """Best packable selection of a small instance, by enumeration.

    Refuses instances with more than ``max_n`` rectangles after rotation
    expansion; enumeration grows as 2^n and the point of this routine is a
    trustworthy reference, not scale.
    """
    work = expand_rotations(inst) if inst.rotation_allowed else inst
    if work.n > max_n:
        raise ValueError(
            f"oracle enumerates at most {max_n} rectangles, instance expands to {work.n}"
        )
    cfg = nlp if nlp is not None else NlpConfig()
    cfg = replace(cfg, restarts_feasibility=restarts)
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    tried = 0
    spent = 0.0
    for value, subset in _candidate_subsets(work):
        if not subset:
            break  # the empty packing always stands
        chosen = np.zeros(work.n)
        for k in subset:
            chosen[k] = 1.0
        tried += 1
        clock = WorkClock(budget=budget_per_subset)
        sol = solve_feasibility(work, chosen, cfg, rng, clock=clock)
        spent += clock.spent
        if sol is not None:
            return OracleResult(
                value=sol.objective_value, solution=sol, subsets_tried=tried,
                status="heuristic-complete", total_time=spent,
            )
    return OracleResult(
        value=0.0, solution=empty_solution(), subsets_tried=tried,
        status="heuristic-complete", total_time=spent,
    )


__all__ = ["OracleResult", "oracle_best", "MAX_ENUMERABLE"]
