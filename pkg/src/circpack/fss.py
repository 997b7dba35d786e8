"""Search driver: alternate relaxed selection solves with placement repair.

One replication works a loop over a shrinking near-binary tolerance delta:

1. greedy insertion builds a first verified packing (the incumbent),
2. the relaxed selection model is solved with cuts derived from the
   incumbent (value bound plus a no-repeat cut on the packed set),
3. its fractional selection is rounded, repaired, and handed to the
   placement feasibility solver; a verified improvement replaces the
   incumbent,
4. delta shrinks geometrically until it reaches its floor or the loop
   stalls for ``stall_limit`` consecutive non-improving iterations.

Several replications run with independent random streams; the incumbent is
carried across replications by default so later ones start from the best
known packing.  All time accounting uses the deterministic work clock, so a
fixed seed reproduces a run exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .formulation import (
    VariableLayout,
    build_problem,
    exclusion_pairs,
    expand_rotations,
    placement_index_map,
)
from .model import Incumbent, Instance, PackingSolution
from .nlp import NlpConfig, WorkClock, multistart, solve_feasibility

IMPROVE_EPS = 1e-9


@dataclass(frozen=True)
class FssConfig:
    """Knobs for the shrinking-relaxation search."""

    delta_start: float = 0.05
    delta_shrink: float = 0.5
    delta_floor: float = 1e-5
    stall_limit: int = 3
    replications: int = 5
    time_scale: float = 1.0
    seed: int = 0
    strict_rounding: bool = False
    carry_incumbent: bool = True
    nlp: NlpConfig = field(default_factory=NlpConfig)

    def solve_budget(self, inst: Instance) -> float:
        """Virtual seconds granted to one model solve: 10s per rectangle.

        ``inst`` is the instance the models are built from, so with rotation
        enabled the rotated copies count toward the budget too.
        """
        return 10.0 * inst.n * self.time_scale


@dataclass
class FssState:
    """Mutable loop state of one replication."""

    iteration: int = 0
    delta: float = 0.05
    stall: int = 0
    improved_any: bool = False
    spent: float = 0.0
    log: List[str] = field(default_factory=list)


@dataclass
class SolverReport:
    """Outcome of a full multi-replication run."""

    solution: PackingSolution
    objective_value: float
    replication_found: int  # 1-based; 0 when the empty packing was never beaten
    total_time: float  # virtual seconds
    log: List[str]
    config: FssConfig


def empty_solution() -> PackingSolution:
    return PackingSolution(placements=(), objective_value=0.0, verified=True, max_violation=0.0)


def _fresh_incumbent() -> Incumbent:
    return Incumbent(value=0.0, packed=frozenset(), solution=empty_solution())


def _incumbent_from(inst: Instance, sol: PackingSolution) -> Incumbent:
    index_map = placement_index_map(inst)
    packed = frozenset(index_map[(p.rect_id, p.rotated)] for p in sol.placements)
    return Incumbent(value=sol.objective_value, packed=packed, solution=sol)


def round_alphas(alpha: np.ndarray, inst: Instance, strict: bool = False) -> np.ndarray:
    """Round a fractional selection to 0/1 and repair it to satisfy the
    combinatorial cuts.

    Repairs (skipped when ``strict``): rectangles that cannot fit at all are
    dropped; of a both-orientations pair the larger fraction survives (tie:
    the unrotated one); for squares under the count objective the selection
    is truncated to its leading prefix; and while the selected area exceeds
    the container, the smallest-fraction rectangle is dropped (ties prefer
    dropping larger area, then higher index; square prefixes shrink from the
    end instead).
    """
    alpha = np.asarray(alpha, dtype=float)
    base = alpha >= 0.5
    if strict:
        return base.astype(float)

    r_sq = inst.radius * inst.radius
    areas = np.array([r.area for r in inst.rectangles])
    for k, r in enumerate(inst.rectangles):
        if 0.25 * (r.length**2 + r.width**2) > r_sq:
            base[k] = False

    for i, j in exclusion_pairs(inst):
        if base[i] and base[j]:
            if alpha[j] > alpha[i]:
                base[i] = False
            else:
                base[j] = False

    square_ordered = inst.square_mode and inst.objective_mode == "count"
    if square_ordered:
        k = 0
        while k < inst.n and base[k]:
            k += 1
        base[k:] = False

    cap = inst.area_capacity
    while float(areas[base].sum()) > cap:
        chosen = np.flatnonzero(base)
        if square_ordered:
            drop = chosen[-1]
        else:
            drop = min(chosen, key=lambda k: (alpha[k], -areas[k], -k))
        base[drop] = False

    return base.astype(float)


def _layout_for(inst: Instance) -> VariableLayout:
    return VariableLayout(n=inst.n, n_pairs=inst.n * (inst.n - 1) // 2)


def _warm_from_solution(inst: Instance, sol: PackingSolution) -> np.ndarray:
    """Variable vector reproducing a packing's positions; selections clamp
    via the boxes, so only x and y matter here."""
    layout = _layout_for(inst)
    v = np.zeros(layout.dim)
    index_map = placement_index_map(inst)
    for p in sol.placements:
        k = index_map[(p.rect_id, p.rotated)]
        v[layout.x][k] = p.x
        v[layout.y][k] = p.y
    v[layout.beta] = 0.5
    return v


def _greedy_pass(
    inst: Instance,
    cfg: FssConfig,
    rng: np.random.Generator,
    order: List[int],
    clock: WorkClock,
) -> Optional[PackingSolution]:
    """Insert rectangles in the given order, keeping every verified success."""
    n = inst.n
    values = np.array([r.value for r in inst.rectangles])
    areas = np.array([r.area for r in inst.rectangles])
    r_sq = inst.radius * inst.radius

    twin = {}
    for i, j in exclusion_pairs(inst):
        twin[i] = j
        twin[j] = i

    L = np.array([r.length for r in inst.rectangles])
    W = np.array([r.width for r in inst.rectangles])
    square_ordered = inst.square_mode and inst.objective_mode == "count"

    chosen = np.zeros(n)
    best: Optional[PackingSolution] = None
    for k in order:
        if clock.expired:
            break
        r = inst.rectangles[k]
        if values[k] <= 0.0 and inst.objective_mode == "value":
            continue
        if 0.25 * (r.length**2 + r.width**2) > r_sq:
            continue
        if twin.get(k) is not None and chosen[twin[k]] > 0.5:
            continue
        if float(areas[chosen > 0.5].sum()) + areas[k] > inst.area_capacity:
            continue
        sel = np.flatnonzero(chosen > 0.5)
        if any(min(L[k] + L[j], W[k] + W[j]) > 2.0 * inst.radius for j in sel):
            continue
        trial = chosen.copy()
        trial[k] = 1.0
        warm = _warm_from_solution(inst, best) if best is not None else None
        sol = solve_feasibility(inst, trial, cfg.nlp, rng, warm_start=warm, clock=clock)
        if sol is not None:
            chosen = trial
            best = sol
        elif square_ordered:
            break  # later squares would break the prefix anyway
    return best


def solve_P_initial(
    inst: Instance,
    cfg: FssConfig,
    rng: np.random.Generator,
    clock: WorkClock,
) -> PackingSolution:
    """Greedy substitute for the integral selection model.

    Rectangles are tried in decreasing value density (value per area, ties
    by value then position); each is added to the current packing when the
    placement solver can verify the enlarged selection within the shared
    budget.  For objectives other than count a second pass in ascending
    area order guards against the trap where one high-value rectangle
    blocks a crowd of smaller ones.  Returns the best verified packing;
    when nothing fits that is the empty packing with value zero.
    """
    n = inst.n
    values = np.array([r.value for r in inst.rectangles])
    areas = np.array([r.area for r in inst.rectangles])
    density = values / areas

    orders = [sorted(range(n), key=lambda k: (-density[k], -values[k], k))]
    if inst.objective_mode != "count":
        orders.append(sorted(range(n), key=lambda k: (areas[k], k)))

    best: Optional[PackingSolution] = None
    for i, order in enumerate(orders):
        remaining = max(clock.budget - clock.spent, 0.0)
        sub = WorkClock(budget=remaining / (len(orders) - i))
        sol = _greedy_pass(inst, cfg, rng, order, sub)
        clock.charge(sub.spent)
        if sol is not None and (best is None or sol.objective_value > best.objective_value + IMPROVE_EPS):
            best = sol
    return best if best is not None else empty_solution()


def run_replication(
    inst: Instance,
    cfg: FssConfig,
    rng: np.random.Generator,
    incumbent: Incumbent,
) -> Tuple[Incumbent, FssState]:
    """One full shrinking-delta loop; returns the updated incumbent and the
    loop trace.  ``inst`` must already be rotation-expanded when wanted."""
    budget = cfg.solve_budget(inst)
    state = FssState(delta=cfg.delta_start)

    clock = WorkClock(budget)
    sol0 = solve_P_initial(inst, cfg, rng, clock)
    state.spent += clock.spent
    if sol0.objective_value > incumbent.value + IMPROVE_EPS:
        incumbent = _incumbent_from(inst, sol0)
        state.improved_any = True
        state.log.append(f"greedy start: value {incumbent.value:g} with {len(sol0.placements)} placed")
    else:
        state.log.append("greedy start: no improvement")

    warm = None
    while True:
        state.iteration += 1
        prob = build_problem(
            inst,
            "relaxed",
            delta=state.delta,
            incumbent_value=incumbent.value,
            incumbent_set=incumbent.packed,
        )
        clock = WorkClock(budget)
        res = multistart(prob, cfg.nlp.restarts_selection, cfg.nlp, rng, warm_start=warm, clock=clock)
        state.spent += clock.spent

        improved = False
        if res.feasible:
            warm = res.point.copy()
            chosen = round_alphas(res.point[prob.layout.alpha], inst, strict=cfg.strict_rounding)
            clock = WorkClock(budget)
            sol = solve_feasibility(inst, chosen, cfg.nlp, rng, warm_start=res.point, clock=clock)
            state.spent += clock.spent
            if sol is not None and sol.objective_value > incumbent.value + IMPROVE_EPS:
                incumbent = _incumbent_from(inst, sol)
                improved = True
                state.log.append(
                    f"iter {state.iteration}: delta {state.delta:.3g}, new value {incumbent.value:g}"
                )
        if improved:
            state.improved_any = True
            state.stall = 0
        else:
            state.stall += 1

        if state.delta <= cfg.delta_floor or state.stall >= cfg.stall_limit:
            break
        state.delta = cfg.delta_start * cfg.delta_shrink**state.iteration

    state.log.append(
        f"replication done after {state.iteration} iterations, value {incumbent.value:g}"
    )
    return incumbent, state


def run(inst: Instance, cfg: FssConfig) -> SolverReport:
    """Full solve: expand rotations, run all replications, report the best."""
    work = expand_rotations(inst) if inst.rotation_allowed else inst
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)

    best = _fresh_incumbent()
    incumbent = _fresh_incumbent()
    replication_found = 0
    total = 0.0
    log: List[str] = []

    for r in range(1, cfg.replications + 1):
        rng = np.random.default_rng(children[r - 1])
        if not cfg.carry_incumbent:
            incumbent = _fresh_incumbent()
        incumbent, state = run_replication(work, cfg, rng, incumbent)
        total += state.spent
        log.extend(f"rep {r}: {line}" for line in state.log)
        if incumbent.value > best.value + IMPROVE_EPS:
            best = incumbent
            replication_found = r

    solution = best.solution if best.solution is not None else empty_solution()
    return SolverReport(
        solution=solution,
        objective_value=best.value,
        replication_found=replication_found,
        total_time=total,
        log=log,
        config=cfg,
    )


__all__ = [
    "FssConfig",
    "FssState",
    "SolverReport",
    "empty_solution",
    "round_alphas",
    "solve_P_initial",
    "run_replication",
    "run",
]
