"""Self-contained local solver for the packing models.

Two layers:

* ``_minimize_box``   projected L-BFGS descent for min f(v) s.t. lower <= v
                      <= upper, with Armijo backtracking along projected
                      steps and curvature-pair screening.
* ``solve_local``     augmented Lagrangian outer loop for models with
                      inequality constraints g(v) >= 0; each multiplier
                      estimate is lam <- max(0, lam - mu g) and the penalty
                      grows tenfold whenever the violation fails to shrink
                      by a factor of four.  Feasibility models (no hard
                      constraints) collapse to a single box descent driven
                      to a squared-violation target.

Time limits use a deterministic work clock: every function evaluation is
charged an estimated cost derived from the model size, so identical runs
spend identical "seconds" and produce identical output regardless of the
host machine.  The charge constants are calibrated so the virtual second is
not faster than a real one on commodity hardware.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .formulation import ProblemFunctions, build_problem, exclusion_pairs
from .geometry import evaluate_solution
from .model import Instance, PackingSolution, Placement

# Work-clock charge model, in virtual microseconds per call.  The linear
# coefficients multiply the model's rough numpy work units.
EVAL_BASE_US = 55.0
VALUE_UNIT_US = 0.013
GRAD_UNIT_US = 0.016
ITER_BASE_US = 40.0
ITER_DIM_US = 0.07


@dataclass
class WorkClock:
    """Deterministic stand-in for wall time, measured in virtual seconds."""

    budget: float = math.inf
    spent: float = 0.0

    def charge(self, seconds: float) -> None:
        self.spent += seconds

    @property
    def expired(self) -> bool:
        return self.spent >= self.budget


@dataclass(frozen=True)
class NlpConfig:
    """Tolerances and iteration budgets for the local solver."""

    feas_tol: float = 1e-6
    optimality_tol: float = 1e-6
    penalty_start: float = 10.0
    penalty_growth: float = 10.0
    max_outer: int = 50
    max_inner: int = 200
    max_iter_feasibility: int = 1200
    time_limit: float = math.inf  # virtual seconds per solve when no clock given
    restarts_feasibility: int = 20
    restarts_selection: int = 5


@dataclass
class LocalResult:
    """Outcome of one local solve."""

    point: np.ndarray
    objective: float  # the minimized model objective at `point`
    max_violation: float
    feasible: bool
    status: str  # "converged" | "time_limit" | "stalled"
    iterations: int
    wall_time: float  # virtual seconds charged to this solve


def _two_loop(g: np.ndarray, mem_s: List[np.ndarray], mem_y: List[np.ndarray]) -> np.ndarray:
    """Standard L-BFGS two-loop recursion; returns an approximation of H g."""
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(mem_s), reversed(mem_y)):
        rho = 1.0 / np.dot(y, s)
        a = rho * np.dot(s, q)
        alphas.append((a, rho, s, y))
        q -= a * y
    if mem_s:
        s, y = mem_s[-1], mem_y[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for a, rho, s, y in reversed(alphas):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def _minimize_box(
    value: Callable[[np.ndarray], float],
    value_grad: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    v0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    *,
    max_iter: int,
    grad_tol: float,
    clock: WorkClock,
    charge_value: float,
    charge_grad: float,
    charge_iter: float,
    target: Optional[float] = None,
    history: int = 8,
):
    """Minimize over a box from v0.  Returns (v, f, iterations, status).

    Status is "converged" when the projected gradient drops below grad_tol
    or f reaches `target`, "time_limit" when the clock runs out, "stalled"
    when no acceptable step exists, "iter_limit" otherwise.
    """
    v = np.clip(v0, lower, upper)
    clock.charge(charge_grad)
    f, g = value_grad(v)
    if not math.isfinite(f):
        return v, f, 0, "stalled"
    mem_s: List[np.ndarray] = []
    mem_y: List[np.ndarray] = []
    status = "iter_limit"
    it = 0
    while it < max_iter:
        if target is not None and f <= target:
            status = "converged"
            break
        pg = v - np.clip(v - g, lower, upper)
        if np.max(np.abs(pg), initial=0.0) <= grad_tol:
            status = "converged"
            break
        if clock.expired:
            status = "time_limit"
            break
        it += 1
        clock.charge(charge_iter)

        candidates = []
        if mem_s:
            d = -_two_loop(g, mem_s, mem_y)
            if np.dot(g, d) < 0.0:
                candidates.append(d)
        candidates.append(-g / max(1.0, float(np.max(np.abs(g), initial=0.0))))

        v_new = None
        f_new = math.inf
        for d in candidates:
            step = 1.0
            for _ in range(40):
                trial = np.clip(v + step * d, lower, upper)
                dv = trial - v
                slope = np.dot(g, dv)
                if np.max(np.abs(dv), initial=0.0) <= 1e-16:
                    break
                clock.charge(charge_value)
                f_trial = value(trial)
                if math.isfinite(f_trial):
                    # Armijo along the projected step; when projection bends
                    # the step uphill, insist on a strict decrease instead.
                    if slope < 0.0:
                        ok = f_trial <= f + 1e-4 * slope
                    else:
                        ok = f_trial < f - 1e-12 * max(1.0, abs(f))
                    if ok:
                        v_new, f_new = trial, f_trial
                        break
                step *= 0.5
            if v_new is not None:
                break
        if v_new is None:
            status = "stalled"
            break

        clock.charge(charge_grad)
        f_chk, g_new = value_grad(v_new)
        if not math.isfinite(f_chk) or not np.all(np.isfinite(g_new)):
            status = "stalled"
            break
        s = v_new - v
        yk = g_new - g
        sy = float(np.dot(s, yk))
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(yk)):
            mem_s.append(s)
            mem_y.append(yk)
            if len(mem_s) > history:
                mem_s.pop(0)
                mem_y.pop(0)
        v, f, g = v_new, f_new, g_new
    return v, f, it, status


def _charges(prob: ProblemFunctions) -> Tuple[float, float, float]:
    cv = (EVAL_BASE_US + VALUE_UNIT_US * prob.cost_value) * 1e-6
    cg = (EVAL_BASE_US + GRAD_UNIT_US * (prob.cost_value + prob.cost_grad)) * 1e-6
    ci = (ITER_BASE_US + ITER_DIM_US * prob.layout.dim) * 1e-6
    return cv, cg, ci


def solve_local(
    prob: ProblemFunctions,
    start: np.ndarray,
    cfg: NlpConfig,
    clock: Optional[WorkClock] = None,
) -> LocalResult:
    """Run the augmented Lagrangian (or direct box descent) from one start."""
    clock = clock if clock is not None else WorkClock(budget=cfg.time_limit)
    t0 = clock.spent
    charge_value, charge_grad, charge_iter = _charges(prob)
    lower, upper = prob.lower, prob.upper
    v = np.clip(np.asarray(start, dtype=float), lower, upper)

    if prob.m == 0:
        # Feasibility model: drive the squared-violation total toward zero.
        # The target leaves an order of magnitude between the reached
        # violation and the verifier tolerance, so softening error and
        # float noise cannot flip the verdict.
        target = (0.1 * cfg.feas_tol) ** 2
        def vg(p):
            return prob.objective(p), prob.objective_grad(p)
        v, f, iters, inner_status = _minimize_box(
            prob.objective, vg, v, lower, upper,
            max_iter=cfg.max_iter_feasibility, grad_tol=1e-3 * cfg.optimality_tol,
            clock=clock, charge_value=charge_value, charge_grad=charge_grad,
            charge_iter=charge_iter, target=target,
        )
        viol = prob.max_violation(v)
        feasible = viol <= cfg.feas_tol
        if feasible:
            status = "converged"
        elif inner_status == "time_limit":
            status = "time_limit"
        else:
            status = "stalled"
        return LocalResult(
            point=v, objective=f, max_violation=viol, feasible=feasible,
            status=status, iterations=iters, wall_time=clock.spent - t0,
        )

    lam = np.zeros(prob.m)
    mu = cfg.penalty_start
    best: Optional[Tuple[bool, float, float, np.ndarray]] = None
    prev_viol = math.inf
    status = "stalled"
    total_iters = 0

    for outer in range(cfg.max_outer):
        grad_tol = max(cfg.optimality_tol, 1e-2 * 10.0 ** (-outer))

        def al_value(p, lam=lam, mu=mu):
            gv = prob.constraints(p)
            active = np.maximum(lam - mu * gv, 0.0)
            return prob.objective(p) + (float(np.dot(active, active)) - float(np.dot(lam, lam))) / (2.0 * mu)

        def al_value_grad(p, lam=lam, mu=mu):
            gv = prob.constraints(p)
            w = np.maximum(lam - mu * gv, 0.0)
            val = prob.objective(p) + (float(np.dot(w, w)) - float(np.dot(lam, lam))) / (2.0 * mu)
            grad = prob.objective_grad(p) - prob.jac_t(p, w)
            return val, grad

        v, _, iters, inner_status = _minimize_box(
            al_value, al_value_grad, v, lower, upper,
            max_iter=cfg.max_inner, grad_tol=grad_tol, clock=clock,
            charge_value=charge_value, charge_grad=charge_grad, charge_iter=charge_iter,
        )
        total_iters += iters

        gv = prob.constraints(v)
        viol = max(0.0, float(-gv.min())) if gv.size else 0.0
        obj = prob.objective(v)
        feasible = viol <= cfg.feas_tol
        cand = (feasible, obj, viol, v.copy())
        if best is None or _better(cand, best):
            best = cand

        if feasible and inner_status == "converged" and grad_tol <= cfg.optimality_tol:
            status = "converged"
            break
        if clock.expired:
            status = "time_limit"
            break

        lam = np.minimum(np.maximum(0.0, lam - mu * gv), 1e8)
        if viol > 0.25 * prev_viol and viol > cfg.feas_tol:
            mu = min(mu * cfg.penalty_growth, 1e10)
        prev_viol = viol

    feasible, obj, viol, v_best = best
    return LocalResult(
        point=v_best, objective=obj, max_violation=viol, feasible=feasible,
        status=status, iterations=total_iters, wall_time=clock.spent - t0,
    )


def _better(cand, best) -> bool:
    """Feasible beats infeasible; then lower objective; then lower violation."""
    c_feas, c_obj, c_viol, _ = cand
    b_feas, b_obj, b_viol, _ = best
    if c_feas != b_feas:
        return c_feas
    if c_feas:
        return c_obj < b_obj
    return c_viol < b_viol


def random_start(prob: ProblemFunctions, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample inside the variable boxes."""
    u = rng.random(prob.layout.dim)
    return prob.lower + u * (prob.upper - prob.lower)


def multistart(
    prob: ProblemFunctions,
    k: int,
    cfg: NlpConfig,
    rng: np.random.Generator,
    warm_start: Optional[np.ndarray] = None,
    clock: Optional[WorkClock] = None,
) -> LocalResult:
    """Best of k local solves sharing one clock budget.

    The warm start, when given, is attempted first.  Feasibility models stop
    at the first start that reaches a verified-level violation, since more
    starts cannot improve a zero objective.
    """
    clock = clock if clock is not None else WorkClock(budget=cfg.time_limit)
    t0 = clock.spent
    best: Optional[LocalResult] = None
    for s in range(max(1, k)):
        if clock.expired and best is not None:
            break
        if s == 0 and warm_start is not None:
            start = warm_start
        else:
            start = random_start(prob, rng)
        res = solve_local(prob, start, cfg, clock=clock)
        if best is None or _better(
            (res.feasible, res.objective, res.max_violation, res.point),
            (best.feasible, best.objective, best.max_violation, best.point),
        ):
            best = res
        if prob.feasibility_objective and res.feasible:
            break
    best.wall_time = clock.spent - t0
    return best


def solve_feasibility(
    inst: Instance,
    chosen: np.ndarray,
    cfg: NlpConfig,
    rng: np.random.Generator,
    warm_start: Optional[np.ndarray] = None,
    clock: Optional[WorkClock] = None,
) -> Optional[PackingSolution]:
    """Try to place the chosen rectangles; return a verified packing or None.

    `chosen` is a 0/1 vector over the (rotation-expanded) rectangle list.
    Selections that already break the area capacity, pick an unpackable
    rectangle, or pick both orientations of one rectangle are rejected
    outright.  Otherwise the squared-violation model is attacked from up to
    ``cfg.restarts_feasibility`` starts and the best point is passed through
    the exact verifier; only a packing that survives it is returned.
    """
    chosen = np.asarray(chosen, dtype=float)
    idx = np.flatnonzero(chosen > 0.5)
    area = sum(inst.rectangles[k].area for k in idx)
    if area > inst.area_capacity:
        return None
    for i, j in exclusion_pairs(inst):
        if chosen[i] > 0.5 and chosen[j] > 0.5:
            return None
    for k in idx:
        r = inst.rectangles[k]
        if 0.25 * (r.length**2 + r.width**2) > inst.radius**2:
            return None

    prob = build_problem(inst, "feasibility", chosen=chosen)
    res = multistart(prob, cfg.restarts_feasibility, cfg, rng, warm_start, clock)
    if not res.feasible:
        return None

    placements = []
    x = res.point[prob.layout.x]
    y = res.point[prob.layout.y]
    for k in idx:
        r = inst.rectangles[k]
        if r.rotated_copy_of is None:
            placements.append(Placement(rect_id=r.id, x=float(x[k]), y=float(y[k]), rotated=False))
        else:
            placements.append(Placement(rect_id=r.rotated_copy_of, x=float(x[k]), y=float(y[k]), rotated=True))
    placements.sort(key=lambda p: p.rect_id)
    sol = evaluate_solution(inst, placements, tol=cfg.feas_tol)
    return sol if sol.verified else None


__all__ = [
    "WorkClock",
    "NlpConfig",
    "LocalResult",
    "solve_local",
    "multistart",
    "random_start",
    "solve_feasibility",
]
