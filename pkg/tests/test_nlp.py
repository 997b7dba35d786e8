import math

import numpy as np
import pytest

from circpack.formulation import build_problem, expand_rotations, placement_index_map
from circpack.io import placements_from_dict, parse_instance
from circpack.model import normalize_instance
from circpack.nlp import (
    NlpConfig,
    WorkClock,
    _minimize_box,
    multistart,
    random_start,
    solve_feasibility,
    solve_local,
)


def test_work_clock_accumulates_and_expires():
    clock = WorkClock(budget=1.0)
    assert not clock.expired
    clock.charge(0.4)
    clock.charge(0.4)
    assert clock.spent == pytest.approx(0.8)
    assert not clock.expired
    clock.charge(0.4)
    assert clock.expired


def _free_clock():
    return WorkClock(budget=math.inf)


def test_minimize_box_unconstrained_quadratic():
    c = np.array([1.0, -2.0, 0.5])

    def f(v):
        return float(np.sum((v - c) ** 2))

    def fg(v):
        return f(v), 2.0 * (v - c)

    v, fval, it, status = _minimize_box(
        f, fg, np.zeros(3), np.full(3, -10.0), np.full(3, 10.0),
        max_iter=200, grad_tol=1e-9, clock=_free_clock(),
        charge_value=0.0, charge_grad=0.0, charge_iter=0.0,
    )
    assert status == "converged"
    assert v == pytest.approx(c, abs=1e-8)
    assert fval < 1e-14


def test_minimize_box_clips_to_the_active_bound():
    # optimum at 3 sits outside the box, so the solve must stop at 1
    def f(v):
        return float((v[0] - 3.0) ** 2)

    def fg(v):
        return f(v), np.array([2.0 * (v[0] - 3.0)])

    v, _, _, status = _minimize_box(
        f, fg, np.array([-0.5]), np.array([-1.0]), np.array([1.0]),
        max_iter=100, grad_tol=1e-9, clock=_free_clock(),
        charge_value=0.0, charge_grad=0.0, charge_iter=0.0,
    )
    assert status == "converged"
    assert v[0] == pytest.approx(1.0, abs=1e-10)


def test_minimize_box_respects_the_clock():
    def f(v):
        return float(np.sum(v**2))

    def fg(v):
        return f(v), 2.0 * v

    clock = WorkClock(budget=3.0)
    _, _, it, status = _minimize_box(
        f, fg, np.full(4, 3.0), np.full(4, -10.0), np.full(4, 10.0),
        max_iter=10**6, grad_tol=0.0, clock=clock,
        charge_value=1.0, charge_grad=1.0, charge_iter=3.0,
    )
    assert status == "time_limit"
    assert it == 1


def test_minimize_box_reports_non_finite_start_as_stalled():
    def f(v):
        return math.inf

    def fg(v):
        return math.inf, np.zeros(1)

    _, _, it, status = _minimize_box(
        f, fg, np.zeros(1), np.array([-1.0]), np.array([1.0]),
        max_iter=50, grad_tol=1e-9, clock=_free_clock(),
        charge_value=0.0, charge_grad=0.0, charge_iter=0.0,
    )
    assert status == "stalled"
    assert it == 0


class _ToyProblem:
    """minimize (v - 2)^2 subject to 1 - v >= 0 on the box [-5, 5]."""

    def __init__(self):
        self.m = 1
        self.lower = np.array([-5.0])
        self.upper = np.array([5.0])
        self.cost_value = 1
        self.cost_grad = 1

        class _Lay:
            dim = 1

        self.layout = _Lay()
        self.feasibility_objective = False

    def objective(self, v):
        return float((v[0] - 2.0) ** 2)

    def objective_grad(self, v):
        return np.array([2.0 * (v[0] - 2.0)])

    def constraints(self, v):
        return np.array([1.0 - v[0]])

    def jac_t(self, v, w):
        return np.array([-w[0]])

    def max_violation(self, v):
        return max(0.0, v[0] - 1.0)


def test_augmented_lagrangian_finds_the_constrained_optimum():
    res = solve_local(_ToyProblem(), np.array([4.0]), NlpConfig())
    assert res.status == "converged"
    assert res.feasible
    assert res.point[0] == pytest.approx(1.0, abs=1e-5)
    assert res.max_violation <= 1e-6


def test_converged_implies_feasible_within_tolerance():
    inst = normalize_instance(2.0, [(1.0, 1.5)], "count")
    prob = build_problem(inst, "feasibility", chosen=np.array([1.0]))
    res = solve_local(prob, np.zeros(prob.layout.dim), NlpConfig())
    assert res.status == "converged"
    assert res.max_violation <= 1e-6
    assert res.feasible


def test_infeasible_pair_never_converges():
    # two unit squares cannot share a circle of radius 0.9
    inst = normalize_instance(0.9, [(1.0, 1.0), (1.0, 1.0)], "count")
    prob = build_problem(inst, "feasibility", chosen=np.array([1.0, 1.0]))
    cfg = NlpConfig(time_limit=2.0)
    rng = np.random.default_rng(0)
    res = solve_local(prob, random_start(prob, rng), cfg, clock=WorkClock(2.0))
    assert not res.feasible
    assert res.status in ("stalled", "time_limit", "iter_limit")
    assert res.max_violation > 1e-6


def test_solve_local_never_leaves_the_boxes():
    inst = normalize_instance(2.0, [(1.0, 1.5), (0.8, 0.8)], "count")
    prob = build_problem(inst, "relaxed", delta=0.05,
                         incumbent_value=0.0, incumbent_set=frozenset())
    rng = np.random.default_rng(4)
    res = solve_local(prob, random_start(prob, rng), NlpConfig(), clock=WorkClock(5.0))
    assert (res.point >= prob.lower - 1e-12).all()
    assert (res.point <= prob.upper + 1e-12).all()


def test_multistart_warm_start_comes_first_and_k1_matches_solve_local():
    inst = normalize_instance(2.0, [(1.0, 1.5)], "count")
    prob = build_problem(inst, "feasibility", chosen=np.array([1.0]))
    cfg = NlpConfig()
    warm = np.zeros(prob.layout.dim)
    direct = solve_local(prob, warm, cfg, clock=WorkClock(10.0))
    viamulti = multistart(prob, 1, cfg, np.random.default_rng(0),
                          warm_start=warm, clock=WorkClock(10.0))
    assert viamulti.point == pytest.approx(direct.point)
    assert viamulti.objective == direct.objective


def test_multistart_more_starts_never_hurt():
    inst = normalize_instance(3.0, [(1.0, 2.0), (1.5, 0.7)], "count")
    prob = build_problem(inst, "relaxed", delta=0.05,
                         incumbent_value=0.0, incumbent_set=frozenset())
    cfg = NlpConfig()
    few = multistart(prob, 2, cfg, np.random.default_rng(7), clock=WorkClock(30.0))
    many = multistart(prob, 6, cfg, np.random.default_rng(7), clock=WorkClock(90.0))
    if few.feasible:
        assert many.feasible
        assert many.objective <= few.objective + 1e-9


def test_multistart_is_deterministic():
    inst = normalize_instance(2.5, [(1.0, 1.0), (1.2, 0.9)], "count")
    prob = build_problem(inst, "feasibility", chosen=np.array([1.0, 1.0]))
    cfg = NlpConfig()
    a = multistart(prob, 5, cfg, np.random.default_rng(3), clock=WorkClock(20.0))
    b = multistart(prob, 5, cfg, np.random.default_rng(3), clock=WorkClock(20.0))
    assert a.point.tobytes() == b.point.tobytes()
    assert a.objective == b.objective
    assert a.wall_time == b.wall_time


def test_solve_feasibility_empty_choice_is_the_empty_packing():
    inst = normalize_instance(2.0, [(1.0, 1.0)], "count")
    sol = solve_feasibility(inst, np.zeros(1), NlpConfig(), np.random.default_rng(0))
    assert sol is not None
    assert sol.placements == ()
    assert sol.objective_value == 0.0
    assert sol.verified


def test_solve_feasibility_single_rectangle():
    inst = normalize_instance(2.0, [(1.0, 1.5)], "count")
    sol = solve_feasibility(inst, np.ones(1), NlpConfig(), np.random.default_rng(0),
                            clock=WorkClock(10.0))
    assert sol is not None
    assert sol.verified
    assert sol.placements[0].rect_id == 1


def test_solve_feasibility_prechecks_reject_fast():
    cfg = NlpConfig()
    rng = np.random.default_rng(0)
    # selected area above the container area
    big = normalize_instance(1.0, [(1.5, 1.5), (1.5, 1.4)], "count")
    assert solve_feasibility(big, np.ones(2), cfg, rng) is None
    # both orientations of one rectangle
    spun = expand_rotations(
        normalize_instance(3.0, [(1.0, 2.0)], "count", rotation_allowed=True)
    )
    assert solve_feasibility(spun, np.ones(2), cfg, rng) is None
    # a rectangle whose diagonal exceeds the diameter
    unfit = normalize_instance(1.0, [(0.5, 0.5), (3.0, 3.0)], "count")
    assert solve_feasibility(unfit, np.array([0.0, 1.0]), cfg, rng) is None


def test_solve_feasibility_places_seven_from_a_warm_start(
    reference_packings, benchmark_text
):
    inst = parse_instance(benchmark_text, "count", False, False)
    placements = placements_from_dict(reference_packings["ref_count"])
    idx = placement_index_map(inst)
    chosen = np.zeros(10)
    prob = build_problem(inst, "feasibility", chosen=np.ones(10) * 0.0)
    warm = np.zeros(prob.layout.dim)
    for p in placements:
        k = idx[(p.rect_id, p.rotated)]
        chosen[k] = 1.0
        warm[prob.layout.x][k] = p.x
        warm[prob.layout.y][k] = p.y
    sol = solve_feasibility(inst, chosen, NlpConfig(), np.random.default_rng(0),
                            warm_start=warm, clock=WorkClock(100.0))
    assert sol is not None
    assert sol.verified
    assert len(sol.placements) == 7
    assert sol.objective_value == pytest.approx(7.0)


def test_solve_feasibility_rotated_choice_maps_back_to_source_ids():
    inst = expand_rotations(
        normalize_instance(1.2, [(2.0, 0.5)], "count", rotation_allowed=True)
    )
    # select only the rotated copy; the placement must carry the original id
    chosen = np.array([0.0, 1.0])
    sol = solve_feasibility(inst, chosen, NlpConfig(), np.random.default_rng(1),
                            clock=WorkClock(20.0))
    assert sol is not None
    assert sol.placements[0].rect_id == 1
    assert sol.placements[0].rotated
