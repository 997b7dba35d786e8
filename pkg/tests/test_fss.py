import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from circpack.formulation import exclusion_pairs, expand_rotations
from circpack.fss import (
    FssConfig,
    round_alphas,
    run,
    run_replication,
    solve_P_initial,
)
from circpack.model import Incumbent, normalize_instance
from circpack.nlp import NlpConfig, WorkClock


def quick_cfg(**kw) -> FssConfig:
    kw.setdefault("time_scale", 0.02)
    kw.setdefault("replications", 1)
    return FssConfig(**kw)


def test_round_alphas_nearest_integer_with_tie_up():
    inst = normalize_instance(10.0, [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)], "count")
    out = round_alphas(np.array([0.97, 0.03, 0.5]), inst)
    assert out.tolist() == [1.0, 0.0, 1.0]


def test_round_alphas_strict_mode_skips_repairs():
    inst = expand_rotations(
        normalize_instance(3.0, [(1.0, 2.0)], "count", rotation_allowed=True)
    )
    out = round_alphas(np.array([0.9, 0.8]), inst, strict=True)
    assert out.tolist() == [1.0, 1.0]  # both orientations survive untouched


def test_round_alphas_exclusion_repair_keeps_larger_fraction():
    inst = expand_rotations(
        normalize_instance(3.0, [(1.0, 2.0)], "count", rotation_allowed=True)
    )
    assert round_alphas(np.array([0.9, 0.8]), inst).tolist() == [1.0, 0.0]
    assert round_alphas(np.array([0.6, 0.7]), inst).tolist() == [0.0, 1.0]
    # exact tie goes to the unrotated original
    assert round_alphas(np.array([0.7, 0.7]), inst).tolist() == [1.0, 0.0]


def test_round_alphas_drops_unfittable():
    inst = normalize_instance(1.0, [(0.5, 0.5), (3.0, 3.0)], "count")
    out = round_alphas(np.array([1.0, 1.0]), inst)
    assert out.tolist() == [1.0, 0.0]


def test_round_alphas_square_prefix_truncation():
    inst = normalize_instance(
        10.0, [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], "count", square_mode=True
    )
    out = round_alphas(np.array([0.9, 0.2, 0.9]), inst)
    assert out.tolist() == [1.0, 0.0, 0.0]


def test_round_alphas_area_repair_drops_smallest_fraction_first():
    # each 1.3 square fits alone (half-diagonal 0.92 < 1) but their areas
    # sum to 3.38, above the capacity pi
    inst = normalize_instance(1.0, [(1.3, 1.3), (1.3, 1.3)], "count")
    out = round_alphas(np.array([0.8, 0.6]), inst)
    assert out.tolist() == [1.0, 0.0]
    out = round_alphas(np.array([0.6, 0.8]), inst)
    assert out.tolist() == [0.0, 1.0]


@given(st.lists(st.floats(min_value=0.0, max_value=1.0, width=32),
                min_size=20, max_size=20))
def test_round_alphas_output_respects_the_cuts(alphas):
    inst = expand_rotations(
        normalize_instance(
            4.18,
            [(1.10, 1.61), (2.20, 1.08), (1.68, 1.46), (1.82, 2.61), (2.70, 2.57),
             (3.21, 2.21), (2.99, 3.51), (3.68, 3.42), (4.62, 3.36), (3.79, 4.79)],
            "count",
            rotation_allowed=True,
        )
    )
    out = round_alphas(np.array(alphas), inst)
    assert set(out.tolist()) <= {0.0, 1.0}
    for i, j in exclusion_pairs(inst):
        assert out[i] + out[j] <= 1.0
    packed_area = sum(r.area for k, r in enumerate(inst.rectangles) if out[k] > 0.5)
    assert packed_area <= inst.area_capacity


@given(st.lists(st.floats(min_value=0.0, max_value=1.0, width=32),
                min_size=4, max_size=4))
def test_round_alphas_square_mode_always_yields_a_prefix(alphas):
    inst = normalize_instance(
        2.0, [(1.0, 1.0), (1.2, 1.2), (1.4, 1.4), (1.6, 1.6)], "count",
        square_mode=True,
    )
    out = round_alphas(np.array(alphas), inst)
    chosen = [k for k in range(4) if out[k] > 0.5]
    assert chosen == list(range(len(chosen)))


def test_greedy_packs_a_single_fitting_rectangle():
    inst = normalize_instance(2.0, [(1.0, 1.5)], "count")
    cfg = quick_cfg()
    sol = solve_P_initial(inst, cfg, np.random.default_rng(0), WorkClock(10.0))
    assert sol is not None
    assert len(sol.placements) == 1
    assert sol.objective_value == 1.0


def test_greedy_on_empty_instance_yields_the_empty_packing():
    inst = normalize_instance(2.0, [], "count")
    cfg = quick_cfg()
    sol = solve_P_initial(inst, cfg, np.random.default_rng(0), WorkClock(1.0))
    assert sol.placements == ()
    assert sol.objective_value == 0.0
    assert sol.verified


def test_run_on_unpackable_instance_returns_the_empty_solution():
    inst = normalize_instance(1.0, [(3.0, 3.0), (2.9, 2.9)], "count")
    report = run(inst, quick_cfg())
    assert report.objective_value == 0.0
    assert report.solution.placements == ()
    assert report.replication_found == 0


def test_delta_trajectory_runs_fourteen_solves_without_stall():
    # a packed singleton cannot be improved on, so every iteration is
    # non-improving and only the delta floor can end the loop
    inst = normalize_instance(2.0, [(1.0, 1.5)], "count")
    cfg = quick_cfg(stall_limit=10**9)
    inc, state = run_replication(inst, cfg, np.random.default_rng(0), Incumbent())
    assert inc.value == 1.0
    assert state.iteration == 14
    assert state.delta == 0.05 * 0.5**13
    assert state.delta <= cfg.delta_floor
    assert state.stall == 14
    assert state.log[-1].startswith("replication done after 14 iterations")


def test_stall_limit_ends_the_loop_early():
    inst = normalize_instance(2.0, [(1.0, 1.5)], "count")
    inc, state = run_replication(inst, quick_cfg(), np.random.default_rng(0), Incumbent())
    assert state.iteration == 3
    assert state.stall == 3
    assert state.delta > 1e-5


def test_incumbent_value_is_monotone_across_chained_replications():
    inst = normalize_instance(2.2, [(1.0, 1.0), (1.2, 0.8), (0.9, 1.4)], "count")
    cfg = quick_cfg()
    inc1, _ = run_replication(inst, cfg, np.random.default_rng(1), Incumbent())
    inc2, _ = run_replication(inst, cfg, np.random.default_rng(2), inc1)
    assert inc2.value >= inc1.value


def test_incumbent_updates_only_on_verified_solutions():
    inst = normalize_instance(2.2, [(1.0, 1.0), (1.2, 0.8)], "count")
    report = run(inst, quick_cfg(replications=2))
    if report.objective_value > 0:
        assert report.solution.verified
        assert report.solution.max_violation <= 1e-6


def test_run_packs_two_easy_squares_and_reports_the_replication():
    inst = normalize_instance(1.3, [(1.0, 1.0), (1.0, 1.0)], "count")
    report = run(inst, quick_cfg(time_scale=0.05))
    assert report.objective_value == 2.0
    assert report.replication_found == 1
    assert len(report.solution.placements) == 2


def test_run_is_deterministic():
    inst = normalize_instance(
        2.5, [(1.0, 1.0), (1.5, 0.8), (0.7, 2.0)], "count", rotation_allowed=True
    )
    cfg = quick_cfg(replications=2, seed=42, time_scale=0.05)
    a = run(inst, cfg)
    b = run(inst, cfg)
    assert a.objective_value == b.objective_value
    assert a.solution.placements == b.solution.placements
    assert a.log == b.log
    assert a.total_time == b.total_time


def test_fresh_incumbent_per_replication_flag():
    inst = normalize_instance(2.0, [(1.0, 1.0), (1.2, 0.8)], "count")
    carried = run(inst, quick_cfg(replications=2, carry_incumbent=True))
    fresh = run(inst, quick_cfg(replications=2, carry_incumbent=False))
    # both modes must deliver a verified report; values may differ
    assert carried.objective_value >= 0.0
    assert fresh.objective_value >= 0.0


def test_value_objective_with_all_negative_values_packs_nothing():
    inst = normalize_instance(3.0, [(1.0, 1.0, -2.0), (1.5, 1.0, -0.5)], "value")
    report = run(inst, quick_cfg())
    assert report.objective_value == 0.0
    assert report.solution.placements == ()


def test_solve_budget_counts_expanded_rectangles():
    # rotation doubles the rectangle set, and the per-solve budget follows it
    plain = normalize_instance(3.0, [(1.0, 2.0), (1.5, 0.7)], "count")
    inst = expand_rotations(
        normalize_instance(3.0, [(1.0, 2.0), (1.5, 0.7)], "count", rotation_allowed=True)
    )
    cfg = FssConfig(time_scale=1.0)
    assert cfg.solve_budget(plain) == 20.0
    assert inst.n == 4
    assert cfg.solve_budget(inst) == 40.0
    assert FssConfig(time_scale=0.25).solve_budget(inst) == 10.0
