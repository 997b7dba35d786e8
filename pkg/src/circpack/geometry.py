"""Exact feasibility checks for rectangle-in-circle packings.

All containment tests compare squared distances against the squared radius so
that no square roots enter the verdicts; ``coordinate_bound`` is the one
routine that takes a root, because its value is used as a box limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

from .model import Instance, PackingSolution, Placement, solution_value

DEFAULT_TOL = 1e-6

CORNER_SIGNS = ((-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0))


class StructuralError(ValueError):
    """A solution references data that does not exist or is not allowed."""


def coordinate_bound(length: float, width: float, radius: float) -> float:
    """Largest |x| at which a rectangle of the given orientation can sit.

    Returns sqrt(R^2 - W^2/4) - L/2.  A negative value means the rectangle
    cannot be packed at any x in this orientation; -inf means the width alone
    already exceeds the diameter so the root is undefined.
    """
    half_w = 0.5 * width
    under = radius * radius - half_w * half_w
    if under < 0.0:
        return -math.inf
    return math.sqrt(under) - 0.5 * length


def _corner_excesses(p: Placement, length: float, width: float, radius: float):
    """Squared-distance excess of each corner over the container boundary."""
    r_sq = radius * radius
    out = []
    for sx, sy in CORNER_SIGNS:
        cx = p.x + sx * 0.5 * length
        cy = p.y + sy * 0.5 * width
        out.append((sx, sy, cx * cx + cy * cy - r_sq))
    return out

def corners_inside(p: Placement, length: float, width: float, radius: float, tol: float = DEFAULT_TOL) -> bool:
    """True when all four corners lie inside the container, within tol."""
    return all(e <= tol for _, _, e in _corner_excesses(p, length, width, radius))


def separation_gap(
    p_a: Placement, dims_a: Tuple[float, float], p_b: Placement, dims_b: Tuple[float, float]
) -> float:
    """Largest axis gap between two placed rectangles; >= 0 means no overlap."""
    gap_x = abs(p_a.x - p_b.x) - 0.5 * (dims_a[0] + dims_b[0])
    gap_y = abs(p_a.y - p_b.y) - 0.5 * (dims_a[1] + dims_b[1])
    return max(gap_x, gap_y)


def separated(
    p_a: Placement, dims_a: Tuple[float, float], p_b: Placement, dims_b: Tuple[float, float],
    tol: float = DEFAULT_TOL,
) -> bool:
    return separation_gap(p_a, dims_a, p_b, dims_b) >= -tol


@dataclass
class FeasibilityReport:
    """Every violated condition of a candidate packing, with magnitudes.

    Containment entries are (rect_id, corner_label, squared-distance excess);
    overlap entries are (rect_id_a, rect_id_b, penetration depth).  Structure
    entries cover duplicate ids and broken square-prefix ordering, each
    weighted 1.0.  max_violation is the largest magnitude across all lists,
    0.0 when every list is empty.
    """

    containment_violations: List[Tuple[int, str, float]] = field(default_factory=list)
    overlap_violations: List[Tuple[int, int, float]] = field(default_factory=list)
    structure_violations: List[str] = field(default_factory=list)
    max_violation: float = 0.0

    def feasible_within(self, tol: float) -> bool:
        return self.max_violation <= tol


def _corner_label(sx: float, sy: float) -> str:
    return ("-" if sx < 0 else "+") + ("-" if sy < 0 else "+")


def verify_solution(
    inst: Instance,
    solution: Union[PackingSolution, Sequence[Placement]],
    tol: float = DEFAULT_TOL,
) -> FeasibilityReport:
    """Check a packing against the container and pairwise separation.

    Placements refer to user-supplied rectangle ids; a rotated placement is
    checked with its dimensions swapped.  Unknown ids and rotation flags on a
    no-rotation instance raise StructuralError.  Everything else is reported
    as a violation, never an exception: corner excursions, overlapping pairs
    (including a rectangle id listed twice), an id packed in both
    orientations, and, for square instances under the count objective, packed
    ids that do not form a prefix 1..k of the area-sorted order.
    """
    placements = solution.placements if isinstance(solution, PackingSolution) else tuple(solution)
    by_id = {r.id: r for r in inst.original_rectangles()}

    report = FeasibilityReport()
    worst = 0.0

    dims = []
    for p in placements:
        rect = by_id.get(p.rect_id)
        if rect is None:
            raise StructuralError(f"placement refers to unknown rectangle id {p.rect_id}")
        if p.rotated and not inst.rotation_allowed:
            raise StructuralError(f"rectangle {p.rect_id} is rotated but rotation is not allowed")
        dims.append(rect.oriented(p.rotated))

    for p, (length, width) in zip(placements, dims):
        for sx, sy, excess in _corner_excesses(p, length, width, inst.radius):
            if excess > 0.0:
                report.containment_violations.append((p.rect_id, _corner_label(sx, sy), excess))
                worst = max(worst, excess)

    for a in range(len(placements)):
        for b in range(a + 1, len(placements)):
            gap = separation_gap(placements[a], dims[a], placements[b], dims[b])
            if gap < 0.0:
                report.overlap_violations.append(
                    (placements[a].rect_id, placements[b].rect_id, -gap)
                )
                worst = max(worst, -gap)

    seen: dict = {}
    for p in placements:
        if p.rect_id in seen:
            report.structure_violations.append(
                f"rectangle {p.rect_id} appears more than once"
            )
            worst = max(worst, 1.0)
        seen[p.rect_id] = p.rotated

    if inst.square_mode and inst.objective_mode == "count" and placements:
        packed = sorted(seen.keys())
        if packed != list(range(1, len(packed) + 1)):
            report.structure_violations.append(
                f"square count packing must use ids 1..k, got {packed}"
            )
            worst = max(worst, 1.0)

    report.max_violation = worst
    return report


def evaluate_solution(
    inst: Instance, placements: Sequence[Placement], tol: float = DEFAULT_TOL
) -> PackingSolution:
    """Bundle placements into a PackingSolution with objective and verdict."""
    report = verify_solution(inst, placements, tol)
    return PackingSolution(
        placements=tuple(placements),
        objective_value=solution_value(inst, placements),
        verified=report.feasible_within(tol),
        max_violation=report.max_violation,
    )


__all__ = [
    "DEFAULT_TOL",
    "StructuralError",
    "coordinate_bound",
    "corners_inside",
    "separation_gap",
    "separated",
    "FeasibilityReport",
    "verify_solution",
    "evaluate_solution",
]
