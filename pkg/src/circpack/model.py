"""Problem data types: rectangles, instances, placements, solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

OBJECTIVE_MODES = ("count", "area", "value")


class InstanceError(ValueError):
    """Raised when instance data violates a structural requirement."""


@dataclass(frozen=True)
class Rectangle:
    """One rectangle, axis aligned, dimensions fixed.

    ``rotated_copy_of`` is None for rectangles supplied by the user and holds
    the id of the source rectangle for the swapped-dimension copies that are
    appended when rotation is enabled.
    """

    id: int
    length: float
    width: float
    value: float
    rotated_copy_of: Optional[int] = None

    @property
    def area(self) -> float:
        return self.length * self.width

    def oriented(self, rotated: bool) -> Tuple[float, float]:
        """Return (length, width) for the placed orientation."""
        if rotated:
            return self.width, self.length
        return self.length, self.width


@dataclass(frozen=True)
class Instance:
    """A container radius plus the rectangles competing for space inside it."""

    radius: float
    rectangles: Tuple[Rectangle, ...]
    objective_mode: str = "count"
    rotation_allowed: bool = False
    square_mode: bool = False

    @property
    def n(self) -> int:
        return len(self.rectangles)

    @property
    def area_capacity(self) -> float:
        return math.pi * self.radius * self.radius

    def rectangle(self, rect_id: int) -> Rectangle:
        for r in self.rectangles:
            if r.id == rect_id:
                return r
        raise KeyError(f"no rectangle with id {rect_id}")

    def original_rectangles(self) -> Tuple[Rectangle, ...]:
        """Rectangles supplied by the user, excluding appended rotated copies."""
        return tuple(r for r in self.rectangles if r.rotated_copy_of is None)


@dataclass(frozen=True)
class Placement:
    """A packed rectangle: id, center coordinates, orientation flag."""

    rect_id: int
    x: float
    y: float
    rotated: bool = False


@dataclass(frozen=True)
class PackingSolution:
    """A set of placements with its objective value and verification result."""

    placements: Tuple[Placement, ...]
    objective_value: float
    verified: bool
    max_violation: float

    @property
    def packed_ids(self) -> Tuple[int, ...]:
        return tuple(p.rect_id for p in self.placements)


@dataclass
class Incumbent:
    """Best verified solution found so far; value is -inf when empty."""

    value: float = -math.inf
    packed: frozenset = field(default_factory=frozenset)
    solution: Optional[PackingSolution] = None

    @property
    def is_empty(self) -> bool:
        return self.solution is None


RawRect = Tuple[float, ...]  # (L, W) or (L, W, V)


def normalize_instance(
    radius: float,
    rects: Sequence[RawRect],
    objective_mode: str = "count",
    rotation_allowed: bool = False,
    square_mode: bool = False,
) -> Instance:
    """Validate raw rectangle data and build a canonical Instance.

    Rectangles are stably sorted by area ascending and assigned ids 1..n in
    that order.  Values are filled per objective mode: 1 for count, L*W for
    area, and taken from the input for value mode (where a third column is
    required).
    """
    if objective_mode not in OBJECTIVE_MODES:
        raise InstanceError(f"unknown objective mode {objective_mode!r}")
    if not (radius > 0) or not math.isfinite(radius):
        raise InstanceError(f"container radius must be positive, got {radius}")
    if square_mode and rotation_allowed:
        raise InstanceError("rotation is redundant for squares and must be off")

    staged = []
    for k, raw in enumerate(rects):
        if len(raw) == 2:
            length, width = raw
            value = None
        elif len(raw) == 3:
            length, width, value = raw
        else:
            raise InstanceError(f"rectangle {k + 1}: expected 2 or 3 fields, got {len(raw)}")
        if not (length > 0 and width > 0) or not (math.isfinite(length) and math.isfinite(width)):
            raise InstanceError(f"rectangle {k + 1}: nonpositive dimension {length} x {width}")
        if square_mode and length != width:
            raise InstanceError(f"rectangle {k + 1}: square mode requires L = W, got {length} x {width}")
        if objective_mode == "value":
            if value is None:
                raise InstanceError(f"rectangle {k + 1}: value mode requires a third column")
            if not math.isfinite(value):
                raise InstanceError(f"rectangle {k + 1}: non-finite value {value}")
        elif objective_mode == "count":
            value = 1.0
        else:
            value = length * width
        staged.append((length, width, float(value)))

    order = sorted(range(len(staged)), key=lambda k: staged[k][0] * staged[k][1])
    rectangles = tuple(
        Rectangle(id=i + 1, length=staged[k][0], width=staged[k][1], value=staged[k][2])
        for i, k in enumerate(order)
    )
    return Instance(
        radius=float(radius),
        rectangles=rectangles,
        objective_mode=objective_mode,
        rotation_allowed=rotation_allowed,
        square_mode=square_mode,
    )


def solution_value(inst: Instance, placements: Sequence[Placement]) -> float:
    """Sum of rectangle values over placements, by id lookup."""
    by_id = {r.id: r for r in inst.original_rectangles()}
    return sum(by_id[p.rect_id].value for p in placements)


__all__ = [
    "OBJECTIVE_MODES",
    "InstanceError",
    "Rectangle",
    "Instance",
    "Placement",
    "PackingSolution",
    "Incumbent",
    "normalize_instance",
    "solution_value",
]
