"""Reading and writing instance files, solution JSON, and SVG drawings.

Instance file format, one rectangle per line after the header:

    # comments start with '#' and may appear anywhere
    n R
    L W [V]

The V column is consumed only in value mode, where it is required.  Writers
are deterministic: identical data produces identical bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Dict, List, Optional, Sequence, Tuple

from .model import Instance, InstanceError, PackingSolution, Placement, normalize_instance

SOLUTION_SCHEMA_KEYS = (
    "objective_mode",
    "objective_value",
    "placements",
    "verified",
    "max_violation",
    "replication_found",
    "total_time_s",
    "solver_config",
)


class ParseError(ValueError):
    """Malformed instance or solution file; message carries the line."""


def parse_instance(
    text: str,
    objective_mode: str = "count",
    rotation_allowed: bool = False,
    square_mode: bool = False,
) -> Instance:
    """Parse instance text into a normalized Instance."""
    rows: List[Tuple[int, List[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))

    if not rows:
        raise ParseError("empty instance file")
    header_line, header = rows[0]
    if len(header) != 2:
        raise ParseError(f"line {header_line}: header must be 'n R', got {' '.join(header)!r}")
    try:
        n = int(header[0])
        radius = float(header[1])
    except ValueError as exc:
        raise ParseError(f"line {header_line}: bad header: {exc}") from None
    if n < 0:
        raise ParseError(f"line {header_line}: negative rectangle count {n}")
    body = rows[1:]
    if len(body) != n:
        raise ParseError(f"header says {n} rectangles, file has {len(body)} data lines")

    rects = []
    for lineno, fields in body:
        if len(fields) not in (2, 3):
            raise ParseError(f"line {lineno}: expected 'L W' or 'L W V', got {len(fields)} fields")
        try:
            rects.append(tuple(float(f) for f in fields))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad number: {exc}") from None

    try:
        return normalize_instance(
            radius, rects, objective_mode=objective_mode,
            rotation_allowed=rotation_allowed, square_mode=square_mode,
        )
    except InstanceError as exc:
        raise ParseError(str(exc)) from None


def load_instance(path: str, **kwargs) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read(), **kwargs)


def _fmt(x: float) -> str:
    """Shortest decimal that round-trips through float()."""
    return repr(float(x))


def render_instance(inst: Instance, comment: Optional[str] = None) -> str:
    """Instance text; includes the V column only in value mode."""
    lines = []
    if comment:
        for part in comment.splitlines():
            lines.append(f"# {part}")
    originals = inst.original_rectangles()
    lines.append(f"{len(originals)} {_fmt(inst.radius)}")
    for r in originals:
        row = f"{_fmt(r.length)} {_fmt(r.width)}"
        if inst.objective_mode == "value":
            row += f" {_fmt(r.value)}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_instance(inst: Instance, path: str, comment: Optional[str] = None) -> None:
    _atomic_write(path, render_instance(inst, comment))


def solution_to_dict(
    inst: Instance,
    solution: PackingSolution,
    replication_found: int,
    total_time: float,
    solver_config: Dict,
) -> Dict:
    """Assemble the solution JSON object with a fixed key order."""
    return {
        "objective_mode": inst.objective_mode,
        "objective_value": solution.objective_value,
        "placements": [
            {"id": p.rect_id, "x": p.x, "y": p.y, "rotated": p.rotated}
            for p in solution.placements
        ],
        "verified": solution.verified,
        "max_violation": solution.max_violation,
        "replication_found": replication_found,
        "total_time_s": total_time,
        "solver_config": solver_config,
    }


def render_solution(doc: Dict) -> str:
    missing = [k for k in SOLUTION_SCHEMA_KEYS if k not in doc]
    if missing:
        raise ValueError(f"solution document is missing keys: {missing}")
    return json.dumps(doc, indent=2) + "\n"


def save_solution(doc: Dict, path: str) -> None:
    _atomic_write(path, render_solution(doc))


def parse_solution(text: str) -> Dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"solution is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("solution JSON must be an object")
    for key in ("objective_mode", "placements"):
        if key not in doc:
            raise ParseError(f"solution JSON lacks required key {key!r}")
    if not isinstance(doc["placements"], list):
        raise ParseError("placements must be a list")
    return doc


def load_solution(path: str) -> Dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_solution(fh.read())


def placements_from_dict(doc: Dict) -> List[Placement]:
    out = []
    for k, entry in enumerate(doc["placements"]):
        try:
            out.append(
                Placement(
                    rect_id=int(entry["id"]),
                    x=float(entry["x"]),
                    y=float(entry["y"]),
                    rotated=bool(entry.get("rotated", False)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"placement {k}: {exc}") from None
    return out


_PALETTE = (
    "#7fb3d5", "#f5b041", "#82e0aa", "#f1948a", "#bb8fce",
    "#76d7c4", "#f7dc6f", "#d98880", "#85c1e9", "#f0b27a",
)


def render_svg(inst: Instance, placements: Sequence[Placement]) -> str:
    """Deterministic SVG of a packing; y axis points up as in the math."""
    radius = inst.radius
    margin = 0.08 * radius
    half = radius + margin
    by_id = {r.id: r for r in inst.original_rectangles()}

    def fmt(v: float) -> str:
        return f"{v:.4f}"

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{fmt(-half)} {fmt(-half)} {fmt(2 * half)} {fmt(2 * half)}">',
        f'  <circle cx="0" cy="0" r="{fmt(radius)}" fill="#fdfefe" stroke="#34495e" stroke-width="{fmt(0.02 * radius)}"/>',
    ]
    font = 0.09 * radius
    for p in placements:
        rect = by_id[p.rect_id]
        length, width = rect.oriented(p.rotated)
        x0 = p.x - 0.5 * length
        y0 = -p.y - 0.5 * width  # svg y grows downward
        color = _PALETTE[(p.rect_id - 1) % len(_PALETTE)]
        label = f"{p.rect_id}r" if p.rotated else str(p.rect_id)
        lines.append(
            f'  <rect x="{fmt(x0)}" y="{fmt(y0)}" width="{fmt(length)}" height="{fmt(width)}"'
            f' fill="{color}" fill-opacity="0.85" stroke="#2c3e50" stroke-width="{fmt(0.012 * radius)}"/>'
        )
        lines.append(
            f'  <text x="{fmt(p.x)}" y="{fmt(-p.y + 0.35 * font)}" font-size="{fmt(font)}"'
            f' font-family="sans-serif" text-anchor="middle" fill="#1b2631">{label}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(inst: Instance, placements: Sequence[Placement], path: str) -> None:
    _atomic_write(path, render_svg(inst, placements))


__all__ = [
    "ParseError",
    "parse_instance",
    "load_instance",
    "render_instance",
    "save_instance",
    "solution_to_dict",
    "render_solution",
    "save_solution",
    "parse_solution",
    "load_solution",
    "placements_from_dict",
    "render_svg",
    "save_svg",
]
