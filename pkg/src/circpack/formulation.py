"""Continuous optimization models for the circular packing problem.

A problem instance is turned into a flat variable vector

    v = [a_1..a_n, x_1..x_n, y_1..y_n, b_1..b_p]

where a_i in [0,1] selects rectangle i, (x_i, y_i) is its center, and b_k is
the axis-mixing weight of the k-th unordered rectangle pair.  Three model
kinds share this layout:

* ``minlp``       selection variables are meant to be binary (not enforced
                  here; the flag ``alpha_integral`` records the intent),
* ``relaxed``     selection is continuous with a near-binary constraint
                  sum a(1-a) <= delta,
* ``feasibility`` selection is frozen to a given 0/1 vector and the objective
                  is the total squared violation of containment and
                  separation, so that driving it to zero yields a packing.

All constraints are written as g(v) >= 0.  The non-smooth pair separation
max(|dx| - (L_i+L_j)/2, |dy| - (W_i+W_j)/2) >= 0 is handled by the weight b:
b*gap_x + (1-b)*gap_y >= 0 for some b in [0,1] is equivalent to the max being
nonnegative, and |t| is softened to sqrt(t^2 + eps) to make gradients exist
at t = 0.  The softened gap overestimates the true gap by at most sqrt(eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .model import Instance, Rectangle

DEFAULT_ABS_SOFTENING = 1e-8

# Corner sign blocks, one constraint family each: (sx, sy) offsets of L/2, W/2.
_CORNER_SX = np.array([-1.0, -1.0, 1.0, 1.0])
_CORNER_SY = np.array([-1.0, 1.0, -1.0, 1.0])


def expand_rotations(inst: Instance) -> Instance:
    """Append a swapped-dimension copy of every non-square rectangle.

    Copies get ids n+1, n+2, ... in the order of their sources and carry
    ``rotated_copy_of``.  Packing a copy means packing the source rectangle
    turned by 90 degrees, so at most one of the two may be selected; the
    corresponding pairs come from :func:`exclusion_pairs`.  Squares gain
    nothing from turning and are not copied.
    """
    if inst.square_mode and inst.rotation_allowed:
        raise ValueError("turning a square changes nothing; refuse the combination")
    if not inst.rotation_allowed:
        return inst
    copies = []
    next_id = inst.n + 1
    for r in inst.rectangles:
        if r.rotated_copy_of is not None:
            raise ValueError("instance is already expanded")
        if r.length != r.width:
            copies.append(
                Rectangle(
                    id=next_id,
                    length=r.width,
                    width=r.length,
                    value=r.value,
                    rotated_copy_of=r.id,
                )
            )
            next_id += 1
    if not copies:
        return inst
    return Instance(
        radius=inst.radius,
        rectangles=inst.rectangles + tuple(copies),
        objective_mode=inst.objective_mode,
        rotation_allowed=inst.rotation_allowed,
        square_mode=inst.square_mode,
    )


def exclusion_pairs(inst: Instance) -> Tuple[Tuple[int, int], ...]:
    """0-based index pairs (source, rotated copy) that exclude each other."""
    index_of = {r.id: k for k, r in enumerate(inst.rectangles)}
    out = []
    for k, r in enumerate(inst.rectangles):
        if r.rotated_copy_of is not None:
            out.append((index_of[r.rotated_copy_of], k))
    return tuple(out)


def placement_index_map(inst: Instance) -> Dict[Tuple[int, bool], int]:
    """Map (original id, rotated flag) to the 0-based rectangle index."""
    out: Dict[Tuple[int, bool], int] = {}
    for k, r in enumerate(inst.rectangles):
        if r.rotated_copy_of is None:
            out[(r.id, False)] = k
        else:
            out[(r.rotated_copy_of, True)] = k
    return out


@dataclass(frozen=True)
class VariableLayout:
    """Index bookkeeping for the flat vector [alpha, x, y, beta]."""

    n: int
    n_pairs: int

    @property
    def dim(self) -> int:
        return 3 * self.n + self.n_pairs

    @property
    def alpha(self) -> slice:
        return slice(0, self.n)

    @property
    def x(self) -> slice:
        return slice(self.n, 2 * self.n)

    @property
    def y(self) -> slice:
        return slice(2 * self.n, 3 * self.n)

    @property
    def beta(self) -> slice:
        return slice(3 * self.n, 3 * self.n + self.n_pairs)


@dataclass(frozen=True)
class PairSet:
    """All unordered index pairs i < j over the rectangles of an instance."""

    first: np.ndarray
    second: np.ndarray

    @classmethod
    def complete(cls, n: int) -> "PairSet":
        idx_i, idx_j = np.triu_indices(n, k=1)
        return cls(first=idx_i.astype(np.int64), second=idx_j.astype(np.int64))

    @property
    def size(self) -> int:
        return int(self.first.shape[0])


class ProblemFunctions:
    """Callable bundle for one model: objective, constraints, gradients.

    The objective is always MINIMIZED.  For selection models it is
    -sum(a_i * V_i); for feasibility it is the squared-violation total.
    Constraints are stacked in a fixed documented family order; ``labels``
    names each row.  ``jac_t`` computes J(v)^T w without forming the dense
    Jacobian, which ``jacobian`` assembles only for testing.
    """

    def __init__(
        self,
        inst: Instance,
        kind: str,
        delta: Optional[float] = None,
        chosen: Optional[np.ndarray] = None,
        incumbent_value: Optional[float] = None,
        incumbent_set: Optional[frozenset] = None,
        eps_abs: float = DEFAULT_ABS_SOFTENING,
    ):
        if kind not in ("minlp", "relaxed", "feasibility"):
            raise ValueError(f"unknown model kind {kind!r}")
        if kind == "relaxed" and (delta is None or delta <= 0.0):
            raise ValueError("relaxed model needs delta > 0")
        if kind == "feasibility" and chosen is None:
            raise ValueError("feasibility model needs the chosen 0/1 vector")

        self.inst = inst
        self.kind = kind
        self.delta = float(delta) if delta is not None else None
        self.eps_abs = float(eps_abs)
        self.alpha_integral = kind == "minlp"
        self.feasibility_objective = kind == "feasibility"

        n = inst.n
        self.n = n
        self.L = np.array([r.length for r in inst.rectangles])
        self.W = np.array([r.width for r in inst.rectangles])
        self.V = np.array([r.value for r in inst.rectangles])
        self.A = self.L * self.W
        self.R = float(inst.radius)
        r_sq = self.R * self.R
        self.q = 0.25 * (self.L**2 + self.W**2)  # squared center-to-corner distance

        self.pairs = PairSet.complete(n)
        self.layout = VariableLayout(n=n, n_pairs=self.pairs.size)

        # Pair separation multiplier: a_i*a_j in general; under the square
        # ordering constraints a_j alone suffices because j follows i in the
        # area order, so a_j = 1 forces a_i = 1.
        self.square_ordered = inst.square_mode and inst.objective_mode == "count"
        self.second_only = self.square_ordered

        # Largest |x| (and |y|) at which each rectangle can sit.  q > R^2
        # means the rectangle cannot fit at all and is frozen out.
        with np.errstate(invalid="ignore"):
            bx = np.sqrt(np.maximum(r_sq - 0.25 * self.W**2, 0.0)) - 0.5 * self.L
            by = np.sqrt(np.maximum(r_sq - 0.25 * self.L**2, 0.0)) - 0.5 * self.W
        self.fixed_zero = self.q > r_sq
        if self.square_ordered:
            # A prefix of the area order whose total area exceeds the
            # container already cannot be selected in full.
            too_big = np.cumsum(self.A) > inst.area_capacity
            self.fixed_zero = self.fixed_zero | too_big
        self.Bx = np.where(self.fixed_zero, 0.0, np.maximum(bx, 0.0))
        self.By = np.where(self.fixed_zero, 0.0, np.maximum(by, 0.0))

        self.exclusions = exclusion_pairs(inst)
        self.excl_i = np.array([i for i, _ in self.exclusions], dtype=np.int64)
        self.excl_j = np.array([j for _, j in self.exclusions], dtype=np.int64)
        self.incompatible = self._incompatible_pairs()
        self.area_capacity = inst.area_capacity
        self.incumbent_value = incumbent_value
        if incumbent_set is not None:
            in_set = np.zeros(n, dtype=bool)
            for k in incumbent_set:
                in_set[k] = True
            # Coefficients of the no-repeat cut: sum over ids outside the
            # incumbent of a_i plus sum inside of (1 - a_i) must reach 1.
            self.excl_sign = np.where(in_set, -1.0, 1.0)
            self.excl_const = float(in_set.sum())
        else:
            self.excl_sign = None
            self.excl_const = 0.0

        if chosen is not None:
            chosen = np.asarray(chosen, dtype=float)
            if chosen.shape != (n,):
                raise ValueError(f"chosen must have shape ({n},)")
            if self.fixed_zero[chosen > 0.5].any():
                raise ValueError("chosen selects a rectangle that cannot fit")
        self.chosen = chosen

        self.lower, self.upper = self._boxes()
        self._families = self._family_layout()
        self.m = sum(size for _, size in self._families)
        # Rough numpy work units per call, used by the deterministic clock.
        self.cost_value = 60 + 8 * n + 6 * self.pairs.size
        self.cost_grad = 60 + 10 * n + 8 * self.pairs.size

    # ---- construction helpers -------------------------------------------

    def _incompatible_pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        pi, pj = self.pairs.first, self.pairs.second
        too_wide = np.minimum(self.L[pi] + self.L[pj], self.W[pi] + self.W[pj]) > 2.0 * self.R
        return pi[too_wide], pj[too_wide]

    def _boxes(self) -> Tuple[np.ndarray, np.ndarray]:
        n, lay = self.n, self.layout
        lower = np.zeros(lay.dim)
        upper = np.zeros(lay.dim)
        if self.chosen is not None:
            lower[lay.alpha] = self.chosen
            upper[lay.alpha] = self.chosen
            active = self.chosen > 0.5
        else:
            lower[lay.alpha] = 0.0
            upper[lay.alpha] = np.where(self.fixed_zero, 0.0, 1.0)
            active = ~self.fixed_zero
        lower[lay.x] = np.where(active, -self.Bx, 0.0)
        upper[lay.x] = np.where(active, self.Bx, 0.0)
        lower[lay.y] = np.where(active, -self.By, 0.0)
        upper[lay.y] = np.where(active, self.By, 0.0)
        lower[lay.beta] = 0.0
        upper[lay.beta] = 1.0
        return lower, upper

    def _family_layout(self) -> List[Tuple[str, int]]:
        n, p = self.n, self.pairs.size
        if self.kind == "feasibility":
            return []
        fams = [
            ("x_high", n),
            ("x_low", n),
            ("y_high", n),
            ("y_low", n),
            ("corner", 4 * n),
            ("overlap", p),
        ]
        if self.kind == "relaxed":
            fams.append(("near_binary", 1))
        if self.exclusions:
            fams.append(("rotation_exclusion", len(self.exclusions)))
        if self.square_ordered and n > 1:
            fams.append(("square_order", n - 1))
        n_inc = int(self.incompatible[0].shape[0])
        if n_inc:
            fams.append(("incompatible", n_inc))
        fams.append(("area_cut", 1))
        if self.incumbent_value is not None:
            fams.append(("value_bound", 1))
        if self.excl_sign is not None:
            fams.append(("no_repeat", 1))
        return fams

    def family_slice(self, name: str) -> slice:
        at = 0
        for fam, size in self._families:
            if fam == name:
                return slice(at, at + size)
            at += size
        raise KeyError(name)

    def labels(self) -> List[str]:
        out = []
        for fam, size in self._families:
            out.extend(f"{fam}[{k}]" for k in range(size))
        return out

    # ---- evaluation ------------------------------------------------------

    def _parts(self, v: np.ndarray):
        lay = self.layout
        return v[lay.alpha], v[lay.x], v[lay.y], v[lay.beta]

    def _corner_values(self, a, x, y) -> np.ndarray:
        """(4, n) residuals; row order fixed by _CORNER_SX/_CORNER_SY."""
        cx = x[None, :] + _CORNER_SX[:, None] * (0.5 * self.L)[None, :]
        cy = y[None, :] + _CORNER_SY[:, None] * (0.5 * self.W)[None, :]
        r_sq = self.R * self.R
        return a[None, :] * (r_sq - self.q)[None, :] + self.q[None, :] - cx * cx - cy * cy

    def _overlap_core(self, a, x, y, b):
        pi, pj = self.pairs.first, self.pairs.second
        dx = x[pi] - x[pj]
        dy = y[pi] - y[pj]
        sdx = np.sqrt(dx * dx + self.eps_abs)
        sdy = np.sqrt(dy * dy + self.eps_abs)
        gap_x = sdx - 0.5 * (self.L[pi] + self.L[pj])
        gap_y = sdy - 0.5 * (self.W[pi] + self.W[pj])
        inner = b * gap_x + (1.0 - b) * gap_y
        mult = a[pj] if self.second_only else a[pi] * a[pj]
        return dx, dy, sdx, sdy, gap_x, gap_y, inner, mult

    def objective(self, v: np.ndarray) -> float:
        a, x, y, b = self._parts(v)
        if self.kind == "feasibility":
            cv = np.minimum(self._corner_values(a, x, y), 0.0)
            core = self._overlap_core(a, x, y, b)
            ov = np.minimum(core[7] * core[6], 0.0)
            return float(np.sum(cv * cv) + np.sum(ov * ov))
        return float(-np.dot(a, self.V))

    def objective_grad(self, v: np.ndarray) -> np.ndarray:
        lay = self.layout
        g = np.zeros(lay.dim)
        if self.kind == "feasibility":
            a, x, y, b = self._parts(v)
            # d/dg of min(g,0)^2 is 2*min(g,0), zero on the satisfied side.
            w_c = 2.0 * np.minimum(self._corner_values(a, x, y), 0.0)
            dx, dy, sdx, sdy, gap_x, gap_y, inner, mult = self._overlap_core(a, x, y, b)
            w_o = 2.0 * np.minimum(mult * inner, 0.0)
            self._accumulate_corners(g, w_c, v)
            self._accumulate_overlap(g, w_o, a, b, dx, dy, sdx, sdy, gap_x, gap_y, inner, mult)
            return g
        g[lay.alpha] = -self.V
        return g

    def packed_value(self, v: np.ndarray) -> float:
        """Current selection value sum(a_i V_i) regardless of model kind."""
        a = v[self.layout.alpha]
        return float(np.dot(a, self.V))

    def constraints(self, v: np.ndarray) -> np.ndarray:
        """All residuals g(v), feasibility meaning g >= 0, in family order."""
        if self.m == 0:
            return np.zeros(0)
        a, x, y, b = self._parts(v)
        out = np.empty(self.m)
        at = 0
        for fam, size in self._families:
            sl = slice(at, at + size)
            if fam == "x_high":
                out[sl] = a * self.Bx - x
            elif fam == "x_low":
                out[sl] = x + a * self.Bx
            elif fam == "y_high":
                out[sl] = a * self.By - y
            elif fam == "y_low":
                out[sl] = y + a * self.By
            elif fam == "corner":
                out[sl] = self._corner_values(a, x, y).ravel()
            elif fam == "overlap":
                core = self._overlap_core(a, x, y, b)
                out[sl] = core[7] * core[6]
            elif fam == "near_binary":
                out[sl] = self.delta - np.sum(a * (1.0 - a))
            elif fam == "rotation_exclusion":
                out[sl] = 1.0 - a[self.excl_i] - a[self.excl_j]
            elif fam == "square_order":
                out[sl] = a[:-1] - a[1:]
            elif fam == "incompatible":
                ii, jj = self.incompatible
                out[sl] = 1.0 - a[ii] - a[jj]
            elif fam == "area_cut":
                out[sl] = self.area_capacity - np.dot(a, self.A)
            elif fam == "value_bound":
                out[sl] = np.dot(a, self.V) - self.incumbent_value
            elif fam == "no_repeat":
                out[sl] = np.dot(self.excl_sign, a) + self.excl_const - 1.0
            at += size
        return out

    def max_violation(self, v: np.ndarray) -> float:
        """Largest constraint shortfall; for feasibility models the largest
        softened containment or separation shortfall at the frozen selection."""
        if self.kind == "feasibility":
            a, x, y, b = self._parts(v)
            cv = self._corner_values(a, x, y)
            core = self._overlap_core(a, x, y, b)
            ov = core[7] * core[6]
            worst = 0.0
            if cv.size:
                worst = max(worst, float(-cv.min()))
            if ov.size:
                worst = max(worst, float(-ov.min()))
            return max(0.0, worst)
        g = self.constraints(v)
        if g.size == 0:
            return 0.0
        return max(0.0, float(-g.min()))

    # ---- gradient accumulation -------------------------------------------

    def _accumulate_corners(self, g: np.ndarray, w: np.ndarray, v: np.ndarray) -> None:
        """Add sum_k w_k grad corner_k; w has shape (4, n)."""
        lay = self.layout
        a, x, y, _ = self._parts(v)
        cx = x[None, :] + _CORNER_SX[:, None] * (0.5 * self.L)[None, :]
        cy = y[None, :] + _CORNER_SY[:, None] * (0.5 * self.W)[None, :]
        r_sq = self.R * self.R
        g[lay.alpha] += np.sum(w, axis=0) * (r_sq - self.q)
        g[lay.x] += np.sum(w * (-2.0 * cx), axis=0)
        g[lay.y] += np.sum(w * (-2.0 * cy), axis=0)

    def _accumulate_overlap(self, g, w, a, b, dx, dy, sdx, sdy, gap_x, gap_y, inner, mult) -> None:
        """Add sum_k w_k grad overlap_k for the pair family."""
        if w.size == 0:
            return
        lay, n = self.layout, self.n
        pi, pj = self.pairs.first, self.pairs.second
        if self.second_only:
            ga_i = np.zeros_like(w)
            ga_j = w * inner
        else:
            ga_i = w * a[pj] * inner
            ga_j = w * a[pi] * inner
        gx_pair = w * mult * b * dx / sdx
        gy_pair = w * mult * (1.0 - b) * dy / sdy
        g[lay.alpha] += np.bincount(pi, weights=ga_i, minlength=n)
        g[lay.alpha] += np.bincount(pj, weights=ga_j, minlength=n)
        g[lay.x] += np.bincount(pi, weights=gx_pair, minlength=n)
        g[lay.x] -= np.bincount(pj, weights=gx_pair, minlength=n)
        g[lay.y] += np.bincount(pi, weights=gy_pair, minlength=n)
        g[lay.y] -= np.bincount(pj, weights=gy_pair, minlength=n)
        g[lay.beta] += w * mult * (gap_x - gap_y)

    def jac_t(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """J(v)^T w, accumulated family by family without a dense Jacobian."""
        lay = self.layout
        g = np.zeros(lay.dim)
        if self.m == 0:
            return g
        a, x, y, b = self._parts(v)
        at = 0
        for fam, size in self._families:
            wk = w[at : at + size]
            if fam == "x_high":
                g[lay.alpha] += wk * self.Bx
                g[lay.x] -= wk
            elif fam == "x_low":
                g[lay.alpha] += wk * self.Bx
                g[lay.x] += wk
            elif fam == "y_high":
                g[lay.alpha] += wk * self.By
                g[lay.y] -= wk
            elif fam == "y_low":
                g[lay.alpha] += wk * self.By
                g[lay.y] += wk
            elif fam == "corner":
                self._accumulate_corners(g, wk.reshape(4, self.n), v)
            elif fam == "overlap":
                dx, dy, sdx, sdy, gap_x, gap_y, inner, mult = self._overlap_core(a, x, y, b)
                self._accumulate_overlap(g, wk, a, b, dx, dy, sdx, sdy, gap_x, gap_y, inner, mult)
            elif fam == "near_binary":
                g[lay.alpha] += wk[0] * (2.0 * a - 1.0)
            elif fam == "rotation_exclusion":
                g[lay.alpha] -= np.bincount(self.excl_i, weights=wk, minlength=self.n)
                g[lay.alpha] -= np.bincount(self.excl_j, weights=wk, minlength=self.n)
            elif fam == "square_order":
                g[lay.alpha][:-1] += wk
                g[lay.alpha][1:] -= wk
            elif fam == "incompatible":
                ii, jj = self.incompatible
                g[lay.alpha] -= np.bincount(ii, weights=wk, minlength=self.n)
                g[lay.alpha] -= np.bincount(jj, weights=wk, minlength=self.n)
            elif fam == "area_cut":
                g[lay.alpha] -= wk[0] * self.A
            elif fam == "value_bound":
                g[lay.alpha] += wk[0] * self.V
            elif fam == "no_repeat":
                g[lay.alpha] += wk[0] * self.excl_sign
            at += size
        return g

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        """Dense (m, dim) Jacobian, one jac_t call per row; tests only."""
        rows = np.zeros((self.m, self.layout.dim))
        for k in range(self.m):
            w = np.zeros(self.m)
            w[k] = 1.0
            rows[k] = self.jac_t(v, w)
        return rows


def build_problem(
    inst: Instance,
    kind: str,
    delta: Optional[float] = None,
    chosen: Optional[np.ndarray] = None,
    incumbent_value: Optional[float] = None,
    incumbent_set: Optional[frozenset] = None,
    eps_abs: float = DEFAULT_ABS_SOFTENING,
) -> ProblemFunctions:
    """Assemble the selection ("minlp"/"relaxed") or placement
    ("feasibility") model for an instance that is already rotation-expanded
    when rotation is wanted."""
    return ProblemFunctions(
        inst,
        kind,
        delta=delta,
        chosen=chosen,
        incumbent_value=incumbent_value,
        incumbent_set=incumbent_set,
        eps_abs=eps_abs,
    )


__all__ = [
    "DEFAULT_ABS_SOFTENING",
    "expand_rotations",
    "exclusion_pairs",
    "placement_index_map",
    "VariableLayout",
    "PairSet",
    "ProblemFunctions",
    "build_problem",
]
