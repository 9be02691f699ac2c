"""Exact finite-window shadowing decisions for linear actions under the sup-norm.

Every requirement ``|M_g x - y_g|_inf <= eps`` splits into per-coordinate
half-planes in the unknown start point ``x``.  The closed system is decided by
exact convex-polygon clipping; an empty result comes with at most three
constraints whose infeasibility is re-checked by an independent Farkas test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from functools import cached_property
from math import gcd, lcm
from typing import Iterable, Iterator, Mapping, Sequence

from . import kernels
from .actions import LinearAction, RationalMatrix, ball_matrices, format_rational, parse_rational
from .errors import (
    CapExceededError,
    FamilyMismatchError,
    ParameterError,
    UnsupportedMatrixError,
    resource_cap,
)
from .groups import GeneratingSet, GroupElement, format_word
from .pseudo import EXACT, Pseudotrajectory

UPPER = "upper"
LOWER = "lower"


@dataclass(frozen=True, eq=False)
class HalfPlane:
    """The closed constraint ``a*x + b*y <= c`` (``b`` is 0 in dimension one).

    ``provenance`` is ``(word, coordinate, side)``: the group element whose
    orbit point produced the row, the coordinate index, and which side of the
    eps-interval it bounds.
    """

    a: Fraction
    b: Fraction
    c: Fraction
    provenance: tuple = ()

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not isinstance(v, Fraction):
                object.__setattr__(self, name, Fraction(v))
        if self.a == 0 and self.b == 0:
            raise ValueError("half-plane normal must be nonzero")

    def value(self, p) -> Fraction:
        """Signed slack ``a*x + b*y - c``; nonpositive inside."""
        y = p[1] if len(p) > 1 else 0
        return self.a * p[0] + self.b * y - self.c

    def contains(self, p, strict: bool = False) -> bool:
        v = self.value(p)
        return v < 0 if strict else v <= 0

    @cached_property
    def integer_form(self) -> tuple[int, int, int]:
        """``(A, B, C)`` integers proportional to ``(a, b, c)`` with a positive factor."""
        w = lcm(self.a.denominator, self.b.denominator, self.c.denominator)
        return int(self.a * w), int(self.b * w), int(self.c * w)

    def key(self) -> tuple:
        return (self.provenance, self.a, self.b, self.c)

    @property
    def word(self) -> str:
        return self.provenance[0] if self.provenance else ""

    def to_dict(self) -> dict:
        out = {"a": format_rational(self.a), "b": format_rational(self.b),
               "c": format_rational(self.c)}
        if self.provenance:
            word, coord, side = self.provenance
            out.update(word=word, coordinate=coord, side=side)
        return out


@dataclass(frozen=True)
class ShadowingProblem:
    action: LinearAction
    traj: Pseudotrajectory
    epsilon: Fraction
    d: Fraction | None = None
    expansivity: Fraction | None = None
    margin: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "epsilon", parse_rational(self.epsilon))
        if self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if self.traj.mode != EXACT:
            raise ParameterError("shadowing problems need an exact-mode trajectory; use rationalized()")
        if self.traj.ball.spec != self.action.spec:
            raise FamilyMismatchError("trajectory and action live on different groups")
        if self.action.dim > 2:
            raise UnsupportedMatrixError("feasibility is decided in dimension 1 or 2 only")
        if self.traj.dim != self.action.dim:
            raise ValueError("trajectory and action dimensions differ")

    @property
    def dim(self) -> int:
        return self.action.dim

    def with_epsilon(self, eps) -> "ShadowingProblem":
        return ShadowingProblem(self.action, self.traj, eps, self.d, self.expansivity, self.margin)

    def restrict(self, radius: int) -> "ShadowingProblem":
        return ShadowingProblem(self.action, self.traj.restrict(radius), self.epsilon,
                                self.d, self.expansivity, self.margin)


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    witness: tuple | None = None
    certificate: tuple[HalfPlane, ...] = ()
    strictly_feasible: bool = False
    interior_point: tuple | None = None
    constraints_processed: int = 0
    vertices: tuple = field(default=(), repr=False)

    @property
    def certificate_words(self) -> list[str]:
        return [h.word for h in self.certificate]

    def to_dict(self) -> dict:
        out: dict = {"feasible": self.feasible, "constraints_processed": self.constraints_processed}
        if self.feasible:
            out["witness"] = [format_rational(c) for c in self.witness]
            out["strictly_feasible"] = self.strictly_feasible
            out["interior_point"] = (None if self.interior_point is None
                                     else [format_rational(c) for c in self.interior_point])
        else:
            out["certificate"] = [h.to_dict() for h in self.certificate]
        return out


# -- constraints -----------------------------------------------------------------


def _element_constraints(spec, g: GroupElement, m: RationalMatrix, y, eps) -> list[HalfPlane]:
    word = format_word(spec, g)
    out = []
    for i, row in enumerate(m.rows):
        a = row[0]
        b = row[1] if len(row) > 1 else Fraction(0)
        out.append(HalfPlane(a, b, y[i] + eps, (word, i, UPPER)))
        out.append(HalfPlane(-a, -b, -(y[i] - eps), (word, i, LOWER)))
    return out


def iter_constraint_groups(problem: ShadowingProblem) -> Iterator[list[HalfPlane]]:
    """Constraint rows element by element, in ball order (word norm first)."""
    traj = problem.traj
    b = traj.ball
    gen_mats = [problem.action.matrix_of(s) for _, s in b.generators]
    mats: list[RationalMatrix] = []
    for i, (g, y) in enumerate(traj.items()):
        p = b.parents[i]
        m = RationalMatrix.identity(problem.dim) if p < 0 else gen_mats[b.labels[i]] @ mats[p]
        mats.append(m)
        yield _element_constraints(b.spec, g, m, y, problem.epsilon)


def shadow_constraints(problem: ShadowingProblem) -> list[HalfPlane]:
    """All ``2 * dim`` rows per ball element, in ball order."""
    b = problem.traj.ball
    out: list[HalfPlane] = []
    for g, m, y in zip(b.elements, ball_matrices(problem.action, b), problem.traj.points):
        out.extend(_element_constraints(b.spec, g, m, y, problem.epsilon))
    return out


def verify_witness(constraints: Iterable[HalfPlane], x, strict: bool = False) -> bool:
    return all(h.contains(x, strict) for h in constraints)


# -- independent infeasibility check ---------------------------------------------------


def _cross(u, v) -> Fraction:
    return u[0] * v[1] - u[1] * v[0]


def _pair_infeasible(h1: HalfPlane, h2: HalfPlane) -> bool:
    n1, n2 = (h1.a, h1.b), (h2.a, h2.b)
    if _cross(n1, n2) != 0 or n1[0] * n2[0] + n1[1] * n2[1] >= 0:
        return False
    # n1 = -t * n2 with t > 0: adding the rows gives 0 <= c1 + t*c2
    t = -(n1[0] / n2[0]) if n2[0] else -(n1[1] / n2[1])
    return h1.c + t * h2.c < 0


def certificate_is_infeasible(halfplanes: Sequence[HalfPlane]) -> bool:
    """Farkas test: nonnegative multipliers cancel the normals with negative right side."""
    hs = list(halfplanes)
    if not 1 <= len(hs) <= 3:
        return False
    if len(hs) == 1:
        return False
    if any(_pair_infeasible(p, q) for p, q in combinations(hs, 2)):
        return True
    if len(hs) == 2:
        return False
    n = [(h.a, h.b) for h in hs]
    mu = (_cross(n[1], n[2]), _cross(n[2], n[0]), _cross(n[0], n[1]))
    if all(m == 0 for m in mu):
        return False
    if all(m <= 0 for m in mu):
        mu = tuple(-m for m in mu)
    if not all(m >= 0 for m in mu):
        return False
    return sum(m * h.c for m, h in zip(mu, hs)) < 0


# -- polygon clipping ---------------------------------------------------------------


def _reduce(X: int, Y: int, W: int) -> tuple[int, int, int]:
    if W < 0:
        X, Y, W = -X, -Y, -W
    g = gcd(X, Y, W)
    return (X // g, Y // g, W // g) if g > 1 else (X, Y, W)


class _Vertex:
    """Polygon vertex in reduced integer homogeneous coordinates ``(X, Y, W)``, W > 0."""

    __slots__ = ("h", "edge", "tight")

    def __init__(self, h: tuple[int, int, int], edge: HalfPlane, tight: frozenset):
        self.h = h
        self.edge = edge  # label of the edge leaving this vertex
        self.tight = tight  # constraints whose boundary line passes through the vertex

    @property
    def p(self) -> tuple[Fraction, Fraction]:
        X, Y, W = self.h
        return (Fraction(X, W), Fraction(Y, W))


def _clip(poly: list[_Vertex], h: HalfPlane) -> list[_Vertex]:
    A, B, C = h.integer_form
    m = len(poly)
    vals = [A * X + B * Y - C * W for X, Y, W in (v.h for v in poly)]
    if all(v < 0 for v in vals):
        return poly
    if all(v <= 0 for v in vals):
        return [_Vertex(v.h, v.edge, v.tight | {h} if val == 0 else v.tight)
                for v, val in zip(poly, vals)]
    out: list[_Vertex] = []
    for i in range(m):
        cur, nxt = poly[i], poly[(i + 1) % m]
        vc, vn = vals[i], vals[(i + 1) % m]
        if vc <= 0:
            tight = cur.tight | {h} if vc == 0 else cur.tight
            if vn > 0:
                if vc == 0:
                    out.append(_Vertex(cur.h, h, tight))
                else:
                    out.append(_Vertex(cur.h, cur.edge, tight))
                    out.append(_Vertex(_crossing(cur.h, nxt.h, vc, vn), h,
                                       frozenset({cur.edge, h})))
            else:
                out.append(_Vertex(cur.h, cur.edge, tight))
        elif vn < 0:
            out.append(_Vertex(_crossing(cur.h, nxt.h, vc, vn), cur.edge,
                               frozenset({cur.edge, h})))
    dedup: list[_Vertex] = []
    for v in out:
        if dedup and dedup[-1].h == v.h:
            dedup[-1] = _Vertex(v.h, v.edge, dedup[-1].tight | v.tight)
        else:
            dedup.append(v)
    if len(dedup) > 1 and dedup[0].h == dedup[-1].h:
        last = dedup.pop()
        dedup[0] = _Vertex(last.h, dedup[0].edge, dedup[0].tight | last.tight)
    return dedup


def _crossing(p, q, vp: int, vq: int) -> tuple[int, int, int]:
    # the combination vq*p - vp*q has zero value; vp and vq have opposite signs
    if vp > 0:
        p, q, vp, vq = q, p, vq, vp
    return _reduce(vq * p[0] - vp * q[0], vq * p[1] - vp * q[1], vq * p[2] - vp * q[2])


def _initial_polygon(group: list[HalfPlane]) -> list[_Vertex]:
    """Parallelogram cut out by the four rows of one element (M invertible)."""
    up1, lo1, up2, lo2 = group
    # solve rows r1.x = s1, r2.x = s2 for each corner
    r1 = (up1.a, up1.b)
    r2 = (up2.a, up2.b)
    det = _cross(r1, r2)

    def corner(s1, s2):
        x = (s1 * r2[1] - s2 * r1[1]) / det
        y = (r1[0] * s2 - r2[0] * s1) / det
        w = lcm(x.denominator, y.denominator)
        return _reduce(int(x * w), int(y * w), w)

    lo1_c, up1_c = -lo1.c, up1.c
    lo2_c, up2_c = -lo2.c, up2.c
    # walk the box lo2 -> up1 -> up2 -> lo1 in image space
    corners = [
        (corner(lo1_c, lo2_c), lo2, {lo1, lo2}),
        (corner(up1_c, lo2_c), up1, {up1, lo2}),
        (corner(up1_c, up2_c), up2, {up1, up2}),
        (corner(lo1_c, up2_c), lo1, {lo1, up2}),
    ]
    return [_Vertex(p, e, frozenset(t)) for p, e, t in corners]


def _labels(poly: list[_Vertex]) -> list[HalfPlane]:
    seen: dict[HalfPlane, None] = {}
    for v in poly:
        seen.setdefault(v.edge)
        for t in sorted(v.tight, key=_hp_key):
            seen.setdefault(t)
    return list(seen)


def _hp_key(h: HalfPlane):
    return h.key()


def _certificate(poly: list[_Vertex], h: HalfPlane, processed: Sequence[HalfPlane]) -> tuple[HalfPlane, ...]:
    """Small infeasible subset: try constraints at the h-minimising vertex first."""
    best = min(range(len(poly)), key=lambda i: (h.a * poly[i].p[0] + h.b * poly[i].p[1], i))
    v = poly[best]
    prev = poly[best - 1]
    local = [v.edge, prev.edge] + sorted(v.tight, key=_hp_key)
    local = list(dict.fromkeys(local))
    for size in (1, 2):
        for combo in combinations(local, size):
            cand = tuple(combo) + (h,)
            if certificate_is_infeasible(cand):
                return cand
    pool = _labels(poly)
    for size in (1, 2):
        for combo in combinations(pool, size):
            cand = tuple(combo) + (h,)
            if certificate_is_infeasible(cand):
                return cand
    return _deletion_filter(list(processed) + [h])


def _deletion_filter(hs: list[HalfPlane]) -> tuple[HalfPlane, ...]:
    # exhaustive fallback; Helly guarantees an infeasible triple exists
    for size in (2, 3):
        for combo in combinations(hs, size):
            if certificate_is_infeasible(combo):
                return combo
    raise RuntimeError("no infeasible subset of size <= 3 found; constraints may be feasible")


def _polygon_verdict(poly: list[_Vertex], processed: int, constraints: list[HalfPlane]) -> FeasibilityVerdict:
    pts = [v.p for v in poly]
    witness = min(pts)
    interior = None
    if len(pts) >= 3:
        k = len(pts)
        centroid = (sum(p[0] for p in pts) / k, sum(p[1] for p in pts) / k)
        if verify_witness(constraints, centroid, strict=True):
            interior = centroid
    return FeasibilityVerdict(True, witness, (), interior is not None, interior, processed,
                              tuple(pts))


def _solve_2d(groups: Iterable[list[HalfPlane]]) -> FeasibilityVerdict:
    poly: list[_Vertex] | None = None
    seen: list[HalfPlane] = []
    for group in groups:
        if poly is None:
            poly = _initial_polygon(group)
            seen.extend(group)
            continue
        for h in group:
            clipped = _clip(poly, h)
            if not clipped:
                cert = _certificate(poly, h, seen)
                return FeasibilityVerdict(False, certificate=cert, constraints_processed=len(seen) + 1)
            poly = clipped
            seen.append(h)
    return _polygon_verdict(poly, len(seen), seen)


def _solve_1d(groups: Iterable[list[HalfPlane]]) -> FeasibilityVerdict:
    lo = hi = None  # (bound, constraint)
    seen: list[HalfPlane] = []
    for group in groups:
        for h in group:
            bound = h.c / h.a
            if h.a > 0:
                if hi is None or bound < hi[0]:
                    hi = (bound, h)
            elif lo is None or bound > lo[0]:
                lo = (bound, h)
            seen.append(h)
            if lo is not None and hi is not None and lo[0] > hi[0]:
                return FeasibilityVerdict(False, certificate=(lo[1], hi[1]),
                                          constraints_processed=len(seen))
    if lo is None or hi is None:
        raise ValueError("one-dimensional system is unbounded")
    interior = ((lo[0] + hi[0]) / 2,) if lo[0] < hi[0] else None
    return FeasibilityVerdict(True, (lo[0],), (), interior is not None, interior, len(seen),
                              ((lo[0],), (hi[0],)))


def feasible_shadow(problem: ShadowingProblem) -> FeasibilityVerdict:
    """Decide whether some start point eps-shadows the window (closed inequalities).

    Constraints are consumed lazily in ball order and the search stops at the
    first constraint that empties the region.  The witness is the
    lexicographically smallest vertex of the feasible polygon; when the region
    has interior, ``interior_point`` is its vertex centroid.
    """
    groups = iter_constraint_groups(problem)
    if problem.dim == 1:
        return _solve_1d(groups)
    return _solve_2d(groups)


def solve_halfplanes(constraints: Sequence[HalfPlane], dim: int = 2) -> FeasibilityVerdict:
    """Decide a raw system whose first ``2*dim`` rows bound a parallelogram (or interval)."""
    k = 2 * dim
    groups = [list(constraints[:k])] + [[h] for h in constraints[k:]]
    return _solve_1d(groups) if dim == 1 else _solve_2d(groups)


# -- brute-force oracle ----------------------------------------------------------------


def grid_oracle(problem: ShadowingProblem, step, box=None, cap: int | None = None,
                backend: str | None = None):
    """First grid point in row-major order satisfying every constraint, or None.

    ``box`` is a tuple of ``(lo, hi)`` per coordinate and defaults to the
    eps-box around the identity's trajectory point, which contains every
    solution.  A None result does not prove infeasibility.
    """
    step = parse_rational(step)
    if step <= 0:
        raise ParameterError("grid step must be positive")
    dim = problem.dim
    if box is None:
        y = problem.traj.points[0]
        box = tuple((y[i] - problem.epsilon, y[i] + problem.epsilon) for i in range(dim))
    box = tuple((Fraction(lo), Fraction(hi)) for lo, hi in box)
    counts = [int((hi - lo) / step) + 1 for lo, hi in box]
    if dim == 1:
        counts.append(1)
    cap = resource_cap() if cap is None else cap
    if counts[0] * counts[1] > cap:
        raise CapExceededError(f"grid of {counts[0] * counts[1]} points exceeds cap {cap}")
    lo1 = box[0][0]
    lo2 = box[1][0] if dim == 2 else Fraction(0)
    ai, bi, ci = [], [], []
    for h in shadow_constraints(problem):
        a = h.a * step
        b = h.b * step
        c = h.c - h.a * lo1 - h.b * lo2
        scale = lcm(a.denominator, b.denominator, c.denominator)
        ai.append(int(a * scale))
        bi.append(int(b * scale))
        ci.append(int(c * scale))
    hit = kernels.grid_scan(ai, bi, ci, counts[0], counts[1], backend=backend)
    if hit is None:
        return None
    i, j = hit
    if dim == 1:
        return (lo1 + i * step,)
    return (lo1 + i * step, lo2 + j * step)


# -- fiberwise constructions -------------------------------------------------------


@dataclass(frozen=True)
class FiberBox:
    lo: tuple
    hi: tuple

    @property
    def empty(self) -> bool:
        return any(a > b for a, b in zip(self.lo, self.hi))

    @property
    def center(self) -> tuple:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def width(self) -> Fraction:
        return max(b - a for a, b in zip(self.lo, self.hi))

    def contains(self, p) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lo, p, self.hi))


def fiber_shadow_diagonal(B: RationalMatrix, window: Mapping[int, tuple], eps) -> FiberBox:
    """Points x with ``|B^k x - z_k|_inf <= eps`` for every k in the window.

    ``B`` must be diagonal; each coordinate contributes the interval
    ``[(z_k - eps) / l^k, (z_k + eps) / l^k]`` (endpoints swapped when l^k < 0).
    """
    eps = parse_rational(eps)
    if not B.is_diagonal():
        raise UnsupportedMatrixError("fiber shadowing needs a diagonal matrix")
    if not window:
        raise ValueError("empty window")
    diag = [B.rows[i][i] for i in range(B.dim)]
    lo = [None] * B.dim
    hi = [None] * B.dim
    for k, z in window.items():
        for i, lam in enumerate(diag):
            p = lam**k
            u, v = (z[i] - eps) / p, (z[i] + eps) / p
            if p < 0:
                u, v = v, u
            lo[i] = u if lo[i] is None else max(lo[i], u)
            hi[i] = v if hi[i] is None else min(hi[i], v)
    return FiberBox(tuple(lo), tuple(hi))


def fiber_shadow_expanding(B: RationalMatrix, window: Sequence[tuple], eps) -> FiberBox:
    """Admissible box for the forward window ``z_0, ..., z_K`` of an expanding diagonal map."""
    if not B.is_diagonal():
        raise UnsupportedMatrixError("fiber shadowing needs a diagonal matrix")
    if any(abs(B.rows[i][i]) <= 1 for i in range(B.dim)):
        raise ParameterError("matrix is not expanding")
    return fiber_shadow_diagonal(B, dict(enumerate(window)), eps)


@dataclass(frozen=True)
class CoherenceReport:
    value: Fraction
    edge: tuple[GroupElement, str] | None
    edges: int


def coherence_check(action: LinearAction, fibers: Mapping[GroupElement, tuple],
                    gens: GeneratingSet) -> CoherenceReport:
    """Max over edges inside ``fibers`` of ``|x_{sq} - f_s(x_q)|_inf``."""
    spec = action.spec
    best = Fraction(0)
    where = None
    count = 0
    mats = [(label, s, action.matrix_of(s)) for label, s in gens]
    for q in sorted(fibers, key=lambda g: g.nf):
        x = fibers[q]
        for label, s, m in mats:
            target = fibers.get(spec.mul(s, q))
            if target is None:
                continue
            count += 1
            v = max(abs(a - b) for a, b in zip(target, m @ x))
            if where is None or v > best:
                best, where = v, (q, label)
    return CoherenceReport(best, where, count)
