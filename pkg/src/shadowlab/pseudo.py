"""Finite-window pseudotrajectories: exact, perturbed and the three counterexample families."""

from __future__ import annotations

import json
import random
import threading
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

from mpmath import iv

from .actions import (
    AuxState,
    LinearAction,
    RationalMatrix,
    action_from_descriptor,
    aux_apply,
    ball_matrices,
    format_rational,
    parse_rational,
)
from .errors import FamilyMismatchError, ParameterError
from .groups import (
    BAUMSLAG_SOLITAR,
    FREE,
    CayleyBall,
    GroupElement,
    GroupSpec,
    ball as make_ball,
    format_word,
    generating_set,
    parse_presentation,
    parse_word,
)

EXACT = "exact"
FLOAT = "float"


@dataclass(frozen=True, eq=False)
class Pseudotrajectory:
    """Points indexed by the elements of a Cayley ball, aligned with ``ball.elements``."""

    ball: CayleyBall
    points: tuple
    mode: str = EXACT
    precision: int = 256
    declared_d: Fraction | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.points) != len(self.ball):
            raise ValueError("one point per ball element is required")
        if self.mode not in (EXACT, FLOAT):
            raise ValueError(f"unknown mode {self.mode!r}")

    def __getitem__(self, g: GroupElement):
        return self.points[self.ball.index[g]]

    def items(self) -> Iterator[tuple[GroupElement, tuple]]:
        return zip(self.ball.elements, self.points)

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def restrict(self, radius: int) -> "Pseudotrajectory":
        sub = self.ball.restrict(radius)
        return Pseudotrajectory(sub, self.points[: len(sub)], self.mode, self.precision,
                                self.declared_d, dict(self.meta))

    def rationalized(self) -> "Pseudotrajectory":
        """Exact copy using interval midpoints (identity in exact mode)."""
        if self.mode == EXACT:
            return self
        pts = tuple(tuple(iv_mid(c) for c in p) for p in self.points)
        meta = dict(self.meta, rationalized_from=FLOAT)
        return Pseudotrajectory(self.ball, pts, EXACT, self.precision, self.declared_d, meta)


_IV_LOCK = threading.RLock()


@contextmanager
def ivprec(bits: int):
    """Set the interval context precision; mpmath keeps it global, hence the lock."""
    with _IV_LOCK:
        saved = iv.prec
        iv.prec = bits
        try:
            yield
        finally:
            iv.prec = saved


def _raw_to_fraction(raw) -> Fraction:
    sign, man, exp, _ = raw
    if not man and exp:
        raise ValueError("non-finite interval endpoint")
    value = Fraction(man) * Fraction(2) ** exp
    return -value if sign else value


def iv_bounds(x) -> tuple[Fraction, Fraction]:
    """Exact rational endpoints of an mpmath interval."""
    lo, hi = x._mpi_
    return _raw_to_fraction(lo), _raw_to_fraction(hi)


def iv_mid(x) -> Fraction:
    lo, hi = iv_bounds(x)
    return (lo + hi) / 2


def _iv(q: Fraction):
    q = Fraction(q)
    return iv.mpf(q.numerator) / iv.mpf(q.denominator)


@dataclass(frozen=True)
class CounterexampleParams:
    n: int
    lam: Fraction
    d: Fraction
    radius: int
    mode: str | None = None  # None: exact when lam == n
    precision: int = 256

    def __post_init__(self):
        object.__setattr__(self, "lam", parse_rational(self.lam))
        object.__setattr__(self, "d", parse_rational(self.d))
        if self.n < 2:
            raise ParameterError("n must be >= 2")
        if not (1 < self.lam <= self.n):
            raise ParameterError(f"lambda must lie in (1, n]; got {self.lam}")
        if self.d <= 0:
            raise ParameterError("d must be positive")
        if self.mode == EXACT and self.lam != self.n:
            raise ParameterError("exact mode requires lambda == n (beta = 1)")
        if self.mode is None:
            object.__setattr__(self, "mode", EXACT if self.lam == self.n else FLOAT)

    @property
    def beta(self):
        """ln(lam) / ln(n); exactly 1 when lam == n, otherwise an interval."""
        if self.lam == self.n:
            return Fraction(1)
        with ivprec(self.precision):
            return iv.log(_iv(self.lam)) / iv.log(iv.mpf(self.n))


# -- defect measurement -------------------------------------------------------


@dataclass(frozen=True)
class DefectReport:
    """Max defect with its arg-max edge.

    In float mode ``value`` is the midpoint of a rigorous enclosure and
    ``error_bound`` its half-width; both are exact rationals.
    """

    value: Fraction
    edge: tuple[GroupElement, str] | None
    skipped: int
    error_bound: Fraction = Fraction(0)
    edges: int = 0

    @property
    def upper(self) -> Fraction:
        return self.value + self.error_bound

    def below(self, d) -> bool:
        return self.upper < Fraction(d)


def edge_differences(traj: Pseudotrajectory, action: LinearAction, gens=None):
    """Yield ``(g, label, y_{sg} - f_s(y_g))`` per edge; the difference is None when sg leaves the ball."""
    b = traj.ball
    gens = b.generators if gens is None else tuple(gens)
    spec = b.spec
    mats = [action.matrix_of(s) for _, s in gens]
    if traj.mode == FLOAT:
        with ivprec(traj.precision):
            mats = [[[_iv(x) for x in row] for row in m.rows] for m in mats]
    index = b.index
    points = traj.points
    for g, y in zip(b.elements, points):
        for (label, s), m in zip(gens, mats):
            j = index.get(spec.mul(s, g))
            if j is None:
                yield g, label, None
                continue
            if traj.mode == EXACT:
                image = m @ y
            else:
                image = tuple(sum((a * c for a, c in zip(row, y)), iv.mpf(0)) for row in m)
            yield g, label, tuple(p - q for p, q in zip(points[j], image))


def max_defect(traj: Pseudotrajectory, action: LinearAction, gens=None) -> DefectReport:
    """Max sup-norm defect over interior edges, with its arg-max edge."""
    if traj.ball.spec != action.spec:
        raise FamilyMismatchError("trajectory and action live on different groups")
    skipped = 0
    edges = 0
    if traj.mode == EXACT:
        best = Fraction(-1)
        where = None
        for g, label, diff in edge_differences(traj, action, gens):
            if diff is None:
                skipped += 1
                continue
            edges += 1
            v = max(abs(c) for c in diff)
            if v > best:
                best, where = v, (g, label)
        return DefectReport(max(best, Fraction(0)), where, skipped, Fraction(0), edges)
    with ivprec(traj.precision):
        lo = hi = Fraction(0)
        where = None
        for g, label, diff in edge_differences(traj, action, gens):
            if diff is None:
                skipped += 1
                continue
            edges += 1
            bounds = [iv_bounds(abs(c)) for c in diff]
            elo = max(b[0] for b in bounds)
            ehi = max(b[1] for b in bounds)
            if ehi > hi:
                hi, where = ehi, (g, label)
            lo = max(lo, elo)
        mid = (lo + hi) / 2
        return DefectReport(mid, where, skipped, hi - mid, edges)


# -- constructions ------------------------------------------------------------


def exact_orbit(action: LinearAction, b: CayleyBall, x0) -> Pseudotrajectory:
    if b.spec != action.spec:
        raise FamilyMismatchError("ball and action live on different groups")
    x0 = tuple(Fraction(c) for c in x0)
    pts = tuple(m @ x0 for m in ball_matrices(action, b))
    return Pseudotrajectory(b, pts, declared_d=Fraction(0), meta={"construction": "exact_orbit"})


def _tree_orbit(action, b, x0, noise, scale):
    gen_mats = [action.matrix_of(s) for _, s in b.generators]
    pts: list[tuple] = []
    for i in range(len(b)):
        p = b.parents[i]
        if p < 0:
            pts.append(x0)
        else:
            image = gen_mats[b.labels[i]] @ pts[p]
            pts.append(tuple(c + scale * e for c, e in zip(image, noise[i])))
    return tuple(pts)


def perturbed_orbit(action: LinearAction, b: CayleyBall, x0, d, seed: int,
                    resolution: int = 1000) -> Pseudotrajectory:
    """BFS-tree orbit with uniform rational noise on every tree edge.

    Noise coordinates start in ``[-d/2, d/2]``.  Non-tree edges close loops whose
    accumulated noise can exceed ``d``; the amplitude is then halved until the
    measured defect over all interior edges is below ``d``.  The construction is
    affine in the amplitude, so every edge defect scales linearly and one pass
    over the noise-only orbit finds the halving count.  The final scale is
    recorded in ``meta["noise_scale"]``.
    """
    d = parse_rational(d)
    if d <= 0:
        raise ParameterError("d must be positive")
    if b.spec != action.spec:
        raise FamilyMismatchError("ball and action live on different groups")
    x0 = tuple(Fraction(c) for c in x0)
    rng = random.Random(seed)
    dim = len(x0)
    noise = [
        tuple(Fraction(rng.randint(-resolution, resolution), resolution) for _ in range(dim))
        for _ in range(len(b))
    ]
    zero = tuple(Fraction(0) for _ in range(dim))
    unit = Pseudotrajectory(b, _tree_orbit(action, b, zero, noise, d / 2))
    full = max_defect(unit, action).value
    rho = Fraction(1)
    while rho * full >= d:
        rho /= 2
    orbit = [m @ x0 for m in ball_matrices(action, b)]
    pts = tuple(tuple(c + rho * e for c, e in zip(p, q)) for p, q in zip(orbit, unit.points))
    meta = {"construction": "perturbed_orbit", "seed": seed, "noise_scale": rho,
            "measured_defect": rho * full}
    return Pseudotrajectory(b, pts, declared_d=d, meta=meta)


def jittered_orbit(action: LinearAction, b: CayleyBall, x0, d, seed: int,
                   resolution: int = 1000) -> Pseudotrajectory:
    """Exact orbit plus independent per-point noise.

    Each point moves by at most ``r = d / (2 (1 + L))`` per coordinate, with
    ``L`` the largest generator operator norm, so every edge defect is at most
    ``r (1 + L) = d / 2``.  Unlike :func:`perturbed_orbit` the defect does not
    grow with the distance from the identity.
    """
    d = parse_rational(d)
    if d <= 0:
        raise ParameterError("d must be positive")
    if b.spec != action.spec:
        raise FamilyMismatchError("ball and action live on different groups")
    x0 = tuple(Fraction(c) for c in x0)
    rng = random.Random(seed)
    amp = d / (2 * (1 + action.lipschitz))
    pts = []
    for m in ball_matrices(action, b):
        pts.append(tuple(c + amp * Fraction(rng.randint(-resolution, resolution), resolution)
                         for c in m @ x0))
    return Pseudotrajectory(b, tuple(pts), declared_d=d,
                            meta={"construction": "jittered_orbit", "seed": seed, "amplitude": amp})


def bs_counterexample(params: CounterexampleParams, b: CayleyBall) -> Pseudotrajectory:
    """Scaled image of the auxiliary orbit of (0, 0) under the counterexample map.

    The map sends (x, k) to ((1+beta) lam^k |x|^beta, (n lam)^k sgn(x) |x|^(1+beta)).
    The odd extension in the second coordinate keeps every a-edge defect
    below d for negative x as well.
    """
    spec = b.spec
    if spec.family != BAUMSLAG_SOLITAR or spec.param != params.n:
        raise FamilyMismatchError(f"ball must be over BS(1,{params.n})")
    n, lam, d = params.n, params.lam, params.d
    origin = AuxState(Fraction(0), 0)
    meta = {"construction": "bs_counterexample", "n": n, "lambda": lam}
    if params.mode == EXACT:
        pts = []
        for g in b.elements:
            s = aux_apply(n, g, origin)
            x, k = s.x, s.k
            lk = lam**k
            pts.append((d / 3 * 2 * lk * abs(x), d / 3 * (n * lam) ** k * x * abs(x)))
        return Pseudotrajectory(b, tuple(pts), EXACT, params.precision, d, meta)
    with ivprec(params.precision):
        beta = params.beta
        third = _iv(d) / 3
        ilam = _iv(lam)
        inl = ilam * n
        pts = []
        for g in b.elements:
            s = aux_apply(n, g, origin)
            if s.x == 0:
                pts.append((iv.mpf(0), iv.mpf(0)))
                continue
            ax = _iv(abs(s.x))
            xb = ax**beta
            sign = 1 if s.x > 0 else -1
            pts.append((third * (1 + beta) * ilam**s.k * xb, third * sign * inl**s.k * ax * xb))
        return Pseudotrajectory(b, tuple(pts), FLOAT, params.precision, d, meta)


def _letter(spec: GroupSpec, q) -> int:
    if isinstance(q, str):
        q = parse_word(spec, q)
    if len(q.nf) != 1:
        raise ValueError("q must be a single generator")
    return q.nf[0]


def free_two_branch(action: LinearAction, q, omega0, omega, b: CayleyBall,
                    expansive=None, d1=None) -> Pseudotrajectory:
    """Orbit of f_q^-1(omega) on words ending (rightmost letter) in q, of f_q^-1(omega0) elsewhere."""
    spec = b.spec
    if spec.family != FREE or action.spec != spec:
        raise FamilyMismatchError("free_two_branch needs a free-group action and ball")
    letter = _letter(spec, q)
    if expansive is not None:
        g = parse_word(spec, expansive) if isinstance(expansive, str) else expansive
        if not g.nf:
            raise ValueError("the expansive element must not be the identity")
        if abs(g.nf[-1]) == abs(letter):
            raise ValueError("q must differ from the first letter of the expansive element and its inverse")
    omega0 = tuple(Fraction(c) for c in omega0)
    omega = tuple(Fraction(c) for c in omega)
    if d1 is not None and max(abs(a - c) for a, c in zip(omega0, omega)) >= parse_rational(d1):
        raise ParameterError("dist(omega0, omega) must be below d1")
    if omega0 == omega:
        warnings.warn("omega0 == omega yields an exact trajectory", stacklevel=2)
    qinv = action.matrix_of(spec.generator(abs(letter) - 1, 1 if letter > 0 else -1)).inverse
    base0, base1 = qinv @ omega0, qinv @ omega
    pts = []
    for g, m in zip(b.elements, ball_matrices(action, b)):
        starts = bool(g.nf) and g.nf[-1] == letter
        pts.append(m @ (base1 if starts else base0))
    meta = {"construction": "free_two_branch", "q": letter,
            "separation": max(abs(a - c) for a, c in zip(omega0, omega))}
    return Pseudotrajectory(b, tuple(pts), declared_d=None, meta=meta)


def lift_Z_to_free(action: LinearAction, g, zwindow: Mapping[int, tuple], b: CayleyBall) -> Pseudotrajectory:
    """Lift a Z-pseudotrajectory of f_g to the free group along the axis of g.

    ``zwindow`` maps consecutive integers k to points x_k.  Axis points are
    ``p_m = s_j...s_1 g^k`` for ``m = r*k + j``; each element t receives
    ``f_v(z_m)`` where ``t = v p_m`` with ``|v|`` minimal.
    """
    spec = b.spec
    if spec.family != FREE or action.spec != spec:
        raise FamilyMismatchError("lift_Z_to_free needs a free-group action and ball")
    g = parse_word(spec, g) if isinstance(g, str) else g
    if not g.nf:
        raise ValueError("g must not be the identity")
    word = g.nf
    r = len(word)
    if r > 1 and word[0] == -word[-1]:
        raise ValueError("g must be cyclically reduced")
    ks = sorted(zwindow)
    if ks != list(range(ks[0], ks[-1] + 1)):
        raise ValueError("zwindow must be indexed by a contiguous interval")
    k_lo, k_hi = ks[0], ks[-1]
    m_lo, m_hi = r * k_lo, r * k_hi + r - 1
    R = b.radius
    if m_lo > -R or m_hi < R:
        raise ValueError(f"window too short: covers axis indices [{m_lo}, {m_hi}], need [-{R}, {R}]")
    letters = [spec.generator(abs(x) - 1, 1 if x > 0 else -1) for x in word]  # s_r ... s_1
    step_mats = [action.matrix_of(s) for s in reversed(letters)]  # f_{s_1}, ..., f_{s_r}
    z = {}
    for k in range(k_lo, k_hi + 1):
        cur = tuple(Fraction(c) for c in zwindow[k])
        z[r * k] = cur
        for j in range(r - 1):
            cur = step_mats[j] @ cur
            z[r * k + j + 1] = cur
    axis = {}
    for m in range(-R, R + 1):
        k, j = divmod(m, r)
        prefix = GroupElement(spec.name, word[r - j:]) if j else spec.identity()
        axis[m] = spec.mul(prefix, spec.power(g, k))
    axis_inv = {m: spec.inv(p) for m, p in axis.items()}
    order = sorted(axis, key=lambda m: (abs(m), m < 0))
    pts = []
    for t in b.elements:
        best = None
        for m in order:
            v = spec.mul(t, axis_inv[m])
            if best is None or len(v.nf) < len(best[1].nf):
                best = (m, v)
        m, v = best
        pts.append(action.matrix_of(v) @ z[m])
    gm = action.matrix_of(g)
    window_defect = max(
        (max(abs(a - c) for a, c in zip(zwindow[k + 1], gm @ tuple(map(Fraction, zwindow[k]))))
         for k in range(k_lo, k_hi)),
        default=Fraction(0),
    )
    amp = Fraction(1)
    fwd = RationalMatrix.identity(action.dim)
    for s in reversed(letters):
        fwd = action.matrix_of(s) @ fwd
        amp = max(amp, fwd.op_norm)
    bwd = RationalMatrix.identity(action.dim)
    for s in letters:  # f_{s_j^-1} ... f_{s_r^-1}
        bwd = bwd @ action.matrix_of(spec.inv(s))
        amp = max(amp, bwd.op_norm)
    meta = {"construction": "lift_Z_to_free", "g": format_word(spec, g),
            "window_defect": window_defect, "amplification": amp,
            "defect_bound": amp * window_defect}
    return Pseudotrajectory(b, tuple(pts), declared_d=None, meta=meta)


# -- file format --------------------------------------------------------------

HEADER_TAG = "# shadowlab-trajectory "


def _format_coord(c) -> str:
    if isinstance(c, Fraction):
        return format_rational(c)
    return format_rational(iv_mid(c))


def write_trajectory(path, traj: Pseudotrajectory, action: LinearAction | None = None) -> None:
    b = traj.ball
    header = {
        "group": b.spec.name,
        "generators": [label for label, _ in b.generators],
        "radius": b.radius,
        "mode": traj.mode,
        "precision": traj.precision,
        "d": None if traj.declared_d is None else format_rational(traj.declared_d),
    }
    if action is not None:
        header["action"] = action.descriptor()["matrices"]
    lines = [HEADER_TAG + json.dumps(header, sort_keys=True)]
    for g, p in traj.items():
        lines.append("\t".join([format_word(b.spec, g)] + [_format_coord(c) for c in p]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory(path) -> tuple[Pseudotrajectory, LinearAction | None]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(HEADER_TAG):
        raise ValueError(f"{path}: missing trajectory header")
    header = json.loads(lines[0][len(HEADER_TAG):])
    spec = parse_presentation(header["group"])
    labels = header["generators"]
    gens = tuple((label, parse_word(spec, label)) for label in labels)
    closed = generating_set(spec, labels)
    if {g for _, g in closed} != {g for _, g in gens}:
        raise ValueError("generating set in header is not symmetric")
    b = make_ball(spec, gens, int(header["radius"]))
    pts = [None] * len(b)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        word, *coords = line.split("\t")
        g = parse_word(spec, word)
        if g not in b:
            raise ValueError(f"{path}:{lineno}: {word} lies outside the declared ball")
        pts[b.index[g]] = tuple(Fraction(c) for c in coords)
    if any(p is None for p in pts):
        raise ValueError(f"{path}: trajectory does not cover the ball")
    d = header.get("d")
    traj = Pseudotrajectory(b, tuple(pts), EXACT, int(header.get("precision", 256)),
                            None if d is None else Fraction(d),
                            {"source": str(path), "mode_in_file": header["mode"]})
    action = None
    if "action" in header:
        action = action_from_descriptor({"group": spec.name, "matrices": header["action"]})
    return traj, action
