"""Exact linear actions on Q^1 / Q^2 and the auxiliary BS(1,n) action on Q x Z."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from math import isqrt
from typing import Mapping, Sequence

from .errors import RelationError, UnsupportedMatrixError
from .groups import (
    _TOKEN,
    ABELIAN,
    BAUMSLAG_SOLITAR,
    FREE,
    HEISENBERG,
    CayleyBall,
    GroupElement,
    GroupSpec,
    _n_adic_exponent,
    parse_presentation,
)

Point = tuple  # tuple of Fractions (or mpmath intervals in float mode)


def point(*coords) -> Point:
    return tuple(Fraction(c) for c in coords)


def sup_dist(p: Point, q: Point):
    return max(abs(x - y) for x, y in zip(p, q))


def P1(p: Point):
    return p[0]


def P2(p: Point):
    return p[1]


def parse_rational(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, float):
        raise TypeError("floats are not accepted; pass 'p/q' strings")
    return Fraction(str(text).strip())


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class RationalMatrix:
    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if not self.rows or any(len(r) != len(self.rows) for r in self.rows):
            raise ValueError("matrix must be square and nonempty")

    @classmethod
    def of(cls, rows: Sequence[Sequence]) -> "RationalMatrix":
        return cls(tuple(tuple(parse_rational(x) for x in row) for row in rows))

    @classmethod
    def identity(cls, dim: int) -> "RationalMatrix":
        return cls(tuple(tuple(Fraction(int(i == j)) for j in range(dim)) for i in range(dim)))

    @classmethod
    def diag(cls, *entries) -> "RationalMatrix":
        dim = len(entries)
        return cls(
            tuple(
                tuple(parse_rational(entries[i]) if i == j else Fraction(0) for j in range(dim))
                for i in range(dim)
            )
        )

    @property
    def dim(self) -> int:
        return len(self.rows)

    def __matmul__(self, other):
        if isinstance(other, RationalMatrix):
            cols = list(zip(*other.rows))
            return RationalMatrix(
                tuple(tuple(sum(a * b for a, b in zip(row, col)) for col in cols) for row in self.rows)
            )
        return tuple(sum(a * b for a, b in zip(row, other)) for row in self.rows)

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix(
            tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows))
        )

    @cached_property
    def det(self) -> Fraction:
        if self.dim == 1:
            return self.rows[0][0]
        if self.dim == 2:
            (a, b), (c, d) = self.rows
            return a * d - b * c
        raise UnsupportedMatrixError("dimension > 2 is not supported")

    @cached_property
    def inverse(self) -> "RationalMatrix":
        det = self.det
        if det == 0:
            raise ZeroDivisionError("singular matrix")
        if self.dim == 1:
            return RationalMatrix(((1 / det,),))
        (a, b), (c, d) = self.rows
        return RationalMatrix(((d / det, -b / det), (-c / det, a / det)))

    def power(self, k: int) -> "RationalMatrix":
        result = RationalMatrix.identity(self.dim)
        base = self if k >= 0 else self.inverse
        k = abs(k)
        while k:
            if k & 1:
                result = result @ base
            base = base @ base
            k >>= 1
        return result

    @cached_property
    def op_norm(self) -> Fraction:
        """Operator norm induced by the sup-norm (max absolute row sum)."""
        return max(sum(abs(x) for x in row) for row in self.rows)

    def is_diagonal(self) -> bool:
        return all(x == 0 for i, row in enumerate(self.rows) for j, x in enumerate(row) if i != j)

    def is_triangular(self) -> bool:
        if self.dim == 1:
            return True
        return self.rows[0][1] == 0 or self.rows[1][0] == 0

    def is_zero(self) -> bool:
        return all(x == 0 for row in self.rows for x in row)

    def to_strings(self) -> list[list[str]]:
        return [[format_rational(x) for x in row] for row in self.rows]

    def __repr__(self) -> str:
        return f"RationalMatrix({self.to_strings()})"


def _word_matrix(spec: GroupSpec, mats: Mapping[str, RationalMatrix], word: str) -> RationalMatrix:
    """Letter-by-letter product, independent of any normal form."""
    dim = next(iter(mats.values())).dim
    result = RationalMatrix.identity(dim)
    for m in _TOKEN.finditer(word):
        sym = m.group(1) + m.group(2)
        base = mats[sym.lower()]
        if sym != sym.lower():
            base = base.inverse
        exp = int(m.group(3)) if m.group(3) is not None else 1
        result = result @ base.power(exp)
    return result


@dataclass(frozen=True)
class LinearAction:
    """Generator matrices for a group acting linearly; build with :func:`load_action`."""

    spec: GroupSpec
    generator_matrices: tuple[tuple[str, RationalMatrix], ...]

    @cached_property
    def matrices(self) -> dict[str, RationalMatrix]:
        out = dict(self.generator_matrices)
        for sym, m in self.generator_matrices:
            out[sym.upper()] = m.inverse
        return out

    @property
    def dim(self) -> int:
        return self.generator_matrices[0][1].dim

    @cached_property
    def lipschitz(self) -> Fraction:
        """Uniform-continuity certificate: max sup-norm operator norm over S."""
        return max(m.op_norm for m in self.matrices.values())

    def matrix_of(self, g: GroupElement) -> RationalMatrix:
        return _matrix_of(self, g)

    def descriptor(self) -> dict:
        return {
            "group": self.spec.name,
            "matrices": {sym: m.to_strings() for sym, m in self.generator_matrices},
        }


@lru_cache(maxsize=1 << 16)
def _matrix_of(action: LinearAction, g: GroupElement) -> RationalMatrix:
    spec = action.spec
    spec.check(g)
    mats = action.matrices
    fam = spec.family
    if fam == FREE:
        result = RationalMatrix.identity(action.dim)
        for x in g.nf:
            sym = spec.symbols[abs(x) - 1]
            result = result @ (mats[sym] if x > 0 else mats[sym.upper()])
        return result
    if fam in (ABELIAN, HEISENBERG):
        result = RationalMatrix.identity(action.dim)
        for sym, e in zip(spec.symbols, g.nf):
            if e:
                result = result @ mats[sym].power(e)
        return result
    t, m = g.nf
    s = _n_adic_exponent(t, spec.param)
    p = int(t * spec.param**s)
    a, b = mats["a"], mats["b"]
    return b.power(-s) @ a.power(p) @ b.power(s + m)


def load_action(spec: GroupSpec | str, matrices: Mapping[str, object]) -> LinearAction:
    """Validate generator matrices against the defining relations."""
    if isinstance(spec, str):
        spec = parse_presentation(spec)
    mats = {}
    for sym in spec.symbols:
        if sym not in matrices:
            raise ValueError(f"missing matrix for generator {sym!r}")
        m = matrices[sym]
        mats[sym] = m if isinstance(m, RationalMatrix) else RationalMatrix.of(m)
    extra = set(matrices) - set(spec.symbols)
    if extra:
        raise ValueError(f"unknown generators {sorted(extra)}")
    dims = {m.dim for m in mats.values()}
    if len(dims) != 1 or dims.pop() > 2:
        raise UnsupportedMatrixError("matrices must share dimension 1 or 2")
    for sym, m in mats.items():
        if m.det == 0:
            raise ValueError(f"matrix for {sym!r} is singular")
    for lhs, rhs in spec.relations:
        residual = _word_matrix(spec, mats, lhs) - _word_matrix(spec, mats, rhs)
        if not residual.is_zero():
            raise RelationError(f"{lhs} = {rhs}", residual)
    return LinearAction(spec, tuple((sym, mats[sym]) for sym in spec.symbols))


def action_from_descriptor(desc: Mapping) -> LinearAction:
    return load_action(desc["group"], desc["matrices"])


def bs_action(n: int, lam) -> LinearAction:
    """BS(1,n) acting by A = (1 0; 1 1) and B = diag(lam, n*lam)."""
    lam = parse_rational(lam)
    if lam <= 0:
        raise ValueError("lambda must be a positive rational")
    spec = GroupSpec(BAUMSLAG_SOLITAR, n)
    return load_action(spec, {"a": RationalMatrix.of([[1, 0], [1, 1]]), "b": RationalMatrix.diag(lam, n * lam)})


def apply(action: LinearAction, g: GroupElement, x: Point) -> Point:
    if len(x) != action.dim:
        raise ValueError(f"point of dimension {len(x)} for a {action.dim}-dimensional action")
    return action.matrix_of(g) @ x


def ball_matrices(action: LinearAction, b: CayleyBall) -> list[RationalMatrix]:
    """Matrices of every ball element, built along BFS parent edges."""
    gen_mats = [action.matrix_of(s) for _, s in b.generators]
    out: list[RationalMatrix] = []
    for i in range(len(b)):
        p = b.parents[i]
        out.append(RationalMatrix.identity(action.dim) if p < 0 else gen_mats[b.labels[i]] @ out[p])
    return out


# -- auxiliary action on Q x Z ---------------------------------------------------


@dataclass(frozen=True)
class AuxState:
    x: Fraction
    k: int


def aux_generator(n: int, symbol: str, s: AuxState) -> AuxState:
    """One generator map: a shifts by n**-k, b raises the level; capitals invert."""
    if symbol == "a":
        return AuxState(s.x + Fraction(n) ** -s.k, s.k)
    if symbol == "A":
        return AuxState(s.x - Fraction(n) ** -s.k, s.k)
    if symbol == "b":
        return AuxState(s.x, s.k + 1)
    if symbol == "B":
        return AuxState(s.x, s.k - 1)
    raise ValueError(f"unknown symbol {symbol!r}")


def aux_apply(n: int, g: GroupElement, s: AuxState) -> AuxState:
    """Closed form of the auxiliary action: (t, m) sends (x, k) to (x + t n^-(k+m), k+m)."""
    t, m = g.nf
    level = s.k + m
    return AuxState(s.x + t / Fraction(n) ** level, level)


# -- hyperbolicity ------------------------------------------------------------


@dataclass(frozen=True)
class HyperbolicType:
    kind: str  # expanding | contracting | saddle | nonhyperbolic
    eigenvalues: tuple[Fraction, ...]
    unstable: tuple[Point, ...]
    stable: tuple[Point, ...]

    @property
    def rate(self) -> Fraction | None:
        """Weakest hyperbolic rate: min over |eigenvalue| and 1/|eigenvalue| on each side."""
        if self.kind == "nonhyperbolic":
            return None
        rates = [abs(ev) if abs(ev) > 1 else 1 / abs(ev) for ev in self.eigenvalues]
        return min(rates)


def _rational_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    p, q = isqrt(x.numerator), isqrt(x.denominator)
    if p * p == x.numerator and q * q == x.denominator:
        return Fraction(p, q)
    return None


def _kernel_vectors(m: RationalMatrix, ev: Fraction) -> list[Point]:
    (a, b), (c, d) = m.rows
    a, d = a - ev, d - ev
    if a == b == c == d == 0:
        return [point(1, 0), point(0, 1)]
    if a != 0 or b != 0:
        return [(-b, a)]
    return [(-d, c)]


def hyperbolic_type(m: RationalMatrix) -> HyperbolicType:
    """Classify by |eigenvalue| against 1 with exact comparisons."""
    if m.dim == 1:
        ev = m.rows[0][0]
        evs = (ev,)
        vecs = {ev: [point(1)]}
    elif m.is_triangular():
        evs = (m.rows[0][0], m.rows[1][1])
        vecs = None
    else:
        tr = m.rows[0][0] + m.rows[1][1]
        root = _rational_sqrt(tr * tr - 4 * m.det)
        if root is None:
            raise UnsupportedMatrixError(f"{m!r} has irrational or complex eigenvalues")
        evs = ((tr + root) / 2, (tr - root) / 2)
        vecs = None
    if vecs is None:
        vecs = {}
        for ev in evs:
            vecs.setdefault(ev, _kernel_vectors(m, ev))
    if any(abs(ev) == 1 for ev in evs):
        kind = "nonhyperbolic"
    elif all(abs(ev) > 1 for ev in evs):
        kind = "expanding"
    elif all(abs(ev) < 1 for ev in evs):
        kind = "contracting"
    else:
        kind = "saddle"
    unstable: list[Point] = []
    stable: list[Point] = []
    for ev in dict.fromkeys(evs):
        target = unstable if abs(ev) > 1 else stable if abs(ev) < 1 else None
        if target is not None:
            target.extend(vecs[ev])
    return HyperbolicType(kind, tuple(evs), tuple(unstable), tuple(stable))
