"""Normal forms, word metrics and Cayley balls for the supported group families.

Four families are supported:

* ``F(k)``     free group, payload is a reduced tuple of signed letters
* ``Z^k``      free abelian group, payload is an exponent vector
* ``Heis``     integer Heisenberg group, payload ``(i, j, k)`` for ``a^i b^j c^k``
* ``BS(1,n)``  solvable Baumslag-Solitar group, payload ``(t, m)``

A ``BS(1,n)`` pair ``(t, m)`` stands for the affine map ``x -> n**m * x + t`` with
``a = (1, 0)`` and ``b = (0, 1)``.  Composition gives

    (t1, m1) * (t2, m2) = (t1 + n**m1 * t2, m1 + m2)

and ``b * a = (n, 1) = a**n * b``.

All left-multiplication conventions follow the pseudotrajectory edges
``g -> s*g``: a Cayley ball is grown by multiplying generators on the left.
"""

from __future__ import annotations

import bisect
import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from math import gcd
from typing import Iterator, Sequence

from . import kernels
from .errors import (
    CapExceededError,
    FamilyMismatchError,
    PresentationError,
    UnsupportedGroupError,
    resource_cap,
)

FREE = "free"
ABELIAN = "abelian"
HEISENBERG = "heisenberg"
BAUMSLAG_SOLITAR = "bs"


@dataclass(frozen=True, order=True)
class GroupElement:
    family: str
    nf: tuple

    def __repr__(self) -> str:
        return f"GroupElement({self.family}, {self.nf!r})"


GeneratingSet = tuple[tuple[str, GroupElement], ...]


def _is_n_adic(t: Fraction, n: int) -> bool:
    den = t.denominator
    while den != 1:
        g = gcd(den, n)
        if g == 1:
            return False
        den //= g
    return True


def _n_adic_exponent(t: Fraction, n: int) -> int:
    """Smallest s with t * n**s integral."""
    s = 0
    scaled = t
    while scaled.denominator != 1:
        scaled *= n
        s += 1
    return s


@dataclass(frozen=True)
class GroupSpec:
    """One of the supported families with its canonical presentation."""

    family: str
    param: int = 0

    def __post_init__(self):
        if self.family in (FREE, ABELIAN):
            if self.param < 1:
                raise UnsupportedGroupError(f"rank must be >= 1, got {self.param}")
        elif self.family == BAUMSLAG_SOLITAR:
            if self.param < 2:
                raise UnsupportedGroupError(f"BS(1,n) needs n >= 2, got {self.param}")
        elif self.family != HEISENBERG:
            raise UnsupportedGroupError(f"unknown family {self.family!r}")

    @property
    def name(self) -> str:
        if self.family == FREE:
            return f"F({self.param})"
        if self.family == ABELIAN:
            return f"Z^{self.param}"
        if self.family == HEISENBERG:
            return "Heis"
        return f"BS(1,{self.param})"

    def __str__(self) -> str:
        return self.name

    @cached_property
    def symbols(self) -> tuple[str, ...]:
        """Positive generator symbols; the inverse of ``x`` is ``x.upper()``."""
        if self.family in (FREE, ABELIAN):
            return tuple(f"a{i + 1}" for i in range(self.param))
        if self.family == HEISENBERG:
            return ("a", "b", "c")
        return ("a", "b")

    @cached_property
    def relations(self) -> tuple[tuple[str, str], ...]:
        if self.family == FREE:
            return ()
        if self.family == ABELIAN:
            syms = self.symbols
            return tuple(
                (syms[i] + syms[j], syms[j] + syms[i])
                for i in range(len(syms))
                for j in range(i + 1, len(syms))
            )
        if self.family == HEISENBERG:
            return (("c", "abAB"), ("ac", "ca"), ("bc", "cb"))
        return (("ba", f"a^{self.param}b"),)

    # -- normal-form arithmetic -------------------------------------------

    def identity(self) -> GroupElement:
        if self.family == FREE:
            return GroupElement(self.name, ())
        if self.family == ABELIAN:
            return GroupElement(self.name, (0,) * self.param)
        if self.family == HEISENBERG:
            return GroupElement(self.name, (0, 0, 0))
        return GroupElement(self.name, (Fraction(0), 0))

    def generator(self, index: int, sign: int = 1) -> GroupElement:
        if self.family == FREE:
            return GroupElement(self.name, ((index + 1) * sign,))
        if self.family == ABELIAN:
            vec = [0] * self.param
            vec[index] = sign
            return GroupElement(self.name, tuple(vec))
        if self.family == HEISENBERG:
            vec = [0, 0, 0]
            vec[index] = sign
            return GroupElement(self.name, tuple(vec))
        if index == 0:
            return GroupElement(self.name, (Fraction(sign), 0))
        return GroupElement(self.name, (Fraction(0), sign))

    def bs_element(self, t, m: int) -> GroupElement:
        if self.family != BAUMSLAG_SOLITAR:
            raise FamilyMismatchError(f"{self.name} has no BS pairs")
        t = Fraction(t)
        if not _is_n_adic(t, self.param):
            raise ValueError(f"{t} is not in Z[1/{self.param}]")
        return GroupElement(self.name, (t, int(m)))

    def check(self, g: GroupElement) -> None:
        if g.family != self.name:
            raise FamilyMismatchError(f"element of {g.family} used with {self.name}")

    def mul(self, g: GroupElement, h: GroupElement) -> GroupElement:
        """Normal form of ``g*h`` (no family checks; see :func:`multiply`)."""
        a, b = g.nf, h.nf
        fam = self.family
        if fam == FREE:
            lg, lh = len(a), len(b)
            i = 0
            while i < lg and i < lh and a[lg - 1 - i] == -b[i]:
                i += 1
            return GroupElement(g.family, a[: lg - i] + b[i:])
        if fam == ABELIAN:
            return GroupElement(g.family, tuple(x + y for x, y in zip(a, b)))
        if fam == HEISENBERG:
            return GroupElement(
                g.family, (a[0] + b[0], a[1] + b[1], a[2] + b[2] - a[1] * b[0])
            )
        t1, m1 = a
        t2, m2 = b
        if t2:
            t1 = t1 + (self.param**m1 * t2 if m1 >= 0 else t2 / self.param**-m1)
        return GroupElement(g.family, (t1, m1 + m2))

    def inv(self, g: GroupElement) -> GroupElement:
        a = g.nf
        fam = self.family
        if fam == FREE:
            return GroupElement(g.family, tuple(-x for x in reversed(a)))
        if fam == ABELIAN:
            return GroupElement(g.family, tuple(-x for x in a))
        if fam == HEISENBERG:
            i, j, k = a
            return GroupElement(g.family, (-i, -j, -k - i * j))
        t, m = a
        scale = Fraction(self.param) ** -m
        return GroupElement(g.family, (-scale * t, -m))

    def power(self, g: GroupElement, k: int) -> GroupElement:
        result = self.identity()
        base = g if k >= 0 else self.inv(g)
        k = abs(k)
        while k:
            if k & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            k >>= 1
        return result

    # -- words ----------------------------------------------------------------

    def letter(self, symbol: str) -> GroupElement:
        low = symbol.lower()
        if low not in self.symbols:
            raise PresentationError(f"unknown generator {symbol!r} for {self.name}")
        return self.generator(self.symbols.index(low), 1 if symbol == low else -1)

    def canonical_letters(self, g: GroupElement) -> list[tuple[str, int]]:
        """A spelling of ``g`` as ``(symbol, exponent)`` pairs, leftmost first."""
        self.check(g)
        syms = self.symbols
        a = g.nf
        if self.family == FREE:
            out: list[tuple[str, int]] = []
            for x in a:
                sym = syms[abs(x) - 1]
                e = 1 if x > 0 else -1
                if out and out[-1][0] == sym and (out[-1][1] > 0) == (e > 0):
                    out[-1] = (sym, out[-1][1] + e)
                else:
                    out.append((sym, e))
            return out
        if self.family in (ABELIAN, HEISENBERG):
            return [(s, e) for s, e in zip(syms, a) if e]
        t, m = a
        s = _n_adic_exponent(t, self.param)
        p = int(t * self.param**s)
        out = []
        if p:
            out = [("b", -s), ("a", p), ("b", s + m)]
        else:
            out = [("b", m)]
        return [(sym, e) for sym, e in out if e]


def format_word(spec: GroupSpec, g: GroupElement) -> str:
    """Canonical compact spelling, e.g. ``a1^2A2`` or ``B^2a^5b^3``; ``e`` for identity."""
    parts = []
    for sym, e in spec.canonical_letters(g):
        letter = sym if e > 0 else sym.upper()
        parts.append(letter if abs(e) == 1 else f"{letter}^{abs(e)}")
    return "".join(parts) or "e"


def format_pair(g: GroupElement) -> str:
    t, m = g.nf
    return f"({t}, {m})"


_TOKEN = re.compile(r"([a-zA-Z])(\d*)(?:\^(-?\d+))?")
_PAIR = re.compile(r"^\(\s*(-?\d+(?:/\d+)?)\s*,\s*(-?\d+)\s*\)$")


def parse_word(spec: GroupSpec, text: str) -> GroupElement:
    """Parse a word such as ``"a1A2"``, ``"b^3aB"`` or, for BS, ``"(3/4, -1)"``."""
    body = text.strip()
    if body in ("", "e"):
        return spec.identity()
    pair = _PAIR.match(body)
    if pair:
        if spec.family != BAUMSLAG_SOLITAR:
            raise PresentationError(f"pair syntax only valid for BS groups", text, 0)
        return spec.bs_element(Fraction(pair.group(1)), int(pair.group(2)))
    result = spec.identity()
    pos = 0
    while pos < len(body):
        if body[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(body, pos)
        if not m:
            raise PresentationError("unexpected character", text, pos)
        symbol = m.group(1) + m.group(2)
        try:
            letter = spec.letter(symbol)
        except PresentationError:
            raise PresentationError(f"unknown generator {symbol!r}", text, pos) from None
        exp = int(m.group(3)) if m.group(3) is not None else 1
        result = spec.mul(result, spec.power(letter, exp))
        pos = m.end()
    return result


def inverse_label(label: str) -> str:
    """Formal inverse of a word label: reverse the letters and swap case."""
    tokens = [m for m in _TOKEN.finditer(label)]
    out = []
    for m in reversed(tokens):
        sym = m.group(1)
        sym = sym.lower() if sym.isupper() else sym.upper()
        out.append(sym + m.group(2) + (f"^{m.group(3)}" if m.group(3) else ""))
    return "".join(out)


# -- presentations ------------------------------------------------------------


def _expect_int(text: str, pos: int) -> tuple[int, int]:
    m = re.compile(r"-?\d+").match(text, pos)
    if not m:
        raise PresentationError("expected integer", text, pos)
    return int(m.group()), m.end()


def _expect(text: str, pos: int, char: str) -> int:
    if pos >= len(text) or text[pos] != char:
        raise PresentationError(f"expected {char!r}", text, pos)
    return pos + 1


def parse_presentation(text: str) -> GroupSpec:
    """Parse ``F(k)``, ``Z^k``, ``Heis`` or ``BS(1,n)``."""
    s = text.replace(" ", "")
    if not s:
        raise PresentationError("empty presentation", text, 0)
    if s.startswith("BS"):
        pos = _expect(s, 2, "(")
        m, pos = _expect_int(s, pos)
        pos = _expect(s, pos, ",")
        n, pos = _expect_int(s, pos)
        pos = _expect(s, pos, ")")
        if pos != len(s):
            raise PresentationError("trailing characters", text, pos)
        if m != 1:
            raise UnsupportedGroupError(f"only BS(1,n) is supported, got BS({m},{n})")
        if n < 2:
            raise UnsupportedGroupError(f"BS(1,n) needs n >= 2, got n={n}")
        return GroupSpec(BAUMSLAG_SOLITAR, n)
    if s.startswith("F"):
        pos = _expect(s, 1, "(")
        k, pos = _expect_int(s, pos)
        pos = _expect(s, pos, ")")
        if pos != len(s):
            raise PresentationError("trailing characters", text, pos)
        if k < 1:
            raise UnsupportedGroupError(f"free group rank must be >= 1, got {k}")
        return GroupSpec(FREE, k)
    if s.startswith("Z"):
        if s == "Z":
            return GroupSpec(ABELIAN, 1)
        pos = _expect(s, 1, "^")
        k, pos = _expect_int(s, pos)
        if pos != len(s):
            raise PresentationError("trailing characters", text, pos)
        if k < 1:
            raise UnsupportedGroupError(f"rank must be >= 1, got {k}")
        return GroupSpec(ABELIAN, k)
    if s == "Heis":
        return GroupSpec(HEISENBERG)
    if s.startswith("Heis"):
        raise PresentationError("trailing characters", text, 4)
    raise UnsupportedGroupError(f"unsupported family in {text!r}")


# -- element-level operations -------------------------------------------------


def multiply(spec: GroupSpec, g: GroupElement, h: GroupElement) -> GroupElement:
    spec.check(g)
    spec.check(h)
    return spec.mul(g, h)


def inverse(spec: GroupSpec, g: GroupElement) -> GroupElement:
    spec.check(g)
    return spec.inv(g)


def commutator(spec: GroupSpec, g: GroupElement, h: GroupElement) -> GroupElement:
    """``g h g^-1 h^-1``."""
    spec.check(g)
    spec.check(h)
    return spec.mul(spec.mul(g, h), spec.mul(spec.inv(g), spec.inv(h)))


def in_lower_central_term(spec: GroupSpec, g: GroupElement, level: int) -> bool:
    """Membership of ``g`` in the ``level``-th lower central term (``G_1 = G``)."""
    spec.check(g)
    if level <= 1:
        return True
    if spec.family == ABELIAN:
        return g == spec.identity()
    if spec.family == HEISENBERG:
        if level == 2:
            return g.nf[0] == 0 and g.nf[1] == 0
        return g == spec.identity()
    raise UnsupportedGroupError(f"{spec.name} is not nilpotent")


def default_generators(spec: GroupSpec) -> GeneratingSet:
    out = []
    for i, sym in enumerate(spec.symbols):
        out.append((sym, spec.generator(i, 1)))
        out.append((sym.upper(), spec.generator(i, -1)))
    return tuple(out)


def generating_set(spec: GroupSpec, words: Sequence[str]) -> GeneratingSet:
    """Symmetric closure of the given words (labels are kept as written)."""
    out: list[tuple[str, GroupElement]] = []
    seen: set[GroupElement] = set()
    for word in words:
        g = parse_word(spec, word)
        if g == spec.identity():
            raise ValueError("identity is not allowed in a generating set")
        for label, elem in ((word, g), (inverse_label(word), spec.inv(g))):
            if elem not in seen:
                seen.add(elem)
                out.append((label, elem))
    return tuple(out)


def is_symmetric(spec: GroupSpec, gens: GeneratingSet) -> bool:
    elems = {g for _, g in gens}
    return all(spec.inv(g) in elems for g in elems)


# -- Cayley balls -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CayleyBall:
    """Elements of word norm <= radius, ordered by (norm, normal form).

    ``parents[i]`` is the index of the BFS parent ``p`` with
    ``elements[i] = generators[labels[i]] * p``; the parent is chosen with the
    smallest generator index, so the tree does not depend on traversal order.
    """

    spec: GroupSpec
    generators: GeneratingSet
    radius: int
    elements: tuple[GroupElement, ...]
    norms: tuple[int, ...]
    parents: tuple[int, ...]
    labels: tuple[int, ...]
    index: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[GroupElement]:
        return iter(self.elements)

    def __contains__(self, g) -> bool:
        return g in self.index

    def norm(self, g: GroupElement) -> int:
        return self.norms[self.index[g]]

    def parent(self, g: GroupElement) -> tuple[GroupElement, str] | None:
        i = self.index[g]
        if self.parents[i] < 0:
            return None
        return self.elements[self.parents[i]], self.generators[self.labels[i]][0]

    def spelling(self, g: GroupElement) -> list[str]:
        """Generator labels along the parent chain, leftmost (last applied) first."""
        out = []
        i = self.index[g]
        while self.parents[i] >= 0:
            out.append(self.generators[self.labels[i]][0])
            i = self.parents[i]
        return out

    def restrict(self, radius: int) -> "CayleyBall":
        if radius >= self.radius:
            return self
        stop = bisect.bisect_right(self.norms, radius)
        elements = self.elements[:stop]
        return CayleyBall(
            self.spec,
            self.generators,
            radius,
            elements,
            self.norms[:stop],
            self.parents[:stop],
            self.labels[:stop],
            {g: i for i, g in enumerate(elements)},
        )

    def layer_sizes(self) -> list[int]:
        sizes = [0] * (self.radius + 1)
        for r in self.norms:
            sizes[r] += 1
        return sizes


def _bfs_generic(spec: GroupSpec, gens: GeneratingSet, radius: int, cap: int):
    elems = [spec.identity()]
    norms = [0]
    parents = [-1]
    labels = [-1]
    where = {elems[0]: 0}
    start, stop = 0, 1
    for r in range(1, radius + 1):
        for i in range(start, stop):
            g = elems[i]
            for k, (_, s) in enumerate(gens):
                h = spec.mul(s, g)
                j = where.get(h)
                if j is None:
                    where[h] = len(elems)
                    elems.append(h)
                    norms.append(r)
                    parents.append(i)
                    labels.append(k)
                elif norms[j] == r and k < labels[j]:
                    parents[j] = i
                    labels[j] = k
        if len(elems) > cap:
            raise CapExceededError(f"ball of radius {r} exceeds cap {cap}")
        start, stop = stop, len(elems)
        if start == stop:
            break
    return elems, norms, parents, labels, [g.nf for g in elems]


def _bs_scaling(spec: GroupSpec, gens: GeneratingSet, radius: int):
    """Integer encoding of BS left-multiplication, or None if it could overflow."""
    n = spec.param
    den = 0
    mneg = 0
    mabs = 0
    tmax = 0
    for _, s in gens:
        t, m = s.nf
        den = max(den, _n_adic_exponent(t, n))
        mneg = max(mneg, -m)
        mabs = max(mabs, abs(m))
        tmax = max(tmax, abs(t))
    scale = radius * max(den, mneg)
    bound = Fraction(0)
    mpos = max(0, max(s.nf[1] for _, s in gens))
    for _ in range(radius):
        bound = tmax + n**mpos * bound
    tbound = int(bound * n**scale) + 1
    width = 2 * radius * mabs + 1
    if (tbound + 1) * width >= 2**62:
        return None
    scaled = [(int(s.nf[0] * n**scale), s.nf[1]) for _, s in gens]
    return scaled, scale


def _bfs_bs(spec: GroupSpec, gens: GeneratingSet, radius: int, cap: int):
    enc = _bs_scaling(spec, gens, radius)
    if enc is None:
        return None
    scaled, scale = enc
    ts, ms, norms, parents, labels = kernels.bs_ball(spec.param, scaled, scale, radius, cap)
    denom = spec.param**scale
    name = spec.name
    elems = [GroupElement(name, (Fraction(t, denom), m)) for t, m in zip(ts, ms)]
    keys = list(zip(ts, ms))
    return elems, list(norms), list(parents), list(labels), keys


def ball(spec: GroupSpec, gens: GeneratingSet | None = None, radius: int = 0,
         cap: int | None = None) -> CayleyBall:
    """Exact Cayley ball with deterministic (norm, normal form) ordering."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    gens = default_generators(spec) if gens is None else tuple(gens)
    for _, s in gens:
        spec.check(s)
    cap = resource_cap() if cap is None else cap
    raw = None
    if spec.family == BAUMSLAG_SOLITAR:
        raw = _bfs_bs(spec, gens, radius, cap)
    if raw is None:
        raw = _bfs_generic(spec, gens, radius, cap)
    elems, norms, parents, labels, keys = raw
    order = sorted(range(len(elems)), key=lambda i: (norms[i], keys[i]))
    rank = [0] * len(order)
    for new, old in enumerate(order):
        rank[old] = new
    elements = tuple(elems[i] for i in order)
    return CayleyBall(
        spec,
        gens,
        radius,
        elements,
        tuple(norms[i] for i in order),
        tuple(rank[parents[i]] if parents[i] >= 0 else -1 for i in order),
        tuple(labels[i] for i in order),
        {g: i for i, g in enumerate(elements)},
    )


class _WordMetric:
    """Incrementally grown BFS distance table for one generating set."""

    def __init__(self, spec: GroupSpec, gens: GeneratingSet):
        self.spec = spec
        self.gens = gens
        e = spec.identity()
        self.dist = {e: 0}
        self.frontier = [e]
        self.radius = 0
        self.lock = threading.Lock()

    def _grow(self, cap: int) -> None:
        nxt = []
        r = self.radius + 1
        for g in self.frontier:
            for _, s in self.gens:
                h = self.spec.mul(s, g)
                if h not in self.dist:
                    self.dist[h] = r
                    nxt.append(h)
        if len(self.dist) > cap:
            raise CapExceededError(f"word metric ball exceeds cap {cap}")
        self.frontier = nxt
        self.radius = r

    def norm(self, g: GroupElement, max_radius: int, cap: int) -> int:
        with self.lock:
            while g not in self.dist:
                if self.radius >= max_radius or not self.frontier:
                    raise CapExceededError(
                        f"norm exceeds cap: {g!r} not reached within radius {max_radius}"
                    )
                self._grow(cap)
            return self.dist[g]


@lru_cache(maxsize=64)
def _metric(spec: GroupSpec, gens: GeneratingSet) -> _WordMetric:
    return _WordMetric(spec, gens)


def word_norm(spec: GroupSpec, g: GroupElement, gens: GeneratingSet | None = None,
              cap: int = 64) -> int:
    """Exact word norm by BFS; ``cap`` bounds the explored radius."""
    spec.check(g)
    gens = default_generators(spec) if gens is None else tuple(gens)
    return _metric(spec, gens).norm(g, cap, resource_cap())


@dataclass(frozen=True)
class BilipschitzReport:
    gens: GeneratingSet
    other: GeneratingSet
    constant: Fraction
    radius: int
    witness: GroupElement
    witness_norms: tuple[int, int]
    verified: bool


def bilipschitz_constant(spec: GroupSpec, gens: GeneratingSet, other: GeneratingSet,
                         radius: int, cap: int = 64) -> BilipschitzReport:
    """Worst norm ratio between two generating sets over the radius-``radius`` ball."""
    gens = tuple(gens)
    other = tuple(other)
    if not (is_symmetric(spec, gens) and is_symmetric(spec, other)):
        raise ValueError("generating sets must be symmetric")
    metric = _metric(spec, other)
    limit = resource_cap()
    try:
        stretch = max(metric.norm(s, cap, limit) for _, s in gens)
        for _, s in other:
            word_norm(spec, s, gens, cap)
    except CapExceededError as exc:
        raise CapExceededError(f"generating sets do not generate each other within cap: {exc}")
    b = ball(spec, gens, radius)
    best = Fraction(1)
    witness = spec.identity()
    witness_norms = (0, 0)
    pairs = []
    for g, ns in zip(b.elements, b.norms):
        if ns == 0:
            pairs.append((0, 0))
            continue
        no = metric.norm(g, stretch * radius, limit)
        pairs.append((ns, no))
        ratio = max(Fraction(ns, no), Fraction(no, ns))
        if ratio > best or (ratio == best and ns > witness_norms[0]):
            best = ratio
            witness = g
            witness_norms = (ns, no)
    verified = all(Fraction(no) / best <= ns <= best * no for ns, no in pairs)
    return BilipschitzReport(gens, other, best, radius, witness, witness_norms, verified)
