import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowlab.actions import (
    AuxState,
    RationalMatrix,
    action_from_descriptor,
    apply,
    aux_apply,
    aux_generator,
    ball_matrices,
    bs_action,
    format_rational,
    hyperbolic_type,
    load_action,
    parse_rational,
    point,
)
from shadowlab.errors import RelationError, UnsupportedMatrixError
from shadowlab.groups import ball, default_generators, format_word, parse_presentation, parse_word

F = Fraction


def test_bs_action_accepted():
    act = bs_action(2, "2")
    assert act.matrices["a"] == RationalMatrix.of([[1, 0], [1, 1]])
    assert act.matrices["b"] == RationalMatrix.diag(2, 4)
    assert act.matrices["B"] == RationalMatrix.diag(F(1, 2), F(1, 4))


def test_relation_violation_reports_residual():
    with pytest.raises(RelationError) as info:
        load_action("BS(1,2)", {"a": [[1, 0], [1, 1]], "b": [[2, 0], [0, 6]]})
    res = info.value.residual
    assert not res.is_zero()
    # BA - A^2 B with B = diag(2, 6)
    assert res.rows == ((0, 0), (2, 0))


def test_load_action_rejects_bad_input():
    with pytest.raises(ValueError):
        load_action("Z^2", {"a1": [[1]]})
    with pytest.raises(ValueError):
        load_action("Z", {"a1": [[0]]})
    with pytest.raises(ValueError):
        load_action("Z", {"a1": [[2]], "a9": [[1]]})
    with pytest.raises(UnsupportedMatrixError):
        load_action("Z", {"a1": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]})
    with pytest.raises(RelationError):
        load_action("Z^2", {"a1": [[1, 1], [0, 1]], "a2": [[1, 0], [1, 1]]})


def test_heisenberg_action_needs_central_commutator():
    ok = load_action("Heis", {"a": [[1, 1], [0, 1]], "b": [[1, 2], [0, 1]], "c": [[1, 0], [0, 1]]})
    assert ok.dim == 2
    with pytest.raises(RelationError):
        load_action("Heis", {"a": [[1, 1], [0, 1]], "b": [[1, 0], [1, 1]], "c": [[1, 0], [0, 1]]})


def test_descriptor_round_trip():
    act = bs_action(3, F(7, 2))
    again = action_from_descriptor(act.descriptor())
    assert again.matrices == act.matrices


@pytest.mark.parametrize("r", range(-6, 7))
def test_generator_power_formulas(r):
    lam, n = F(3, 2), 2
    act = bs_action(n, lam)
    spec = act.spec
    assert act.matrix_of(spec.power(parse_word(spec, "a"), r)) == RationalMatrix.of([[1, 0], [r, 1]])
    assert act.matrix_of(spec.power(parse_word(spec, "b"), r)) == RationalMatrix.diag(lam**r, (n * lam) ** r)


def _word_product(act, spec, letters):
    m = RationalMatrix.identity(act.dim)
    for x in letters:
        m = m @ act.matrices[x]
    return m


def test_spelling_independence():
    act = bs_action(2, 3)
    spec = act.spec
    rng = random.Random(5)
    for _ in range(200):
        letters = [rng.choice("aAbB") for _ in range(rng.randint(0, 10))]
        g = spec.identity()
        for x in letters:
            g = spec.mul(g, spec.letter(x))
        assert act.matrix_of(g) == _word_product(act, spec, letters)
        assert act.matrix_of(parse_word(spec, format_word(spec, g))) == act.matrix_of(g)


@given(st.integers(0, 2**32))
def test_matrix_homomorphism(seed):
    rng = random.Random(seed)
    for text, act in (
        ("BS(1,2)", bs_action(2, F(5, 2))),
        ("F(2)", load_action("F(2)", {"a1": [[2, 1], [1, 1]], "a2": [[1, 0], [1, 1]]})),
        ("Z^2", load_action("Z^2", {"a1": [[2, 0], [0, 3]], "a2": [[1, 0], [0, -1]]})),
    ):
        spec = parse_presentation(text)
        gens = [s for _, s in default_generators(spec)]
        g, h = spec.identity(), spec.identity()
        for _ in range(rng.randint(0, 6)):
            g = spec.mul(g, rng.choice(gens))
            h = spec.mul(h, rng.choice(gens))
        assert act.matrix_of(spec.mul(g, h)) == act.matrix_of(g) @ act.matrix_of(h)
        x = point(rng.randint(-9, 9), F(rng.randint(-9, 9), 7))
        assert apply(act, spec.mul(g, h), x) == apply(act, g, apply(act, h, x))


def test_ball_matrices_agree_with_matrix_of():
    act = bs_action(2, 3)
    b = ball(act.spec, None, 5)
    for g, m in zip(b.elements, ball_matrices(act, b)):
        assert m == act.matrix_of(g)


def test_apply_dimension_check():
    act = bs_action(2, 3)
    with pytest.raises(ValueError):
        apply(act, act.spec.identity(), point(1))


def test_lipschitz_constant():
    act = bs_action(2, 3)
    # A and A^-1 have op norm 2, B has 6, B^-1 has 1/3
    assert act.lipschitz == 6


# -- auxiliary action ---------------------------------------------------------------


def test_aux_examples():
    s = AuxState(F(0), 0)
    assert aux_generator(2, "a", s) == AuxState(F(1), 0)
    assert aux_generator(2, "b", s) == AuxState(F(0), 1)
    assert aux_generator(2, "a", AuxState(F(0), 3)) == AuxState(F(1, 8), 3)
    assert aux_generator(2, "A", AuxState(F(0), -2)) == AuxState(F(-4), -2)
    with pytest.raises(ValueError):
        aux_generator(2, "c", s)


@pytest.mark.parametrize("n", [2, 3])
def test_aux_relation_and_closed_form(n):
    spec = parse_presentation(f"BS(1,{n})")
    rng = random.Random(n)
    for _ in range(200):
        s = AuxState(F(rng.randint(-20, 20), rng.randint(1, 9)), rng.randint(-3, 3))
        letters = [rng.choice("aAbB") for _ in range(rng.randint(0, 9))]
        g = spec.identity()
        for x in letters:
            g = spec.mul(g, spec.letter(x))
        t = s
        for x in reversed(letters):
            t = aux_generator(n, x, t)
        assert aux_apply(n, g, s) == t
    s = AuxState(F(1, 3), 2)
    ba = aux_generator(n, "b", aux_generator(n, "a", s))
    anb = aux_generator(n, "b", s)
    for _ in range(n):
        anb = aux_generator(n, "a", anb)
    assert ba == anb == aux_apply(n, parse_word(spec, "ba"), s)


# -- hyperbolicity ---------------------------------------------------------------------


def test_hyperbolic_types():
    assert hyperbolic_type(RationalMatrix.of([[1, 0], [1, 1]])).kind == "nonhyperbolic"
    sad = hyperbolic_type(RationalMatrix.diag(2, F(1, 3)))
    assert sad.kind == "saddle" and sad.rate == 2
    (u,) = sad.unstable
    assert u[1] == 0 and u[0] != 0
    exp = hyperbolic_type(RationalMatrix.of([[3, 1], [1, 3]]))
    assert exp.kind == "expanding" and set(exp.eigenvalues) == {4, 2} and exp.rate == 2
    for v, ev in zip(exp.unstable, exp.eigenvalues):
        m = RationalMatrix.of([[3, 1], [1, 3]])
        assert m @ v == tuple(ev * x for x in v)
    assert hyperbolic_type(RationalMatrix.diag(F(1, 2), F(1, 5))).kind == "contracting"
    assert hyperbolic_type(RationalMatrix.diag(F(-3))).kind == "expanding"
    assert hyperbolic_type(RationalMatrix.diag(F(-1))).rate is None


def test_hyperbolic_irrational_rejected():
    with pytest.raises(UnsupportedMatrixError):
        hyperbolic_type(RationalMatrix.of([[2, 1], [1, 1]]))


# -- rationals -------------------------------------------------------------------------


def test_parse_rational():
    assert parse_rational("3/4") == F(3, 4)
    assert parse_rational(" -2 ") == -2
    assert parse_rational(5) == 5
    with pytest.raises(TypeError):
        parse_rational(0.1)
    assert format_rational(F(6, 3)) == "2" and format_rational(F(-1, 3)) == "-1/3"


def test_inverse_and_power():
    m = RationalMatrix.of([[2, 1], [1, 1]])
    assert m @ m.inverse == RationalMatrix.identity(2)
    assert m.power(-3) @ m.power(3) == RationalMatrix.identity(2)
    with pytest.raises(ZeroDivisionError):
        RationalMatrix.of([[1, 2], [2, 4]]).inverse
