import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowlab import kernels
from shadowlab.actions import RationalMatrix, bs_action, load_action, point
from shadowlab.errors import (
    CapExceededError,
    FamilyMismatchError,
    ParameterError,
    UnsupportedMatrixError,
)
from shadowlab.experiments import commuting_saddles, free_saddle_shear
from shadowlab.groups import ball, default_generators, parse_presentation, parse_word
from shadowlab.pseudo import (
    CounterexampleParams,
    Pseudotrajectory,
    bs_counterexample,
    exact_orbit,
)
from shadowlab.solver import (
    HalfPlane,
    ShadowingProblem,
    certificate_is_infeasible,
    coherence_check,
    feasible_shadow,
    fiber_shadow_diagonal,
    fiber_shadow_expanding,
    grid_oracle,
    shadow_constraints,
    solve_halfplanes,
    verify_witness,
)

F = Fraction


def z1_action(lam=2):
    return load_action("Z", {"a1": [[lam]]})


def noisy(traj, rng, amp, den=50):
    pts = tuple(tuple(c + F(rng.randint(-amp, amp), den) for c in p) for p in traj.points)
    return Pseudotrajectory(traj.ball, pts)


# -- constraints ----------------------------------------------------------------------------


def test_constraint_rows_example():
    act = bs_action(2, 3)
    traj = exact_orbit(act, ball(act.spec, None, 1), point(1, 2))
    cons = shadow_constraints(ShadowingProblem(act, traj, F(1, 2)))
    assert len(cons) == 4 * len(traj.ball) == 20
    first = cons[:4]
    assert [(h.a, h.b, h.c) for h in first] == [
        (1, 0, F(3, 2)), (-1, 0, -F(1, 2)), (0, 1, F(5, 2)), (0, -1, -F(3, 2))]
    assert [h.provenance for h in first] == [
        ("e", 0, "upper"), ("e", 0, "lower"), ("e", 1, "upper"), ("e", 1, "lower")]
    b_rows = [h for h in cons if h.word == "b"]
    assert (b_rows[0].a, b_rows[0].b, b_rows[0].c) == (3, 0, 3 + F(1, 2))
    assert (b_rows[2].a, b_rows[2].b, b_rows[2].c) == (0, 6, 12 + F(1, 2))


def test_constraint_counts_dimension_one():
    act = z1_action()
    traj = exact_orbit(act, ball(act.spec, None, 3), point(1))
    assert len(shadow_constraints(ShadowingProblem(act, traj, 1))) == 2 * 7


def test_problem_validation():
    act = bs_action(2, 3)
    traj = exact_orbit(act, ball(act.spec, None, 1), point(1, 2))
    with pytest.raises(ParameterError):
        ShadowingProblem(act, traj, 0)
    with pytest.raises(FamilyMismatchError):
        ShadowingProblem(free_saddle_shear(), traj, 1)
    float_traj = bs_counterexample(CounterexampleParams(2, F(3, 2), F(1, 10), 2), ball(act.spec, None, 2))
    with pytest.raises(ParameterError):
        ShadowingProblem(bs_action(2, F(3, 2)), float_traj, 1)


def test_halfplane_basics():
    h = HalfPlane(F(1, 2), F(-1, 3), F(5, 6))
    assert h.integer_form == (3, -2, 5)
    assert h.contains((1, 0)) and not h.contains((2, 0))
    assert h.contains((F(5, 3), 0)) and not h.contains((F(5, 3), 0), strict=True)
    with pytest.raises(ValueError):
        HalfPlane(0, 0, 1)


# -- decisions ------------------------------------------------------------------------------


def test_exact_orbit_is_feasible_with_x0():
    act = bs_action(2, 3)
    x0 = point(1, 2)
    traj = exact_orbit(act, ball(act.spec, None, 4), x0)
    problem = ShadowingProblem(act, traj, F(1, 10))
    cons = shadow_constraints(problem)
    assert verify_witness(cons, x0, strict=True)
    v = feasible_shadow(problem)
    assert v.feasible and v.strictly_feasible
    assert verify_witness(cons, v.witness)
    assert verify_witness(cons, v.interior_point, strict=True)


def test_counterexample_infeasible_with_certificate():
    act = bs_action(2, 2)
    b = ball(act.spec, None, 8)
    traj = bs_counterexample(CounterexampleParams(2, 2, F(1, 10), 8), b)
    problem = ShadowingProblem(act, traj, 1)
    v = feasible_shadow(problem)
    assert not v.feasible
    assert 1 <= len(v.certificate) <= 3
    assert certificate_is_infeasible(v.certificate)
    keys = {h.key() for h in shadow_constraints(problem)}
    assert all(h.key() in keys for h in v.certificate)
    d = v.to_dict()
    assert d["feasible"] is False and len(d["certificate"]) == len(v.certificate)


def test_boundary_touching_is_feasible_but_not_strict():
    act = z1_action()
    b = ball(act.spec, None, 1)
    # y_e = 0, y_a = 3, y_A = 0 with eps 1: only x = 1 works
    pts = {parse_word(act.spec, "e"): (F(0),), parse_word(act.spec, "a1"): (F(3),),
           parse_word(act.spec, "A1"): (F(0),)}
    traj = Pseudotrajectory(b, tuple(pts[g] for g in b.elements))
    v = feasible_shadow(ShadowingProblem(act, traj, 1))
    assert v.feasible and v.witness == (1,) and not v.strictly_feasible
    assert v.interior_point is None


def test_one_dimensional_infeasible():
    act = z1_action()
    b = ball(act.spec, None, 1)
    pts = {g: (F(0),) for g in b.elements}
    pts[parse_word(act.spec, "a1")] = (F(5),)
    traj = Pseudotrajectory(b, tuple(pts[g] for g in b.elements))
    v = feasible_shadow(ShadowingProblem(act, traj, 1))
    assert not v.feasible and len(v.certificate) == 2
    assert certificate_is_infeasible(v.certificate)


# -- Farkas check -----------------------------------------------------------------------------


def test_farkas_pairs_and_triples():
    assert certificate_is_infeasible([HalfPlane(1, 0, 0), HalfPlane(-2, 0, -1)])
    assert not certificate_is_infeasible([HalfPlane(1, 0, 1), HalfPlane(-1, 0, 0)])
    assert not certificate_is_infeasible([HalfPlane(1, 0, 0), HalfPlane(0, 1, -5)])
    tri = [HalfPlane(-1, 0, 0), HalfPlane(0, -1, 0), HalfPlane(1, 1, -1)]
    assert certificate_is_infeasible(tri)
    tri_ok = [HalfPlane(-1, 0, 0), HalfPlane(0, -1, 0), HalfPlane(1, 1, 1)]
    assert not certificate_is_infeasible(tri_ok)
    assert not certificate_is_infeasible([HalfPlane(1, 0, -1)])
    assert not certificate_is_infeasible([])
    assert not certificate_is_infeasible([HalfPlane(1, 0, 0)] * 4)


def test_solve_halfplanes_raw():
    box = [HalfPlane(1, 0, 1), HalfPlane(-1, 0, 1), HalfPlane(0, 1, 1), HalfPlane(0, -1, 1)]
    v = solve_halfplanes(box + [HalfPlane(1, 1, F(-3, 2))])
    assert v.feasible and verify_witness(box, v.witness)
    v = solve_halfplanes(box + [HalfPlane(1, 1, -3)])
    assert not v.feasible and certificate_is_infeasible(v.certificate)


# -- random soundness ---------------------------------------------------------------------------

ACTIONS = {
    "bs": lambda: bs_action(2, 2),
    "saddles": commuting_saddles,
    "shear": free_saddle_shear,
    "z1": z1_action,
}


def random_problem(seed):
    rng = random.Random(seed)
    name = rng.choice(sorted(ACTIONS))
    act = ACTIONS[name]()
    R = rng.randint(1, 3)
    b = ball(act.spec, None, R)
    x0 = tuple(F(rng.randint(-20, 20), 10) for _ in range(act.dim))
    traj = noisy(exact_orbit(act, b, x0), rng, rng.choice([0, 5, 20, 60]))
    eps = F(rng.randint(1, 20), 20)
    return ShadowingProblem(act, traj, eps)


def check_verdict(problem, v):
    cons = shadow_constraints(problem)
    if v.feasible:
        assert verify_witness(cons, v.witness)
        if v.strictly_feasible:
            assert verify_witness(cons, v.interior_point, strict=True)
    else:
        assert 1 <= len(v.certificate) <= 3
        assert certificate_is_infeasible(v.certificate)
        keys = {h.key() for h in cons}
        assert all(h.key() in keys for h in v.certificate)


@given(st.integers(0, 2**32))
def test_verdict_soundness(seed):
    problem = random_problem(seed)
    check_verdict(problem, feasible_shadow(problem))


@given(st.integers(0, 2**32))
def test_epsilon_monotonicity(seed):
    problem = random_problem(seed)
    if feasible_shadow(problem).feasible:
        assert feasible_shadow(problem.with_epsilon(2 * problem.epsilon)).feasible
    else:
        assert not feasible_shadow(problem.with_epsilon(problem.epsilon / 2)).feasible


@given(st.integers(0, 2**32))
@settings(max_examples=30)
def test_radius_monotonicity(seed):
    problem = random_problem(seed)
    R = problem.traj.ball.radius
    verdicts = [feasible_shadow(problem.restrict(r)).feasible for r in range(R + 1)]
    # once infeasible, larger windows stay infeasible
    assert verdicts == sorted(verdicts, reverse=True)


# -- grid oracle --------------------------------------------------------------------------------


def test_grid_oracle_finds_orbit_start():
    act = bs_action(2, 3)
    traj = exact_orbit(act, ball(act.spec, None, 2), point(F(1, 4), F(1, 2)))
    problem = ShadowingProblem(act, traj, F(1, 100))
    x = grid_oracle(problem, F(1, 400))
    assert x is not None and verify_witness(shadow_constraints(problem), x)
    for name in kernels.backends():
        assert grid_oracle(problem, F(1, 400), backend=name) == x


def test_grid_oracle_none_on_infeasible():
    act = bs_action(2, 2)
    b = ball(act.spec, None, 8)
    traj = bs_counterexample(CounterexampleParams(2, 2, F(1, 10), 8), b)
    problem = ShadowingProblem(act, traj.restrict(6), 1)
    assert not feasible_shadow(problem).feasible
    assert grid_oracle(problem, F(1, 20)) is None


def test_grid_oracle_dimension_one():
    act = z1_action(3)
    traj = exact_orbit(act, ball(act.spec, None, 2), point(F(2, 5)))
    problem = ShadowingProblem(act, traj, F(1, 10))
    x = grid_oracle(problem, F(1, 100))
    assert x is not None and verify_witness(shadow_constraints(problem), x)


def test_grid_oracle_cap_and_step():
    act = bs_action(2, 3)
    traj = exact_orbit(act, ball(act.spec, None, 1), point(0, 0))
    problem = ShadowingProblem(act, traj, 1)
    with pytest.raises(CapExceededError):
        grid_oracle(problem, F(1, 1000), cap=1000)
    with pytest.raises(ParameterError):
        grid_oracle(problem, 0)


# -- fibers and coherence -------------------------------------------------------------------


def test_fiber_box_example():
    B = RationalMatrix.diag(3, 6)
    box = fiber_shadow_expanding(B, [point(0, 0)] * 6, 1)
    assert box.lo == (F(-1, 243), F(-1, 7776))
    assert box.hi == (F(1, 243), F(1, 7776))
    assert not box.empty and box.center == (0, 0)
    assert box.width == F(2, 243)


@given(st.integers(1, 7), st.integers(0, 2**32))
def test_fiber_width_bound(K, seed):
    rng = random.Random(seed)
    B = RationalMatrix.diag(3, 6)
    eps = F(1, 2)
    x = point(F(rng.randint(-9, 9), 7), F(rng.randint(-9, 9), 7))
    window = []
    for _ in range(K + 1):
        window.append(tuple(c + F(rng.randint(-10, 10), 1000) for c in x))
        x = B @ x
    box = fiber_shadow_expanding(B, window, eps)
    assert not box.empty
    assert box.width <= 2 * eps / F(3) ** K
    assert all(max(abs(a - b) for a, b in zip(B.power(k) @ box.center, z)) <= eps
               for k, z in enumerate(window))


def test_fiber_empty_and_errors():
    B = RationalMatrix.diag(2, 2)
    box = fiber_shadow_expanding(B, [point(0, 0), point(5, 0)], F(1, 2))
    assert box.empty
    with pytest.raises(UnsupportedMatrixError):
        fiber_shadow_expanding(RationalMatrix.of([[2, 1], [0, 2]]), [point(0, 0)], 1)
    with pytest.raises(ParameterError):
        fiber_shadow_expanding(RationalMatrix.diag(2, F(1, 2)), [point(0, 0)], 1)
    with pytest.raises(ValueError):
        fiber_shadow_diagonal(B, {}, 1)
    neg = fiber_shadow_diagonal(RationalMatrix.diag(-2), {0: (F(0),), 1: (F(1),)}, F(1, 4))
    assert neg.lo == (F(-1, 4),) and neg.hi == (F(-3, 8),) and neg.empty


def test_coherence_exact_and_corrupted():
    act = commuting_saddles()
    spec = act.spec
    gens = default_generators(spec)
    b = ball(spec, None, 2)
    x0 = point(F(1, 3), F(2, 7))
    fibers = {g: act.matrix_of(g) @ x0 for g in b.elements}
    assert coherence_check(act, fibers, gens).value == 0
    bad = parse_word(spec, "a1a2")
    fibers[bad] = (fibers[bad][0] + 1, fibers[bad][1])
    report = coherence_check(act, fibers, gens)
    assert report.value > 0
    q, label = report.edge
    s = dict(gens)[label]
    assert bad in (q, spec.mul(s, q))
