import random
import time

import pytest

from cudfmilp.cudf import Atom, Request, parse_document
from cudfmilp.encoder import IlpModel, LinearConstraint, Objective, VarId, build_model, criteria_values
from cudfmilp.solver import (
    INFEASIBLE,
    OPTIMAL,
    TIMED_OUT,
    lexicographic_solve,
    propagate,
    solve,
    solve_bruteforce,
)
from cudfmilp.bench import synth_universe
from helpers import feasible_indices, index_to_values, random_model

A, B, C = (VarId.unit(n, 1) for n in "abc")


def model(variables, *constraints, objective=()):
    return IlpModel(tuple(variables), tuple(LinearConstraint(*c) for c in constraints), Objective(tuple(objective)))


def test_propagate_unit_equality():
    assert propagate(model([A], (((1, A),), "=", 1)), {}) == {A: 1}


def test_propagate_implication():
    m = model([A, B], (((-1, A), (1, B)), ">=", 0))
    assert propagate(m, {A: 1}) == {A: 1, B: 1}
    assert propagate(m, {}) == {}


def test_propagate_conflict():
    m = model([A, B], (((2, A), (1, B)), "<=", 1))
    assert propagate(m, {A: 1}) is None


def test_propagate_contradictory_partial():
    m = model([A], (((1, A),), "=", 1))
    assert propagate(m, {A: 0}) is None


def test_propagation_is_sound():
    """Forced values hold in every feasible completion; a conflict means no completion exists."""
    rng = random.Random(7)
    for _ in range(300):
        m = random_model(rng, rng.randint(1, 8))
        feas = [index_to_values(m, int(k)) for k in feasible_indices(m)]
        fixed = {v: rng.randint(0, 1) for v in rng.sample(m.variables, rng.randint(0, len(m.variables)))}
        completions = [f for f in feas if all(f[v] == x for v, x in fixed.items())]
        out = propagate(m, fixed)
        if out is None:
            assert completions == []
            continue
        for f in completions:
            assert all(f[v] == x for v, x in out.items())


def test_solve_matches_bruteforce_on_random_programs():
    rng = random.Random(11)
    for _ in range(1000):
        m = random_model(rng)
        got, want = solve(m, 30), solve_bruteforce(m)
        assert got.status == want.status
        if want.status == OPTIMAL:
            assert got.objective == want.objective
            assert m.satisfies(got.assignment)


def test_empty_model():
    out = solve(IlpModel((), (), Objective(())))
    assert out.status == OPTIMAL and out.assignment == {} and out.objective == 0


def test_trivially_infeasible():
    m = model([A], (((1, A),), "=", 1), (((1, A),), "=", 0))
    assert solve(m).status == INFEASIBLE
    assert solve_bruteforce(m).status == INFEASIBLE


def test_empty_constraint_infeasible():
    m = model([A], ((), ">=", 1))
    assert m.infeasible
    assert solve(m).status == INFEASIBLE


def test_install_car_minimizes_changes(figure1):
    u, _ = figure1
    init = u.initial_configuration()
    m = build_model(u, init, Request(install=(Atom("car"),)), "criterion2")
    out = solve(m)
    assert out.status == OPTIMAL
    assert out.objective == solve_bruteforce(m).objective
    # car_1 is already installed and consistent, so nothing needs to change
    assert m.decode(out.assignment) == init
    assert criteria_values(u, init, m.decode(out.assignment)) == criteria_values(u, init, init)


def test_figure1_aggregate(figure1):
    u, r = figure1
    init = u.initial_configuration()
    m = build_model(u, init, r)
    out = solve(m)
    assert out.status == OPTIMAL
    assert out.objective == solve_bruteforce(m).objective
    final = m.decode(out.assignment)
    assert ("bicycle", 7) in final and ("electric-engine", 1) in final
    # the installed door_1 already satisfies the upgrade, and keeping it changes less
    assert ("door", 1) in final and ("door", 2) not in final


def test_timeout_returns_quickly_and_keeps_incumbent():
    u = synth_universe(3000, seed=1, n_installed=60)
    names = sorted(u.by_name)[::37][:40]
    r = Request(install=tuple(Atom(n) for n in names))
    m = build_model(u, u.initial_configuration(), r)
    t0 = time.monotonic()
    out = solve(m, timeout=0.5)
    assert time.monotonic() - t0 < 5
    assert out.status in (OPTIMAL, TIMED_OUT, INFEASIBLE)
    if out.assignment is not None:
        assert m.satisfies(out.assignment)


def test_timeout_is_monotone():
    """A larger budget never yields a worse incumbent on the same instance."""
    rng = random.Random(3)
    for _ in range(20):
        m = random_model(rng, 12)
        short, long = solve(m, 0.01), solve(m, 10)
        assert long.status in (OPTIMAL, INFEASIBLE)
        if short.assignment is not None and long.assignment is not None:
            assert long.objective <= short.objective


def test_lexicographic_figure1(figure1):
    u, r = figure1
    init = u.initial_configuration()
    lex = lexicographic_solve(u, init, r)
    agg = solve(build_model(u, init, r))
    assert lex.status == OPTIMAL
    assert lex.criteria == criteria_values(u, init, build_model(u, init, r).decode(agg.assignment))


def test_lexicographic_infeasible():
    u, _ = parse_document("package: a\nversion: 1\n")
    out = lexicographic_solve(u, set(), Request(install=(Atom("ghost"),)))
    assert out.status == INFEASIBLE and out.assignment is None


def test_bruteforce_refuses_large_models():
    vs = [VarId.unit(f"v{i}", 1) for i in range(30)]
    with pytest.raises(ValueError):
        solve_bruteforce(IlpModel(tuple(vs), ()))


@pytest.mark.parametrize("seed", range(5))
def test_solve_deterministic(seed):
    m = random_model(random.Random(seed), 12)
    a, b = solve(m), solve(m)
    assert (a.status, a.assignment, a.objective) == (b.status, b.assignment, b.objective)
