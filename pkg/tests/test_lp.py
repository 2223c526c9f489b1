import random
from fractions import Fraction

import pytest

from bayesexplore.lp import EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, LinearProgram, check_point, max_coordinate, solve
from oracles import lp_by_vertices


def random_lp(rng):
    n = rng.randint(1, 3)
    lp = LinearProgram(n, {j: rng.randint(-3, 3) for j in range(n)})
    for _ in range(rng.randint(1, 3)):
        coeffs = {j: rng.randint(-3, 3) for j in range(n)}
        lp.add(coeffs, rng.choice([GE, LE, LE, EQ]), rng.randint(-4, 6))
    return lp


def test_matches_vertex_enumeration_on_500_lps():
    rng = random.Random(20240501)
    statuses = {OPTIMAL: 0, INFEASIBLE: 0, UNBOUNDED: 0}
    for k in range(600):
        lp = random_lp(rng)
        got = solve(lp)
        want_status, want_value = lp_by_vertices(lp.num_vars, lp.objective, lp.constraints)
        assert got.status == want_status, (k, lp)
        if want_status == OPTIMAL:
            assert got.value == want_value, (k, lp)
            assert check_point(lp, got.point) == []
            assert sum(Fraction(lp.objective.get(j, 0)) * got.x(j) for j in range(lp.num_vars)) == got.value
        statuses[got.status] += 1
    # the corpus exercises every outcome
    assert all(v > 20 for v in statuses.values()), statuses


def test_degenerate_cycling_example_terminates():
    # Beale's classic cycling LP, written as a maximization
    lp = LinearProgram(4, {0: Fraction(3, 4), 1: -150, 2: Fraction(1, 50), 3: -6})
    lp.add({0: Fraction(1, 4), 1: -60, 2: Fraction(-1, 25), 3: 9}, LE, 0)
    lp.add({0: Fraction(1, 2), 1: -90, 2: Fraction(-1, 50), 3: 3}, LE, 0)
    lp.add({2: 1}, LE, 1)
    out = solve(lp)
    assert out.status == OPTIMAL
    assert out.value == Fraction(1, 20)


def test_redundant_equalities():
    lp = LinearProgram(2, {0: 1})
    lp.add({0: 1, 1: 1}, EQ, 1)
    lp.add({0: 2, 1: 2}, EQ, 2)
    out = solve(lp)
    assert out.status == OPTIMAL and out.value == 1
    assert out.x(0) == 1 and out.x(1) == 0


def test_negative_rhs_and_infeasible():
    lp = LinearProgram(1, {0: 1})
    lp.add({0: -1}, LE, -2)
    lp.add({0: 1}, LE, 1)
    assert solve(lp).status == INFEASIBLE


def test_unbounded():
    lp = LinearProgram(2, {0: 1})
    lp.add({0: 1, 1: -1}, LE, 1)
    assert solve(lp).status == UNBOUNDED


def test_max_coordinate_and_determinism():
    lp = LinearProgram(3)
    lp.add({0: 1, 1: 1, 2: 1}, EQ, 1)
    lp.add({0: 1, 1: -2}, GE, 0)
    a, b = max_coordinate(lp, 1), max_coordinate(lp, 1)
    assert a.value == Fraction(1, 3)
    assert a.point == b.point and a.pivots == b.pivots


def test_bad_relation():
    with pytest.raises(ValueError):
        LinearProgram(1).add({0: 1}, "<", 0)
    with pytest.raises(IndexError):
        LinearProgram(1).add({3: 1}, LE, 0)
