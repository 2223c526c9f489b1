import itertools
import math
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bayesexplore.explorability import PUBLIC, phase_schedule
from bayesexplore.maxexplore import (
    ln_bounds,
    max_explore,
    menu_separation,
    outcome_union,
    private_gammas,
    required_length_public,
    sample_bound,
)
from bayesexplore.model import Menu, example1


class ScriptedRandom:
    """Replays fixed randrange results and a fixed permutation for shuffle."""

    def __init__(self, draws, perm):
        self.draws = list(draws)
        self.perm = perm

    def randrange(self, n):
        return self.draws.pop(0)

    def shuffle(self, x):
        x[:] = [x[i] for i in self.perm]


def exact_marginals(dist, L):
    """Per-position law of max_explore by enumerating every draw and permutation."""
    floors = sum(math.floor(L * p) for _, p in dist)
    res = L - floors
    fr = [L * p - math.floor(L * p) for _, p in dist if p > 0]
    den = math.lcm(*(f.denominator for f in fr)) if res else 1
    acc = sum(int(f * den) for f in fr) if res else 1
    out = [Counter() for _ in range(L)]
    perms = list(itertools.permutations(range(L)))
    for draws in itertools.product(range(acc), repeat=res):
        for perm in perms:
            seq = max_explore(dist, L, ScriptedRandom(draws, perm)).items
            w = Fraction(1, acc**res * len(perms))
            for i, x in enumerate(seq):
                out[i][x] += w
    return out


CONFIGS = [
    ([("a", Fraction(1, 2)), ("b", Fraction(1, 2))], 2),
    ([("a", Fraction(1, 3)), ("b", Fraction(2, 3))], 3),
    ([("a", Fraction(1, 4)), ("b", Fraction(1, 4)), ("c", Fraction(1, 2))], 4),
    ([("a", Fraction(1, 3)), ("b", Fraction(1, 3)), ("c", Fraction(1, 3))], 4),
    ([("a", Fraction(1, 5)), ("b", Fraction(3, 10)), ("c", Fraction(1, 2))], 5),
    ([("a", Fraction(2, 7)), ("b", Fraction(5, 7))], 4),
]


@pytest.mark.parametrize("dist, L", CONFIGS)
def test_exact_position_marginals(dist, L):
    for pos in exact_marginals(dist, L):
        assert dict(pos) == {x: p for x, p in dist}


@pytest.mark.parametrize("dist, L", CONFIGS + [([("a", Fraction(1, 7)), ("b", Fraction(6, 7))], 40)])
def test_coverage_every_draw(dist, L):
    rng = random.Random(1)
    lo = {x: math.floor(L * p) for x, p in dist}
    for _ in range(20000):
        c = Counter(max_explore(dist, L, rng).items)
        assert sum(c.values()) == L
        for x, _ in dist:
            assert c[x] >= lo[x]
    # with L >= 1/min p every item appears
    if L >= max(1 / p for _, p in dist):
        assert all(lo[x] >= 1 for x in lo)


def test_frequencies_for_large_L():
    dist = [("a", Fraction(1, 7)), ("b", Fraction(2, 7)), ("c", Fraction(4, 7))]
    L, n = 23, 100000
    rng = random.Random(4)
    hits = Counter()
    for _ in range(n):
        seq = max_explore(dist, L, rng).items
        hits[seq[0]] += 1
        hits[("last", seq[-1])] += 1
    for x, p in dist:
        se = math.sqrt(float(p) * (1 - float(p)) / n)
        assert abs(hits[x] / n - float(p)) <= 3 * se
        assert abs(hits[("last", x)] / n - float(p)) <= 3 * se


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=1, max_size=4), st.integers(1, 30), st.integers(0, 2**32))
def test_counts_property(weights, L, seed):
    total = sum(weights)
    dist = [(i, Fraction(w, total)) for i, w in enumerate(weights)]
    c = Counter(max_explore(dist, L, random.Random(seed)).items)
    assert sum(c.values()) == L
    for x, p in dist:
        # residual draws are with replacement, so only the floor is guaranteed
        assert c[x] >= math.floor(L * p)
    assert set(c) <= {x for x, _ in dist}


def test_rejects_bad_length():
    with pytest.raises(ValueError):
        max_explore([("a", Fraction(1))], 0, random.Random(0))


@pytest.mark.parametrize("x", [Fraction(1, 3), Fraction(2), Fraction(160), Fraction(10**9, 7), Fraction(1, 10**6)])
def test_ln_bounds_bracket(x):
    lo, hi = ln_bounds(x)
    assert lo <= hi
    assert float(lo) <= math.log(x) + 1e-12 and math.log(x) - 1e-12 <= float(hi)
    assert hi - lo < Fraction(1, 10**25)


def test_ln_bounds_rejects_nonpositive():
    with pytest.raises(ValueError):
        ln_bounds(0)


def test_example1_sample_bound():
    inst = example1()
    m = Menu.of(inst, ["0", "1"])
    assert menu_separation(inst, m) == Fraction(1, 4)
    assert len(outcome_union(inst, m)) == 4
    # ceil(32 ln 160) = ceil(162.405...) = 163
    assert sample_bound(inst, m, Fraction(1, 20)).count == 163
    assert sample_bound(inst, m, "1/20").count == math.ceil(32 * math.log(160))
    zero = Menu.of(inst, ["0", "0"])
    assert sample_bound(inst, zero, Fraction(1, 20)).degenerate
    assert sample_bound(inst, zero, Fraction(1, 20)).count == 1


def test_example1_lengths_and_gammas():
    inst = example1()
    sched = phase_schedule(inst, PUBLIC)
    assert required_length_public(inst, "0", sched) == 4
    assert required_length_public(inst, "1", sched) == 4
    g1, g2, g0 = private_gammas(inst, Fraction(1, 10), 1000)
    # log2 |states| = 1 and |menus| = 4
    assert g1 == min(Fraction(1, 100) / 64, (Fraction(1, 100) / 128) ** 2)
    assert g2 == Fraction(1, 4000)
    assert g0 == min(g1, g2)


@pytest.mark.parametrize("gamma", [0, 1, Fraction(3, 2)])
def test_sample_bound_rejects_bad_gamma(gamma):
    inst = example1()
    with pytest.raises(ValueError):
        sample_bound(inst, Menu.of(inst, ["0", "1"]), gamma)
