from collections import Counter
from fractions import Fraction
from functools import lru_cache

import pytest

from bayesexplore.explorability import PUBLIC, eventually_explorable
from bayesexplore.maxexplore import menu_separation
from bayesexplore.model import Menu, enumerate_menus, expected_utility_prior, menu_outcome_distribution
from bayesexplore.policies import (
    PolicyError,
    audit_bic,
    derive_seed,
    estimate_triple_list,
    lucky_subtrace,
    private_exploration_length,
    run_private_policy,
    run_public_policy,
    run_reported_policy,
)
from bayesexplore.trace import total_reward, trace_from_csv, trace_to_csv


def expected_phase_length(probs, L):
    """E[rounds until every type i has arrived L[i] times], by exact recursion."""
    n = len(probs)

    @lru_cache(maxsize=None)
    def go(counts):
        need = [i for i in range(n) if counts[i] < L[i]]
        if not need:
            return Fraction(0)
        stay = sum((probs[i] for i in range(n) if counts[i] >= L[i]), Fraction(0))
        acc = Fraction(1)
        for i in need:
            nxt = list(counts)
            nxt[i] += 1
            acc += probs[i] * go(tuple(nxt))
        return acc / (1 - stay)

    return go(tuple([0] * n))


def test_first_round_is_prior_myopic(ex1):
    for w in ex1.states:
        for seed in range(5):
            tr = run_public_policy(ex1, w, T=1, seed=seed)
            t, typ, msg, act, rew = tr.rows[0][:5]
            assert msg == act == "0"
            best = max(ex1.actions, key=lambda a: expected_utility_prior(ex1, typ, a))
            assert rew == ex1.u(typ, best, w)


def test_public_determinism(ex1):
    a = run_public_policy(ex1, "0", T=300, seed=42)
    b = run_public_policy(ex1, "0", T=300, seed=42)
    assert trace_to_csv(a) == trace_to_csv(b)
    c = run_public_policy(ex1, "0", T=300, seed=43)
    assert trace_to_csv(a) != trace_to_csv(c)


def test_seed_split_is_stable():
    assert derive_seed(0, 0) == derive_seed(0, 0)
    assert len({derive_seed(s, i) for s in range(20) for i in range(5)}) == 100


def test_public_exploits_best_explored_action(ex1):
    tr = run_public_policy(ex1, "0", T=400, seed=1)
    assert tr.diagnostics["exploration_complete"]
    tail = [r for r in tr.rows if r[5] > tr.diagnostics["phases"] - 1]
    # in state 0, type 0 earns 4 on action 1 and type 1 earns 2 on action 0
    assert {(r[1], r[3]) for r in tail} == {("0", "1"), ("1", "0")}


def test_public_explored_pairs_match_fixed_point(ex1):
    ee = eventually_explorable(ex1, PUBLIC)
    for w in ex1.states:
        for seed in range(10):
            tr = run_public_policy(ex1, w, T=500, seed=seed)
            assert tr.diagnostics["explored"] == ee[w]


def test_margins_and_laws(ex1):
    for w in ex1.states:
        tr = run_public_policy(ex1, w, T=300, seed=2)
        for row, law in zip(tr.rows, tr.laws):
            assert row[7] >= 0
            assert law.by_state[w].get(row[2], 0) > 0
            assert sum(law.by_state[w].values()) == 1


def test_audit_roundtrip(ex1):
    tr = run_public_policy(ex1, "1", T=200, seed=5)
    rep = audit_bic(trace_from_csv(trace_to_csv(tr), ex1), ex1)
    assert rep.ok and rep.min_margin >= 0


def test_audit_flags_corrupted_round(ex1):
    tr = run_public_policy(ex1, "0", T=50, seed=0)
    text = trace_to_csv(tr).splitlines()
    i = next(k for k, line in enumerate(text) if line.startswith("1,"))
    typ = text[i].split(",")[1]
    # send action 1 in round 1, which no BIC policy does before anything is learned
    text[i] = f"1,{typ},1,1,{ex1.u(typ, '1', '0')},1,1,-,0"
    bad = trace_from_csv("\n".join(text) + "\n", ex1)
    rep = audit_bic(bad, ex1)
    assert not rep.ok
    assert rep.violations[0][0] == 1
    assert rep.mismatches[0][0] == 1
    # the message is off-policy, so the margin is the prior one: E[u(1) - u(0)] = -1/2
    assert rep.violations[0][1] == Fraction(-1, 2)
    assert rep.off_policy == [1]


def test_audit_flags_disobedience(ex1):
    tr = run_public_policy(ex1, "0", T=20, seed=0)
    t, typ, msg, act, rew, phase, lucky, m = tr.rows[3]
    tr.rows[3] = (t, typ, msg, act, rew + 1, phase, lucky, m)
    rep = audit_bic(tr, ex1)
    assert rep.disobedient and rep.disobedient[0][0] == 4


def test_type_stream_and_truncation(ex1):
    tr = run_public_policy(ex1, "0", type_stream=["0", "1", "1"], T=10, seed=0)
    assert tr.types() == ["0", "1", "1"]
    with pytest.raises(PolicyError):
        run_public_policy(ex1, "0", type_stream=["7"], T=1)
    with pytest.raises(PolicyError):
        run_public_policy(ex1, "0", T=0)
    with pytest.raises(PolicyError):
        run_public_policy(ex1, "9", T=5)


def test_reported_lucky_rounds_replay_public(ex1):
    for seed in range(10):
        rep = run_reported_policy(ex1, "0", T=400, seed=seed)
        sub = lucky_subtrace(rep)
        pub = run_public_policy(ex1, "0", type_stream=[r[0] for r in sub], T=len(sub), seed=seed)
        assert sub == [(r[1], r[3], r[4], r[5]) for r in pub.rows]


def test_reported_margins_nonnegative(ex1):
    for w in ex1.states:
        tr = run_reported_policy(ex1, w, T=300, seed=3)
        assert min(r[7] for r in tr.rows) >= 0
        assert audit_bic(tr, ex1).ok
        # exploring rounds carry a lucky flag, exploiting rounds do not
        assert {r[6] for r in tr.rows} <= {"1", "0", "-"}


def test_phase_lengths_match_dp(ex1):
    L = [4, 4]
    want = expected_phase_length([Fraction(1, 2), Fraction(1, 2)], L)
    lengths = []
    for seed in range(400):
        tr = run_public_policy(ex1, "0", T=200, seed=seed)
        lengths.extend(tr.diagnostics["phase_lengths"])
    mean = sum(lengths) / len(lengths)
    assert abs(mean - float(want)) <= 0.1 * float(want)
    # crude bound sum_theta L_theta / Pr[theta]
    assert mean <= 1.1 * sum(l / 0.5 for l in L)


def test_private_needs_long_horizon(ex1):
    T = 5000
    L, need, _ = private_exploration_length(ex1, Fraction(1), T)
    assert need > T
    with pytest.raises(PolicyError, match=str(need)):
        run_private_policy(ex1, "0", T=T, delta=Fraction(1))
    with pytest.raises(PolicyError):
        run_private_policy(ex1, "0", T=100, delta=0)


def test_private_small_delta_only_zero_menu(ex1):
    tr = run_private_policy(ex1, "0", T=200, delta=Fraction(1, 10), seed=1)
    assert {r[2] for r in tr.rows} == {Menu.of(ex1, ["0", "0"])}
    assert total_reward(tr)[0] == sum(ex1.u(r[1], "0", "0") for r in tr.rows)


def test_private_large_delta_learns_state(ex1):
    for w in ex1.states:
        tr = run_private_policy(ex1, w, T=20000, delta=Fraction(1), seed=4)
        assert tr.diagnostics["estimation_fallbacks"] == []
        assert tr.diagnostics["explored"] == frozenset(enumerate_menus(ex1))
        assert min(r[7] for r in tr.rows) >= -1
        last = tr.rows[-1]
        # exploitation gives each type its best action in the realized state
        best = {t: max(ex1.actions, key=lambda a: ex1.u(t, a, w)) for t in ex1.types}
        assert last[2] == Menu(tuple(best.items()))


def test_estimator_exact_and_fallback(ex1):
    m = Menu.of(ex1, ["0", "1"])
    for w in ex1.states:
        d = menu_outcome_distribution(ex1, m, w)
        samples = [k for k, p in d.items for _ in range(int(p * 40))]
        tl = estimate_triple_list(samples, ex1, m)
        assert tl.state == w and not tl.fallback
        assert tl.entries == tuple((a, r, p) for (a, r), p in d.items)
    # frequencies far from both states
    bogus = [("0", Fraction(3))] * 10 + [("1", Fraction(0))] * 10
    tl = estimate_triple_list(bogus, ex1, m)
    assert not tl.fallback or tl.state == ex1.states[0]
    zero = Menu.of(ex1, ["0", "0"])
    assert not estimate_triple_list([("0", Fraction(3))], ex1, zero).fallback
    with pytest.raises(ValueError):
        estimate_triple_list([], ex1, m)


def test_estimator_threshold_is_half_separation(ex1):
    # within half the separation of state 0 must map to state 0
    m = Menu.of(ex1, ["1", "1"])
    dm = menu_separation(ex1, m)
    d0 = menu_outcome_distribution(ex1, m, "0").as_dict()
    n = 1000
    counts = Counter()
    for k, p in d0.items():
        counts[k] = int(p * n)
    k0 = next(iter(d0))
    shift = int(dm * n / 2)
    counts[k0] -= shift
    other = [k for k in d0 if k != k0][0]
    counts[other] += shift
    samples = [k for k, c in counts.items() for _ in range(c)]
    assert estimate_triple_list(samples, ex1, m).state == "0"
