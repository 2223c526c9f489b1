"""The phased recommendation policies, the triple-list estimator and the BIC auditor.

Agents are obedient: each takes the action its message names for its type.
Every round records the law of the message in force (for each state, the
distribution of the message the policy could have sent given the realized type
history), which is what the auditor conditions on.

Randomness is split into named sub-streams of the run seed, so the public
policy draws the MaxExplore sequence of type index i in phase l from stream
(2, i, l) no matter when it is first needed.  The reported-types policy reuses
exactly those streams for its simulated public run.
"""
from __future__ import annotations

import bisect
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .explorability import (
    PRIVATE,
    PUBLIC,
    phase_schedule,
    posterior_myopic_action,
)
from .maxexplore import (
    as_fraction,
    is_degenerate,
    max_explore,
    menu_separation,
    private_gammas,
    required_length_private,
    required_length_public,
    sample_bound,
)
from .model import Instance, Menu, menu_outcome_distribution
from .trace import Trace, instance_fingerprint

REPORTED = "reported"
POLICIES = (PUBLIC, REPORTED, PRIVATE)

STREAM_TYPES = 0
STREAM_GUESSES = 1
STREAM_PUBLIC_EXPLORE = 2
STREAM_PRIVATE_EXPLORE = 3
STREAM_STATES = 4


class PolicyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# seeds and streams


def derive_seed(*keys: int) -> int:
    """64-bit seed mixed from a sequence of nonnegative integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


def stream(seed: int, *keys: int) -> random.Random:
    return random.Random(derive_seed(seed, *keys))


class TypeSampler:
    """I.i.d. draws from the type distribution using exact integer thresholds."""

    def __init__(self, inst: Instance, rng: random.Random):
        den = 1
        for t in inst.types:
            q = inst.type_dist[t]
            den = den * q.denominator // np.gcd(den, q.denominator)
        self.den = int(den)
        acc = 0
        self.edges = []
        for t in inst.types:
            acc += int(inst.type_dist[t] * self.den)
            self.edges.append(acc)
        self.types = inst.types
        self.rng = rng

    def __iter__(self):
        return self

    def __next__(self):
        return self.types[bisect.bisect_right(self.edges, self.rng.randrange(self.den))]


def type_source(inst: Instance, type_stream, seed: int):
    if type_stream is None:
        return TypeSampler(inst, stream(seed, STREAM_TYPES))
    types = [str(t) for t in type_stream]
    for t in types:
        if t not in inst.types:
            raise PolicyError(f"unknown type {t!r} in the type stream")
    return iter(types)


# ---------------------------------------------------------------------------
# message laws and margins


class MessageLaw:
    """For each state, the distribution of the message sent in a round."""

    __slots__ = ("by_state", "_margins", "_fillers")

    def __init__(self, by_state: dict):
        self.by_state = by_state
        self._margins = {}
        self._fillers = {}


def conditional_margin(inst: Instance, law: MessageLaw, msg, types: tuple):
    """(margin, off_policy): min over types and alternatives of E[u(rec) - u(alt) | message]."""
    key = (msg, types)
    hit = law._margins.get(key)
    if hit is not None:
        return hit
    weight = {w: inst.state_prior[w] * law.by_state[w].get(msg, 0) for w in inst.states}
    z = sum(weight.values(), Fraction(0))
    off = z == 0
    if off:
        weight = dict(inst.state_prior)
        z = Fraction(1)
    best = None
    for t in types:
        rec = msg[t] if isinstance(msg, Menu) else msg
        for b in inst.actions:
            if b == rec:
                continue
            v = sum((weight[w] * (inst.u(t, rec, w) - inst.u(t, b, w)) for w in inst.states), Fraction(0)) / z
            if best is None or v < best:
                best = v
    out = (Fraction(0) if best is None else best, off)
    law._margins[key] = out
    return out


def filler_action(inst: Instance, law: MessageLaw, rec, type_):
    """Best action for type_ given only that `rec` was drawn from `law`."""
    key = (rec, type_)
    hit = law._fillers.get(key)
    if hit is not None:
        return hit
    best, best_val = None, None
    for b in inst.actions:
        v = sum(
            (inst.state_prior[w] * law.by_state[w].get(rec, 0) * inst.u(type_, b, w) for w in inst.states),
            Fraction(0),
        )
        if best_val is None or v > best_val:
            best, best_val = b, v
    law._fillers[key] = best
    return best


@lru_cache(maxsize=None)
def _public_law(inst: Instance, kind: str, l: int, type_) -> MessageLaw:
    sched = phase_schedule(inst, PUBLIC)
    if kind == "exploit":
        S, sig = sched.final_structure, sched.final_signal_of
        return MessageLaw({w: {posterior_myopic_action(inst, S, type_, sig[w]): Fraction(1)} for w in inst.states})
    ph = sched.phase(l)
    if kind == "explore":
        pol = ph.report.policy[type_]
        return MessageLaw({w: dict(pol.table[ph.signal_of[w]]) for w in inst.states})
    S = ph.structure
    return MessageLaw({w: {posterior_myopic_action(inst, S, type_, ph.signal_of[w]): Fraction(1)} for w in inst.states})


@lru_cache(maxsize=None)
def _reported_law(inst: Instance, keys: tuple) -> MessageLaw:
    """Mixture over the uniform guess of the menus built around each type's public law."""
    laws = [_public_law(inst, *k) for k in keys]
    g = Fraction(1, len(inst.types))
    by_state = {}
    for w in inst.states:
        d = {}
        for gi, law in enumerate(laws):
            for a, p in law.by_state[w].items():
                m = guessed_menu(inst, law, gi, a)
                d[m] = d.get(m, Fraction(0)) + g * p
        by_state[w] = d
    return MessageLaw(by_state)


def guessed_menu(inst: Instance, law: MessageLaw, guess_index: int, rec) -> Menu:
    pairs = []
    for i, t in enumerate(inst.types):
        pairs.append((t, rec if i == guess_index else filler_action(inst, law, rec, t)))
    return Menu(tuple(pairs))


@lru_cache(maxsize=None)
def _reported_exploit_law(inst: Instance) -> MessageLaw:
    sched = phase_schedule(inst, PUBLIC)
    S, sig = sched.final_structure, sched.final_signal_of
    return MessageLaw(
        {
            w: {Menu(tuple((t, posterior_myopic_action(inst, S, t, sig[w])) for t in inst.types)): Fraction(1)}
            for w in inst.states
        }
    )


@lru_cache(maxsize=None)
def _private_law(inst: Instance, delta: Fraction, kind: str, l: int) -> MessageLaw:
    sched = phase_schedule(inst, PRIVATE, delta)
    if kind == "exploit":
        S, sig = sched.final_structure, sched.final_signal_of
        return MessageLaw(
            {
                w: {Menu(tuple((t, posterior_myopic_action(inst, S, t, sig[w])) for t in inst.types)): Fraction(1)}
                for w in inst.states
            }
        )
    ph = sched.phase(l)
    pol = ph.report.policy
    return MessageLaw({w: dict(pol.table[ph.signal_of[w]]) for w in inst.states})


# ---------------------------------------------------------------------------
# public policy


class PublicRunner:
    """Phased public-types policy; `peek` is idempotent and `commit` feeds back one round."""

    def __init__(self, inst: Instance, seed: int):
        self.inst = inst
        self.seed = seed
        self.sched = phase_schedule(inst, PUBLIC)
        self.L = {t: required_length_public(inst, t, self.sched) for t in inst.types}
        self.n_phases = self.sched.n_phases
        self.l = 1
        self.triples = set()
        self.signal = ()
        self.i = {t: 0 for t in inst.types}
        self.alpha = {}
        self.exploiting = False
        self.phase_lengths = []
        self._phase_rounds = 0
        self._exploit = {}

    def _l_eff(self) -> int:
        return min(self.l, len(self.sched.phases))

    def law_key(self, type_) -> tuple:
        if self.exploiting:
            return ("exploit", 0, type_)
        if self.i[type_] < self.L[type_]:
            return ("explore", self._l_eff(), type_)
        return ("overflow", self._l_eff(), type_)

    def peek(self, type_):
        """(recommended action, law key) for an agent of type_ arriving next."""
        if self.exploiting:
            a = self._exploit.get(type_)
            if a is None:
                S = self.sched.final_structure
                a = self._exploit[type_] = posterior_myopic_action(self.inst, S, type_, self.signal)
            return a, ("exploit", 0, type_)
        idx = self.i[type_]
        ph = self.sched.phase(self.l)
        if idx < self.L[type_]:
            seq = self.alpha.get(type_)
            if seq is None:
                ti = self.inst.types.index(type_)
                rng = stream(self.seed, STREAM_PUBLIC_EXPLORE, ti, self.l)
                seq = self.alpha[type_] = max_explore(ph.report.policy[type_].table[self.signal], self.L[type_], rng).items
            return seq[idx], ("explore", self._l_eff(), type_)
        return posterior_myopic_action(self.inst, ph.structure, type_, self.signal), ("overflow", self._l_eff(), type_)

    def commit(self, type_, action, reward):
        self.triples.add((type_, action, reward))
        if self.exploiting:
            return
        self.i[type_] += 1
        self._phase_rounds += 1
        if all(self.i[t] >= self.L[t] for t in self.inst.types):
            self.phase_lengths.append(self._phase_rounds)
            self._phase_rounds = 0
            self.l += 1
            self.signal = tuple(sorted(self.triples))
            self.i = {t: 0 for t in self.inst.types}
            self.alpha = {}
            if self.l > self.n_phases:
                self.exploiting = True
                S = self.sched.final_structure
            else:
                S = self.sched.phase(self.l).structure
            if self.signal not in S.support:
                raise RuntimeError(f"phase {self.l} signal is outside the enumerated signal structure")


def _new_trace(inst, policy, state, seed, T, delta) -> Trace:
    if state not in inst.states:
        raise PolicyError(f"unknown state {state!r}")
    if T < 1:
        raise PolicyError("T must be at least 1")
    return Trace(policy, state, seed, T, Fraction(delta), instance_fingerprint(inst))


def run_public_policy(inst: Instance, state, type_stream=None, T: int = 1000, seed: int = 0) -> Trace:
    tr = _new_trace(inst, PUBLIC, state, seed, T, 0)
    types = type_source(inst, type_stream, seed)
    runner = PublicRunner(inst, seed)
    rows, laws = tr.rows, tr.laws
    explore_rounds = 0
    for t in range(1, T + 1):
        typ = next(types, None)
        if typ is None:
            break
        a, key = runner.peek(typ)
        law = _public_law(inst, *key)
        r = inst.u(typ, a, state)
        margin, _ = conditional_margin(inst, law, a, (typ,))
        phase = runner.l
        if not runner.exploiting:
            explore_rounds += 1
        rows.append((t, typ, a, a, r, phase, "-", margin))
        laws.append(law)
        runner.commit(typ, a, r)
    tr.diagnostics.update(
        exploration_rounds=explore_rounds,
        exploration_complete=runner.exploiting,
        phases=min(runner.l, runner.n_phases + 1),
        phase_lengths=list(runner.phase_lengths),
        L=dict(runner.L),
        explored=frozenset((ty, a) for ty, a, _ in runner.triples),
    )
    if not runner.exploiting:
        tr.diagnostics["note"] = "exploration did not finish within the horizon"
    return tr


def run_reported_policy(inst: Instance, state, type_stream=None, T: int = 1000, seed: int = 0) -> Trace:
    tr = _new_trace(inst, REPORTED, state, seed, T, 0)
    types = type_source(inst, type_stream, seed)
    guesses = stream(seed, STREAM_GUESSES)
    runner = PublicRunner(inst, seed)
    rows, laws = tr.rows, tr.laws
    n = len(inst.types)
    explore_rounds = 0
    lucky_rounds = 0
    for t in range(1, T + 1):
        typ = next(types, None)
        if typ is None:
            break
        if runner.exploiting:
            law = _reported_exploit_law(inst)
            menu = next(iter(law.by_state[state]))
            lucky = "-"
            phase = runner.l
        else:
            gi = guesses.randrange(n)
            guess = inst.types[gi]
            rec, key = runner.peek(guess)
            menu = guessed_menu(inst, _public_law(inst, *key), gi, rec)
            law = _reported_law(inst, tuple(runner.law_key(g) for g in inst.types))
            lucky = "1" if guess == typ else "0"
            phase = runner.l
            explore_rounds += 1
        a = menu[typ]
        r = inst.u(typ, a, state)
        margin, _ = conditional_margin(inst, law, menu, inst.types)
        rows.append((t, typ, menu, a, r, phase, lucky, margin))
        laws.append(law)
        if lucky == "1":
            lucky_rounds += 1
            runner.commit(typ, a, r)
    tr.diagnostics.update(
        exploration_rounds=explore_rounds,
        exploration_complete=runner.exploiting,
        lucky_rounds=lucky_rounds,
        phases=min(runner.l, runner.n_phases + 1),
        L=dict(runner.L),
        explored=frozenset((ty, a) for ty, a, _ in runner.triples),
    )
    return tr


def lucky_subtrace(trace: Trace) -> list:
    """(type, action, reward, phase) of the lucky rounds."""
    return [(r[1], r[3], r[4], r[5]) for r in trace.rows if r[6] == "1"]


# ---------------------------------------------------------------------------
# triple lists


@dataclass(frozen=True)
class TripleList:
    menu: Menu
    entries: tuple  # (action, reward, probability)
    state: str  # canonical state whose outcome distribution this is
    fallback: bool  # no state matched the empirical frequencies


@lru_cache(maxsize=None)
def menu_outcome_distribution_cached(inst: Instance, m: Menu, state):
    return menu_outcome_distribution(inst, m, state)


def _triples(dist) -> tuple:
    return tuple((a, r, p) for (a, r), p in dist.items)


@lru_cache(maxsize=200000)
def estimate_from_counts(inst: Instance, m: Menu, counts: tuple) -> TripleList:
    """Triple-list from sorted ((action, reward), count) pairs."""
    n = sum(c for _, c in counts)
    if n == 0:
        raise ValueError("no samples")
    first = inst.states[0]
    if is_degenerate(inst, m):
        return TripleList(m, _triples(menu_outcome_distribution_cached(inst, m, first)), first, False)
    half = menu_separation(inst, m) / 2
    cnt = dict(counts)
    for w in inst.states:
        d = menu_outcome_distribution_cached(inst, m, w)
        keys = set(cnt) | set(d.support)
        if all(abs(d.prob(k) * n - cnt.get(k, 0)) <= half * n for k in keys):
            return TripleList(m, _triples(d), w, False)
    return TripleList(m, _triples(menu_outcome_distribution_cached(inst, m, first)), first, True)


def estimate_triple_list(samples: Iterable, inst: Instance, m: Menu) -> TripleList:
    """Match empirical (action, reward) frequencies to the state within half the separation."""
    c = Counter((str(a), Fraction(r)) for a, r in samples)
    if not c:
        raise ValueError("empty sample list")
    return estimate_from_counts(inst, m, tuple(sorted(c.items())))


# ---------------------------------------------------------------------------
# private policy


def private_exploration_length(inst: Instance, delta, T: int):
    """(L, |M| * L, gammas) for the private policy at horizon T."""
    delta = as_fraction(delta)
    g1, g2, g0 = private_gammas(inst, delta, T)
    L = required_length_private(inst, delta, g0)
    return L, inst.num_menus * L, (g1, g2, g0)


def minimum_private_horizon(inst: Instance, delta) -> int:
    """Smallest T with T >= |M| * L(T); L grows with T through gamma2."""
    T = 1
    while True:
        need = private_exploration_length(inst, delta, T)[1]
        if need <= T:
            return T
        T = need


def run_private_policy(inst: Instance, state, type_stream=None, T: int = 1000, delta=Fraction(1, 10), seed: int = 0) -> Trace:
    delta = as_fraction(delta)
    if delta <= 0:
        raise PolicyError("the private policy needs delta > 0")
    tr = _new_trace(inst, PRIVATE, state, seed, T, delta)
    sched = phase_schedule(inst, PRIVATE, delta)
    L, need, (g1, g2, g0) = private_exploration_length(inst, delta, T)
    n_phases = sched.n_phases
    if T < need:
        raise PolicyError(f"T={T} is below the exploration length |M|*L = {n_phases}*{L} = {need}")
    types = type_source(inst, type_stream, seed)
    rows, laws = tr.rows, tr.laws
    signal = ()
    knowledge = {}  # menu -> TripleList
    all_samples = {}  # menu -> list of outcomes
    fallbacks = []
    phase_counts = []
    mu = None
    l = 1
    exploit_menu = None
    exploit_law = None
    for t in range(1, T + 1):
        typ = next(types, None)
        if typ is None:
            break
        if l <= n_phases:
            pos = (t - 1) % L
            ph = sched.phase(l)
            if pos == 0:
                mu = max_explore(ph.report.policy.table[signal], L, stream(seed, STREAM_PRIVATE_EXPLORE, l)).items
                phase_samples = {}
            m = mu[pos]
            law = _private_law(inst, delta, "explore", min(l, len(sched.phases)))
            a = m[typ]
            r = inst.u(typ, a, state)
            phase_samples.setdefault(m, []).append((a, r))
            all_samples.setdefault(m, []).append((a, r))
            margin, _ = conditional_margin(inst, law, m, inst.types)
            rows.append((t, typ, m, a, r, l, "-", margin))
            laws.append(law)
            if pos == L - 1:
                phase_counts.append({mm: len(v) for mm, v in phase_samples.items()})
                for mm, smp in phase_samples.items():
                    b = sample_bound(inst, mm, g1).count
                    knowledge[mm] = estimate_triple_list(smp[:b], inst, mm)
                signal, fell = _project(inst, sched, l, signal, knowledge)
                if fell:
                    fallbacks.append((t, l))
                l += 1
        else:
            if exploit_menu is None:
                for mm, smp in all_samples.items():
                    b = sample_bound(inst, mm, g2).count
                    knowledge[mm] = estimate_triple_list(smp[-b:], inst, mm)
                fresh = tuple((mm, menu_outcome_distribution_cached(inst, mm, knowledge[mm].state)) for mm in sorted(knowledge))
                if fresh in sched.final_structure.support:
                    signal = fresh
                elif fresh != signal:
                    fallbacks.append((t, l))
                S = sched.final_structure
                exploit_menu = Menu(tuple((ty, posterior_myopic_action(inst, S, ty, signal)) for ty in inst.types))
                exploit_law = _private_law(inst, delta, "exploit", 0)
            a = exploit_menu[typ]
            r = inst.u(typ, a, state)
            margin, _ = conditional_margin(inst, exploit_law, exploit_menu, inst.types)
            rows.append((t, typ, exploit_menu, a, r, l, "-", margin))
            laws.append(exploit_law)
    tr.diagnostics.update(
        L=L,
        exploration_rounds=min(len(rows), need),
        exploration_complete=len(rows) >= need,
        phases=min(l, n_phases + 1),
        gammas=(g1, g2, g0),
        phase_counts=phase_counts,
        estimation_fallbacks=fallbacks,
        explored=frozenset(knowledge),
        idealized_structure=True,
    )
    return tr


def _project(inst: Instance, sched, l: int, signal, knowledge: dict):
    """Next signal: the idealized one of a state consistent with every triple-list.

    Candidates are the states whose idealized phase-l signal equals the current
    one; without a consistent candidate the first candidate is used.
    """
    candidates = [w for w in inst.states if sched.phase(l).signal_of[w] == signal]
    if not candidates:
        raise RuntimeError(f"phase {l} signal is outside the enumerated signal structure")
    nxt = sched.phases[l].signal_of if l < len(sched.phases) else sched.final_signal_of
    for w in candidates:
        if all(tl.entries == _triples(menu_outcome_distribution_cached(inst, m, w)) for m, tl in knowledge.items()):
            return nxt[w], False
    return nxt[candidates[0]], True


# ---------------------------------------------------------------------------
# audit


@dataclass
class AuditReport:
    policy: str
    threshold: Fraction
    margins: list
    violations: list  # (round, margin)
    mismatches: list  # (round, expected message, trace message)
    disobedient: list  # (round, reason)
    off_policy: list  # rounds whose message has zero probability under the policy

    @property
    def ok(self) -> bool:
        return not (self.violations or self.mismatches or self.disobedient)

    @property
    def min_margin(self):
        return min(self.margins) if self.margins else None


def threshold_for(policy: str, delta) -> Fraction:
    return -as_fraction(delta) if policy == PRIVATE else Fraction(0)


def replay(inst: Instance, trace: Trace) -> Trace:
    """Re-run the trace's policy on its own type column with the recorded seed."""
    types = trace.types()
    T = len(types)
    if trace.policy == PUBLIC:
        return run_public_policy(inst, trace.state, types, T, trace.seed)
    if trace.policy == REPORTED:
        return run_reported_policy(inst, trace.state, types, T, trace.seed)
    if trace.policy == PRIVATE:
        return _run_private_for_replay(inst, trace, types)
    raise PolicyError(f"unknown policy {trace.policy!r}")


def _run_private_for_replay(inst, trace, types):
    # the horizon fixes gamma2, so replay with the recorded T and truncate
    full = run_private_policy(inst, trace.state, types, trace.T, trace.delta, trace.seed)
    return full


def audit_bic(trace: Trace, inst: Instance, replayed: Optional[Trace] = None) -> AuditReport:
    """Exact conditional margins of every round against the replayed policy's message laws."""
    if trace.fingerprint and trace.fingerprint != instance_fingerprint(inst):
        raise PolicyError("trace was produced on a different instance")
    ref = replayed if replayed is not None else replay(inst, trace)
    if len(ref.rows) != len(trace.rows):
        raise PolicyError(f"trace/policy mismatch: trace has {len(trace.rows)} rounds, replay has {len(ref.rows)}")
    thr = threshold_for(trace.policy, trace.delta)
    margins, violations, mismatches, disobedient, off = [], [], [], [], []
    for row, ref_row, law in zip(trace.rows, ref.rows, ref.laws):
        t, typ, msg, act, rew = row[:5]
        if ref_row[1] != typ:
            raise PolicyError(f"round {t}: replay type differs")
        expect = msg[typ] if isinstance(msg, Menu) else msg
        if act != expect:
            disobedient.append((t, f"action {act} differs from the message {expect}"))
        if rew != inst.u(typ, act, trace.state):
            disobedient.append((t, f"reward {rew} differs from u = {inst.u(typ, act, trace.state)}"))
        if ref_row[2] != msg:
            mismatches.append((t, ref_row[2], msg))
        types = inst.types if isinstance(msg, Menu) else (typ,)
        m, is_off = conditional_margin(inst, law, msg, types)
        margins.append(m)
        if is_off:
            off.append(t)
        if m < thr:
            violations.append((t, m))
    return AuditReport(trace.policy, thr, margins, violations, mismatches, disobedient, off)


def run_policy(inst: Instance, policy: str, state, T: int, seed: int, delta=0, type_stream=None) -> Trace:
    if policy == PUBLIC:
        return run_public_policy(inst, state, type_stream, T, seed)
    if policy == REPORTED:
        return run_reported_policy(inst, state, type_stream, T, seed)
    if policy == PRIVATE:
        return run_private_policy(inst, state, type_stream, T, delta, seed)
    raise PolicyError(f"unknown policy {policy!r}")
