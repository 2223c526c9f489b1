"""Single-round explorability, max-support policies and the phase fixed point.

A signal structure is a finite joint distribution over (state, signal).  In
the phase schedule every signal is a deterministic function of the state, so
the joint is the pushforward of the state prior.  Public signals are sorted
tuples of observed (type, action, reward) triples; private signals are sorted
tuples of (menu, outcome distribution) pairs.  The empty tuple is the signal
of the first phase.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

from .lp import EQ, GE, LinearProgram, check_point, max_coordinate
from .model import (
    Instance,
    Menu,
    enumerate_menus,
    menu_outcome_distribution,
    menu_value,
    restrict_types,
)

PUBLIC, PRIVATE = "public", "private"
BOTTOM = ()


@dataclass(frozen=True)
class SignalStructure:
    states: tuple
    support: tuple
    joint: Mapping  # (state, signal) -> Fraction, zero entries omitted
    round_tag: object = None

    @classmethod
    def from_map(cls, inst: Instance, signal_of: Mapping, round_tag=None) -> "SignalStructure":
        support = []
        for w in inst.states:
            if signal_of[w] not in support:
                support.append(signal_of[w])
        joint = {(w, signal_of[w]): inst.state_prior[w] for w in inst.states}
        return cls(inst.states, tuple(support), joint, round_tag)

    @classmethod
    def from_joint(cls, inst: Instance, joint: Mapping, round_tag=None) -> "SignalStructure":
        joint = {k: Fraction(v) for k, v in joint.items() if v != 0}
        support = []
        for w in inst.states:
            for (w2, s) in joint:
                if w2 == w and s not in support:
                    support.append(s)
        for w in inst.states:
            total = sum((p for (w2, _), p in joint.items() if w2 == w), Fraction(0))
            if total != inst.state_prior[w]:
                raise ValueError(f"signal marginal of state {w!r} is {total}, prior is {inst.state_prior[w]}")
        return cls(inst.states, tuple(support), joint, round_tag)

    @classmethod
    def trivial(cls, inst: Instance) -> "SignalStructure":
        return cls.from_map(inst, {w: BOTTOM for w in inst.states}, 1)

    def p(self, state, signal) -> Fraction:
        return self.joint.get((state, signal), Fraction(0))

    def signal_prob(self, signal) -> Fraction:
        return sum((self.p(w, signal) for w in self.states), Fraction(0))

    def key(self):
        return (self.support, tuple(sorted(((self.support.index(s), w), p) for (w, s), p in self.joint.items())))

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, SignalStructure) and self.key() == other.key()


@dataclass(frozen=True)
class StochasticPolicy:
    """Per-signal distribution over recommendations (actions or menus)."""

    mode: str
    table: Mapping  # signal -> tuple((recommendation, prob), ...)

    def dist(self, signal) -> dict:
        return dict(self.table[signal])

    def prob(self, signal, rec) -> Fraction:
        return self.dist(signal).get(rec, Fraction(0))

    def support(self, signal) -> tuple:
        return tuple(r for r, _ in self.table[signal])

    def min_positive(self) -> Fraction:
        return min(p for row in self.table.values() for _, p in row)


@dataclass
class ExplorableReport:
    mode: str
    delta: Fraction
    structure: SignalStructure
    ex: dict  # public: type -> signal -> tuple(actions); private: signal -> tuple(menus)
    policy: dict  # public: type -> StochasticPolicy; private: StochasticPolicy
    witnesses: dict = field(default_factory=dict)


def _check_signal(S: SignalStructure, s):
    if s not in S.support:
        raise KeyError(f"signal {s!r} not in the support of the signal structure")


def action_index(inst: Instance, S: SignalStructure, a, s) -> int:
    return S.support.index(s) * len(inst.actions) + inst.actions.index(a)


def build_action_lp(inst: Instance, S: SignalStructure, type_, a0, s0) -> LinearProgram:
    """LP whose feasible set is the single-round BIC policies for type_, objective x[a0, s0]."""
    _check_signal(S, s0)
    if a0 not in inst.actions:
        raise KeyError(f"unknown action {a0!r}")
    lp = _action_lp_rows(inst, S, type_)
    return lp.with_objective({action_index(inst, S, a0, s0): 1})


def _action_lp_rows(inst: Instance, S: SignalStructure, type_) -> LinearProgram:
    A, X = inst.actions, S.support
    lp = LinearProgram(len(A) * len(X))
    for a in A:
        for b in A:
            if a == b:
                continue
            coeffs = {}
            for s in X:
                c = sum(
                    (S.p(w, s) * (inst.u(type_, a, w) - inst.u(type_, b, w)) for w in inst.states),
                    Fraction(0),
                )
                if c:
                    coeffs[action_index(inst, S, a, s)] = c
            lp.add(coeffs, GE, 0)
    for s in X:
        lp.add({action_index(inst, S, a, s): 1 for a in A}, EQ, 1)
    return lp


def menu_index(menus: list, S: SignalStructure, m, s) -> int:
    return S.support.index(s) * len(menus) + menus.index(m)


def build_menu_lp(inst: Instance, S: SignalStructure, delta, m0: Menu, s0) -> LinearProgram:
    """LP over x[m, s] encoding single-round delta-BIC menu policies, objective x[m0, s0]."""
    _check_signal(S, s0)
    menus = enumerate_menus(inst)
    lp = _menu_lp_rows(inst, S, Fraction(delta))
    return lp.with_objective({menu_index(menus, S, m0, s0): 1})


def _menu_lp_rows(inst: Instance, S: SignalStructure, delta: Fraction, aggregate: bool = False) -> LinearProgram:
    """Menu LP rows.  By default the slack delta is per unit of message mass
    (delta-BIC conditional on the message); with aggregate=True it is a flat
    -delta on the unnormalized gain, which is weaker for rare messages."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    menus = enumerate_menus(inst)
    X = S.support
    slack = Fraction(0) if aggregate else delta
    lp = LinearProgram(len(menus) * len(X))
    # the row for (m, theta, m') only depends on m'(theta)
    for m in menus:
        for t in inst.types:
            for b in inst.actions:
                if b == m[t]:
                    continue
                coeffs = {}
                for s in X:
                    c = sum(
                        (S.p(w, s) * (inst.u(t, m[t], w) - inst.u(t, b, w) + slack) for w in inst.states),
                        Fraction(0),
                    )
                    if c:
                        coeffs[menu_index(menus, S, m, s)] = c
                lp.add(coeffs, GE, -delta if aggregate else 0)
    for s in X:
        lp.add({menu_index(menus, S, m, s): 1 for m in menus}, EQ, 1)
    return lp


def _explore(lp: LinearProgram):
    """Explorable (rec, signal) indices; each one comes with a BIC witness point."""
    witness = {}
    dead = set()
    for j in range(lp.num_vars):
        if j in witness or j in dead:
            continue
        out = max_coordinate(lp, j)
        if out.status != "optimal" or out.value <= 0:
            dead.add(j)
            continue
        for k, v in out.point.items():
            if v > 0 and k not in witness:
                witness[k] = out.point
    return witness


def _max_support(witness: dict, recs: list, X: tuple, mode: str):
    n = len(recs)
    ex = {}
    mix = {}
    for si, s in enumerate(X):
        ex_s = [recs[j] for j in range(n) if si * n + j in witness]
        ex[s] = tuple(ex_s)
        weight = Fraction(1, len(X) * len(ex_s))
        for j in range(n):
            if si * n + j in witness:
                point = witness[si * n + j]
                for k, v in point.items():
                    if v:
                        mix[k] = mix.get(k, Fraction(0)) + weight * v
    table = {}
    for si, s in enumerate(X):
        row = tuple((recs[j], mix[si * n + j]) for j in range(n) if mix.get(si * n + j, 0) > 0)
        table[s] = row
    return ex, StochasticPolicy(mode, table)


@lru_cache(maxsize=4096)
def _public_report_cached(inst: Instance, S: SignalStructure, type_):
    lp = _action_lp_rows(inst, S, type_)
    witness = _explore(lp)
    ex, pol = _max_support(witness, list(inst.actions), S.support, PUBLIC)
    return ex, pol, lp


@lru_cache(maxsize=1024)
def _private_report_cached(inst: Instance, S: SignalStructure, delta: Fraction, aggregate: bool = False):
    lp = _menu_lp_rows(inst, S, delta, aggregate)
    menus = enumerate_menus(inst)
    witness = _explore(lp)
    ex, pol = _max_support(witness, menus, S.support, PRIVATE)
    return ex, pol, lp


def signal_explorable_actions(inst: Instance, S: SignalStructure, type_, s) -> tuple:
    _check_signal(S, s)
    return _public_report_cached(inst, S, type_)[0][s]


def delta_signal_explorable_menus(inst: Instance, S: SignalStructure, delta, s) -> tuple:
    _check_signal(S, s)
    return _private_report_cached(inst, S, Fraction(delta))[0][s]


def max_support_policy(inst: Instance, S: SignalStructure, mode: str, delta=0, type_=None) -> StochasticPolicy:
    """pi^max: average over signals and explorable targets of their LP witness policies."""
    if mode == PUBLIC:
        if type_ is None:
            raise ValueError("public max-support policy needs a type")
        return _public_report_cached(inst, S, type_)[1]
    return _private_report_cached(inst, S, Fraction(delta))[1]


def explorable_report(inst: Instance, S: SignalStructure, mode: str, delta=0) -> ExplorableReport:
    delta = Fraction(delta)
    if mode == PUBLIC:
        ex, pol = {}, {}
        for t in inst.types:
            ex[t], pol[t], _ = _public_report_cached(inst, S, t)
        return ExplorableReport(mode, delta, S, ex, pol)
    ex, pol, _ = _private_report_cached(inst, S, delta)
    return ExplorableReport(mode, delta, S, ex, pol)


def bic_violations(inst: Instance, S: SignalStructure, policy: StochasticPolicy, mode: str, delta=0, type_=None):
    """Substitute a policy table into the LP rows; returns the violated rows."""
    if mode == PUBLIC:
        lp = _public_report_cached(inst, S, type_)[2]
        point = {action_index(inst, S, a, s): p for s in S.support for a, p in policy.table[s]}
    else:
        lp = _private_report_cached(inst, S, Fraction(delta))[2]
        menus = enumerate_menus(inst)
        point = {menu_index(menus, S, m, s): p for s in S.support for m, p in policy.table[s]}
    return check_point(lp, point)


def posterior_myopic_action(inst: Instance, S: SignalStructure, type_, s):
    """argmax_b sum_w P(w, s) u(type, b, w); ties go to the first action."""
    best, best_val = None, None
    for b in inst.actions:
        v = sum((S.p(w, s) * inst.u(type_, b, w) for w in inst.states), Fraction(0))
        if best_val is None or v > best_val:
            best, best_val = b, v
    return best


def posterior_myopic_menu(inst: Instance, S: SignalStructure, s) -> Menu:
    return Menu(tuple((t, posterior_myopic_action(inst, S, t, s)) for t in inst.types))


# ---------------------------------------------------------------------------
# phase schedule


@dataclass
class Phase:
    index: int
    signal_of: dict  # state -> signal
    structure: SignalStructure
    report: ExplorableReport


@dataclass
class PhaseSchedule:
    inst: Instance
    mode: str
    delta: Fraction
    phases: list  # distinct phases until the fixed point
    final_signal_of: dict
    final_structure: SignalStructure
    n_phases: int  # number of exploration phases the policy runs
    stable: bool

    def phase(self, l: int) -> Phase:
        """Phase l (1-based); phases past the fixed point repeat the last one."""
        return self.phases[min(l, len(self.phases)) - 1]

    def explored(self, state) -> frozenset:
        out = set()
        for ph in self.phases:
            s = ph.signal_of[state]
            if self.mode == PUBLIC:
                out.update((t, a) for t in self.inst.types for a in ph.report.ex[t][s])
            else:
                out.update(ph.report.ex[s])
        return frozenset(out)

    def all_structures(self):
        return [ph.structure for ph in self.phases] + [self.final_structure]


def next_public_signal(inst: Instance, signal, ex_by_type: Mapping, state):
    triples = set(signal)
    for t in inst.types:
        for a in ex_by_type[t]:
            triples.add((t, a, inst.u(t, a, state)))
    return tuple(sorted(triples))


def private_signal(inst: Instance, menus, state):
    return tuple((m, menu_outcome_distribution(inst, m, state)) for m in sorted(menus))


def signal_menus(signal) -> tuple:
    return tuple(m for m, _ in signal)


@lru_cache(maxsize=256)
def phase_schedule(inst: Instance, mode: str, delta=Fraction(0)) -> PhaseSchedule:
    delta = Fraction(delta)
    if mode == PUBLIC:
        n_phases = len(inst.actions) * len(inst.types)
    elif mode == PRIVATE:
        n_phases = inst.num_menus
    else:
        raise ValueError(f"unknown mode {mode!r}")
    enumerate_menus(inst)  # enforce the cap early
    signal_of = {w: BOTTOM for w in inst.states}
    phases = []
    stable = False
    while len(phases) < n_phases:
        l = len(phases) + 1
        S = SignalStructure.from_map(inst, signal_of, l)
        rep = explorable_report(inst, S, mode, delta)
        phases.append(Phase(l, dict(signal_of), S, rep))
        nxt = {}
        for w in inst.states:
            s = signal_of[w]
            if mode == PUBLIC:
                nxt[w] = next_public_signal(inst, s, {t: rep.ex[t][s] for t in inst.types}, w)
            else:
                nxt[w] = private_signal(inst, set(signal_menus(s)) | set(rep.ex[s]), w)
        if nxt == signal_of:
            stable = True
            break
        signal_of = nxt
    final = SignalStructure.from_map(inst, signal_of, len(phases) + 1)
    return PhaseSchedule(inst, mode, delta, phases, dict(signal_of), final, n_phases, stable)


def enumerate_phase_signals(inst: Instance, mode: str, delta=0) -> list:
    """Signal structure of every exploration phase 1..n_phases."""
    sched = phase_schedule(inst, mode, Fraction(delta))
    return [sched.phase(l).structure for l in range(1, sched.n_phases + 1)]


def eventually_explorable(inst: Instance, mode: str, delta=0) -> dict:
    """state -> frozenset of (type, action) pairs (public) or menus (private)."""
    sched = phase_schedule(inst, mode, Fraction(delta))
    return {w: sched.explored(w) for w in inst.states}


def opt_by_state(inst: Instance, mode: str, delta=0) -> dict:
    ee = eventually_explorable(inst, mode, delta)
    out = {}
    for w in inst.states:
        if mode == PUBLIC:
            out[w] = sum(
                (
                    inst.type_dist[t] * max(inst.u(t, a, w) for (t2, a) in ee[w] if t2 == t)
                    for t in inst.types
                ),
                Fraction(0),
            )
        else:
            out[w] = max(menu_value(inst, m, w) for m in ee[w])
    return out


def benchmark_opt(inst: Instance, mode: str, delta=0) -> Fraction:
    per = opt_by_state(inst, mode, delta)
    return sum((inst.state_prior[w] * per[w] for w in inst.states), Fraction(0))


def menu_pairs(menus) -> frozenset:
    return frozenset(p for m in menus for p in m.pairs)


@dataclass
class StaticsReport:
    relation: str  # "equal-support", "subset", "superset", "other"
    public: dict
    public_alt: dict
    public_holds: bool
    private_pairs: dict
    private_pairs_alt: dict


def comparative_statics(inst: Instance, type_dist_alt: Mapping, delta=0) -> StaticsReport:
    """Explorable sets under the instance's type distribution and an alternative one."""
    alt = restrict_types(inst, type_dist_alt)
    supp, supp_alt = set(inst.types), set(alt.types)
    pub = eventually_explorable(inst, PUBLIC)
    pub_alt = eventually_explorable(alt, PUBLIC)
    if supp == supp_alt:
        relation = "equal-support"
        holds = all(pub[w] == pub_alt[w] for w in inst.states)
    elif supp_alt < supp:
        relation = "subset"
        holds = all(pub_alt[w] <= pub[w] for w in inst.states)
    elif supp < supp_alt:
        relation = "superset"
        holds = all(pub[w] <= pub_alt[w] for w in inst.states)
    else:
        relation = "other"
        holds = True
    pri = eventually_explorable(inst, PRIVATE, delta)
    pri_alt = eventually_explorable(alt, PRIVATE, delta)
    return StaticsReport(
        relation,
        pub,
        pub_alt,
        holds,
        {w: menu_pairs(pri[w]) for w in inst.states},
        {w: menu_pairs(pri_alt[w]) for w in inst.states},
    )


# ---------------------------------------------------------------------------
# information monotonicity


@dataclass
class MonotonicityVerdict:
    applicable: bool
    holds: bool
    info: float
    zero_certificate: bool
    witnesses: list


def check_information_monotonicity(
    inst: Instance, joint: Mapping, mode: str = PUBLIC, delta=0, relaxation: str = "conditional"
) -> MonotonicityVerdict:
    """Containment of explorable sets under the information-monotonicity hypothesis.

    `joint` maps (state, s, s') to a probability.  With I(S'; w | S) = 0 the
    check is EX_{s'}[S'] within EX_s[S]; otherwise, if the mutual information
    is at most (delta/R)^2/8 with R = max(1, utility range), it is the sets of
    EX_{s'}[S'] within the delta-relaxed EX_s[S].  Without either hypothesis
    no assertion is made.

    relaxation="conditional" reads the relaxed set with delta-BIC given the
    message, the definition used everywhere else.  relaxation="aggregate"
    uses the flat -delta bound on the unnormalized gain instead; it is only
    meant for diagnosing failures of the conditional reading.
    """
    from .infotheory import FiniteJoint, conditional_mutual_information

    if relaxation not in ("conditional", "aggregate"):
        raise ValueError(f"unknown relaxation {relaxation!r}")
    delta = Fraction(delta)
    fj = FiniteJoint(("w", "S", "S'"), joint)
    info, zero = conditional_mutual_information(fj, ["S'"], ["w"], ["S"])
    scale = max(Fraction(1), inst.utility_range())
    bound = float((delta / scale) ** 2 / 8)
    if zero:
        relax = Fraction(0)
    elif mode == PRIVATE and delta > 0 and info <= bound:
        relax = delta
    else:
        return MonotonicityVerdict(False, True, info, zero, [])
    j1, j2 = {}, {}
    for (w, s, s2), p in fj.mass.items():
        j1[(w, s)] = j1.get((w, s), Fraction(0)) + p
        j2[(w, s2)] = j2.get((w, s2), Fraction(0)) + p
    S = SignalStructure.from_joint(inst, j1)
    S2 = SignalStructure.from_joint(inst, j2)
    pairs = sorted({(s, s2) for (_, s, s2) in fj.mass}, key=lambda ss: (S.support.index(ss[0]), S2.support.index(ss[1])))
    witnesses = []
    for s, s2 in pairs:
        if mode == PUBLIC:
            for t in inst.types:
                small = set(signal_explorable_actions(inst, S2, t, s2))
                big = set(signal_explorable_actions(inst, S, t, s))
                if not small <= big:
                    witnesses.append((s, s2, t, tuple(sorted(small - big))))
        else:
            small = set(delta_signal_explorable_menus(inst, S2, 0, s2))
            _check_signal(S, s)
            big = set(_private_report_cached(inst, S, relax, relaxation == "aggregate")[0][s])
            if not small <= big:
                witnesses.append((s, s2, None, tuple(sorted(small - big))))
    return MonotonicityVerdict(True, not witnesses, info, zero, witnesses)
