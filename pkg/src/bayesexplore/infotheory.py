"""Entropy, mutual information and divergences of finite rational distributions.

Probabilities stay exact.  Logarithms (base 2) are evaluated in double
precision with compensated summation, and every "is it zero" question is
answered on the rational side: a conditional mutual information is certified
zero by checking the factorization p(xyz) p(z) = p(xz) p(yz) exactly.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

log = logging.getLogger(__name__)

JOINT_CAP = 10**6


def _log2(q: Fraction) -> float:
    return math.log2(q.numerator) - math.log2(q.denominator)


class FiniteJoint:
    """Joint distribution of named finite variables; outcomes are tuples in variable order."""

    def __init__(self, variables: Sequence[str], mass: Mapping):
        self.variables = tuple(variables)
        self.mass = {}
        for k, p in mass.items():
            p = Fraction(p)
            if p < 0:
                raise ValueError(f"negative mass at {k!r}")
            if p:
                k = tuple(k)
                if len(k) != len(self.variables):
                    raise ValueError(f"outcome {k!r} does not match variables {self.variables}")
                self.mass[k] = self.mass.get(k, Fraction(0)) + p
        total = sum(self.mass.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"masses sum to {total}")

    def _idx(self, names) -> tuple:
        try:
            return tuple(self.variables.index(n) for n in names)
        except ValueError as exc:
            raise KeyError(f"unknown variable in {names!r}") from exc

    def marginal(self, names) -> dict:
        idx = self._idx(names)
        out = {}
        for k, p in self.mass.items():
            key = tuple(k[i] for i in idx)
            out[key] = out.get(key, Fraction(0)) + p
        return out

    def map(self, name: str, fn, sources) -> "FiniteJoint":
        """Add a variable computed deterministically from other variables."""
        idx = self._idx(sources)
        mass = {k + (fn(*(k[i] for i in idx)),): p for k, p in self.mass.items()}
        return FiniteJoint(self.variables + (name,), mass)


def _entropy_of(dist: Mapping) -> float:
    if len(dist) <= 1:
        return 0.0
    return math.fsum(-float(p) * _log2(p) for p in dist.values() if p)


def entropy(j: FiniteJoint, names) -> float:
    """Base-2 entropy of the marginal of `names`; exactly 0.0 for a point mass."""
    return _entropy_of(j.marginal(names))


def conditional_entropy(j: FiniteJoint, names, given) -> float:
    """H(names | given) computed directly as -sum p(x,z) log p(x|z)."""
    given = list(given)
    if not given:
        return entropy(j, names)
    joint = j.marginal(list(names) + given)
    cond = j.marginal(given)
    k = len(names)
    val = math.fsum(-float(p) * (_log2(p) - _log2(cond[key[k:]])) for key, p in joint.items())
    return max(0.0, val)


class CMI(NamedTuple):
    value: float
    zero: bool


def conditional_mutual_information(j: FiniteJoint, X, Y, Z=()) -> CMI:
    """I(X;Y|Z) in bits, with an exact certificate for the value being zero."""
    X, Y, Z = list(X), list(Y), list(Z)
    if set(X) & set(Y) or set(X) & set(Z) or set(Y) & set(Z):
        raise ValueError("variable sets must be disjoint")
    pxyz = j.marginal(X + Y + Z)
    pxz = j.marginal(X + Z)
    pyz = j.marginal(Y + Z)
    pz = j.marginal(Z)
    nx, ny = len(X), len(Y)

    def split(key):
        return key[:nx], key[nx:nx + ny], key[nx + ny:]

    terms = []
    for key, p in pxyz.items():
        x, y, z = split(key)
        ratio = p * pz[z] / (pxz[x + z] * pyz[y + z])
        terms.append(float(p) * _log2(ratio))
    # exact conditional independence test
    xs_by_z, ys_by_z = {}, {}
    for key in pxz:
        xs_by_z.setdefault(key[nx:], []).append(key[:nx])
    for key in pyz:
        ys_by_z.setdefault(key[ny:], []).append(key[:ny])
    zero = True
    for z, pz_val in pz.items():
        for x in xs_by_z.get(z, ()):
            for y in ys_by_z.get(z, ()):
                if pxyz.get(x + y + z, 0) * pz_val != pxz[x + z] * pyz[y + z]:
                    zero = False
                    break
            if not zero:
                break
        if not zero:
            break
    if zero:
        return CMI(0.0, True)
    return CMI(max(0.0, math.fsum(terms)), False)


def mutual_information(j: FiniteJoint, X, Y) -> CMI:
    return conditional_mutual_information(j, X, Y, ())


def _as_dist(p) -> dict:
    p = {k: Fraction(v) for k, v in dict(p).items() if v != 0}
    if sum(p.values(), Fraction(0)) != 1:
        raise ValueError("distribution does not sum to 1")
    return p


def kl_divergence(p, q) -> float:
    """D(p || q) in bits; +inf (with a logged diagnostic) when p is not dominated by q."""
    p, q = _as_dist(p), _as_dist(q)
    missing = [k for k in p if q.get(k, 0) == 0]
    if missing:
        log.warning("KL support violation: outcomes %r have q = 0", missing)
        return math.inf
    if p == q:
        return 0.0
    return max(0.0, math.fsum(float(v) * _log2(v / q[k]) for k, v in p.items()))


@dataclass
class InequalityVerdict:
    holds: bool
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


_REL_TOL = 1e-12


def pinsker_check(p, q) -> InequalityVerdict:
    """sum |p - q| <= sqrt(2 ln2 KL(p||q)) with KL in bits."""
    p, q = _as_dist(p), _as_dist(q)
    lhs = float(sum((abs(p.get(k, 0) - q.get(k, 0)) for k in set(p) | set(q)), Fraction(0)))
    rhs = math.sqrt(2 * math.log(2) * kl_divergence(p, q))
    return InequalityVerdict(lhs <= rhs * (1 + _REL_TOL) + 1e-300, lhs, rhs)


def fano_check(j: FiniteJoint, X: str, Y, Xhat: str) -> InequalityVerdict:
    """H(X|Y) <= H(E) + Pr[E] log2(|X| - 1) where E is the event X != Xhat."""
    Y = list(Y)
    decoded = {}
    for key, _ in j.marginal(Y + [Xhat]).items():
        y, xh = key[:-1], key[-1]
        if decoded.setdefault(y, xh) != xh:
            raise ValueError("the estimate is not a function of the observation")
    jx = j.marginal([X, Xhat])
    perr = sum((p for (x, xh), p in jx.items() if x != xh), Fraction(0))
    # the alphabet must contain every value the estimate can take
    n = len({k[0] for k in jx} | {k[1] for k in jx})
    lhs = conditional_entropy(j, [X], Y)
    h_e = _entropy_of({0: perr, 1: 1 - perr})
    rhs = h_e + (float(perr) * math.log2(n - 1) if n > 1 and perr else 0.0)
    return InequalityVerdict(lhs <= rhs + 1e-12, lhs, rhs)


def random_distribution(rng: random.Random, n: int, max_weight: int = 9, allow_zero=False) -> dict:
    lo = 0 if allow_zero else 1
    w = [rng.randint(lo, max_weight) for _ in range(n)]
    if sum(w) == 0:
        w[0] = 1
    total = sum(w)
    return {i: Fraction(v, total) for i, v in enumerate(w) if v}


def random_joint(rng: random.Random, sizes: Sequence[int], names=None, max_weight: int = 9) -> FiniteJoint:
    names = names or [f"X{i}" for i in range(len(sizes))]
    outcomes = [()]
    for n in sizes:
        outcomes = [o + (v,) for o in outcomes for v in range(n)]
    d = random_distribution(rng, len(outcomes), max_weight, allow_zero=True)
    return FiniteJoint(names, {outcomes[i]: p for i, p in d.items()})


# ---------------------------------------------------------------------------
# joints built from policies


def garbled_joint(inst, rng: random.Random, n_signals: int = 3, n_garbled: int = 2) -> dict:
    """(state, s, s') masses where s depends on the state and s' only on s plus fresh noise."""
    joint = {}
    channel = {w: random_distribution(rng, n_signals, 5, allow_zero=True) for w in inst.states}
    garble = {s: random_distribution(rng, n_garbled, 5, allow_zero=True) for s in range(n_signals)}
    for w in inst.states:
        for s, ps in channel[w].items():
            for s2, pg in garble[s].items():
                joint[(w, s, s2)] = joint.get((w, s, s2), Fraction(0)) + inst.state_prior[w] * ps * pg
    return joint


def leaky_joint(inst, rng: random.Random, eps: Fraction, n_signals: int = 2) -> dict:
    """Garbling of s that, with probability eps, reports the state itself instead."""
    joint = {}
    channel = {w: random_distribution(rng, n_signals, 5, allow_zero=True) for w in inst.states}
    for w in inst.states:
        for s, ps in channel[w].items():
            base = inst.state_prior[w] * ps
            joint[(w, s, ("s", s))] = joint.get((w, s, ("s", s)), Fraction(0)) + base * (1 - eps)
            joint[(w, s, ("w", w))] = joint.get((w, s, ("w", w)), Fraction(0)) + base * eps
    return joint


def _cells(breakpoints):
    pts = sorted(set(breakpoints) | {Fraction(0), Fraction(1)})
    return [(a, b) for a, b in zip(pts, pts[1:]) if b > a]


def _pick(dist, left: Fraction):
    acc = Fraction(0)
    for x, p in dist:
        acc += p
        if left < acc:
            return x
    raise AssertionError("cell outside the distribution")


def policy_history_joint(inst, mode: str, l: int, delta=0, cap: int = JOINT_CAP) -> FiniteJoint:
    """Joint of (w, R, H1..H_{l-1}, S) for the round-by-round max-support BIC policy.

    The comparison policy recommends from the max-support policy of its own
    history structure in every round.  Its randomness R is coarsened to the
    cells of the union of all CDF breakpoints used in a round, which is all
    the recommendations depend on.  S is the phase-l signal of the phased
    policy.
    """
    from .explorability import PRIVATE, PUBLIC, SignalStructure, max_support_policy, phase_schedule

    delta = Fraction(delta)
    if l < 1:
        raise ValueError("phase index starts at 1")
    sched = phase_schedule(inst, mode, delta if mode == PRIVATE else Fraction(0))
    # entries: (w, R cells, history) -> prob
    entries = {(w, (), ()): inst.state_prior[w] for w in inst.states}
    for t in range(1, l):
        joint = {}
        for (w, _, h), p in entries.items():
            joint[(w, h)] = joint.get((w, h), Fraction(0)) + p
        S = SignalStructure.from_joint(inst, joint, t)
        if mode == PUBLIC:
            pols = {th: max_support_policy(inst, S, PUBLIC, type_=th) for th in inst.types}
            dists = [pols[th].table[h] for th in inst.types for h in S.support]
        else:
            pol = max_support_policy(inst, S, PRIVATE, Fraction(0))
            dists = [pol.table[h] for h in S.support]
        bps = []
        for d in dists:
            acc = Fraction(0)
            for _, q in d:
                acc += q
                bps.append(acc)
        cells = _cells(bps)
        nxt = {}
        for (w, R, h), p in entries.items():
            for ci, (left, right) in enumerate(cells):
                width = right - left
                for th in inst.types:
                    pt = inst.type_dist[th]
                    if mode == PUBLIC:
                        a = _pick(pols[th].table[h], left)
                        step = (th, a, inst.u(th, a, w))
                    else:
                        m = _pick(pol.table[h], left)
                        a = m[th]
                        step = (m, a, inst.u(th, a, w))
                    key = (w, R + (ci,), h + (step,))
                    nxt[key] = nxt.get(key, Fraction(0)) + p * width * pt
        entries = nxt
        if len(entries) > cap:
            raise ValueError(f"history joint exceeds {cap} outcomes")
    signal_of = sched.phase(l).signal_of
    names = ("w", "R") + tuple(f"H{t}" for t in range(1, l)) + ("S",)
    mass = {}
    for (w, R, h), p in entries.items():
        key = (w, R) + tuple(h) + (signal_of[w],)
        mass[key] = mass.get(key, Fraction(0)) + p
    return FiniteJoint(names, mass)


def history_information(inst, mode: str, l: int, delta=0) -> CMI:
    """I(R, H1..H_{l-1}; w | S_l) for the joint above."""
    j = policy_history_joint(inst, mode, l, delta)
    hist = [v for v in j.variables if v not in ("w", "S")]
    return conditional_mutual_information(j, hist, ["w"], ["S"])
