"""MaxExplore sequences, sequence lengths and menu sample bounds."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .explorability import PRIVATE, PUBLIC, SignalStructure, max_support_policy, phase_schedule
from .model import Instance, Menu, menu_outcome_distribution


@dataclass(frozen=True)
class ExploreSequence:
    items: tuple
    length: int


@dataclass(frozen=True)
class SampleBound:
    separation: Fraction
    count: int
    degenerate: bool


def as_fraction(x) -> Fraction:
    """Exact value of x; floats are read through their shortest decimal repr."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def ceil_fraction(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


# ---------------------------------------------------------------------------
# certified natural logarithm


def _atanh_series(z: Fraction, tol: Fraction):
    """Bounds on 2*atanh(z) = ln((1+z)/(1-z)) for 0 <= z < 1."""
    if z == 0:
        return Fraction(0), Fraction(0)
    total = Fraction(0)
    z2 = z * z
    term = z
    k = 0
    while True:
        total += term / (2 * k + 1)
        k += 1
        term *= z2
        tail = term / ((2 * k + 1) * (1 - z2))
        if 2 * tail < tol:
            return 2 * total, 2 * (total + tail)


def _round_out(lo: Fraction, hi: Fraction, den: int):
    return Fraction(math.floor(lo * den), den), Fraction(ceil_fraction(hi * den), den)


@lru_cache(maxsize=None)
def _ln2_bounds():
    return _atanh_series(Fraction(1, 3), Fraction(1, 10**40))


def ln_bounds(x, tol=Fraction(1, 10**30)):
    """Rational (lo, hi) with lo <= ln(x) <= hi and hi - lo tiny."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("logarithm of a non-positive number")
    k = x.numerator.bit_length() - x.denominator.bit_length()
    y = x / Fraction(2) ** k
    while y >= 2:
        y /= 2
        k += 1
    while y < 1:
        y *= 2
        k -= 1
    lo_y, hi_y = _atanh_series((y - 1) / (y + 1), tol)
    lo2, hi2 = _ln2_bounds()
    if k >= 0:
        lo, hi = k * lo2 + lo_y, k * hi2 + hi_y
    else:
        lo, hi = k * hi2 + lo_y, k * lo2 + hi_y
    return _round_out(lo, hi, 10**32)


def ln_upper(x) -> Fraction:
    return ln_bounds(x)[1]


# ---------------------------------------------------------------------------
# MaxExplore


def max_explore(dist, L: int, rng: random.Random) -> ExploreSequence:
    """Floor copies of each item, residual draws from the fractional parts, then a shuffle.

    `dist` is a sequence of (item, probability) in canonical order.
    """
    if L < 1:
        raise ValueError("sequence length must be positive")
    dist = [(x, Fraction(p)) for x, p in dist if p > 0]
    items = []
    fracs = []
    for x, p in dist:
        c = L * p
        f = c.numerator // c.denominator
        items.extend([x] * f)
        fracs.append((x, c - f))
    res = L - len(items)
    if res:
        den = math.lcm(*(f.denominator for _, f in fracs))
        cum = []
        acc = 0
        for x, f in fracs:
            acc += f.numerator * (den // f.denominator)
            cum.append((acc, x))
        # acc == res * den
        for _ in range(res):
            r = rng.randrange(acc)
            for edge, x in cum:
                if r < edge:
                    items.append(x)
                    break
    rng.shuffle(items)
    return ExploreSequence(tuple(items), L)


def required_length_public(inst: Instance, type_, schedule=None) -> int:
    """ceil of the largest 1/p over positive pi^max probabilities in every phase and signal."""
    sched = schedule or phase_schedule(inst, PUBLIC)
    pmin = min(ph.report.policy[type_].min_positive() for ph in sched.phases)
    return ceil_fraction(1 / pmin)


def max_explore_public(inst: Instance, type_, S: SignalStructure, s, L: int, rng) -> ExploreSequence:
    pol = max_support_policy(inst, S, PUBLIC, type_=type_)
    return max_explore(pol.table[s], L, rng)


# ---------------------------------------------------------------------------
# menu sample bounds


def outcome_union(inst: Instance, m: Menu) -> tuple:
    out = []
    for w in inst.states:
        for k in menu_outcome_distribution(inst, m, w).support:
            if k not in out:
                out.append(k)
    return tuple(sorted(out, key=lambda k: (k[0], k[1])))


@lru_cache(maxsize=None)
def menu_separation(inst: Instance, m: Menu) -> Fraction:
    """Half the smallest distinguishing gap over state pairs with different D_m; 1 if none differ."""
    U = outcome_union(inst, m)
    dists = [menu_outcome_distribution(inst, m, w) for w in inst.states]
    gaps = []
    for i in range(len(dists)):
        for j in range(i + 1, len(dists)):
            if dists[i] != dists[j]:
                gaps.append(max(abs(dists[i].prob(u) - dists[j].prob(u)) for u in U))
    if not gaps:
        return Fraction(1)
    return min(gaps) / 2


def is_degenerate(inst: Instance, m: Menu) -> bool:
    first = menu_outcome_distribution(inst, m, inst.states[0])
    return all(menu_outcome_distribution(inst, m, w) == first for w in inst.states[1:])


@lru_cache(maxsize=None)
def _sample_bound(inst: Instance, m: Menu, gamma: Fraction) -> SampleBound:
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if is_degenerate(inst, m):
        return SampleBound(Fraction(1), 1, True)
    dm = menu_separation(inst, m)
    U = outcome_union(inst, m)
    count = ceil_fraction(2 / dm**2 * ln_upper(2 * len(U) / gamma))
    return SampleBound(dm, max(1, count), False)


def sample_bound(inst: Instance, m: Menu, gamma) -> SampleBound:
    """B_m(gamma) = ceil((2/d_m^2) ln(2|U|/gamma)) with ln rounded up; 1 for degenerate menus."""
    return _sample_bound(inst, m, as_fraction(gamma))


def private_gammas(inst: Instance, delta, T: int):
    """(gamma1, gamma2, gamma0) of the private policy; log base 2, first term void when |states| = 1."""
    delta = as_fraction(delta)
    M = inst.num_menus
    second = (delta**2 / (32 * M)) ** 2
    if len(inst.states) > 1:
        log_w = math.log2(len(inst.states))
        first = delta**2 / (16 * M * Fraction(log_w)) if log_w.is_integer() else None
        if first is None:
            # log2 of a non-power of two: use a rational upper bound on the log, so gamma1 only shrinks
            first = delta**2 / (16 * M * ln_upper(len(inst.states)) / ln_bounds(2)[0])
        gamma1 = min(first, second)
    else:
        gamma1 = second
    gamma2 = Fraction(1, T * M)
    return gamma1, gamma2, min(gamma1, gamma2)


def required_length_private(inst: Instance, delta, gamma0, schedule=None) -> int:
    """ceil of the largest B_m(gamma0)/p over phases, signals and menus with p > 0."""
    sched = schedule or phase_schedule(inst, PRIVATE, as_fraction(delta))
    best = Fraction(0)
    for ph in sched.phases:
        for row in ph.report.policy.table.values():
            for m, p in row:
                best = max(best, sample_bound(inst, m, gamma0).count / p)
    return ceil_fraction(best)


def max_explore_private(inst: Instance, S: SignalStructure, s, L: int, delta, rng) -> ExploreSequence:
    pol = max_support_policy(inst, S, PRIVATE, as_fraction(delta))
    return max_explore(pol.table[s], L, rng)
