"""Problem instances, menus and menu outcome distributions.

Every probability and utility is a :class:`fractions.Fraction`.  Labels are
strings and the order in which they appear in the instance document is the
canonical order used for tie-breaking and enumeration everywhere else.
"""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

MENU_CAP = 10**6


class InstanceError(ValueError):
    """Raised for malformed instance documents; the message starts with the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def parse_rational(value, path: str = "value") -> Fraction:
    if isinstance(value, bool):
        raise InstanceError(path, f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, den = text.split("/")
                if int(den) <= 0:
                    raise ValueError
                return Fraction(int(num), int(den))
            return Fraction(int(text))
        except ValueError:
            raise InstanceError(path, f"not a rational: {value!r}") from None
    raise InstanceError(path, f"not a rational: {value!r} (use an integer or a 'p/q' string)")


def format_rational(q: Fraction):
    """Integers stay integers, everything else becomes a 'p/q' string."""
    return q.numerator if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def rational_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Instance:
    states: tuple
    types: tuple
    actions: tuple
    state_prior: Mapping
    type_dist: Mapping
    utility: Mapping  # (type, action, state) -> Fraction

    def __post_init__(self):
        fp = (
            self.states,
            self.types,
            self.actions,
            tuple(self.state_prior[w] for w in self.states),
            tuple(self.type_dist[t] for t in self.types),
            tuple(self.utility[(t, a, w)] for t in self.types for a in self.actions for w in self.states),
        )
        object.__setattr__(self, "_fingerprint", fp)

    def __hash__(self):
        return hash(self._fingerprint)

    def __eq__(self, other):
        return isinstance(other, Instance) and self._fingerprint == other._fingerprint

    def u(self, type_, action, state) -> Fraction:
        return self.utility[(type_, action, state)]

    @property
    def num_menus(self) -> int:
        return len(self.actions) ** len(self.types)

    def utility_range(self) -> Fraction:
        values = list(self.utility.values())
        return max(values) - min(values)


@dataclass(frozen=True, order=True)
class Menu:
    """A total map from types to actions, stored in canonical type order."""

    pairs: tuple  # ((type, action), ...)

    def __getitem__(self, type_):
        for t, a in self.pairs:
            if t == type_:
                return a
        raise KeyError(type_)

    @property
    def actions(self) -> tuple:
        return tuple(a for _, a in self.pairs)

    @classmethod
    def of(cls, inst: Instance, actions: Iterable) -> "Menu":
        actions = tuple(actions)
        if len(actions) != len(inst.types):
            raise ValueError(f"menu needs {len(inst.types)} actions, got {len(actions)}")
        for a in actions:
            if a not in inst.actions:
                raise KeyError(f"unknown action {a!r}")
        return cls(tuple(zip(inst.types, actions)))

    def __str__(self):
        return ",".join(f"{t}->{a}" for t, a in self.pairs)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Distribution of (action, reward) samples; `items` is sorted and zero-free."""

    items: tuple  # (((action, reward), prob), ...)

    @classmethod
    def from_mapping(cls, mass: Mapping) -> "OutcomeDistribution":
        items = tuple(sorted(((k, p) for k, p in mass.items() if p != 0), key=lambda kp: (kp[0][0], kp[0][1])))
        return cls(items)

    @property
    def support(self) -> tuple:
        return tuple(k for k, _ in self.items)

    def prob(self, outcome) -> Fraction:
        for k, p in self.items:
            if k == outcome:
                return p
        return Fraction(0)

    def as_dict(self) -> dict:
        return dict(self.items)

    def __str__(self):
        return "{" + ", ".join(f"({a},{rational_str(r)}):{rational_str(p)}" for (a, r), p in self.items) + "}"


def _check_labels(doc, key) -> tuple:
    if key not in doc:
        raise InstanceError(key, "missing field")
    labels = doc[key]
    if not isinstance(labels, list) or not labels:
        raise InstanceError(key, "must be a non-empty list")
    labels = tuple(str(x) for x in labels)
    seen = set()
    for i, lab in enumerate(labels):
        if lab in seen:
            raise InstanceError(f"{key}[{i}]", f"duplicate label {lab!r}")
        seen.add(lab)
    return labels


def _check_dist(doc, key, labels) -> dict:
    if key not in doc:
        raise InstanceError(key, "missing field")
    raw = doc[key]
    if not isinstance(raw, dict):
        raise InstanceError(key, "must be a map from label to weight")
    raw = {str(k): v for k, v in raw.items()}
    for k in raw:
        if k not in labels:
            raise InstanceError(f"{key}.{k}", "unknown label")
    dist = {}
    for lab in labels:
        if lab not in raw:
            raise InstanceError(f"{key}.{lab}", "missing weight")
        w = parse_rational(raw[lab], f"{key}.{lab}")
        if w < 0:
            raise InstanceError(f"{key}.{lab}", f"negative weight {rational_str(w)}")
        if w == 0:
            raise InstanceError(f"{key}.{lab}", "zero weight; drop the label instead")
        dist[lab] = w
    total = sum(dist.values())
    if total != 1:
        raise InstanceError(key, f"prior sums to {rational_str(total)}")
    return dist


def instance_from_dict(doc: Mapping) -> Instance:
    if not isinstance(doc, Mapping):
        raise InstanceError("(root)", "instance document must be a map")
    states = _check_labels(doc, "states")
    types = _check_labels(doc, "types")
    actions = _check_labels(doc, "actions")
    state_prior = _check_dist(doc, "state_prior", states)
    type_dist = _check_dist(doc, "type_dist", types)
    if "utility" not in doc:
        raise InstanceError("utility", "missing field")
    table = doc["utility"]
    utility = {}
    if not isinstance(table, list) or len(table) != len(types):
        raise InstanceError("utility", f"expected {len(types)} rows (one per type)")
    for i, t in enumerate(types):
        row = table[i]
        if not isinstance(row, list) or len(row) != len(actions):
            raise InstanceError(f"utility[{i}]", f"expected {len(actions)} entries (one per action)")
        for j, a in enumerate(actions):
            cell = row[j]
            if not isinstance(cell, list) or len(cell) != len(states):
                raise InstanceError(f"utility[{i}][{j}]", f"expected {len(states)} entries (one per state)")
            for k, w in enumerate(states):
                utility[(t, a, w)] = parse_rational(cell[k], f"utility[{i}][{j}][{k}]")
    return Instance(states, types, actions, state_prior, type_dist, utility)


def load_instance(text: str) -> Instance:
    """Parse a JSON instance document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError("(root)", f"malformed document: {exc}") from None
    return instance_from_dict(doc)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "states": list(inst.states),
        "types": list(inst.types),
        "actions": list(inst.actions),
        "state_prior": {w: format_rational(inst.state_prior[w]) for w in inst.states},
        "type_dist": {t: format_rational(inst.type_dist[t]) for t in inst.types},
        "utility": [
            [[format_rational(inst.u(t, a, w)) for w in inst.states] for a in inst.actions] for t in inst.types
        ],
    }


def dump_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2)


def load_instance_file(path) -> Instance:
    with open(path) as fh:
        return load_instance(fh.read())


def example1() -> Instance:
    """Two states, two types, two actions; action 0 is prior-preferred by both types."""
    return instance_from_dict(
        {
            "states": ["0", "1"],
            "types": ["0", "1"],
            "actions": ["0", "1"],
            "state_prior": {"0": "1/2", "1": "1/2"},
            "type_dist": {"0": "1/2", "1": "1/2"},
            "utility": [[[3, 2], [4, 0]], [[2, 3], [0, 4]]],
        }
    )


def distinguishing_example() -> Instance:
    """The prior-myopic menu separates the states, which unlocks a better menu in state 0."""
    return instance_from_dict(
        {
            "states": ["0", "1"],
            "types": ["A", "B"],
            "actions": ["0", "1"],
            "state_prior": {"0": "1/2", "1": "1/2"},
            "type_dist": {"A": "1/2", "B": "1/2"},
            "utility": [[[3, 2], [4, 0]], [[1, 1], [0, 0]]],
        }
    )


BUILTIN_INSTANCES = {"example1": example1, "distinguishing": distinguishing_example}


def resolve_instance(name_or_path: str) -> Instance:
    if name_or_path in BUILTIN_INSTANCES:
        return BUILTIN_INSTANCES[name_or_path]()
    return load_instance_file(name_or_path)


def random_instance(rng: random.Random, n_states=2, n_types=2, n_actions=2, max_utility=4) -> Instance:
    """Small random instance with rational priors and integer utilities."""

    def weights(n):
        raw = [rng.randint(1, 4) for _ in range(n)]
        total = sum(raw)
        return [Fraction(r, total) for r in raw]

    states = tuple(str(i) for i in range(n_states))
    types = tuple(f"t{i}" for i in range(n_types))
    actions = tuple(str(i) for i in range(n_actions))
    utility = {
        (t, a, w): Fraction(rng.randint(0, max_utility)) for t in types for a in actions for w in states
    }
    return Instance(
        states, types, actions, dict(zip(states, weights(n_states))), dict(zip(types, weights(n_types))), utility
    )


def restrict_types(inst: Instance, type_dist: Mapping) -> Instance:
    """Same instance under another type distribution; zero-weight types are dropped."""
    dist = {str(t): Fraction(p) for t, p in type_dist.items()}
    for t in dist:
        if t not in inst.types:
            raise InstanceError(f"type_dist.{t}", "unknown label")
    if any(p < 0 for p in dist.values()):
        raise InstanceError("type_dist", "negative weight")
    total = sum(dist.values())
    if total != 1:
        raise InstanceError("type_dist", f"prior sums to {rational_str(total)}")
    types = tuple(t for t in inst.types if dist.get(t, 0) > 0)
    utility = {(t, a, w): v for (t, a, w), v in inst.utility.items() if t in types}
    return Instance(inst.states, types, inst.actions, dict(inst.state_prior), {t: dist[t] for t in types}, utility)


def expected_utility_prior(inst: Instance, type_, action) -> Fraction:
    if type_ not in inst.types:
        raise KeyError(f"unknown type {type_!r}")
    if action not in inst.actions:
        raise KeyError(f"unknown action {action!r}")
    return sum((inst.state_prior[w] * inst.u(type_, action, w) for w in inst.states), Fraction(0))


def enumerate_menus(inst: Instance, cap: int = MENU_CAP) -> list:
    """All menus, lexicographic over the type list (first type varies slowest)."""
    n = inst.num_menus
    if n > cap:
        raise ValueError(f"{n} menus exceeds the enumeration cap {cap}")
    return [Menu(tuple(zip(inst.types, combo))) for combo in itertools.product(inst.actions, repeat=len(inst.types))]


def menu_outcome_distribution(inst: Instance, menu: Menu, state) -> OutcomeDistribution:
    if state not in inst.states:
        raise KeyError(f"unknown state {state!r}")
    mass = {}
    for t in inst.types:
        a = menu[t]
        key = (a, inst.u(t, a, state))
        mass[key] = mass.get(key, Fraction(0)) + inst.type_dist[t]
    return OutcomeDistribution.from_mapping(mass)


def menu_value(inst: Instance, menu: Menu, state) -> Fraction:
    return sum((inst.type_dist[t] * inst.u(t, menu[t], state) for t in inst.types), Fraction(0))
