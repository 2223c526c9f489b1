"""Per-round traces and their CSV form.

The CSV starts with '#' header lines (policy, state, seed, T, delta and the
instance fingerprint), then one row per round with columns

    t, type, message, action, reward_num, reward_den, phase, lucky, audit_margin

A menu message is a JSON array of actions in type order; a public message
is the bare action label.  Margins are exact "p/q" strings.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .model import Instance, Menu, dump_instance, rational_str

COLUMNS = ["t", "type", "message", "action", "reward_num", "reward_den", "phase", "lucky", "audit_margin"]


def instance_fingerprint(inst: Instance) -> str:
    return hashlib.sha256(dump_instance(inst).encode()).hexdigest()[:16]


@dataclass
class Trace:
    policy: str
    state: str
    seed: int
    T: int
    delta: Fraction
    fingerprint: str
    rows: list = field(default_factory=list)  # (t, type, message, action, reward, phase, lucky, margin)
    laws: list = field(default_factory=list)  # message law in force at each round (not serialized)
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)  # extra header lines, e.g. how the seed was derived

    def __len__(self):
        return len(self.rows)

    def types(self) -> list:
        return [r[1] for r in self.rows]


def total_reward(trace: Trace):
    """(exact total, exact per-round mean); the mean of an empty trace is 0."""
    counts = Counter(r[4] for r in trace.rows)
    total = sum((Fraction(v) * c for v, c in counts.items()), Fraction(0))
    mean = total / len(trace.rows) if trace.rows else Fraction(0)
    return total, mean


def encode_message(msg) -> str:
    if isinstance(msg, Menu):
        return json.dumps(list(msg.actions))
    return str(msg)


def decode_message(text: str, inst: Instance):
    if text.startswith("["):
        return Menu.of(inst, [str(a) for a in json.loads(text)])
    return text


def _parse_q(text: str) -> Fraction:
    text = text.strip()
    if "/" in text:
        n, d = text.split("/")
        return Fraction(int(n), int(d))
    return Fraction(int(text))


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write(f"# policy={trace.policy}\n")
    buf.write(f"# state={trace.state}\n")
    buf.write(f"# seed={trace.seed}\n")
    buf.write(f"# T={trace.T}\n")
    buf.write(f"# delta={rational_str(Fraction(trace.delta))}\n")
    buf.write(f"# instance={trace.fingerprint}\n")
    for k, v in trace.meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for t, typ, msg, act, rew, phase, lucky, margin in trace.rows:
        rew = Fraction(rew)
        w.writerow([t, typ, encode_message(msg), act, rew.numerator, rew.denominator, phase, lucky, rational_str(margin)])
    return buf.getvalue()


class TraceFormatError(ValueError):
    pass


def trace_from_csv(text: str, inst: Instance) -> Trace:
    header = {}
    lines = text.splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key.strip()] = val.strip()
        elif line.strip():
            body.append(line)
    for key in ("policy", "state", "seed", "T", "delta"):
        if key not in header:
            raise TraceFormatError(f"trace header is missing '{key}'")
    reader = csv.reader(body)
    cols = next(reader, None)
    if cols != COLUMNS:
        raise TraceFormatError(f"unexpected trace columns {cols}")
    rows = []
    for n, rec in enumerate(reader, start=1):
        if len(rec) != len(COLUMNS):
            raise TraceFormatError(f"row {n}: expected {len(COLUMNS)} fields")
        try:
            t = int(rec[0])
            reward = Fraction(int(rec[4]), int(rec[5]))
            rows.append((t, rec[1], decode_message(rec[2], inst), rec[3], reward, int(rec[6]), rec[7], _parse_q(rec[8])))
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise TraceFormatError(f"row {n}: {exc}") from None
    tr = Trace(
        header["policy"],
        header["state"],
        int(header["seed"]),
        int(header["T"]),
        _parse_q(header["delta"]),
        header.get("instance", ""),
        rows,
    )
    tr.meta = {k: v for k, v in header.items() if k not in ("policy", "state", "seed", "T", "delta", "instance")}
    return tr
