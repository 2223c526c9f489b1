"""Experiment orchestration over states and seeds, with exact aggregates.

Seed split: the run for master seed s in state index i uses the policy seed
derive_seed(s, i).  In sampled mode the state itself is drawn from
stream(s, 4) before the split.  Runs are independent, so they may be farmed
out to worker processes; results are folded back in run order.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .explorability import PRIVATE, PUBLIC, benchmark_opt, opt_by_state
from .maxexplore import as_fraction
from .model import Instance, rational_str, resolve_instance
from .policies import (
    POLICIES,
    STREAM_STATES,
    PolicyError,
    audit_bic,
    derive_seed,
    run_policy,
    stream,
)
from .trace import total_reward, trace_to_csv

ALL, FIXED, SAMPLED = "all", "fixed", "sampled"


@dataclass
class ExperimentSpec:
    instance: str  # builtin name or path to a JSON instance
    policy: str
    T: int
    seeds: list
    delta: Fraction = Fraction(0)
    states: str = ALL  # "all", "sampled", or a state label
    trace_dir: Optional[str] = None
    summary_path: Optional[str] = None
    workers: int = 1

    def validate(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if not self.seeds:
            raise ValueError("the seed list is empty")
        self.delta = as_fraction(self.delta)
        if (self.delta > 0) != (self.policy == PRIVATE):
            raise ValueError("delta must be positive for the private policy and zero otherwise")


@dataclass
class RunResult:
    state: str
    seed: int
    run_seed: int
    total: Fraction
    mean: Fraction
    exploration_rounds: int
    phases: int
    audit_ok: bool
    min_margin: Optional[Fraction]
    error: Optional[str] = None
    explored: frozenset = frozenset()


@dataclass
class ExperimentSummary:
    spec: ExperimentSpec
    runs: list
    opt_public: Fraction
    opt_private: Optional[Fraction]
    opt_by_state: dict  # for the policy's own benchmark
    traces: list = field(default_factory=list)

    def ok_runs(self):
        return [r for r in self.runs if r.error is None]

    @property
    def mean_reward(self) -> Fraction:
        ok = self.ok_runs()
        return sum((r.mean for r in ok), Fraction(0)) / len(ok) if ok else Fraction(0)

    @property
    def min_reward(self):
        return min((r.mean for r in self.ok_runs()), default=None)

    @property
    def max_reward(self):
        return max((r.mean for r in self.ok_runs()), default=None)

    @property
    def mean_exploration(self) -> Fraction:
        ok = self.ok_runs()
        return Fraction(sum(r.exploration_rounds for r in ok), len(ok)) if ok else Fraction(0)

    @property
    def all_audits_pass(self) -> bool:
        return all(r.error is None and r.audit_ok for r in self.runs)


def _plan(inst: Instance, spec: ExperimentSpec):
    runs = []
    for seed in spec.seeds:
        if spec.states == ALL:
            chosen = list(inst.states)
        elif spec.states == SAMPLED:
            rng = stream(seed, STREAM_STATES)
            den = 1
            for w in inst.states:
                den = den * inst.state_prior[w].denominator
            x = Fraction(rng.randrange(den), den)
            acc = Fraction(0)
            chosen = [inst.states[-1]]
            for w in inst.states:
                acc += inst.state_prior[w]
                if x < acc:
                    chosen = [w]
                    break
        else:
            if spec.states not in inst.states:
                raise ValueError(f"unknown state {spec.states!r}")
            chosen = [spec.states]
        for w in chosen:
            runs.append((w, int(seed), derive_seed(int(seed), inst.states.index(w))))
    return runs


def _one_run(args):
    inst, policy, T, delta, state, seed, run_seed, keep = args
    try:
        tr = run_policy(inst, policy, state, T, run_seed, delta)
    except PolicyError as exc:
        return RunResult(state, seed, run_seed, Fraction(0), Fraction(0), 0, 0, False, None, str(exc)), None
    tr.meta["master_seed"] = seed
    tr.meta["seed_split"] = f"derive_seed({seed},{inst.states.index(state)})"
    rep = audit_bic(tr, inst, replayed=tr)
    total, mean = total_reward(tr)
    d = tr.diagnostics
    res = RunResult(
        state, seed, run_seed, total, mean, d["exploration_rounds"], d["phases"], rep.ok, rep.min_margin,
        explored=d.get("explored", frozenset()),
    )
    return res, (trace_to_csv(tr) if keep else None)


def run_experiment(spec: ExperimentSpec, inst: Optional[Instance] = None, keep_traces: bool = False) -> ExperimentSummary:
    """Run every (state, seed) pair; traces are written when spec.trace_dir is set."""
    spec.validate()
    inst = inst or resolve_instance(spec.instance)
    plan = _plan(inst, spec)
    keep = keep_traces or spec.trace_dir is not None
    jobs = [(inst, spec.policy, spec.T, spec.delta, w, s, rs, keep) for w, s, rs in plan]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            out = list(ex.map(_one_run, jobs))
    else:
        out = [_one_run(j) for j in jobs]
    runs = [r for r, _ in out]
    traces = [t for _, t in out]
    if spec.trace_dir is not None:
        os.makedirs(spec.trace_dir, exist_ok=True)
        for r, text in zip(runs, traces):
            if text is not None:
                name = f"{spec.policy}_state-{r.state}_seed-{r.seed}.csv"
                with open(os.path.join(spec.trace_dir, name), "w") as fh:
                    fh.write(text)
    mode = PRIVATE if spec.policy == PRIVATE else PUBLIC
    opt_pri = benchmark_opt(inst, PRIVATE, spec.delta) if spec.policy == PRIVATE else benchmark_opt(inst, PRIVATE, 0)
    summary = ExperimentSummary(
        spec,
        runs,
        benchmark_opt(inst, PUBLIC),
        opt_pri,
        opt_by_state(inst, mode, spec.delta),
        traces if keep else [],
    )
    if spec.summary_path:
        with open(spec.summary_path, "w") as fh:
            fh.write(summary_csv(summary))
    return summary


SUMMARY_COLUMNS = ["state", "seed", "run_seed", "total_reward", "mean_reward", "exploration_rounds", "phases", "audit", "min_margin", "opt_state", "error"]


def summary_csv(summary: ExperimentSummary) -> str:
    lines = [",".join(SUMMARY_COLUMNS)]
    for r in summary.runs:
        lines.append(
            ",".join(
                [
                    r.state,
                    str(r.seed),
                    str(r.run_seed),
                    rational_str(r.total),
                    rational_str(r.mean),
                    str(r.exploration_rounds),
                    str(r.phases),
                    "pass" if r.audit_ok else "fail",
                    "" if r.min_margin is None else rational_str(r.min_margin),
                    rational_str(summary.opt_by_state[r.state]),
                    (r.error or "").replace(",", ";"),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def summary_text(summary: ExperimentSummary) -> str:
    """Human-readable summary; decimals here, exact values in the CSV."""
    s = summary.spec
    ok = summary.ok_runs()
    out = [
        f"policy: {s.policy}",
        f"instance: {s.instance}",
        f"T: {s.T}",
        f"delta: {rational_str(s.delta)}",
        f"runs: {len(summary.runs)} ({len(summary.runs) - len(ok)} failed preconditions)",
        f"OPT_pub: {rational_str(summary.opt_public)}",
        f"OPT_pri: {rational_str(summary.opt_private)}",
    ]
    if ok:
        out += [
            f"mean per-round reward: {float(summary.mean_reward):.6f}",
            f"min / max per-round reward: {float(summary.min_reward):.6f} / {float(summary.max_reward):.6f}",
            f"mean exploration rounds: {float(summary.mean_exploration):.2f}",
        ]
        for w in sorted({r.state for r in ok}):
            rs = [r for r in ok if r.state == w]
            m = sum((r.mean for r in rs), Fraction(0)) / len(rs)
            out.append(f"state {w}: mean {float(m):.6f} vs OPT {float(summary.opt_by_state[w]):.6f} over {len(rs)} runs")
    out.append(f"audit: {'pass' if summary.all_audits_pass else 'FAIL'}")
    for r in summary.runs:
        if r.error:
            out.append(f"error (state {r.state}, seed {r.seed}): {r.error}")
    return "\n".join(out) + "\n"
