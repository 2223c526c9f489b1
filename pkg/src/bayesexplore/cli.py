"""Command-line interface: explore, opt, simulate, audit, info-diag, statics.

Exit status 0 means every requested check passed, 1 a check failed and 2 a
usage, instance or IO error.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .explorability import (
    PRIVATE,
    PUBLIC,
    benchmark_opt,
    comparative_statics,
    eventually_explorable,
    opt_by_state,
    phase_schedule,
)
from .harness import ALL, ExperimentSpec, run_experiment, summary_csv, summary_text
from .infotheory import history_information, pinsker_check, random_distribution
from .model import InstanceError, Menu, parse_rational, rational_str, resolve_instance
from .policies import PolicyError, audit_bic
from .trace import TraceFormatError, encode_message, trace_from_csv

FORMATS = ("csv", "json-like")


class UsageError(Exception):
    pass


def _q(text: str) -> Fraction:
    try:
        return parse_rational(text.strip(), "delta")
    except (InstanceError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _label(x):
    if isinstance(x, Menu):
        return encode_message(x)
    if isinstance(x, tuple):
        return [_label(y) for y in x]
    return x


def _signal_label(s):
    if s == ():
        return "bottom"
    parts = []
    for item in s:
        if isinstance(item[0], Menu):
            parts.append(f"{encode_message(item[0])}:{{{' '.join(f'({a},{rational_str(r)}):{rational_str(p)}' for (a, r), p in item[1].items)}}}")
        else:
            parts.append(f"({item[0]},{item[1]},{rational_str(item[2])})")
    return " ".join(parts)


def _emit(doc, fmt: str, out):
    if fmt == "json-like":
        out.write(json.dumps(doc, indent=2, default=str) + "\n")
        return
    # csv: flatten the top-level rows list
    rows = doc.get("rows", [])
    if rows:
        cols = list(rows[0].keys())
        out.write(",".join(cols) + "\n")
        for r in rows:
            out.write(",".join(str(r[c]).replace(",", ";") for c in cols) + "\n")
    for k, v in doc.items():
        if k != "rows":
            out.write(f"# {k}={v}\n")


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w"), True
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


def cmd_explore(args, out) -> int:
    inst = resolve_instance(args.instance)
    delta = _q(args.delta)
    sched = phase_schedule(inst, args.mode, delta)
    ee = eventually_explorable(inst, args.mode, delta)
    rows = []
    for ph in sched.phases:
        rep = ph.report
        for s in ph.structure.support:
            if args.mode == PUBLIC:
                for t in inst.types:
                    for a, p in rep.policy[t].table[s]:
                        rows.append({"phase": ph.index, "signal": _signal_label(s), "type": t, "recommendation": a, "pi_max": rational_str(p)})
            else:
                for m, p in rep.policy.table[s]:
                    rows.append({"phase": ph.index, "signal": _signal_label(s), "type": "*", "recommendation": encode_message(m), "pi_max": rational_str(p)})
    doc = {
        "mode": args.mode,
        "delta": rational_str(delta),
        "phases": len(sched.phases),
        "stable": sched.stable,
        "eventually_explorable": {
            w: sorted(encode_message(x) if isinstance(x, Menu) else f"({x[0]},{x[1]})" for x in ee[w]) for w in inst.states
        },
        "rows": rows,
    }
    if args.format == "csv":
        doc["eventually_explorable"] = json.dumps(doc["eventually_explorable"])
    _emit(doc, args.format, out)
    return 0


def cmd_opt(args, out) -> int:
    inst = resolve_instance(args.instance)
    delta = _q(args.delta)
    pub, pri = benchmark_opt(inst, PUBLIC), benchmark_opt(inst, PRIVATE, delta)
    per_pub, per_pri = opt_by_state(inst, PUBLIC), opt_by_state(inst, PRIVATE, delta)
    rows = [{"state": w, "opt_pub": rational_str(per_pub[w]), "opt_pri": rational_str(per_pri[w])} for w in inst.states]
    doc = {"OPT_pub": rational_str(pub), "OPT_pri": rational_str(pri), "delta": rational_str(delta), "rows": rows}
    _emit(doc, args.format, out)
    ok = pub >= pri
    if not ok:
        sys.stderr.write("check failed: OPT_pub < OPT_pri\n")
    return 0 if ok else 1


def _seed_list(text: str) -> list:
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        if "," in text:
            return [int(x) for x in text.split(",") if x]
        return list(range(int(text)))
    except ValueError:
        raise UsageError(f"bad seed list {text!r}; use N, a..b or a,b,c") from None


def cmd_simulate(args, out) -> int:
    delta = _q(args.delta) if args.delta is not None else (Fraction(1, 10) if args.policy == PRIVATE else Fraction(0))
    spec = ExperimentSpec(
        instance=args.instance,
        policy=args.policy,
        T=args.T,
        seeds=_seed_list(args.seeds),
        delta=delta,
        states=args.state or ALL,
        trace_dir=args.trace_dir,
        workers=args.workers,
    )
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        summary = run_experiment(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.write(summary_csv(summary) if args.format == "csv" else summary_text(summary))
    for r in summary.runs:
        if r.error:
            sys.stderr.write(f"run failed (state {r.state}, seed {r.seed}): {r.error}\n")
    return 0 if summary.all_audits_pass else 1


def cmd_audit(args, out) -> int:
    inst = resolve_instance(args.instance)
    try:
        with open(args.trace) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.trace}: {exc}") from None
    try:
        tr = trace_from_csv(text, inst)
        rep = audit_bic(tr, inst)
    except (TraceFormatError, PolicyError) as exc:
        sys.stderr.write(f"audit failed: {exc}\n")
        return 1
    out.write(f"policy: {tr.policy}\nrounds: {len(tr.rows)}\nthreshold: {rational_str(rep.threshold)}\n")
    out.write(f"min margin: {rational_str(rep.min_margin) if rep.min_margin is not None else '-'}\n")
    for t, m in rep.violations:
        out.write(f"round {t}: margin {rational_str(m)} below threshold\n")
    for t, exp, got in rep.mismatches:
        out.write(f"round {t}: message {encode_message(got)} but the policy sends {encode_message(exp)}\n")
    for t, why in rep.disobedient:
        out.write(f"round {t}: {why}\n")
    for t in rep.off_policy:
        out.write(f"round {t}: message has zero probability under the policy (margin taken under the prior)\n")
    out.write(f"verdict: {'pass' if rep.ok else 'FAIL'}\n")
    return 0 if rep.ok else 1


def cmd_info_diag(args, out) -> int:
    import random

    inst = resolve_instance(args.instance)
    delta = _q(args.delta)
    mode = args.mode
    rows = []
    ok = True
    sched = phase_schedule(inst, mode, delta)
    for l in range(1, min(sched.n_phases, args.phases) + 1):
        cmi = history_information(inst, mode, l, delta)
        bound = 0.0 if mode == PUBLIC else float(delta**2 / 8)
        holds = cmi.zero if mode == PUBLIC else (cmi.zero or cmi.value <= bound + 1e-12)
        ok &= holds
        rows.append({"check": "information", "phase": l, "value": f"{cmi.value:.3e}", "bound": bound, "zero_certificate": cmi.zero, "holds": holds})
    rng = random.Random(args.seed)
    worst, pinsker_ok = None, True
    for _ in range(max(1, args.samples)):
        n = rng.randint(2, 4)
        p, q = random_distribution(rng, n), random_distribution(rng, n)
        v = pinsker_check(p, q)
        pinsker_ok &= v.holds
        worst = v.slack if worst is None else min(worst, v.slack)
    ok &= pinsker_ok
    rows.append({"check": "pinsker", "phase": "-", "value": f"{worst:.3e}", "bound": 0, "zero_certificate": "-", "holds": pinsker_ok})
    doc = {"mode": mode, "delta": rational_str(delta), "all_hold": ok, "rows": rows}
    _emit(doc, args.format, out)
    return 0 if ok else 1


def _parse_type_dist(text: str, inst) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = {}
        for part in text.split(","):
            k, _, v = part.partition("=")
            if not _:
                raise UsageError(f"bad type distribution {text!r}; use JSON or t=p,t=p") from None
            doc[k.strip()] = v.strip()
    out = {}
    for t, v in doc.items():
        if t not in inst.types:
            raise UsageError(f"unknown type {t!r}")
        out[t] = parse_rational(v, f"type_dist[{t}]")
    if sum(out.values(), Fraction(0)) != 1:
        raise UsageError("alternative type distribution does not sum to 1")
    return out


def cmd_statics(args, out) -> int:
    inst = resolve_instance(args.instance)
    alt = _parse_type_dist(args.alt_type_dist, inst)
    rep = comparative_statics(inst, alt, _q(args.delta))
    rows = []
    for w in inst.states:
        rows.append(
            {
                "state": w,
                "public": " ".join(f"({t},{a})" for t, a in sorted(rep.public[w])),
                "public_alt": " ".join(f"({t},{a})" for t, a in sorted(rep.public_alt[w])),
                "private_pairs": " ".join(f"({t},{a})" for t, a in sorted(rep.private_pairs[w])),
                "private_pairs_alt": " ".join(f"({t},{a})" for t, a in sorted(rep.private_pairs_alt[w])),
            }
        )
    doc = {"relation": rep.relation, "public_holds": rep.public_holds, "rows": rows}
    _emit(doc, args.format, out)
    return 0 if rep.public_holds else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bayesexplore", description="Incentive-compatible exploration with heterogeneous agents.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, delta_default="0"):
        sp.add_argument("--instance", default="example1", help="builtin name (example1, distinguishing) or JSON path")
        sp.add_argument("--delta", default=delta_default, help="relaxation for private types, as p/q")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--format", choices=FORMATS, default="json-like")

    sp = sub.add_parser("explore", help="eventually-explorable sets and max-support tables")
    common(sp)
    sp.add_argument("--mode", choices=(PUBLIC, PRIVATE), default=PUBLIC)
    sp.set_defaults(fn=cmd_explore)

    sp = sub.add_parser("opt", help="benchmark values OPT_pub and OPT_pri")
    common(sp)
    sp.set_defaults(fn=cmd_opt)

    sp = sub.add_parser("simulate", help="run a policy over states and seeds")
    common(sp, delta_default=None)
    sp.add_argument("--policy", choices=("public", "reported", "private"), default="public")
    sp.add_argument("-T", type=int, default=1000)
    sp.add_argument("--seeds", default="10", help="N (seeds 0..N-1), a..b, or a,b,c")
    sp.add_argument("--state", default=None, help="state label, 'all' or 'sampled'")
    sp.add_argument("--trace-dir", default=None, help="write one trace CSV per run here")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=cmd_simulate, format="text")

    sp = sub.add_parser("audit", help="re-audit a trace file")
    common(sp)
    sp.add_argument("--trace", required=True)
    sp.set_defaults(fn=cmd_audit)

    sp = sub.add_parser("info-diag", help="information-theoretic checks")
    common(sp)
    sp.add_argument("--mode", choices=(PUBLIC, PRIVATE), default=PUBLIC)
    sp.add_argument("--phases", type=int, default=3)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_info_diag)

    sp = sub.add_parser("statics", help="explorable sets under an alternative type distribution")
    common(sp)
    sp.add_argument("--alt-type-dist", required=True, help='JSON object or "t=p,t=p"')
    sp.set_defaults(fn=cmd_statics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    out, close = None, False
    try:
        out, close = _open_out(args.out)
        return args.fn(args, out)
    except (UsageError, InstanceError, PolicyError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    finally:
        if close:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
