import json
import os
from fractions import Fraction

import pytest

from bayesexplore.cli import main
from bayesexplore.harness import ExperimentSpec, run_experiment, summary_csv
from bayesexplore.model import dump_instance, example1
from bayesexplore.policies import run_public_policy
from bayesexplore.trace import TraceFormatError, trace_from_csv, trace_to_csv


def test_summary_is_exact_and_deterministic(tmp_path):
    spec = ExperimentSpec("example1", "public", 300, [0, 1, 2], trace_dir=str(tmp_path / "a"))
    s1 = run_experiment(spec)
    s2 = run_experiment(ExperimentSpec("example1", "public", 300, [0, 1, 2], trace_dir=str(tmp_path / "b")))
    assert summary_csv(s1) == summary_csv(s2)
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()
    assert len(s1.runs) == 6
    assert s1.mean_reward == sum(r.mean for r in s1.runs) / 6
    assert s1.opt_public == 3 and s1.opt_private == Fraction(5, 2)
    assert s1.all_audits_pass


def test_runs_match_direct_policy_calls():
    s = run_experiment(ExperimentSpec("example1", "public", 100, [7], states="1"), keep_traces=True)
    r = s.runs[0]
    direct = run_public_policy(example1(), "1", T=100, seed=r.run_seed)
    assert s.traces[0].split("# instance")[1].split("\n", 1)[1].startswith("# master_seed")
    assert trace_from_csv(s.traces[0], example1()).rows == direct.rows


def test_sampled_states_and_workers():
    a = run_experiment(ExperimentSpec("example1", "public", 50, list(range(6)), states="sampled"))
    b = run_experiment(ExperimentSpec("example1", "public", 50, list(range(6)), states="sampled", workers=2))
    assert summary_csv(a) == summary_csv(b)
    assert len(a.runs) == 6


def test_private_precondition_is_per_run():
    s = run_experiment(ExperimentSpec("example1", "private", 100, [0], delta=Fraction(1)))
    assert all(r.error for r in s.runs)
    assert not s.all_audits_pass


@pytest.mark.parametrize(
    "kwargs",
    [dict(T=0), dict(seeds=[]), dict(policy="private"), dict(delta=Fraction(1, 10)), dict(policy="nope")],
)
def test_spec_validation(kwargs):
    base = dict(instance="example1", policy="public", T=10, seeds=[0])
    base.update(kwargs)
    with pytest.raises(ValueError):
        ExperimentSpec(**base).validate()


def test_t1_is_one_audited_round():
    s = run_experiment(ExperimentSpec("example1", "public", 1, [0]))
    for r in s.runs:
        assert r.exploration_rounds == 1 and r.audit_ok
        # both types take action 0 first, worth 3 or 2 in either state
        assert r.total in (2, 3)


def test_trace_format_errors(ex1):
    text = trace_to_csv(run_public_policy(ex1, "0", T=3))
    with pytest.raises(TraceFormatError):
        trace_from_csv(text.replace("# policy=public\n", ""), ex1)
    with pytest.raises(TraceFormatError):
        trace_from_csv(text.replace("audit_margin", "margin"), ex1)
    lines = text.splitlines()
    lines[-1] = lines[-1] + ",extra"
    with pytest.raises(TraceFormatError):
        trace_from_csv("\n".join(lines), ex1)


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_opt(capsys):
    code, out, _ = run_cli(["opt", "--instance", "example1"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["OPT_pub"] == "3" and doc["OPT_pri"] == "5/2"


def test_cli_explore_private(capsys):
    code, out, _ = run_cli(["explore", "--instance", "example1", "--mode", "private", "--delta", "0"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["eventually_explorable"] == {"0": ['["0", "0"]'], "1": ['["0", "0"]']}


def test_cli_explore_csv(capsys):
    code, out, _ = run_cli(["explore", "--format", "csv"], capsys)
    assert code == 0 and out.startswith("phase,signal,type,recommendation,pi_max")


def test_cli_simulate_and_audit(tmp_path, capsys):
    d = tmp_path / "traces"
    code, out, _ = run_cli(["simulate", "--policy", "reported", "-T", "200", "--seeds", "2", "--trace-dir", str(d)], capsys)
    assert code == 0 and "audit: pass" in out
    path = d / "reported_state-0_seed-1.csv"
    code, out, _ = run_cli(["audit", "--instance", "example1", "--trace", str(path)], capsys)
    assert code == 0 and "verdict: pass" in out
    # corrupt round 1: a menu recommending action 1 to type 0
    lines = path.read_text().splitlines()
    i = next(k for k, line in enumerate(lines) if line.startswith("1,"))
    lines[i] = f'1,0,"[""1"", ""0""]",1,{example1().u("0", "1", "0")},1,1,0,0'
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    code, out, _ = run_cli(["audit", "--instance", "example1", "--trace", str(bad)], capsys)
    assert code == 1 and "round 1:" in out


def test_cli_private_simulate_csv(capsys):
    code, out, _ = run_cli(["simulate", "--policy", "private", "--delta", "1/10", "-T", "100", "--seeds", "1", "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines()[0].startswith("state,seed,run_seed")


def test_cli_info_diag_and_statics(capsys):
    code, out, _ = run_cli(["info-diag", "--mode", "private", "--delta", "1/10"], capsys)
    assert code == 0 and json.loads(out)["all_hold"]
    code, out, _ = run_cli(["statics", "--alt-type-dist", '{"0": 1, "1": 0}'], capsys)
    assert code == 0 and json.loads(out)["relation"] == "subset"


def test_cli_instance_file(tmp_path, capsys):
    p = tmp_path / "inst.json"
    p.write_text(dump_instance(example1()))
    code, out, _ = run_cli(["opt", "--instance", str(p)], capsys)
    assert code == 0 and json.loads(out)["OPT_pub"] == "3"


@pytest.mark.parametrize(
    "args",
    [
        ["opt", "--instance", "/no/such/file.json"],
        ["opt", "--delta", "0.1"],
        ["simulate", "-T", "0"],
        ["simulate", "--seeds", "x"],
        ["bogus"],
        ["audit", "--trace", "/no/such/trace.csv"],
        ["statics", "--alt-type-dist", "0=1/2"],
    ],
)
def test_cli_usage_errors(args, capsys):
    code, _, err = run_cli(args, capsys)
    assert code == 2


def test_cli_bad_instance_document(tmp_path, capsys):
    p = tmp_path / "bad.json"
    d = json.loads(dump_instance(example1()))
    d["state_prior"]["0"] = "1/3"
    p.write_text(json.dumps(d))
    code, _, err = run_cli(["opt", "--instance", str(p)], capsys)
    assert code == 2 and "state_prior" in err
