"""Run the public and reported-type policies on the example, write a trace,
read it back and re-audit it against a full replay."""
import tempfile
from pathlib import Path

from bayesexplore.harness import ExperimentSpec, run_experiment, summary_text
from bayesexplore.model import example1
from bayesexplore.policies import audit_bic, replay
from bayesexplore.trace import trace_from_csv


def main():
    for policy in ("public", "reported"):
        spec = ExperimentSpec("example1", policy, T=2000, seeds=list(range(5)))
        print(summary_text(run_experiment(spec)))

    inst = example1()
    with tempfile.TemporaryDirectory() as tmp:
        spec = ExperimentSpec("example1", "public", T=500, seeds=[7], states="1", trace_dir=tmp)
        run_experiment(spec)
        path = next(Path(tmp).glob("*.csv"))
        print("trace header:")
        print("\n".join(line for line in path.read_text().splitlines() if line.startswith("#")))
        tr = trace_from_csv(path.read_text(), inst)
        rep = audit_bic(tr, inst, replay(inst, tr))
        print(f"re-audit: ok={rep.ok}, min margin {rep.min_margin}, off-policy messages {len(rep.off_policy)}")


if __name__ == "__main__":
    main()
