"""Walk through the two-state, two-type example: what each type can be
convinced to try, phase by phase, and the resulting benchmarks."""
from fractions import Fraction

from bayesexplore.explorability import PRIVATE, PUBLIC, benchmark_opt, eventually_explorable, phase_schedule
from bayesexplore.model import example1, rational_str


def main():
    inst = example1()
    print("states", inst.states, "prior", {w: rational_str(p) for w, p in inst.state_prior.items()})
    print("types", inst.types, "prior", {t: rational_str(p) for t, p in inst.type_dist.items()})

    sched = phase_schedule(inst, PUBLIC)
    print(f"\npublic: {len(sched.phases)} distinct phases, fixed point stable={sched.stable}")
    for ph in sched.phases:
        print(f"  phase {ph.index}: {len(ph.structure.support)} signal(s)")
        for w in inst.states:
            s = ph.signal_of[w]
            print(f"    state {w}: " + ", ".join(f"type {t} can try {list(ph.report.ex[t][s])}" for t in inst.types))

    for mode in (PUBLIC, PRIVATE):
        ee = eventually_explorable(inst, mode)
        print(f"\n{mode}: eventually explorable per state")
        for w in inst.states:
            print(f"  {w}: {sorted(ee[w])}")
        print(f"  OPT = {rational_str(benchmark_opt(inst, mode))}")

    delta = Fraction(1, 10)
    print(f"\nprivate with delta={delta}: OPT = {rational_str(benchmark_opt(inst, PRIVATE, delta))}")


if __name__ == "__main__":
    main()
