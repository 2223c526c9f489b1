"""Information monotonicity: garbled signals never enlarge the explorable
sets, while a tiny leak through a rare signal can, unless delta-BIC is read
in its aggregate (unnormalized) form."""
import random
from fractions import Fraction

from bayesexplore.explorability import PRIVATE, PUBLIC, check_information_monotonicity
from bayesexplore.infotheory import garbled_joint, history_information, leaky_joint
from bayesexplore.model import example1, random_instance


def main():
    inst = example1()
    for l in (2, 3):
        c = history_information(inst, PUBLIC, l)
        print(f"public history leak at phase {l}: exact zero={c.zero}")

    rng = random.Random(21)
    delta = Fraction(1, 10)
    tally = {"garbled": [0, 0], "leaky/conditional": [0, 0], "leaky/aggregate": [0, 0]}
    for k in range(30):
        i = random_instance(rng, 2, 2, 2) if k % 3 else example1()
        v = check_information_monotonicity(i, garbled_joint(i, rng), PRIVATE, delta)
        tally["garbled"][0] += v.applicable
        tally["garbled"][1] += v.applicable and not v.holds
        leak = leaky_joint(i, rng, Fraction(1, 10**4), n_signals=2)
        for name in ("conditional", "aggregate"):
            v = check_information_monotonicity(i, leak, PRIVATE, delta, relaxation=name)
            tally["leaky/" + name][0] += v.applicable
            tally["leaky/" + name][1] += v.applicable and not v.holds
            if name == "conditional" and v.witnesses and tally["leaky/conditional"][1] == 1:
                print("first counterexample (s, s', -, extra menus):", v.witnesses[0])
    for name, (n, bad) in tally.items():
        print(f"{name}: {bad} failures in {n} applicable joints")


if __name__ == "__main__":
    main()
