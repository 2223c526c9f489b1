"""The private-type policy: how long its exploration runs as the horizon
grows, and what it earns once the horizon is long enough."""
from fractions import Fraction

from bayesexplore.explorability import PRIVATE, opt_by_state
from bayesexplore.model import resolve_instance
from bayesexplore.policies import PolicyError, minimum_private_horizon, private_exploration_length, run_private_policy
from bayesexplore.trace import total_reward


def main():
    inst = resolve_instance("distinguishing")
    delta = Fraction(3, 2)
    print("horizon T -> exploration rounds |M|*L")
    for T in (10**3, 10**4, 10**5):
        L, total, _ = private_exploration_length(inst, delta, T)
        print(f"  {T:>7}: L={L}, |M|*L={total}")
    print("smallest workable horizon:", minimum_private_horizon(inst, delta))

    try:
        run_private_policy(inst, inst.states[0], T=1000, delta=delta, seed=0)
    except PolicyError as exc:
        print("short horizon rejected:", exc)

    T = 10**5
    opt = opt_by_state(inst, PRIVATE, delta)
    for w in inst.states:
        tr = run_private_policy(inst, w, T=T, delta=delta, seed=1)
        _, mean = total_reward(tr)
        print(f"state {w}: mean reward {float(mean):.4f}, OPT {float(opt[w]):.4f}")


if __name__ == "__main__":
    main()
