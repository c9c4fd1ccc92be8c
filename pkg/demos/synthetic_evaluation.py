"""Compare sessions with and without clarification on a synthetic scenario set."""

import argparse
from collections import Counter

from entigraph import aggregate_metrics, build_response_knowledge, simulate_session
from entigraph.synthetic import generate_scenarios, make_world


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    world = make_world(seed=args.seed)
    rk = build_response_knowledge(world.corpus)
    scenarios = generate_scenarios(world, args.n, seed=args.seed)
    print(f"world: {len(world.kg.entities)} entities, {len(world.corpus)} dialogues, {len(scenarios)} scenarios")

    for mitigation in (True, False):
        runs = [simulate_session(world.kg, rk, s, seed=args.seed + i, mitigation=mitigation)
                for i, s in enumerate(scenarios)]
        ge, rate = aggregate_metrics(runs)
        label = "with clarification" if mitigation else "without clarification"
        print(f"{label}: success={rate:.2f} mean dGE={ge:.4f}")
        if mitigation:
            by_kind = Counter((s.injection.kind.value, m.outcome) for s, m in zip(scenarios, runs))
            for (kind, outcome), count in sorted(by_kind.items()):
                print(f"    {kind:13} {outcome:11} {count}")


if __name__ == "__main__":
    main()
