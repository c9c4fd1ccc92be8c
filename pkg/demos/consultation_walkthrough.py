"""Walk through one consultation where the patient suddenly names an unrelated disease.

The script builds a small knowledge graph, replays the dialogue turn by turn while
printing the entity graph and its entropy, then lets the clarifying loop resolve
the isolated mention.
"""

from entigraph import build_response_knowledge, detect_dialogue, plan_clarification, replay, simulate_session
from entigraph.fixtures import consult_corpus, consult_kg, table4_scenario


def show_edges(kg):
    print("knowledge graph edges:")
    for e in kg.edges.values():
        print(f"  {e.src:>12} -> {e.dst:<12} {e.weight:.3f}")


def main():
    kg = consult_kg()
    rk = build_response_knowledge(consult_corpus(), k=2)
    show_edges(kg)

    scenario = table4_scenario(kg)
    g, _ = replay(kg, scenario.dialogue)
    print("\nturn by turn:")
    for turn, snap in zip(scenario.dialogue.turns, g.snapshots[1:]):
        comps = " | ".join(", ".join(c) for c in snap.components) or "-"
        print(f"  [{turn.speaker.value:7}] {turn.text}")
        print(f"            components: {comps}   H1={snap.h1:.4f}")

    events, _ = detect_dialogue(kg, scenario.dialogue)
    for e in events:
        print(f"\nevent at turn {e.turn}: {e.kind.value} '{e.subject}' (dN={e.delta_n:+d}, dH1={e.delta_h1:+.4f})")
        plan = plan_clarification(e, kg, rk)
        print(f"bridges: {plan.bridges}")
        print(f"doctor asks: {plan.question}")

    m = simulate_session(kg, rk, scenario)
    print("\nclarified session:")
    for line in m.transcript[len(scenario.dialogue.turns):]:
        print(f"  [{line.speaker.value:7}] {line.text}")
    print(f"outcome={m.outcome} success={m.success} dGE={m.delta_ge:.4f}")


if __name__ == "__main__":
    main()
