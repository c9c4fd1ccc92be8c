"""Seeded synthetic worlds for tests, demos and the simulation harness.

A world is a sparse latent relation graph (a random tree per cluster plus a
few extra edges), a training corpus whose dialogues each discuss one related
pair, and the knowledge graph built from that corpus.  Base dialogues are
grown along knowledge graph edges so they raise no events on their own.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import networkx as nx

from .corpus import Dialogue, EntityClass, EntityMention, EntityState, Speaker, Utterance
from .detector import HallucinationKind, detect_dialogue
from .harness import PatientScenario, ScenarioError, admissible_subjects, inject_hallucination
from .knowledge_graph import KnowledgeGraph, build_knowledge_graph, find_bridges
from .dialogue_graph import replay

_CLASSES = (EntityClass.SYMPTOM, EntityClass.DISEASE, EntityClass.SYMPTOM, EntityClass.EXAMINATION, EntityClass.MEDICINE)

_ASKS = (
    "Do you also have {e}?",
    "Have you noticed any {e} lately?",
    "Is there any {e}?",
    "How long have you had {e}?",
)


@dataclass
class SyntheticWorld:
    latent: nx.Graph
    clusters: list[list[str]]
    corpus: list[Dialogue]
    kg: KnowledgeGraph

    def cls(self, label: str) -> EntityClass:
        return self.latent.nodes[label]["cls"]


def _mention(world_latent: nx.Graph, label: str, state: EntityState = EntityState.MENTION) -> EntityMention:
    return EntityMention(label, world_latent.nodes[label]["cls"], state)


def make_world(
    n_clusters: int = 6,
    cluster_size: int = 10,
    extra_edges: int = 2,
    seed: int = 0,
    threshold: float = 0.01,
) -> SyntheticWorld:
    rng = random.Random(seed)
    latent = nx.Graph()
    clusters = []
    for c in range(n_clusters):
        nodes = [f"e{c}-{i}" for i in range(cluster_size)]
        for i, v in enumerate(nodes):
            latent.add_node(v, cls=_CLASSES[i % len(_CLASSES)], cluster=c)
        for i in range(1, cluster_size):
            latent.add_edge(nodes[i], nodes[rng.randrange(i)])
        non_edges = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:] if not latent.has_edge(a, b)]
        for a, b in rng.sample(non_edges, min(extra_edges, len(non_edges))):
            latent.add_edge(a, b)
        clusters.append(nodes)

    # every related pair appears in both orders, so KG edges go both ways
    corpus = []
    for a, b in sorted(latent.edges):
        for u, v in ((a, b), (b, a)):
            ask = rng.choice(_ASKS).format(e=v)
            corpus.append(
                Dialogue(
                    f"train-{len(corpus)}",
                    (
                        Utterance(Speaker.PATIENT, (_mention(latent, u),), f"I have {u}."),
                        Utterance(Speaker.DOCTOR, (_mention(latent, v),), ask),
                        Utterance(Speaker.PATIENT, (_mention(latent, v),), f"Yes, some {v}."),
                    ),
                )
            )
    return SyntheticWorld(latent, clusters, corpus, build_knowledge_graph(corpus, threshold))


def synthetic_base(world: SyntheticWorld, rng: random.Random, steps: int = 4, dialogue_id: str = "base") -> tuple[Dialogue, frozenset[str]]:
    """Grow an event-free dialogue along KG edges and a matching hidden truth.

    The doctor sometimes asks about a neighbour the patient does not have; the
    patient denies it right away, which is triage and not a hallucination.
    Truth holds everything the patient confirmed plus a few unmentioned
    neighbours.
    """
    kg = world.kg
    start = rng.choice(sorted(e for e in kg.entities if len(kg.neighbors(e)) >= 2))
    turns = [Utterance(Speaker.PATIENT, (_mention(world.latent, start),), f"I came in because of {start}.")]
    present, negated = {start}, set()
    for _ in range(steps):
        frontier = sorted({n for p in present for n in kg.neighbors(p)} - present - negated)
        if not frontier:
            break
        x = rng.choice(frontier)
        if rng.random() < 0.6:
            turns.append(Utterance(Speaker.DOCTOR, (_mention(world.latent, x),), rng.choice(_ASKS).format(e=x)))
            if rng.random() < 0.7:
                turns.append(Utterance(Speaker.PATIENT, (_mention(world.latent, x),), f"Yes, I have {x}."))
                present.add(x)
            else:
                turns.append(Utterance(Speaker.PATIENT, (_mention(world.latent, x, EntityState.DENY),), f"No {x}."))
                negated.add(x)
        else:
            turns.append(Utterance(Speaker.PATIENT, (_mention(world.latent, x),), f"There is also {x}."))
            present.add(x)
    truth = set(present)
    for p in sorted(present):
        for n in sorted(kg.neighbors(p) - present - negated):
            if rng.random() < 0.3:
                truth.add(n)
    return Dialogue(dialogue_id, tuple(turns)), frozenset(truth)


def generate_scenarios(
    world: SyntheticWorld,
    n: int,
    seed: int = 0,
    kinds: tuple[HallucinationKind, ...] = tuple(HallucinationKind),
    max_tries: int = 200,
) -> list[PatientScenario]:
    """`n` scenarios, each a clean base dialogue plus one injected hallucination.

    Kinds are drawn uniformly; a base that cannot host the drawn kind is
    regrown.
    """
    rng = random.Random(seed)
    out = []
    for i in range(n):
        kind = rng.choice(kinds)
        for _ in range(max_tries):
            base, truth = synthetic_base(world, rng, steps=rng.randint(3, 6), dialogue_id=f"syn-{seed}-{i}")
            if sum(u.speaker is Speaker.PATIENT for u in base.turns) < 2:
                continue
            if not admissible_subjects(base, kind, world.kg, truth):
                continue
            events, _ = detect_dialogue(world.kg, base)
            if events:
                continue
            subject = None
            if kind is HallucinationKind.ISOLATED and rng.random() < 0.5:
                # half of the isolated mentions sit two hops from the dialogue
                present = replay(world.kg, base)[0].present
                near = [e for e in admissible_subjects(base, kind, world.kg, truth)
                        if find_bridges(world.kg, e, present, 2)]
                subject = rng.choice(near) if near else None
            out.append(
                inject_hallucination(base, kind, world.kg, rng.randrange(2**31), truth, subject,
                                     scenario_id=f"syn-{seed}-{i}")
            )
            break
        else:
            raise ScenarioError(f"could not grow a base dialogue for {kind.value}")
    return out
