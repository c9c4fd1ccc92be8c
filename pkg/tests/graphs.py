"""Hand-made knowledge graphs for tests."""

from entigraph.corpus import EntityClass, EntityMention, EntityState, Speaker, Utterance
from entigraph.knowledge_graph import Edge, EntityInfo, KnowledgeGraph


def unit_kg(pairs, extra=()):
    """Symmetric KG with weight 1 on both directions of every pair."""
    labels = sorted({x for p in pairs for x in p} | set(extra))
    ents = [EntityInfo(label, EntityClass.SYMPTOM, 1) for label in labels]
    edges = [Edge(a, b, 1, 1.0) for a, b in pairs] + [Edge(b, a, 1, 1.0) for a, b in pairs]
    return KnowledgeGraph(ents, edges, 0.01)


def say(speaker, *labels, deny=False):
    state = EntityState.DENY if deny else EntityState.MENTION
    return Utterance(speaker, tuple(EntityMention(label, EntityClass.SYMPTOM, state) for label in labels))


def patient(*labels, deny=False):
    return say(Speaker.PATIENT, *labels, deny=deny)


def doctor(*labels, deny=False):
    return say(Speaker.DOCTOR, *labels, deny=deny)
