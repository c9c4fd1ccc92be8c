"""Small hand-checkable corpora and graphs used by tests and demos."""

from __future__ import annotations

from .corpus import Dialogue, EntityClass, EntityMention, EntityState, Speaker, Utterance
from .harness import PatientScenario, inject_hallucination
from .detector import HallucinationKind
from .knowledge_graph import Edge, EntityInfo, KnowledgeGraph, build_knowledge_graph

S, DZ = EntityClass.SYMPTOM, EntityClass.DISEASE
M, D = EntityState.MENTION, EntityState.DENY
P, DOC = Speaker.PATIENT, Speaker.DOCTOR

CONSULT_CLASSES = {
    "bloating": S,
    "acid reflux": S,
    "cough": S,
    "phlegm": S,
    "pneumonia": DZ,
    "fever": S,
    "cold": DZ,
}

# related pairs of the consultation KG, each seen in both orders
CONSULT_PAIRS = [
    ("bloating", "acid reflux"),
    ("acid reflux", "cough"),
    ("cough", "pneumonia"),
    ("pneumonia", "fever"),
    ("fever", "cold"),
    ("cough", "phlegm"),
]

_DOCTOR_ASKS = {
    "acid reflux": ["Do you get acid reflux after meals?", "Any acid reflux or heartburn?"],
    "bloating": ["Do you feel bloating after eating?", "Is there bloating in the stomach?"],
    "cough": ["Do you have a cough?", "Is the cough worse at night?"],
    "phlegm": ["Is there any phlegm when you cough?", "What colour is the phlegm?"],
    "pneumonia": ["Have you ever been told you had pneumonia?", "Was pneumonia ever diagnosed?"],
    "fever": ["Do you have a fever?", "How high has the fever been?"],
    "cold": ["Did you catch a cold recently?", "Any signs of a cold?"],
}


def _m(label: str, state: EntityState = M) -> EntityMention:
    return EntityMention(label, CONSULT_CLASSES[label], state)


def consult_corpus() -> list[Dialogue]:
    out = []
    for a, b in CONSULT_PAIRS:
        for i, (u, v) in enumerate(((a, b), (b, a))):
            out.append(
                Dialogue(
                    f"consult-{len(out)}",
                    (
                        Utterance(P, (_m(u),), f"I have {u}."),
                        Utterance(DOC, (_m(v),), _DOCTOR_ASKS[v][i]),
                        Utterance(P, (_m(v),), f"Yes, {v} too."),
                    ),
                )
            )
    return out


def consult_kg() -> KnowledgeGraph:
    return build_knowledge_graph(consult_corpus())


def table4_base() -> Dialogue:
    """Stomach complaint, a triaged cold/fever question, then a turn with no entities."""
    return Dialogue(
        "table4",
        (
            Utterance(P, (_m("bloating"), _m("acid reflux")), "My stomach feels bloated and I have acid reflux."),
            Utterance(DOC, (_m("cold"),), "Did you catch a cold recently?"),
            Utterance(P, (_m("cold", D), _m("fever", D)), "No cold, and no fever either."),
            Utterance(DOC, (), "How long has this been going on?"),
        ),
    )


TABLE4_TRUTH = frozenset({"bloating", "acid reflux"})


def table4_scenario(kg: KnowledgeGraph | None = None) -> PatientScenario:
    """The patient suddenly brings up pneumonia, which nothing so far supports."""
    return inject_hallucination(
        table4_base(),
        HallucinationKind.ISOLATED,
        kg or consult_kg(),
        seed=0,
        truth=TABLE4_TRUTH,
        subject="pneumonia",
        scenario_id="table4",
    )


def three_dialogue_corpus() -> list[Dialogue]:
    """Tiny corpus with a same-turn pair, a deny, a repeat mention and a doctor mention."""
    return [
        Dialogue(
            "w1",
            (
                Utterance(P, (_m("cough"), _m("fever")), "Cough and fever."),
                Utterance(DOC, (_m("pneumonia"),), "Could be pneumonia."),
            ),
        ),
        Dialogue(
            "w2",
            (
                Utterance(P, (_m("fever"),), "I have a fever."),
                Utterance(DOC, (_m("cold", D),), "So not a cold."),
                Utterance(P, (_m("cough"), _m("fever")), "Also a cough, and the fever again."),
            ),
        ),
        Dialogue(
            "w3",
            (
                Utterance(P, (_m("cold"),), "I think it is a cold."),
                Utterance(DOC, (_m("fever"),), "Any fever?"),
            ),
        ),
    ]


def competing_bridges_kg() -> KnowledgeGraph:
    """x reaches anchor a via b1 (0.5 * 0.5) or via b2 (0.3 * 0.9)."""
    ents = [EntityInfo(label, S, 10) for label in ("a", "b1", "b2", "x")]
    edges = [
        Edge("x", "b1", 5, 0.5),
        Edge("b1", "a", 5, 0.5),
        Edge("x", "b2", 3, 0.3),
        Edge("b2", "a", 9, 0.9),
    ]
    return KnowledgeGraph(ents, edges, 0.01)
