"""Entity-graph tracking, hallucination detection and clarification for medical consultations."""

from .corpus import (
    CorpusError,
    Dialogue,
    EntityClass,
    EntityMention,
    EntityState,
    Speaker,
    Utterance,
    parse_corpus,
    validate_dialogue,
    write_corpus,
)
from .detector import Agreement, Detector, HallucinationEvent, HallucinationKind, classify_by_entropy, detect_dialogue
from .dialogue_graph import DialogueEntityGraph, GraphSnapshot, new_session, replay
from .entropy import (
    component_entropy,
    contradiction_lower_bound,
    denial_upper_bound,
    removal_bounds,
    structural_entropy,
    verify_separation,
)
from .harness import (
    PatientScenario,
    SessionMetrics,
    aggregate_metrics,
    entity_prf,
    inject_hallucination,
    scripted_patient,
    simulate_session,
)
from .knowledge_graph import KnowledgeGraph, build_knowledge_graph, find_bridges, load_kg, related_entities, save_kg
from .mitigation import (
    ClarifyingPlan,
    ResponseKnowledge,
    build_response_knowledge,
    plan_clarification,
    render_question,
)

__version__ = "0.1.0"
