"""Scripted-patient simulation and evaluation metrics.

A scenario pairs a clean dialogue with one injected hallucination and the
set of entities the simulated patient really has.  The scripted patient
answers every clarifying question truthfully, which makes "was the
hallucination mitigated" a decidable question.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .corpus import (
    Dialogue,
    EntityClass,
    EntityMention,
    EntityState,
    Speaker,
    Utterance,
    dialogue_from_record,
    dialogue_to_record,
)
from .detector import Detector, HallucinationEvent, HallucinationKind
from .dialogue_graph import DialogueEntityGraph, replay
from .knowledge_graph import KnowledgeGraph
from .mitigation import ResponseKnowledge, plan_clarification

DEFAULT_MAX_TURNS = 3


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Injection:
    kind: HallucinationKind
    subject: str
    turn: int


@dataclass(frozen=True)
class PatientScenario:
    id: str
    truth: frozenset[str]
    base: Dialogue
    injection: Injection
    seed: int
    dialogue: Dialogue

    def as_record(self) -> dict:
        return {
            "scenario_id": self.id,
            "seed": self.seed,
            "truth": sorted(self.truth),
            "base": dialogue_to_record(self.base),
            "injection": {
                "kind": self.injection.kind.value,
                "subject": self.injection.subject,
                "turn": self.injection.turn,
            },
            "dialogue": dialogue_to_record(self.dialogue),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_record(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_record(cls, rec: Mapping) -> "PatientScenario":
        inj = rec["injection"]
        base = dialogue_from_record(rec["base"])
        dialogue = dialogue_from_record(rec["dialogue"]) if "dialogue" in rec else base
        return cls(
            id=str(rec["scenario_id"]),
            truth=frozenset(rec["truth"]),
            base=base,
            injection=Injection(HallucinationKind(inj["kind"]), inj["subject"], int(inj["turn"])),
            seed=int(rec.get("seed", 0)),
            dialogue=dialogue,
        )


def _present_graph(g: DialogueEntityGraph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(g.present)
    h.add_edges_from(g.edges)
    return h


def _patient_mentioned(g: DialogueEntityGraph) -> set[str]:
    return {
        label
        for label, recs in g.history.items()
        if any(r.speaker is Speaker.PATIENT and r.state is EntityState.MENTION for r in recs)
    }


def admissible_subjects(
    base: Dialogue, kind: HallucinationKind, kg: KnowledgeGraph, truth: Iterable[str] | None = None
) -> list[str]:
    """Entities that can carry an injected hallucination of `kind`."""
    g, _ = replay(kg, base)
    if kind is HallucinationKind.ISOLATED:
        # never discussed, not really present, and no KG edge to what the
        # patient has asserted by the end of the base dialogue
        seen = {m.label for u in base.turns for m in u.mentions}
        excluded = seen | set(truth or ())
        return sorted(
            e for e in kg.entities if e not in excluded and not any(kg.linked(e, b) for b in g.present)
        )
    h = _present_graph(g)
    cuts = set(nx.articulation_points(h))
    mentioned = _patient_mentioned(g)
    if kind is HallucinationKind.DENIAL:
        return sorted(v for v in cuts if v in mentioned)
    return sorted(
        v
        for v in g.present
        if v in mentioned and v not in cuts and len(nx.node_connected_component(h, v)) >= 3
    )


def inject_hallucination(
    base: Dialogue,
    kind: HallucinationKind | str,
    kg: KnowledgeGraph,
    seed: int,
    truth: Iterable[str] | None = None,
    subject: str | None = None,
    scenario_id: str | None = None,
) -> PatientScenario:
    """Append one patient turn carrying a hallucination of `kind`.

    Isolated mentions an entity with no KG edge to anything still asserted
    at the end of the base dialogue; Denial denies a patient-mentioned cut vertex; Contradiction
    denies a patient-mentioned entity whose removal keeps its component
    connected.  `truth` defaults to the entities present at the end of the
    base dialogue.
    """
    kind = HallucinationKind(kind)
    if sum(u.speaker is Speaker.PATIENT for u in base.turns) < 2:
        raise ScenarioError("base dialogue needs at least two patient turns")
    missing = {m.label for u in base.turns for m in u.mentions} - set(kg.entities)
    if missing:
        raise ScenarioError(f"entities missing from the knowledge graph: {sorted(missing)}")

    g, _ = replay(kg, base)
    truth = set(g.present) if truth is None else set(truth)
    candidates = admissible_subjects(base, kind, kg, truth)
    if subject is None:
        if not candidates:
            raise ScenarioError(f"no admissible subject for {kind.value}")
        subject = random.Random(seed).choice(candidates)
    elif subject not in candidates:
        raise ScenarioError(f"{subject!r} is not admissible for {kind.value}")

    cls = kg.entities[subject].cls
    if kind is HallucinationKind.ISOLATED:
        truth.discard(subject)
        turn = Utterance(Speaker.PATIENT, (EntityMention(subject, cls, EntityState.MENTION),),
                         f"Could it be {subject}?")
    else:
        truth.add(subject)
        turn = Utterance(Speaker.PATIENT, (EntityMention(subject, cls, EntityState.DENY),),
                         f"Actually, I don't have {subject}.")
    injected = Dialogue(base.id, base.turns + (turn,))
    return PatientScenario(
        id=scenario_id or f"{base.id}:{kind.value}:{seed}",
        truth=frozenset(truth),
        base=base,
        injection=Injection(kind, subject, len(base.turns)),
        seed=seed,
        dialogue=injected,
    )


@dataclass(frozen=True)
class ClarifyingQuestion:
    text: str
    target: str
    cls: EntityClass
    kind: HallucinationKind


_YES = ("Yes, I have {t}.", "Yes, there is some {t}.")
_NO = ("No, I don't have {t}.", "No {t}, as far as I can tell.")


def scripted_patient(
    scenario: PatientScenario, question: ClarifyingQuestion, rng: random.Random | None = None
) -> Utterance:
    """Answer truthfully: mention the target if the patient has it, deny otherwise."""
    has = question.target in scenario.truth
    state = EntityState.MENTION if has else EntityState.DENY
    phrases = _YES if has else _NO
    phrase = phrases[rng.randrange(len(phrases))] if rng else phrases[0]
    return Utterance(
        Speaker.PATIENT,
        (EntityMention(question.target, question.cls, state),),
        phrase.format(t=question.target),
    )


@dataclass(frozen=True)
class TranscriptLine:
    speaker: Speaker
    text: str
    mentions: tuple[tuple[str, EntityState], ...]

    @classmethod
    def of(cls, u: Utterance) -> "TranscriptLine":
        return cls(u.speaker, u.text or "", tuple((m.label, m.state) for m in u.mentions))

    def as_record(self) -> dict:
        return {
            "speaker": self.speaker.value,
            "text": self.text,
            "mentions": [[label, state.value] for label, state in self.mentions],
        }


@dataclass
class SessionMetrics:
    scenario_id: str
    delta_ge: float
    success: bool
    clarifying_turns: int
    transcript: list[TranscriptLine] = field(default_factory=list)
    events: list[HallucinationEvent] = field(default_factory=list)
    outcome: str = "none"
    h1_at_event: float = 0.0
    h1_final: float = 0.0

    def as_record(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "delta_ge": self.delta_ge,
            "success": self.success,
            "clarifying_turns": self.clarifying_turns,
            "outcome": self.outcome,
            "h1_at_event": self.h1_at_event,
            "h1_final": self.h1_final,
            "events": [e.as_record() for e in self.events],
            "transcript": [t.as_record() for t in self.transcript],
        }


def _component_of(g: DialogueEntityGraph, label: str) -> tuple[str, ...]:
    return next((c for c in g.components() if label in c), ())


def _clarify(kg, rk, scenario, event, session, max_turns, rng, templates, transcript) -> tuple[bool, str, int]:
    """Run the clarifying loop for one event; returns (resolved, outcome, questions asked)."""
    subject = event.subject
    for asked in range(1, max_turns + 1):
        plan = plan_clarification(event, kg, rk, session, templates)
        cls = kg.entities[plan.target].cls
        question = Utterance(Speaker.DOCTOR, (EntityMention(plan.target, cls, EntityState.MENTION),), plan.question)
        session.apply_utterance(question)
        transcript.append(TranscriptLine.of(question))

        answer = scripted_patient(scenario, ClarifyingQuestion(plan.question, plan.target, cls, event.kind), rng)
        session.apply_utterance(answer)
        transcript.append(TranscriptLine.of(answer))
        confirmed = answer.mentions[0].state is EntityState.MENTION

        if event.kind is HallucinationKind.ISOLATED and plan.target != subject:
            if confirmed:
                comp = _component_of(session, subject)
                if any(a in comp for a in event.anchors):
                    return True, "integrated", asked
                continue
            rule_out = Utterance(
                Speaker.DOCTOR,
                (EntityMention(subject, kg.entities[subject].cls, EntityState.DENY),),
                f"Then {subject} seems unlikely.",
            )
            session.apply_utterance(rule_out)
            transcript.append(TranscriptLine.of(rule_out))
            return True, "excluded", asked
        if event.kind is HallucinationKind.ISOLATED:
            return True, "integrated" if confirmed else "excluded", asked
        if event.kind is HallucinationKind.DENIAL:
            return True, "restored" if confirmed else "upheld", asked
        return True, "reconciled", asked
    return False, "unresolved", max_turns


def simulate_session(
    kg: KnowledgeGraph,
    rk: ResponseKnowledge,
    scenario: PatientScenario,
    max_clarifying_turns: int = DEFAULT_MAX_TURNS,
    seed: int = 0,
    mitigation: bool = True,
    templates: Mapping[str, str] | None = None,
) -> SessionMetrics:
    """Replay a scenario, clarifying each detected event when `mitigation` is on.

    Delta GE is the structural entropy at the end of the session minus the
    entropy right after the first detected event.
    """
    if max_clarifying_turns < 1:
        raise ValueError("max_clarifying_turns must be >= 1")
    missing = {m.label for u in scenario.dialogue.turns for m in u.mentions} - set(kg.entities)
    if missing:
        raise ScenarioError(f"scenario {scenario.id!r} mentions entities outside the KG: {sorted(missing)}")

    rng = random.Random(seed)
    det = Detector(kg, scenario.id)
    transcript: list[TranscriptLine] = []
    first: HallucinationEvent | None = None
    h1_at_event = 0.0
    success, outcome, asked_total = False, "none", 0

    for u in scenario.dialogue.turns:
        transcript.append(TranscriptLine.of(u))
        for ev in det.feed(u):
            if first is None:
                first, h1_at_event = ev, det.session.last.h1
            if not mitigation:
                continue
            resolved, result, asked = _clarify(
                kg, rk, scenario, ev, det.session, max_clarifying_turns, rng, templates, transcript
            )
            asked_total += asked
            if ev is first:
                success, outcome = resolved, result

    if first is not None and not mitigation:
        outcome = "unmitigated"
    h1_final = det.session.last.h1
    return SessionMetrics(
        scenario_id=scenario.id,
        delta_ge=h1_final - h1_at_event if first is not None else 0.0,
        success=success,
        clarifying_turns=asked_total,
        transcript=transcript,
        events=list(det.events),
        outcome=outcome,
        h1_at_event=h1_at_event,
        h1_final=h1_final,
    )


def aggregate_metrics(sessions: Sequence[SessionMetrics]) -> tuple[float, float]:
    """Mean delta GE and success rate."""
    if not sessions:
        raise ValueError("no sessions to aggregate")
    mean_ge = math.fsum(s.delta_ge for s in sessions) / len(sessions)
    return mean_ge, sum(s.success for s in sessions) / len(sessions)


# --------------------------------------------------------------------------
# entity prediction metrics


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    n_pred: int = 0
    n_gold: int = 0

    @classmethod
    def from_counts(cls, tp: int, n_pred: int, n_gold: int) -> "PRF":
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_gold if n_gold else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, tp, n_pred, n_gold)

    def as_record(self) -> dict:
        return {"p": self.precision, "r": self.recall, "f1": self.f1,
                "tp": self.tp, "n_pred": self.n_pred, "n_gold": self.n_gold}


@dataclass
class PRFReport:
    overall: PRF
    per_class: dict[EntityClass, PRF]

    def as_record(self) -> dict:
        return {
            "overall": self.overall.as_record(),
            "per_class": {c.value: v.as_record() for c, v in sorted(self.per_class.items(), key=lambda kv: kv[0].value)},
        }


def _as_items(turn) -> set[tuple[str, EntityClass | None]]:
    items = set()
    for x in turn:
        if isinstance(x, str):
            items.add((x, None))
        elif isinstance(x, EntityMention):
            items.add((x.label, x.cls))
        else:
            label, cls = x
            items.add((label, None if cls is None else EntityClass(cls)))
    return items


def entity_prf(predicted: Sequence[Iterable], gold: Sequence[Iterable]) -> PRFReport:
    """Micro-averaged entity precision / recall / F1 over aligned turns.

    Turn items are labels, ``(label, class)`` pairs or mentions.  Matching is
    on the label; per-class scores use class-filtered sets.
    """
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predicted vs {len(gold)} gold turns")
    tp = n_pred = n_gold = 0
    per: dict[EntityClass, list[int]] = {c: [0, 0, 0] for c in EntityClass}
    for p_turn, g_turn in zip(predicted, gold):
        p_items, g_items = _as_items(p_turn), _as_items(g_turn)
        p_labels, g_labels = {l for l, _ in p_items}, {l for l, _ in g_items}
        tp += len(p_labels & g_labels)
        n_pred += len(p_labels)
        n_gold += len(g_labels)
        for c in EntityClass:
            pc = {l for l, k in p_items if k is c}
            gc = {l for l, k in g_items if k is c}
            per[c][0] += len(pc & gc)
            per[c][1] += len(pc)
            per[c][2] += len(gc)
    return PRFReport(
        PRF.from_counts(tp, n_pred, n_gold),
        {c: PRF.from_counts(*counts) for c, counts in per.items() if counts[1] or counts[2]},
    )
