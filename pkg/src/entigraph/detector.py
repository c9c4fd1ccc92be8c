"""Patient hallucination detection from dialogue entity graph changes.

Rules, applied to patient turns only:

* Isolated - a new entity with no link to a non-empty graph.
* Denial - a denied entity's removal splits its component (or strands its
  only neighbour).
* Contradiction - a denied entity's removal leaves its component connected,
  or the patient flips an entity's state against their own earlier answer.

Connectivity decides the kind.  The entropy-threshold classifier runs
alongside on the unit-weight view of the affected component and its verdict
is recorded as ``agreement``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from . import entropy
from .corpus import Dialogue, EntityState, Speaker
from .dialogue_graph import (
    ChangeRecord,
    DialogueEntityGraph,
    GraphSnapshot,
    MentionChange,
    StateRecord,
    new_session,
)
from .knowledge_graph import KnowledgeGraph

EPS = entropy.EPS


class HallucinationKind(str, Enum):
    ISOLATED = "isolated"
    DENIAL = "denial"
    CONTRADICTION = "contradiction"


class Agreement(str, Enum):
    AGREE = "agree"
    ENTROPY_ONLY_DIFFERS = "entropy_only_differs"
    NOT_APPLICABLE = "not_applicable"


class DetectorError(ValueError):
    pass


@dataclass(frozen=True)
class EntropyVerdict:
    kind: HallucinationKind | None
    entropy_kind: HallucinationKind | None
    agreement: Agreement
    lower: float | None = None
    upper: float | None = None
    delta_h1: float = 0.0


def classify_by_entropy(
    pre_h1: float,
    post_h1: float,
    n: int,
    survivor_degrees: Sequence[float],
    oracle: HallucinationKind | None = None,
) -> EntropyVerdict:
    """Classify a node removal from the entropy of what is left.

    `survivor_degrees` are the unit-weight degrees of the removed node's
    component after the removal.  Contradiction when ``post_h1`` reaches the
    connected-remainder lower bound, Denial when it stays under the
    split-remainder upper bound.  If neither or both hold, the connectivity
    `oracle` decides and the verdict is flagged.
    """
    if n < 2:
        return EntropyVerdict(oracle, None, Agreement.NOT_APPLICABLE, delta_h1=post_h1 - pre_h1)
    lower, upper = entropy.removal_bounds(survivor_degrees)
    is_contra = post_h1 >= lower - EPS
    is_denial = post_h1 <= upper + EPS
    if is_contra != is_denial:
        guess = HallucinationKind.CONTRADICTION if is_contra else HallucinationKind.DENIAL
    else:
        guess = None
    if guess is not None and (oracle is None or oracle is guess):
        return EntropyVerdict(guess, guess, Agreement.AGREE, lower, upper, post_h1 - pre_h1)
    return EntropyVerdict(oracle, guess, Agreement.ENTROPY_ONLY_DIFFERS, lower, upper, post_h1 - pre_h1)


@dataclass(frozen=True)
class HallucinationEvent:
    turn: int
    kind: HallucinationKind
    subject: str
    delta_n: int
    delta_h1: float
    components_before: int
    components_after: int
    agreement: Agreement = Agreement.NOT_APPLICABLE
    rule: str = ""
    dialogue_id: str | None = None
    anchors: tuple[str, ...] = ()
    subject_history: tuple[StateRecord, ...] = field(default=(), compare=False)

    def as_record(self) -> dict:
        rec = {
            "turn": self.turn,
            "kind": self.kind.value,
            "subject": self.subject,
            "delta_n": self.delta_n,
            "delta_h1": self.delta_h1,
            "components_before": self.components_before,
            "components_after": self.components_after,
            "agreement": self.agreement.value,
            "rule": self.rule,
            "anchors": list(self.anchors),
            "history": [[r.turn, r.state.value, r.speaker.value, r.action] for r in self.subject_history],
        }
        if self.dialogue_id is not None:
            rec["dialogue_id"] = self.dialogue_id
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "HallucinationEvent":
        return cls(
            turn=int(rec["turn"]),
            kind=HallucinationKind(rec["kind"]),
            subject=rec["subject"],
            delta_n=int(rec["delta_n"]),
            delta_h1=float(rec["delta_h1"]),
            components_before=int(rec["components_before"]),
            components_after=int(rec["components_after"]),
            agreement=Agreement(rec.get("agreement", "not_applicable")),
            rule=rec.get("rule", ""),
            dialogue_id=rec.get("dialogue_id"),
            anchors=tuple(rec.get("anchors", ())),
            subject_history=tuple(
                StateRecord(int(t), EntityState(s), Speaker(sp), a) for t, s, sp, a in rec.get("history", ())
            ),
        )

    def to_json(self) -> str:
        return json.dumps(self.as_record(), ensure_ascii=False, sort_keys=True)


def _patient_mentioned(prior: Sequence[StateRecord]) -> bool:
    return any(r.speaker is Speaker.PATIENT and r.state is EntityState.MENTION for r in prior)


def _triage_answer(prior: Sequence[StateRecord], turn: int) -> bool:
    """True when the node was put in by the doctor in the turn just before and
    the patient never mentioned it."""
    if _patient_mentioned(prior):
        return False
    adds = [r for r in prior if r.action in ("added", "restored")]
    return bool(adds) and adds[-1].speaker is Speaker.DOCTOR and adds[-1].turn == turn - 1


def _classify_change(c: MentionChange, prior: Sequence[StateRecord]):
    """Return (kind, rule, agreement) for one change, or None."""
    if c.state is EntityState.MENTION:
        if c.action == "restored":
            return HallucinationKind.CONTRADICTION, "d", Agreement.NOT_APPLICABLE
        if c.action == "added" and c.n_before >= 1 and not c.links:
            return HallucinationKind.ISOLATED, "a", Agreement.NOT_APPLICABLE
        return None

    if c.action != "removed":
        if _patient_mentioned(prior):
            return HallucinationKind.CONTRADICTION, "d", Agreement.NOT_APPLICABLE
        return None

    if _triage_answer(prior, c.turn):
        return None
    info = c.removal
    survivors = len(info.component) - 1
    if survivors == 0:
        if _patient_mentioned(prior):
            return HallucinationKind.CONTRADICTION, "d", Agreement.NOT_APPLICABLE
        return None
    if info.split or survivors == 1:
        kind, rule = HallucinationKind.DENIAL, "c"
    else:
        kind, rule = HallucinationKind.CONTRADICTION, "b"
    verdict = classify_by_entropy(
        info.unit_h1_before, info.unit_h1_after, survivors, info.survivor_unit_degrees, oracle=kind
    )
    return kind, rule, verdict.agreement


def observe(
    prev: GraphSnapshot,
    next: GraphSnapshot,
    change: ChangeRecord,
    history: Mapping[str, Sequence[StateRecord]],
    dialogue_id: str | None = None,
) -> list[HallucinationEvent]:
    """Events raised by one utterance.

    `prev` and `next` are the snapshots around the utterance that produced
    `change`; `history` is the session's per-entity state log.
    """
    if next.turn != change.turn or prev.turn >= next.turn:
        raise DetectorError(f"snapshots {prev.turn} -> {next.turn} do not bracket turn {change.turn}")
    if change.speaker is not Speaker.PATIENT:
        return []

    present = {v for comp in next.components for v in comp}
    events = []
    for c in change.changes:
        records = list(history.get(c.label, ()))
        # the change itself is the last record of its turn
        idx = max(i for i, r in enumerate(records) if r.turn == c.turn)
        prior = records[:idx]
        found = _classify_change(c, prior)
        if found is None:
            continue
        kind, rule, agreement = found
        events.append(
            HallucinationEvent(
                turn=c.turn,
                kind=kind,
                subject=c.label,
                delta_n=c.delta_n,
                delta_h1=c.delta_h1,
                components_before=c.components_before,
                components_after=c.components_after,
                agreement=agreement,
                rule=rule,
                dialogue_id=dialogue_id,
                anchors=tuple(sorted(present - {c.label})),
                subject_history=tuple(records[: idx + 1]),
            )
        )
    return events


class Detector:
    """Feeds utterances through a session and collects events."""

    def __init__(self, kg: KnowledgeGraph, dialogue_id: str | None = None):
        self.session: DialogueEntityGraph = new_session(kg)
        self.dialogue_id = dialogue_id
        self.events: list[HallucinationEvent] = []

    def feed(self, utterance) -> list[HallucinationEvent]:
        prev = self.session.last
        snap, change = self.session.apply_utterance(utterance)
        found = observe(prev, snap, change, self.session.history, self.dialogue_id)
        self.events.extend(found)
        return found


def detect_dialogue(kg: KnowledgeGraph, dialogue: Dialogue) -> tuple[list[HallucinationEvent], DialogueEntityGraph]:
    det = Detector(kg, dialogue.id)
    for u in dialogue.turns:
        det.feed(u)
    return det.events, det.session
