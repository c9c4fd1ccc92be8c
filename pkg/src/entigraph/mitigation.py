"""Clarifying-question planning.

Doctor utterances that mention an entity are the raw material: for each
entity the sentences most similar on average to the others (the medoids)
are kept as exemplar responses.  Detected hallucinations are turned into
plans that pick a target entity, attach exemplars, and render a question.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer

from .corpus import Dialogue, EntityState, Speaker
from .detector import HallucinationEvent, HallucinationKind
from .knowledge_graph import KnowledgeGraph, find_bridges

DEFAULT_K = 3
DEFAULT_ATTRIBUTES = ("duration", "medical history")
RK_VERSION = 1


class ZeroCoverageWarning(UserWarning):
    """No token of a sentence is known to the vector source."""


class TemplateError(KeyError):
    pass


# --------------------------------------------------------------------------
# sentence vectors

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


def _is_cjk(ch: str) -> bool:
    return unicodedata.name(ch, "").startswith(("CJK", "HIRAGANA", "KATAKANA", "HANGUL"))


def tokenize(text: str) -> list[str]:
    """Lower-cased word tokens; CJK text is split per character."""
    tokens = []
    for word in _WORD.findall(text.casefold()):
        run = []
        for ch in word:
            if _is_cjk(ch):
                if run:
                    tokens.append("".join(run))
                    run = []
                tokens.append(ch)
            else:
                run.append(ch)
        if run:
            tokens.append("".join(run))
    return tokens


class VectorSource(Protocol):
    def raw_vectors(self, texts: Sequence[str]) -> np.ndarray: ...


class TfidfVectors:
    """TF-IDF over `tokenize` tokens, fit on a list of sentences."""

    def __init__(self, texts: Sequence[str]):
        self._vec = TfidfVectorizer(analyzer=tokenize, norm="l2", smooth_idf=True)
        self._vec.fit(sorted(texts))

    @property
    def vocabulary(self) -> dict[str, int]:
        return dict(self._vec.vocabulary_)

    def raw_vectors(self, texts: Sequence[str]) -> np.ndarray:
        return self._vec.transform(list(texts)).toarray()


class EmbeddingVectors:
    """Mean of per-token embeddings from an external table."""

    def __init__(self, table: Mapping[str, Sequence[float]]):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.dim = len(next(iter(self.table.values()))) if self.table else 0

    def raw_vectors(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            known = [self.table[t] for t in tokenize(text) if t in self.table]
            if known:
                out[i] = np.mean(known, axis=0)
        return out


def _normalize(mat: np.ndarray, texts: Sequence[str]) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1)
    for text, nrm in zip(texts, norms):
        if nrm == 0:
            warnings.warn(f"no known tokens in {text!r}", ZeroCoverageWarning, stacklevel=3)
    safe = np.where(norms == 0, 1.0, norms)
    return mat / safe[:, None]


def sentence_vectors(texts: Sequence[str], model: VectorSource) -> np.ndarray:
    if any(not t or not t.strip() for t in texts):
        raise ValueError("empty text")
    return _normalize(model.raw_vectors(texts), texts)


def sentence_vector(text: str, model: VectorSource) -> np.ndarray:
    """Unit vector for one sentence; all zeros (with a warning) if no token is known."""
    return sentence_vectors([text], model)[0]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


# --------------------------------------------------------------------------
# exemplar responses


@dataclass(frozen=True)
class Exemplar:
    text: str
    score: float


def medoid_scores(vectors: np.ndarray) -> list[float]:
    """Mean cosine similarity of each row to every other row (1.0 for a single row)."""
    m = len(vectors)
    if m == 1:
        return [1.0]
    sims = vectors @ vectors.T
    return [math.fsum(sims[i, j] for j in range(m) if j != i) / (m - 1) for i in range(m)]


def top_medoids(texts: Sequence[str], vectors: np.ndarray, k: int) -> list[Exemplar]:
    scores = medoid_scores(vectors)
    ranked = sorted(zip(texts, scores), key=lambda ts: (-ts[1], ts[0]))
    return [Exemplar(t, float(s)) for t, s in ranked[:k]]


@dataclass
class ResponseKnowledge:
    entries: dict[str, list[Exemplar]] = field(default_factory=dict)
    k: int = DEFAULT_K

    def get(self, label: str) -> list[Exemplar]:
        return list(self.entries.get(label, ()))

    def __contains__(self, label: str) -> bool:
        return label in self.entries

    def to_json(self) -> str:
        payload = {
            "version": RK_VERSION,
            "k": self.k,
            "entries": {
                label: [{"text": e.text, "score": e.score} for e in ex]
                for label, ex in sorted(self.entries.items())
            },
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, data: str | bytes) -> "ResponseKnowledge":
        payload = json.loads(data)
        if payload.get("version") != RK_VERSION:
            raise ValueError(f"unsupported response knowledge version {payload.get('version')!r}")
        entries = {
            label: [Exemplar(e["text"], float(e["score"])) for e in ex]
            for label, ex in payload["entries"].items()
        }
        return cls(entries, int(payload["k"]))


def doctor_sentences(dialogues: Sequence[Dialogue]) -> dict[str, list[str]]:
    """Doctor utterance texts per annotated entity (any state)."""
    by_entity: dict[str, list[str]] = {}
    for d in dialogues:
        for u in d.turns:
            if u.speaker is not Speaker.DOCTOR or not u.text or not u.text.strip():
                continue
            for m in u.mentions:
                by_entity.setdefault(m.label, []).append(u.text)
    return by_entity


def build_response_knowledge(
    dialogues: Sequence[Dialogue], k: int = DEFAULT_K, model: VectorSource | None = None
) -> ResponseKnowledge:
    if k < 1:
        raise ValueError("k must be >= 1")
    by_entity = doctor_sentences(dialogues)
    if model is None:
        all_texts = sorted({t for texts in by_entity.values() for t in texts})
        if not all_texts:
            return ResponseKnowledge({}, k)
        model = TfidfVectors(all_texts)

    distinct = sorted({t for texts in by_entity.values() for t in texts})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroCoverageWarning)
        vecs = dict(zip(distinct, sentence_vectors(distinct, model))) if distinct else {}

    entries = {}
    for label in sorted(by_entity):
        texts = by_entity[label]
        entries[label] = top_medoids(texts, np.array([vecs[t] for t in texts]), k)
    return ResponseKnowledge(entries, k)


# --------------------------------------------------------------------------
# plans and templates

DEFAULT_TEMPLATES = {
    "isolated": "Do you have a {bridge}?",
    "isolated_no_bridge": "Do you actually have {target}?",
    "denial": "You said you don't have {target}. Let me ask again: {exemplar}",
    "denial_no_exemplar": "You said you don't have {target}. Are you sure there is no {target}?",
    "contradiction": (
        "Earlier (turn {turn_i}) you {state_i} {target}, later (turn {turn_j}) you {state_j} it. "
        "Which reflects your {attribute}?"
    ),
}

_STATE_WORDS = {EntityState.MENTION: "mentioned", EntityState.DENY: "denied"}


def load_templates(path: str | Path) -> dict[str, str]:
    with Path(path).open(encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or not all(isinstance(v, str) for v in data.values()):
        raise ValueError("template file must map template names to strings")
    return data


@dataclass
class ClarifyingPlan:
    event: HallucinationEvent
    target: str
    bridges: list[tuple[str, float]] = field(default_factory=list)
    exemplars: list[Exemplar] = field(default_factory=list)
    emphasized_attributes: tuple[str, ...] = ()
    conflict: tuple[tuple[int, EntityState], tuple[int, EntityState]] | None = None
    question: str = ""

    @property
    def kind(self) -> HallucinationKind:
        return self.event.kind

    def template_name(self) -> str:
        if self.kind is HallucinationKind.ISOLATED:
            return "isolated" if self.bridges else "isolated_no_bridge"
        if self.kind is HallucinationKind.DENIAL:
            return "denial" if self.exemplars else "denial_no_exemplar"
        return "contradiction"

    def as_record(self) -> dict:
        rec = {
            "event": self.event.as_record(),
            "kind": self.kind.value,
            "target": self.target,
            "bridges": [[b, s] for b, s in self.bridges],
            "exemplars": [e.text for e in self.exemplars],
            "emphasized_attributes": list(self.emphasized_attributes),
            "question": self.question,
        }
        if self.conflict:
            (ti, si), (tj, sj) = self.conflict
            rec["conflict"] = [[ti, si.value], [tj, sj.value]]
        return rec


def render_question(plan: ClarifyingPlan, templates: Mapping[str, str] | None = None, guidance: bool = False) -> str:
    """Fill the plan's template.  With `guidance`, exemplar texts follow in a
    delimited block."""
    templates = DEFAULT_TEMPLATES if templates is None else templates
    name = plan.template_name()
    if name not in templates:
        raise TemplateError(f"missing template {name!r}")
    slots = {
        "target": plan.target,
        "bridge": plan.bridges[0][0] if plan.bridges else plan.target,
        "exemplar": plan.exemplars[0].text if plan.exemplars else "",
        "attribute": " and ".join(plan.emphasized_attributes),
        "turn_i": "",
        "turn_j": "",
        "state_i": "",
        "state_j": "",
    }
    if plan.conflict:
        (ti, si), (tj, sj) = plan.conflict
        slots.update(turn_i=ti, turn_j=tj, state_i=_STATE_WORDS[si], state_j=_STATE_WORDS[sj])
    text = templates[name].format(**slots)
    if guidance and plan.exemplars:
        text += "\n[guidance]\n" + "\n".join(f"- {e.text}" for e in plan.exemplars) + "\n[/guidance]"
    return text


def _conflict(event: HallucinationEvent):
    hist = event.subject_history
    if not hist:
        return None
    last = hist[-1]
    earlier = [r for r in hist[:-1] if r.state is not last.state]
    patient = [r for r in earlier if r.speaker is Speaker.PATIENT]
    ref = (patient or earlier or [last])[-1]
    return (ref.turn, ref.state), (last.turn, last.state)


def plan_clarification(
    event: HallucinationEvent,
    kg: KnowledgeGraph,
    rk: ResponseKnowledge,
    g=None,
    templates: Mapping[str, str] | None = None,
    attributes: Sequence[str] = DEFAULT_ATTRIBUTES,
) -> ClarifyingPlan:
    """Build the clarifying plan for one detected event.

    Anchors for bridge search come from the live session `g` when given,
    otherwise from the event's recorded context.
    """
    subject = event.subject
    plan = ClarifyingPlan(event=event, target=subject)
    if event.kind is HallucinationKind.ISOLATED:
        anchors = g.anchors(exclude=subject) if g is not None else [a for a in event.anchors if a != subject]
        if subject in kg:
            plan.bridges = find_bridges(kg, subject, anchors, 2)
        if plan.bridges:
            plan.target = plan.bridges[0][0]
        plan.exemplars = rk.get(plan.target) if subject in kg else []
    elif event.kind is HallucinationKind.DENIAL:
        plan.exemplars = rk.get(subject) if subject in kg else []
    else:
        plan.exemplars = rk.get(subject) if subject in kg else []
        plan.emphasized_attributes = tuple(attributes)
        plan.conflict = _conflict(event)
    plan.question = render_question(plan, templates)
    return plan
