"""Entity-annotated dialogue corpora.

One dialogue per line::

    {"dialogue_id": "d1",
     "turns": [{"speaker": "patient", "text": "...",
                "entities": [{"label": "cough", "class": "symptom", "state": "mention"}]}]}

Entities arrive pre-annotated; nothing here looks at the raw text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator


class CorpusError(ValueError):
    """Raised for malformed corpus records."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EntityClass(str, Enum):
    ATTRIBUTE = "attribute"
    DISEASE = "disease"
    EXAMINATION = "examination"
    MEDICINE = "medicine"
    SYMPTOM = "symptom"


class EntityState(str, Enum):
    MENTION = "mention"
    DENY = "deny"


class Speaker(str, Enum):
    PATIENT = "patient"
    DOCTOR = "doctor"


def canonical_label(label: str) -> str:
    return " ".join(label.split()).casefold()


@dataclass(frozen=True)
class EntityMention:
    label: str
    cls: EntityClass
    state: EntityState = EntityState.MENTION

    def __post_init__(self):
        if not self.label:
            raise CorpusError("empty entity label")


@dataclass(frozen=True)
class Utterance:
    speaker: Speaker
    mentions: tuple[EntityMention, ...] = ()
    text: str | None = None

    @classmethod
    def build(cls, speaker: Speaker, mentions: Iterable[EntityMention], text: str | None = None) -> "Utterance":
        """Construct an utterance, collapsing repeated labels so the last state wins.

        The collapsed mention keeps the position of the label's first occurrence.
        """
        merged: dict[str, EntityMention] = {}
        for m in mentions:
            merged[m.label] = m
        return cls(speaker=speaker, mentions=tuple(merged.values()), text=text)

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.mentions]


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Utterance, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.turns:
            raise CorpusError(f"dialogue {self.id!r} has no turns")

    def mentioned(self) -> set[str]:
        return {m.label for u in self.turns for m in u.mentions if m.state is EntityState.MENTION}


def _enum(kind: type[Enum], value, what: str, line: int | None) -> Enum:
    try:
        return kind(str(value).strip().casefold())
    except ValueError:
        raise CorpusError(f"unknown {what} {value!r}", line) from None


def dialogue_from_record(rec: dict, line: int | None = None) -> Dialogue:
    if not isinstance(rec, dict):
        raise CorpusError("record is not an object", line)
    try:
        did = rec["dialogue_id"]
        raw_turns = rec["turns"]
    except KeyError as exc:
        raise CorpusError(f"missing field {exc.args[0]!r}", line) from None
    if not isinstance(raw_turns, list) or not raw_turns:
        raise CorpusError("empty turn list", line)

    turns = []
    for t in raw_turns:
        if not isinstance(t, dict) or "speaker" not in t:
            raise CorpusError("turn without speaker", line)
        speaker = _enum(Speaker, t["speaker"], "speaker", line)
        mentions = []
        for e in t.get("entities") or []:
            try:
                label = canonical_label(e["label"])
                cls = _enum(EntityClass, e["class"], "entity class", line)
            except (KeyError, TypeError):
                raise CorpusError("entity needs label and class", line) from None
            state = _enum(EntityState, e.get("state", "mention"), "state", line)
            if not label:
                raise CorpusError("empty entity label", line)
            mentions.append(EntityMention(label, cls, state))
        text = t.get("text")
        turns.append(Utterance.build(speaker, mentions, text if text is None else str(text)))
    return Dialogue(id=str(did), turns=tuple(turns))


def dialogue_to_record(d: Dialogue) -> dict:
    turns = []
    for u in d.turns:
        t: dict = {"speaker": u.speaker.value}
        if u.text is not None:
            t["text"] = u.text
        t["entities"] = [
            {"label": m.label, "class": m.cls.value, "state": m.state.value} for m in u.mentions
        ]
        turns.append(t)
    return {"dialogue_id": d.id, "turns": turns}


def serialize_dialogue(d: Dialogue) -> str:
    return json.dumps(dialogue_to_record(d), ensure_ascii=False, sort_keys=True)


def iter_corpus(lines: Iterable[str]) -> Iterator[Dialogue]:
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"malformed record: {exc.msg}", lineno) from None
        yield dialogue_from_record(rec, lineno)


def parse_corpus(source: str | Path | Iterable[str]) -> list[Dialogue]:
    """Parse a line-delimited corpus.

    `source` may be a path, the corpus text itself, or any iterable of lines.
    Dialogues come back in file order.
    """
    if isinstance(source, Path):
        with source.open(encoding="utf-8") as fh:
            return list(iter_corpus(fh))
    if isinstance(source, str):
        # only \n ends a record; str.splitlines would also break on U+0085 / U+2028 inside strings
        return list(iter_corpus(source.split("\n")))
    return list(iter_corpus(source))


def write_corpus(dialogues: Iterable[Dialogue], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in dialogues:
            fh.write(serialize_dialogue(d) + "\n")


def validate_dialogue(d: Dialogue) -> list[str]:
    """Return warnings for a parsed dialogue; never raises."""
    warnings = []
    seen: dict[str, tuple[EntityClass, int]] = {}
    reported = set()
    for i, u in enumerate(d.turns):
        for m in u.mentions:
            if m.label in seen and seen[m.label][0] is not m.cls and m.label not in reported:
                first_cls, first_turn = seen[m.label]
                warnings.append(
                    f"class conflict: {m.label!r} is {first_cls.value} at turn {first_turn} "
                    f"and {m.cls.value} at turn {i}"
                )
                reported.add(m.label)
            seen.setdefault(m.label, (m.cls, i))
            if u.speaker is Speaker.DOCTOR and m.state is EntityState.DENY:
                warnings.append(f"doctor deny: {m.label!r} denied in doctor turn {i}")
    if not seen:
        warnings.append("no entities")
    return warnings
