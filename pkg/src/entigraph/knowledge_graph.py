"""Static entity co-occurrence graph built from an annotated corpus.

Edge ``a -> b`` counts the dialogues in which ``a`` is first mentioned no
later than ``b``; its weight ``cooc(a, b) / freq(a)`` estimates ``P(b | a)``.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import Dialogue, EntityClass, EntityState

FORMAT_VERSION = 1
DEFAULT_THRESHOLD = 0.01
DEFAULT_DECAY = 0.5
DEFAULT_TOP_K = 5


class UnknownEntityError(LookupError):
    pass


class KGFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EntityInfo:
    label: str
    cls: EntityClass
    freq: int


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    cooc: int
    weight: float


class KnowledgeGraph:
    """Immutable directed weighted co-occurrence graph."""

    def __init__(self, entities: Iterable[EntityInfo], edges: Iterable[Edge], threshold: float):
        self.threshold = threshold
        self.entities: dict[str, EntityInfo] = {e.label: e for e in sorted(entities, key=lambda e: e.label)}
        self.edges: dict[tuple[str, str], Edge] = {}
        self._out: dict[str, dict[str, float]] = defaultdict(dict)
        self._in: dict[str, dict[str, float]] = defaultdict(dict)
        for e in sorted(edges, key=lambda e: (e.src, e.dst)):
            if e.src == e.dst:
                raise ValueError(f"self-loop on {e.src!r}")
            if e.src not in self.entities or e.dst not in self.entities:
                raise ValueError(f"edge {e.src!r} -> {e.dst!r} has an unknown endpoint")
            self.edges[(e.src, e.dst)] = e
            self._out[e.src][e.dst] = e.weight
            self._in[e.dst][e.src] = e.weight

    def __contains__(self, label: str) -> bool:
        return label in self.entities

    def __len__(self) -> int:
        return len(self.entities)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.threshold == other.threshold
            and self.entities == other.entities
            and self.edges == other.edges
        )

    def __repr__(self) -> str:
        return f"KnowledgeGraph({len(self.entities)} entities, {len(self.edges)} edges, threshold={self.threshold})"

    def weight(self, src: str, dst: str) -> float:
        return self._out.get(src, {}).get(dst, 0.0)

    def out_edges(self, label: str) -> dict[str, float]:
        return dict(self._out.get(label, {}))

    def in_edges(self, label: str) -> dict[str, float]:
        return dict(self._in.get(label, {}))

    def out_neighbors(self, label: str) -> list[tuple[str, float]]:
        """Out-neighbours sorted by weight, heaviest first, ties by label."""
        return sorted(self._out.get(label, {}).items(), key=lambda kv: (-kv[1], kv[0]))

    def neighbors(self, label: str) -> set[str]:
        return set(self._out.get(label, ())) | set(self._in.get(label, ()))

    def linked(self, a: str, b: str) -> bool:
        return b in self._out.get(a, ()) or a in self._out.get(b, ())

    def undirected_weight(self, a: str, b: str) -> float:
        return max(self.weight(a, b), self.weight(b, a))


def build_knowledge_graph(dialogues: Sequence[Dialogue], threshold: float = DEFAULT_THRESHOLD) -> KnowledgeGraph:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    if not dialogues:
        raise ValueError("empty corpus")

    freq: Counter[str] = Counter()
    cooc: Counter[tuple[str, str]] = Counter()
    classes: dict[str, Counter] = defaultdict(Counter)

    for d in dialogues:
        first: dict[str, int] = {}
        seen_cls: set[tuple[str, EntityClass]] = set()
        for turn, u in enumerate(d.turns):
            for m in u.mentions:
                if m.state is not EntityState.MENTION:
                    continue
                first.setdefault(m.label, turn)
                seen_cls.add((m.label, m.cls))
        for label, cls in seen_cls:
            classes[label][cls] += 1
        freq.update(first.keys())
        for a, ta in first.items():
            for b, tb in first.items():
                if a != b and ta <= tb:
                    cooc[(a, b)] += 1

    if not freq:
        raise ValueError("corpus has no mention-state entities")

    entities = []
    for label, n in freq.items():
        cls = min(classes[label].items(), key=lambda kv: (-kv[1], kv[0].value))[0]
        entities.append(EntityInfo(label, cls, n))
    edges = []
    for (a, b), c in cooc.items():
        w = c / freq[a]
        if w >= threshold:
            edges.append(Edge(a, b, c, w))
    return KnowledgeGraph(entities, edges, threshold)


@dataclass
class PredictionResult:
    ranked: list[tuple[str, float]]
    history: list[tuple[str, int]] = field(default_factory=list)

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.ranked]


def related_entities(
    kg: KnowledgeGraph,
    history: Sequence[tuple[str, int]],
    k: int = DEFAULT_TOP_K,
    decay: float = DEFAULT_DECAY,
) -> PredictionResult:
    """Rank entities likely to come up next given ``(entity, turn)`` history.

    score(e) = max over history h of weight(h -> e) * decay ** age(h), where
    age counts turns back from the latest history turn.  Ties go to the more
    recent contributing entity, then to the label.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < decay <= 1.0:
        raise ValueError("decay must lie in (0, 1]")
    latest: dict[str, int] = {}
    for label, turn in history:
        if label not in kg:
            raise UnknownEntityError(label)
        latest[label] = max(turn, latest.get(label, turn))
    if not latest:
        return PredictionResult([], list(history))
    now = max(latest.values())

    best: dict[str, tuple[float, int]] = {}
    for h, turn in latest.items():
        age = now - turn
        for e, w in kg.out_edges(h).items():
            if e in latest:
                continue
            cand = (w * decay**age, turn)
            if e not in best or cand > best[e]:
                best[e] = cand
    ranked = sorted(best.items(), key=lambda kv: (-kv[1][0], -kv[1][1], kv[0]))
    return PredictionResult([(e, s) for e, (s, _) in ranked[:k] if s > 0], list(history))


def find_bridges(
    kg: KnowledgeGraph, isolated: str, anchors: Iterable[str], max_hops: int = 2
) -> list[tuple[str, float]]:
    """Entities on short KG paths linking `isolated` to any anchor.

    Edges are walked in either direction using the heavier of the two
    weights.  A path's score is the product of its weights; each bridge keeps
    its best path.  Paths are simple and end at the first anchor reached.
    """
    anchors = set(anchors)
    if isolated in anchors:
        raise ValueError("isolated entity cannot be an anchor")
    if max_hops < 2:
        raise ValueError("max_hops must be >= 2")
    if isolated not in kg:
        return []

    best: dict[str, float] = {}

    def walk(node: str, path: list[str], score: float) -> None:
        for nxt in sorted(kg.neighbors(node)):
            if nxt in path:
                continue
            s = score * kg.undirected_weight(node, nxt)
            if nxt in anchors:
                for b in path[1:]:
                    if s > best.get(b, 0.0):
                        best[b] = s
            elif len(path) < max_hops:
                walk(nxt, path + [nxt], s)

    walk(isolated, [isolated], 1.0)
    return sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))


# --------------------------------------------------------------------------
# serialisation


def _payload(kg: KnowledgeGraph) -> dict:
    return {
        "version": FORMAT_VERSION,
        "threshold": kg.threshold,
        "entities": [
            {"label": e.label, "class": e.cls.value, "freq": e.freq} for e in kg.entities.values()
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "cooc": e.cooc, "weight": e.weight} for e in kg.edges.values()
        ],
    }


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_kg(kg: KnowledgeGraph) -> bytes:
    payload = _payload(kg)
    payload["checksum"] = _digest(payload)
    return (json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=1) + "\n").encode("utf-8")


def load_kg(data: bytes | str) -> KnowledgeGraph:
    try:
        payload = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise KGFormatError(f"unreadable knowledge graph: {exc}") from None
    if not isinstance(payload, dict):
        raise KGFormatError("knowledge graph file is not an object")
    if payload.get("version") != FORMAT_VERSION:
        raise KGFormatError(f"unsupported version {payload.get('version')!r}")
    checksum = payload.pop("checksum", None)
    if checksum != _digest(payload):
        raise KGFormatError("checksum mismatch")
    try:
        entities = [EntityInfo(e["label"], EntityClass(e["class"]), int(e["freq"])) for e in payload["entities"]]
        freq = {e.label: e.freq for e in entities}
        edges = []
        for e in payload["edges"]:
            edge = Edge(e["src"], e["dst"], int(e["cooc"]), float(e["weight"]))
            if edge.weight != edge.cooc / freq[edge.src]:
                raise KGFormatError(f"edge {edge.src!r} -> {edge.dst!r}: weight != cooc / freq")
            edges.append(edge)
        return KnowledgeGraph(entities, edges, float(payload["threshold"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, KGFormatError):
            raise
        raise KGFormatError(f"invalid knowledge graph: {exc}") from None
