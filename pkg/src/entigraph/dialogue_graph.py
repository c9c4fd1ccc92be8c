"""Per-session dialogue entity graph.

A session tracks which entities are currently asserted (Present) or ruled
out (Negated).  Present entities are wired together with every knowledge
graph edge between them, in both directions when both exist, and a
snapshot of the structural entropy is logged after each utterance.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable

from . import entropy
from .corpus import Dialogue, EntityState, Speaker, Utterance
from .knowledge_graph import KnowledgeGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GraphSnapshot:
    turn: int
    n: int
    components: tuple[tuple[str, ...], ...]
    vol: float
    h1: float

    def as_record(self) -> dict:
        return {
            "turn": self.turn,
            "n": self.n,
            "vol": self.vol,
            "h1": self.h1,
            "components": [list(c) for c in self.components],
        }


@dataclass(frozen=True)
class StateRecord:
    turn: int
    state: EntityState
    speaker: Speaker
    action: str


@dataclass(frozen=True)
class RemovalInfo:
    """What a removal did to the component that held the removed node.

    The unit-weight fields treat every adjacent pair as a single edge of
    weight 1, which is the setting the entropy bounds are stated in.
    """

    component: tuple[str, ...]
    pieces: tuple[tuple[str, ...], ...]
    survivor_unit_degrees: tuple[int, ...]
    unit_h1_before: float
    unit_h1_after: float

    @property
    def split(self) -> bool:
        return len(self.pieces) > 1


@dataclass(frozen=True)
class MentionChange:
    turn: int
    speaker: Speaker
    label: str
    state: EntityState
    # added | restored | removed | negated | noop
    action: str
    n_before: int
    n_after: int
    h1_before: float
    h1_after: float
    components_before: int
    components_after: int
    degree: float = 0.0
    links: tuple[str, ...] = ()
    removal: RemovalInfo | None = None

    @property
    def delta_n(self) -> int:
        return self.n_after - self.n_before

    @property
    def delta_h1(self) -> float:
        return self.h1_after - self.h1_before


@dataclass
class ChangeRecord:
    turn: int
    speaker: Speaker
    changes: list[MentionChange] = field(default_factory=list)
    unknown: list[str] = field(default_factory=list)

    def _with(self, *actions: str) -> list[MentionChange]:
        return [c for c in self.changes if c.action in actions]

    @property
    def additions(self) -> list[MentionChange]:
        return self._with("added", "restored")

    @property
    def removals(self) -> list[MentionChange]:
        return self._with("removed")

    @property
    def flips(self) -> list[MentionChange]:
        return self._with("restored", "removed")


class DialogueEntityGraph:
    """Mutable entity graph for one dialogue session (single writer)."""

    def __init__(self, kg: KnowledgeGraph):
        self.kg = kg
        self.present: dict[str, None] = {}
        self.negated: set[str] = set()
        self.edges: dict[tuple[str, str], float] = {}
        self.history: dict[str, list[StateRecord]] = {}
        self.next_turn = 0
        self.snapshots: list[GraphSnapshot] = [self._snapshot(-1)]

    # -- queries ----------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.present)

    @property
    def last(self) -> GraphSnapshot:
        return self.snapshots[-1]

    def neighbors(self, label: str) -> set[str]:
        out = set()
        for a, b in self.edges:
            if a == label:
                out.add(b)
            elif b == label:
                out.add(a)
        return out

    def degree(self, label: str) -> float:
        return sum(w for (a, b), w in self.edges.items() if label in (a, b))

    def components(self, nodes: Iterable[str] | None = None) -> list[tuple[str, ...]]:
        """Weakly connected components over Present nodes, each sorted, ordered by first label."""
        nodes = set(self.present if nodes is None else nodes)
        adj: dict[str, set[str]] = {v: set() for v in nodes}
        for a, b in self.edges:
            if a in adj and b in adj:
                adj[a].add(b)
                adj[b].add(a)
        seen: set[str] = set()
        comps = []
        for start in sorted(nodes):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in adj[v] - seen:
                    seen.add(w)
                    stack.append(w)
            comps.append(tuple(sorted(comp)))
        return comps

    def structural_entropy(self) -> float:
        deg = {v: 0.0 for v in self.present}
        for (a, b), w in self.edges.items():
            deg[a] += w
            deg[b] += w
        return entropy.structural_entropy([deg[v] for v in c] for c in self.components())

    def vol(self) -> float:
        return 2 * sum(self.edges.values())

    def anchors(self, exclude: str | None = None) -> list[str]:
        return sorted(v for v in self.present if v != exclude)

    def _unit_degrees(self, nodes: Iterable[str]) -> dict[str, int]:
        nodes = set(nodes)
        pairs = {frozenset(e) for e in self.edges if e[0] in nodes and e[1] in nodes}
        deg = {v: 0 for v in nodes}
        for p in pairs:
            for v in p:
                deg[v] += 1
        return deg

    def _unit_h1(self, nodes: Iterable[str]) -> float:
        nodes = list(nodes)
        deg = self._unit_degrees(nodes)
        return entropy.structural_entropy([deg[v] for v in c] for c in self.components(nodes))

    def _snapshot(self, turn: int) -> GraphSnapshot:
        return GraphSnapshot(
            turn=turn,
            n=self.n,
            components=tuple(self.components()),
            vol=self.vol(),
            h1=self.structural_entropy(),
        )

    # -- mutation ---------------------------------------------------------

    def _add(self, label: str) -> list[str]:
        self.present[label] = None
        self.negated.discard(label)
        links = []
        for other in self.present:
            if other == label:
                continue
            w_out, w_in = self.kg.weight(label, other), self.kg.weight(other, label)
            if w_out > 0:
                self.edges[(label, other)] = w_out
            if w_in > 0:
                self.edges[(other, label)] = w_in
            if w_out > 0 or w_in > 0:
                links.append(other)
        return sorted(links)

    def _remove(self, label: str) -> RemovalInfo:
        comp = next(c for c in self.components() if label in c)
        unit_before = self._unit_h1(comp)
        del self.present[label]
        self.negated.add(label)
        self.edges = {e: w for e, w in self.edges.items() if label not in e}
        survivors = [v for v in comp if v != label]
        deg = self._unit_degrees(survivors)
        return RemovalInfo(
            component=comp,
            pieces=tuple(self.components(survivors)),
            survivor_unit_degrees=tuple(deg[v] for v in survivors),
            unit_h1_before=unit_before,
            unit_h1_after=self._unit_h1(survivors),
        )

    def apply_utterance(self, u: Utterance, turn: int | None = None) -> tuple[GraphSnapshot, ChangeRecord]:
        """Apply one utterance's mentions in order and log a snapshot.

        Labels unknown to the knowledge graph are skipped and reported in
        ``ChangeRecord.unknown``.
        """
        if turn is None:
            turn = self.next_turn
        self.next_turn = turn + 1
        record = ChangeRecord(turn=turn, speaker=u.speaker)

        for m in u.mentions:
            if m.label not in self.kg:
                log.warning("turn %d: unknown entity %r skipped", turn, m.label)
                record.unknown.append(m.label)
                continue
            n0, h0, c0 = self.n, self.structural_entropy(), len(self.components())
            degree, links, removal = 0.0, (), None
            if m.state is EntityState.MENTION:
                if m.label in self.present:
                    action = "noop"
                else:
                    action = "restored" if m.label in self.negated else "added"
                    links = tuple(self._add(m.label))
                    degree = self.degree(m.label)
            else:
                if m.label in self.present:
                    action = "removed"
                    removal = self._remove(m.label)
                else:
                    action = "negated" if m.label not in self.negated else "noop"
                    self.negated.add(m.label)
            self.history.setdefault(m.label, []).append(StateRecord(turn, m.state, u.speaker, action))
            record.changes.append(
                MentionChange(
                    turn=turn,
                    speaker=u.speaker,
                    label=m.label,
                    state=m.state,
                    action=action,
                    n_before=n0,
                    n_after=self.n,
                    h1_before=h0,
                    h1_after=self.structural_entropy(),
                    components_before=c0,
                    components_after=len(self.components()),
                    degree=degree,
                    links=links,
                    removal=removal,
                )
            )

        snap = self._snapshot(turn)
        self.snapshots.append(snap)
        return snap, record

    def snapshot_records(self) -> list[str]:
        return [json.dumps(s.as_record(), ensure_ascii=False, sort_keys=True) for s in self.snapshots]


def new_session(kg: KnowledgeGraph) -> DialogueEntityGraph:
    return DialogueEntityGraph(kg)


def replay(kg: KnowledgeGraph, dialogue: Dialogue) -> tuple[DialogueEntityGraph, list[ChangeRecord]]:
    g = new_session(kg)
    records = [g.apply_utterance(u)[1] for u in dialogue.turns]
    return g, records
