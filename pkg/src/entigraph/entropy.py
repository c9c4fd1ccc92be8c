"""Degree-distribution graph entropy and one-dimensional structural entropy.

All logarithms are base 2.  ``0 * log 0`` is taken as 0 everywhere.

The two removal bounds describe the entropy left after a node disappears from
a unit-weight graph:

* ``contradiction_lower_bound`` - the remainder stays connected; worst case is
  a removed hub that touched every survivor, leaving a tree.
* ``denial_upper_bound`` - the remainder splits; best case is a removed node
  with two edges, leaving one isolated survivor.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

EPS = 1e-9


def _plogp(p: float) -> float:
    return 0.0 if p <= 0.0 else -p * math.log2(p)


def component_entropy(degrees: Sequence[float]) -> float:
    """Shannon entropy of the degree distribution ``d_i / Vol``; 0 when Vol is 0."""
    if any(d < 0 for d in degrees):
        raise ValueError("negative degree")
    vol = math.fsum(degrees)
    if vol == 0:
        return 0.0
    return math.fsum(_plogp(d / vol) for d in degrees)


def structural_entropy(partition: Iterable[Sequence[float]]) -> float:
    """Volume-weighted mean of per-component entropies.

    `partition` holds one degree list per connected component.  Components
    without edges contribute nothing.
    """
    vols, terms = [], []
    for degrees in partition:
        v = math.fsum(degrees)
        vols.append(v)
        terms.append(v * component_entropy(degrees) if v > 0 else 0.0)
    total = math.fsum(vols)
    if total == 0:
        return 0.0
    return math.fsum(terms) / total


def graph_structural_entropy(nodes: Iterable, edges: Iterable[tuple]) -> float:
    """Structural entropy of an undirected weighted multigraph.

    `edges` holds ``(u, v, w)`` triples; parallel edges add up and a self-loop
    adds 2w to its node's degree.
    """
    deg = {v: 0.0 for v in nodes}
    parent = {v: v for v in deg}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for u, v, w in edges:
        if w < 0:
            raise ValueError("negative edge weight")
        deg[u] += w
        deg[v] += w
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    groups: dict = {}
    for v in deg:
        groups.setdefault(find(v), []).append(deg[v])
    return structural_entropy(groups.values())


def contradiction_lower_bound(n: int, degrees: Sequence[float]) -> float:
    """Minimum entropy of a connected remainder of `n` survivors.

    `degrees` are the survivors' pre-removal degrees in the worst case, where
    the removed node was adjacent to each of them.
    """
    if n < 2:
        raise ValueError("contradiction bound needs n >= 2")
    denom = 2 * (n - 1)
    return math.fsum(_plogp((d - 1) / denom) for d in degrees[:n])


def denial_upper_bound(degrees: Sequence[float], vol: float) -> float:
    """Maximum entropy of a split remainder.

    `degrees` is ``d_1 .. d_{n-1}``: the survivors of the connected part, with
    the removed node's other neighbour last.  `vol` is the pre-removal volume.
    """
    if vol <= 4:
        raise ValueError("denial bound needs vol > 4")
    if not degrees:
        raise ValueError("denial bound needs at least one degree")
    denom = vol - 4
    *head, last = degrees
    return math.fsum(_plogp(d / denom) for d in head) + _plogp((last - 1) / denom)


def _binary_entropy(p: float) -> float:
    return _plogp(p) + _plogp(1.0 - p)


def removal_bounds(survivor_degrees: Sequence[float], min_weight: float = 1.0) -> tuple[float, float]:
    """Instance bounds on the post-removal structural entropy of a component.

    `survivor_degrees` are the survivors' degrees after the removal.  Returns
    ``(lower, upper)``: a connected remainder has entropy >= lower, a split one
    has entropy <= upper, and lower > upper always holds.

    lower is the contradiction bound on degrees rescaled to the tree volume
    2(n-1); rescaling leaves entropy unchanged, so it equals the entropy of
    the whole survivor distribution.  A zero-degree survivor rules out
    connectivity (lower = inf) and is taken as the denial bound's isolated
    node.  With no isolated survivor, a split needs two components each of
    volume >= 2 * min_weight, and H1 = H(all) - H(component volumes) gives
    the upper bound.
    """
    n = len(survivor_degrees)
    if n < 2:
        raise ValueError("removal bounds need n >= 2 survivors")
    degrees = list(survivor_degrees)
    vol = math.fsum(degrees)
    if any(d < 0 for d in degrees):
        raise ValueError("negative degree")

    zero = [i for i, d in enumerate(degrees) if d == 0]
    if zero:
        lower = math.inf
        if vol == 0:
            return lower, 0.0
        rest = [d for i, d in enumerate(degrees) if i != zero[0]]
        # the removed node's other neighbour goes last and regains its lost edge
        j = next(i for i, d in enumerate(rest) if d > 0)
        rest.append(rest.pop(j) + min_weight)
        upper = denial_upper_bound(
            [d / min_weight for d in rest], vol / min_weight + 4
        )
        return lower, upper

    scale = 2 * (n - 1) / vol
    lower = contradiction_lower_bound(n, [1 + d * scale for d in degrees])
    if vol < 4 * min_weight:
        return lower, -math.inf
    upper = component_entropy(degrees) - _binary_entropy(2 * min_weight / vol)
    return lower, upper


# --------------------------------------------------------------------------
# separation check


def _tree_degree_multisets(n: int) -> Iterator[tuple[int, ...]]:
    """Non-increasing tree degree sequences on n nodes (all t_i >= 1, sum 2(n-1))."""

    def parts(total: int, k: int, hi: int) -> Iterator[tuple[int, ...]]:
        if k == 0:
            if total == 0:
                yield ()
            return
        for a in range(min(hi, total - (k - 1)), 0, -1):
            for rest in parts(total - a, k - 1, a):
                yield (a,) + rest

    yield from parts(2 * (n - 1), n, n - 1)


def admissible_sequences(n: int) -> Iterator[tuple[tuple[int, ...], int]]:
    """Yield ``(degrees, vol)`` pairs for the separation check.

    Degrees are survivors' pre-removal degrees in the contradiction worst
    case (``d_i = t_i + 1`` for a tree degree sequence ``t``), ordered so the
    last two entries are ``d_{n-1}`` and ``d_n``.  Every distinct choice of
    those two entries is produced.  ``vol = sum(d) + n`` counts the removed
    node's n edges.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    for t in _tree_degree_multisets(n):
        d = [x + 1 for x in t]
        vol = sum(d) + n
        seen = set()
        for i, j in itertools.permutations(range(n), 2):
            rest = sorted((d[k] for k in range(n) if k not in (i, j)), reverse=True)
            seq = tuple(rest) + (d[i], d[j])
            if seq not in seen:
                seen.add(seq)
                yield seq, vol


@dataclass(frozen=True)
class SeparationRow:
    n: int
    degrees: tuple[int, ...]
    vol: int
    lower: float
    upper: float

    @property
    def margin(self) -> float:
        return self.lower - self.upper

    @property
    def ok(self) -> bool:
        return self.margin > EPS

    def as_record(self) -> dict:
        return {
            "n": self.n,
            "degrees": list(self.degrees),
            "vol": self.vol,
            "lower": self.lower,
            "upper": self.upper,
            "margin": self.margin,
            "pass": self.ok,
        }


@dataclass
class SeparationReport:
    rows: list[SeparationRow] = field(default_factory=list)

    @property
    def violations(self) -> list[SeparationRow]:
        return [r for r in self.rows if not r.ok]

    def margins_by_n(self) -> dict[int, tuple[float, float]]:
        """Map n -> (worst margin, best margin)."""
        out: dict[int, tuple[float, float]] = {}
        for r in self.rows:
            lo, hi = out.get(r.n, (math.inf, -math.inf))
            out[r.n] = (min(lo, r.margin), max(hi, r.margin))
        return out


def verify_separation(n_max: int) -> SeparationReport:
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    report = SeparationReport()
    for n in range(2, n_max + 1):
        for degrees, vol in admissible_sequences(n):
            lower = contradiction_lower_bound(n, degrees)
            upper = denial_upper_bound(degrees[: n - 1], vol)
            report.rows.append(SeparationRow(n, degrees, vol, lower, upper))
    return report
