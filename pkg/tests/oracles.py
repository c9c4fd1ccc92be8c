"""Independent reference implementations used only by the tests.

Each one recomputes a quantity the slow, obvious way, without going through
the package code it checks.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import networkx as nx
import numpy as np


def h1_bruteforce(nodes, edges) -> float:
    """Structural entropy via networkx components and a numpy formula."""
    g = nx.MultiGraph()
    g.add_nodes_from(nodes)
    g.add_weighted_edges_from(edges)
    total = sum(d for _, d in g.degree(weight="weight"))
    if total == 0:
        return 0.0
    acc = 0.0
    for comp in nx.connected_components(g):
        d = np.array([g.degree(v, weight="weight") for v in comp], dtype=float)
        vol = d.sum()
        if vol == 0:
            continue
        p = d[d > 0] / vol
        acc += vol / total * float(-(p * np.log2(p)).sum())
    return acc


def kg_weights_bruteforce(dialogues) -> dict[tuple[str, str], float]:
    """Edge weights by scanning every ordered pair in every dialogue."""
    freq, cooc = Counter(), Counter()
    for d in dialogues:
        labels = {m.label for u in d.turns for m in u.mentions if m.state.value == "mention"}
        first = {}
        for lab in labels:
            first[lab] = min(i for i, u in enumerate(d.turns)
                             for m in u.mentions if m.label == lab and m.state.value == "mention")
        for lab in labels:
            freq[lab] += 1
        for a, b in itertools.permutations(sorted(labels), 2):
            if first[a] <= first[b]:
                cooc[(a, b)] += 1
    return {(a, b): c / freq[a] for (a, b), c in cooc.items()}


def tfidf_bruteforce(fit_docs, docs, tokenize):
    """Smoothed TF-IDF with raw counts and l2 rows, returned as dicts."""
    n = len(fit_docs)
    df = Counter()
    for doc in fit_docs:
        df.update(set(tokenize(doc)))
    idf = {t: math.log((1 + n) / (1 + c)) + 1 for t, c in df.items()}
    out = []
    for doc in docs:
        tf = Counter(t for t in tokenize(doc) if t in idf)
        vec = {t: c * idf[t] for t, c in tf.items()}
        norm = math.sqrt(sum(v * v for v in vec.values()))
        out.append({t: v / norm for t, v in vec.items()} if norm else {})
    return out


def sparse_cosine(u: dict, v: dict) -> float:
    dot = sum(u[t] * v.get(t, 0.0) for t in u)
    nu = math.sqrt(sum(x * x for x in u.values()))
    nv = math.sqrt(sum(x * x for x in v.values()))
    return dot / (nu * nv) if nu and nv else 0.0


def medoids_bruteforce(texts, vectors, k):
    m = len(texts)
    if m == 1:
        return [(texts[0], 1.0)]
    scores = []
    for i in range(m):
        sims = []
        for j in range(m):
            if i == j:
                continue
            sims.append(float(np.dot(vectors[i], vectors[j])))
        scores.append(math.fsum(sims) / (m - 1))
    ranked = sorted(zip(texts, scores), key=lambda ts: (-ts[1], ts[0]))
    return ranked[:k]


def related_bruteforce(kg, history, k, decay):
    latest = {}
    for lab, t in history:
        latest[lab] = max(t, latest.get(lab, t))
    now = max(latest.values())
    rows = []
    for e in kg.entities:
        if e in latest:
            continue
        best = None
        for h, t in latest.items():
            s = kg.weight(h, e) * decay ** (now - t)
            if s > 0 and (best is None or (s, t) > best):
                best = (s, t)
        if best:
            rows.append((e, best[0], best[1]))
    rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
    return [(e, s) for e, s, _ in rows[:k]]


def bridges_bruteforce(kg, isolated, anchors):
    """Every two-edge path isolated - b - anchor, best product per b."""
    uw = lambda a, b: max(kg.weight(a, b), kg.weight(b, a))
    best = {}
    for b in kg.entities:
        if b == isolated or b in anchors:
            continue
        for a in anchors:
            s = uw(isolated, b) * uw(b, a)
            if s > best.get(b, 0.0):
                best[b] = s
    return sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
