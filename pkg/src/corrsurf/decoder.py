"""Minimum-weight perfect matching decoding over detector error models.

:func:`decode` is the exact reference path: Dijkstra distances between fired
detectors and the boundary, then a blossom matching on the complete defect
graph with one boundary copy per defect.  :class:`BatchDecoder` wraps the same
graph in PyMatching for high-throughput batches.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .dem import DetectorErrorModel


class InvalidWeight(ValueError):
    pass


class DisconnectedDefect(RuntimeError):
    pass


def edge_weight(p: float) -> float:
    return math.log((1 - p) / p)


@dataclass
class MatchingGraph:
    num_detectors: int
    # (u, v) with u < v; v == num_detectors is the boundary node.
    edges: dict[tuple[int, int], tuple[float, bool]]

    @property
    def boundary(self) -> int:
        return self.num_detectors

    def add(self, u: int, v: int, weight: float, obs: bool) -> None:
        key = (min(u, v), max(u, v))
        old = self.edges.get(key)
        if old is None or weight < old[0]:
            self.edges[key] = (weight, obs)

    def scaled(self, factor: float) -> "MatchingGraph":
        return MatchingGraph(self.num_detectors, {k: (w * factor, o) for k, (w, o) in self.edges.items()})

    @cached_property
    def csr(self) -> sp.csr_matrix:
        n = self.num_detectors + 1
        keys = np.array(list(self.edges), dtype=np.int64).reshape(-1, 2)
        w = np.array([v[0] for v in self.edges.values()])
        u = np.concatenate([keys[:, 0], keys[:, 1]])
        v = np.concatenate([keys[:, 1], keys[:, 0]])
        return sp.csr_matrix((np.concatenate([w, w]), (u, v)), shape=(n, n))

    def unreachable(self) -> list[int]:
        """Detectors with no path to the boundary."""
        adj: dict[int, list[int]] = {}
        for u, v in self.edges:
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, []).append(u)
        seen = {self.boundary}
        queue = deque([self.boundary])
        while queue:
            a = queue.popleft()
            for b in adj.get(a, ()):
                if b not in seen:
                    seen.add(b)
                    queue.append(b)
        return [d for d in range(self.num_detectors) if d not in seen]


def build_matching_graph(dem: DetectorErrorModel) -> MatchingGraph:
    g = MatchingGraph(dem.detector_count, {})
    for m in dem.mechanisms:
        if not 0 < m.probability < 0.5:
            raise InvalidWeight(f"mechanism probability {m.probability} gives a non-positive weight")
        dets = m.detectors
        if len(dets) == 1:
            g.add(dets[0], g.boundary, edge_weight(m.probability), m.observable_flip)
        elif len(dets) == 2:
            g.add(dets[0], dets[1], edge_weight(m.probability), m.observable_flip)
        elif len(dets) > 2:
            raise ValueError(f"mechanism with {len(dets)} detectors is not graphlike")
    return g


@dataclass
class MatchResult:
    prediction: int
    weight: float
    pairs: list[tuple[int, int]]  # detector pairs; boundary matches use graph.boundary


def _path_parity(graph: MatchingGraph, pred: np.ndarray, source: int, target: int) -> int:
    parity = 0
    v = target
    while v != source:
        u = int(pred[v])
        if u < 0:
            raise DisconnectedDefect(f"no path from {source} to {target}")
        parity ^= graph.edges[(min(u, v), max(u, v))][1]
        v = u
    return int(parity)


def match(graph: MatchingGraph, syndrome) -> MatchResult:
    syndrome = np.asarray(syndrome)
    if len(syndrome) != graph.num_detectors:
        raise ValueError("syndrome length does not match detector count")
    defects = np.flatnonzero(syndrome)
    k = len(defects)
    if k == 0:
        return MatchResult(0, 0.0, [])
    dist, pred = dijkstra(graph.csr, directed=False, indices=defects, return_predecessors=True)
    B = graph.boundary
    dd = dist[:, defects]
    db = dist[:, B]
    for i in range(k):
        if not np.isfinite(db[i]) and not np.any(np.isfinite(np.delete(dd[i], i))):
            raise DisconnectedDefect(f"detector {defects[i]} cannot be matched")

    finite = np.concatenate([dd[np.isfinite(dd)], db[np.isfinite(db)]])
    big = 1.0 + 2.0 * (finite.max() if len(finite) else 0.0)
    G = nx.Graph()
    G.add_nodes_from(range(2 * k))
    for i in range(k):
        for j in range(i + 1, k):
            if np.isfinite(dd[i, j]):
                G.add_edge(i, j, weight=big - dd[i, j])
        if np.isfinite(db[i]):
            G.add_edge(i, k + i, weight=big - db[i])
        for j in range(i + 1, k):
            G.add_edge(k + i, k + j, weight=big)
    mate = nx.max_weight_matching(G, maxcardinality=True)

    prediction, weight, pairs = 0, 0.0, []
    for a, b in sorted(tuple(sorted(e)) for e in mate):
        if a >= k:
            continue
        if b == k + a:
            weight += db[a]
            prediction ^= _path_parity(graph, pred[a], defects[a], B)
            pairs.append((int(defects[a]), B))
        else:
            weight += dd[a, b]
            prediction ^= _path_parity(graph, pred[a], defects[a], defects[b])
            pairs.append((int(defects[a]), int(defects[b])))
    return MatchResult(prediction, float(weight), pairs)


def decode(graph: MatchingGraph, syndrome) -> int:
    """Predicted observable flip for one syndrome (exact reference matcher)."""
    return match(graph, syndrome).prediction


class BatchDecoder:
    """PyMatching-backed decoder over the same matching graph."""

    def __init__(self, graph: MatchingGraph):
        import pymatching

        self.graph = graph
        m = pymatching.Matching()
        B = graph.boundary
        for (u, v), (w, o) in graph.edges.items():
            fid = {0} if o else set()
            if v == B:
                m.add_boundary_edge(u, weight=w, fault_ids=fid, merge_strategy="disallow")
            else:
                m.add_edge(u, v, weight=w, fault_ids=fid, merge_strategy="disallow")
        self.matching = m

    def decode(self, syndrome) -> int:
        s = np.zeros(self.matching.num_detectors, dtype=np.uint8)
        syn = np.asarray(syndrome, dtype=np.uint8)
        s[: len(syn)] = syn
        return int(self.matching.decode(s)[0])

    def decode_with_weight(self, syndrome) -> tuple[int, float]:
        s = np.zeros(self.matching.num_detectors, dtype=np.uint8)
        syn = np.asarray(syndrome, dtype=np.uint8)
        s[: len(syn)] = syn
        pred, w = self.matching.decode(s, return_weight=True)
        return int(pred[0]), float(w)

    def decode_batch(self, batch) -> np.ndarray:
        """Predictions (uint8 per shot) for a ShotBatch."""
        rows = batch.packed_rows()
        need = (self.matching.num_detectors + 7) // 8
        if rows.shape[1] < need:
            rows = np.pad(rows, ((0, 0), (0, need - rows.shape[1])))
        pred = self.matching.decode_batch(rows, bit_packed_shots=True)
        return np.asarray(pred[:, 0], dtype=np.uint8)


def decode_batch_reference(graph: MatchingGraph, batch) -> np.ndarray:
    bits = batch.detector_bits()
    return np.array([decode(graph, row) for row in bits], dtype=np.uint8)


def logical_error_rate(observables, predictions) -> tuple[int, float]:
    observables = np.asarray(observables).astype(bool)
    predictions = np.asarray(predictions).astype(bool)
    if observables.shape != predictions.shape:
        raise ValueError("observables and predictions differ in length")
    failures = int(np.count_nonzero(observables != predictions))
    return failures, failures / max(len(observables), 1)
