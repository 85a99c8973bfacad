"""Detector error models from circuits and per-location marginal rates."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import MemoryCircuit
from .framesim import compile_circuit, run_frames, ShotBatch
from .marginals import MarginalModel
from .noise import Channel, SUPPORT_SIZE

PRUNE_BELOW = 1e-15
X_BITS = 0b0101
Z_BITS = 0b1010


class UndecomposableError(RuntimeError):
    pass


def merge_probability(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent flips occurs."""
    return p1 + p2 - 2 * p1 * p2


@dataclass
class ErrorMechanism:
    probability: float
    detectors: tuple[int, ...]
    observable_flip: bool
    # (location, pauli) elementary errors whose (component) symptom is exactly this one.
    sources: list = field(default_factory=list, compare=False, repr=False)

    @property
    def signature(self):
        return self.detectors, self.observable_flip


@dataclass
class DetectorErrorModel:
    mechanisms: list[ErrorMechanism]
    detector_count: int
    metadata: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"# detectors {self.detector_count}"]
        if self.metadata:
            lines.append("# " + " ".join(f"{k} {v}" for k, v in self.metadata.items()))
        for m in self.mechanisms:
            parts = [f"error({float(m.probability)!r})"] + [f"D{d}" for d in m.detectors]
            if m.observable_flip:
                parts.append("L0")
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "DetectorErrorModel":
        mechs, count, meta = [], None, {}
        pat = re.compile(r"^error\(([^)]+)\)((?:\s+[DL]\d+)*)\s*$")
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                toks = line[1:].split()
                if toks[:1] == ["detectors"]:
                    count = int(toks[1])
                else:
                    meta.update(dict(zip(toks[::2], toks[1::2])))
                continue
            mt = pat.match(line)
            if not mt:
                raise ValueError(f"bad DEM line: {raw!r}")
            targets = mt.group(2).split()
            dets = tuple(sorted(int(t[1:]) for t in targets if t[0] == "D"))
            obs = any(t[0] == "L" for t in targets)
            mechs.append(ErrorMechanism(float(mt.group(1)), dets, obs))
        if count is None:
            count = 1 + max((d for m in mechs for d in m.detectors), default=-1)
        return cls(mechs, count, meta)

    @classmethod
    def load(cls, path) -> "DetectorErrorModel":
        return cls.from_text(Path(path).read_text())


def _symptoms(cc, errors):
    """Detector index tuples and observable bits for each (loc, pauli)."""
    if not errors:
        return [], np.zeros(0, bool)
    loc = np.array([e[0] for e in errors], np.int64)
    pauli = np.array([e[1] for e in errors], np.int64)
    n = len(errors)
    det, obs = run_frames(cc, n, loc, np.arange(n), pauli)
    b = ShotBatch(n, det, obs)
    bits = b.detector_bits()
    rows, cols = np.nonzero(bits)
    split = np.searchsorted(rows, np.arange(n + 1))
    dets = [tuple(int(c) for c in cols[split[i]: split[i + 1]]) for i in range(n)]
    return dets, b.observable_bits().astype(bool)


def _decompose(dets, obs, edges):
    """Partition ``dets`` into known graphlike edges whose observable bits XOR to ``obs``."""

    def rec(rest, parity):
        if not rest:
            return [] if parity == obs else None
        a, others = rest[0], rest[1:]
        options = [((a,), others)] + [((a, b), others[:i] + others[i + 1:]) for i, b in enumerate(others)]
        for sig, remaining in options:
            if sig in edges:
                sub = rec(remaining, parity ^ edges[sig])
                if sub is not None:
                    return [(sig, edges[sig])] + sub
        return None

    return rec(tuple(dets), False)


def build_dem(circuit: MemoryCircuit, marginal: MarginalModel) -> DetectorErrorModel:
    cc = compile_circuit(circuit)
    locs = circuit.error_locations
    errors, probs = [], []
    for i, L in enumerate(locs):
        p = marginal.p[i]
        if p <= 0:
            continue
        for pauli in Channel(L.channel, 0.0).support():
            errors.append((i, pauli))
            probs.append(p / SUPPORT_SIZE[L.channel])
    dets, obs = _symptoms(cc, errors)
    symptom = {e: (d, o) for e, d, o in zip(errors, dets, obs)}

    # Components per elementary error, in location order.
    comps = []
    hard = []
    for e, d, o, p in zip(errors, dets, obs, probs):
        if len(d) <= 2:
            comps.append((e, [((d, bool(o)), e)], p))
            continue
        loc, pauli = e
        parts = [(loc, pauli & X_BITS), (loc, pauli & Z_BITS)]
        split = [(symptom[q], q) for q in parts if q[1]]
        if all(len(s[0]) <= 2 for s, _ in split) and len(split) == 2:
            comps.append((e, [((s[0], bool(s[1])), q) for s, q in split], p))
        else:
            hard.append((e, d, bool(o), p))
            comps.append((e, None, p))

    edges = {}
    for _, cs, _ in comps:
        for (d, o), _ in cs or ():
            if d:
                edges.setdefault(d, o)

    merged: dict = {}
    for e, cs, p in comps:
        if cs is None:
            d, o = symptom[e]
            found = _decompose(d, bool(o), edges)
            if found is None:
                L = locs[e[0]]
                raise UndecomposableError(
                    f"cannot decompose error pauli={e[1]} at location {e[0]} "
                    f"(round {L.round}, {L.slot}, qubits {L.qubits}) with detectors {d}"
                )
            cs = [((sig, ob), None) for sig, ob in found]
        for (d, o), src in cs:
            if not d and not o:
                continue
            key = (d, o)
            if key in merged:
                m = merged[key]
                m.probability = merge_probability(m.probability, p)
            else:
                m = merged[key] = ErrorMechanism(p, d, o)
            if src is not None:
                m.sources.append(src)
    mechs = [m for m in merged.values() if m.probability >= PRUNE_BELOW]
    meta = {"distance": circuit.distance, "rounds": circuit.rounds, "basis": circuit.basis}
    return DetectorErrorModel(mechs, circuit.num_detectors, meta)
