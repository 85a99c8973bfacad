"""Bit-packed Pauli-frame sampling of memory circuits.

Frames are stored as ``uint64`` words with 64 shots per word.  Errors are
drawn sparsely as ``(location, shot, pauli)`` hits and XOR-ed into the frame
at their slot.  Shots are processed in fixed chunks of :data:`CHUNK_SHOTS`,
each with its own keyed Philox stream, so every shot depends only on
``(seed, stream, shot index)`` regardless of batch size or worker count.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .circuit import GateInstruction, MemoryCircuit
from .marginals import MarginalModel
from .noise import (
    CLASS0,
    CLASS1,
    CLASS2,
    EventCatalog,
    IndependentBlock,
    NoiseSpec,
    PairwiseBlock,
    StreakyBlock,
    build_event_catalog,
)

CHUNK_SHOTS = 8192
DENSE_THRESHOLD = 0.05
ONE = np.uint64(1)


# ---------------------------------------------------------------------------
# Single-frame reference semantics


@dataclass
class PauliFrame:
    x: np.ndarray
    z: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "PauliFrame":
        return cls(np.zeros(n, dtype=bool), np.zeros(n, dtype=bool))

    def copy(self) -> "PauliFrame":
        return PauliFrame(self.x.copy(), self.z.copy())


def propagate(gate: GateInstruction, frame: PauliFrame) -> tuple[PauliFrame, Union[bool, None]]:
    """Apply one gate to a frame; returns the new frame and the measurement flip (or None)."""
    f = frame.copy()
    q = gate.qubits
    if gate.kind == "hadamard":
        f.x[q[0]], f.z[q[0]] = frame.z[q[0]], frame.x[q[0]]
    elif gate.kind == "cnot":
        c, t = q
        f.x[t] ^= frame.x[c]
        f.z[c] ^= frame.z[t]
    elif gate.kind == "reset":
        f.x[q[0]] = False
        f.z[q[0]] = False
    elif gate.kind == "measure":
        return f, bool(frame.x[q[0]])
    return f, None


# ---------------------------------------------------------------------------
# Compiled circuits


@dataclass
class CompiledCircuit:
    num_qubits: int
    num_measurements: int
    ops: list
    loc_q0: np.ndarray
    loc_q1: np.ndarray
    det_refs: np.ndarray  # [ndet, maxrefs], padded with num_measurements
    obs_refs: np.ndarray


def compile_circuit(circuit: MemoryCircuit) -> CompiledCircuit:
    """Group gates into vectorised layer ops interleaved with noise slots."""
    locs = circuit.error_locations
    # Noise slots precede the gate layer they are attached to (by round/layer).
    slot_layer = {"idle": -1, "after_reset": 0, "before_measure": 6}
    noise_at: dict[tuple[int, int], tuple[int, int]] = {}
    for i, L in enumerate(locs):
        key = (L.round, L.layer + 2 if L.slot == "after_cnot" else slot_layer[L.slot])
        lo, hi = noise_at.get(key, (i, i))
        noise_at[key] = (min(lo, i), max(hi, i + 1))

    layers: dict[tuple[int, int], list[GateInstruction]] = {}
    for g in circuit.gates:
        layers.setdefault((g.round, g.layer), []).append(g)

    ops = []
    rec_pos = 0
    keys = sorted(set(layers) | set(noise_at))
    for key in keys:
        t, layer = key
        # Gate layer first, then noise attached after it.
        for kind in ("reset", "hadamard", "cnot", "measure"):
            gs = [g for g in layers.get(key, ()) if g.kind == kind]
            if not gs:
                continue
            if kind == "cnot":
                ops.append(("CX", np.array([g.qubits[0] for g in gs]), np.array([g.qubits[1] for g in gs])))
            elif kind == "measure":
                ops.append(("M", np.array([g.qubits[0] for g in gs]), rec_pos))
                rec_pos += len(gs)
            else:
                ops.append((kind[0].upper(), np.array([g.qubits[0] for g in gs])))
        if key in noise_at:
            ops.append(("N",) + noise_at[key])
    assert rec_pos == circuit.num_measurements

    q0 = np.array([L.qubits[0] for L in locs], dtype=np.int64)
    q1 = np.array([L.qubits[1] if len(L.qubits) > 1 else L.qubits[0] for L in locs], dtype=np.int64)
    maxr = max(len(D.measurements) for D in circuit.detectors) if circuit.detectors else 1
    refs = np.full((len(circuit.detectors), maxr), circuit.num_measurements, dtype=np.int64)
    for i, D in enumerate(circuit.detectors):
        refs[i, : len(D.measurements)] = D.measurements
    return CompiledCircuit(circuit.num_qubits, circuit.num_measurements, ops, q0, q1, refs,
                           np.array(circuit.observable, dtype=np.int64))


def run_frames(cc: CompiledCircuit, shots: int, loc, shot, pauli):
    """Propagate frames with explicit error hits; returns (detector words, observable words)."""
    W = (shots + 63) // 64
    x = np.zeros((cc.num_qubits, W), dtype=np.uint64)
    z = np.zeros_like(x)
    rec = np.zeros((cc.num_measurements + 1, W), dtype=np.uint64)

    loc = np.asarray(loc, dtype=np.int64)
    order = np.argsort(loc, kind="stable")
    loc = loc[order]
    shot = np.asarray(shot, dtype=np.int64)[order]
    pauli = np.asarray(pauli, dtype=np.uint64)[order]
    word = shot >> 6
    bit = ONE << (shot & 63).astype(np.uint64)
    q0, q1 = cc.loc_q0[loc], cc.loc_q1[loc]
    mx0 = bit * (pauli & ONE)
    mz0 = bit * ((pauli >> np.uint64(1)) & ONE)
    mx1 = bit * ((pauli >> np.uint64(2)) & ONE)
    mz1 = bit * ((pauli >> np.uint64(3)) & ONE)
    two = cc.loc_q0 != cc.loc_q1

    for op in cc.ops:
        kind = op[0]
        if kind == "N":
            a, b = np.searchsorted(loc, op[1]), np.searchsorted(loc, op[2])
            if a == b:
                continue
            s = slice(a, b)
            np.bitwise_xor.at(x, (q0[s], word[s]), mx0[s])
            np.bitwise_xor.at(z, (q0[s], word[s]), mz0[s])
            if two[op[1]]:
                np.bitwise_xor.at(x, (q1[s], word[s]), mx1[s])
                np.bitwise_xor.at(z, (q1[s], word[s]), mz1[s])
        elif kind == "CX":
            c, t = op[1], op[2]
            x[t] ^= x[c]
            z[c] ^= z[t]
        elif kind == "H":
            q = op[1]
            x[q], z[q] = z[q], x[q].copy()
        elif kind == "R":
            x[op[1]] = 0
            z[op[1]] = 0
        elif kind == "M":
            q, pos = op[1], op[2]
            rec[pos : pos + len(q)] = x[q]
    det = np.bitwise_xor.reduce(rec[cc.det_refs], axis=1)
    obs = np.bitwise_xor.reduce(rec[cc.obs_refs], axis=0)
    return det, obs


# ---------------------------------------------------------------------------
# Error drawing


def bernoulli_sparse(prob: np.ndarray, shots: int, rng: np.random.Generator):
    """Indices ``(event, shot)`` of independent Bernoulli(prob[event]) successes over ``shots`` trials."""
    prob = np.asarray(prob, dtype=float)
    ev_out, sh_out = [], []
    dense = np.flatnonzero(prob > DENSE_THRESHOLD)
    if len(dense):
        hit = rng.random((len(dense), shots)) < prob[dense, None]
        e, s = np.nonzero(hit)
        ev_out.append(dense[e])
        sh_out.append(s)
    sparse = np.flatnonzero((prob > 0) & (prob <= DENSE_THRESHOLD))
    if len(sparse):
        k = rng.binomial(shots, prob[sparse])
        target = np.zeros(len(prob), np.int64)
        target[sparse] = k
        # Distinct shots per event: redraw only the positions lost to repeats.  The
        # result is exchangeable in shots and of exact size k, hence a uniform k-subset.
        keys = np.zeros(0, np.int64)
        todo, need = sparse[k > 0], k[k > 0]
        while len(todo):
            ev = np.repeat(todo, need)
            keys = np.unique(np.concatenate([keys, ev * shots + rng.integers(0, shots, len(ev))]))
            have = np.bincount(keys // shots, minlength=len(prob))
            short = target - have
            todo = np.flatnonzero(short > 0)
            need = short[todo]
        ev_out.append(keys // shots)
        sh_out.append(keys % shots)
    if not ev_out:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(ev_out).astype(np.int64), np.concatenate(sh_out).astype(np.int64)


@dataclass
class ErrorHits:
    loc: np.ndarray
    shot: np.ndarray
    pauli: np.ndarray

    def combined(self) -> "ErrorHits":
        """Merge hits on the same (location, shot) by Pauli product; drops identities."""
        if len(self.loc) == 0:
            return self
        smax = int(self.shot.max()) + 1
        key = self.loc * smax + self.shot
        order = np.argsort(key, kind="stable")
        key, pauli = key[order], self.pauli[order]
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        merged = np.bitwise_xor.reduceat(pauli, starts)
        k = key[starts]
        nz = merged != 0
        return ErrorHits(k[nz] // smax, k[nz] % smax, merged[nz])


def draw_errors(catalog: EventCatalog, shots: int, rng: np.random.Generator) -> ErrorHits:
    locs, shs, ps = [], [], []
    for b in catalog.blocks:
        ev, sh = bernoulli_sparse(b.prob, shots, rng)
        if len(ev) == 0:
            continue
        if isinstance(b, IndependentBlock):
            nsup = {"bitflip1": 1, "depol1": 3, "depol2": 15}[b.channel]
            pa = np.ones(len(ev), np.int64) if nsup == 1 else rng.integers(1, nsup + 1, len(ev))
            locs.append(b.loc[ev]); shs.append(sh); ps.append(pa)
        elif isinstance(b, PairwiseBlock):
            if b.cls == CLASS0:
                o = rng.integers(1, 16, len(ev))
                pa, pb = o & 3, o >> 2
            elif b.cls == CLASS1:
                pa = pb = np.ones(len(ev), np.int64)
            else:
                o = rng.integers(1, 256, len(ev))
                pa, pb = o & 15, o >> 4
            locs += [b.loc_a[ev], b.loc_b[ev]]
            shs += [sh, sh]
            ps += [pa, pb]
        else:
            rep, loc = b.expand(ev)
            ncodes = {CLASS0: 4, CLASS1: 2, CLASS2: 16}[b.cls]
            pa = rng.integers(0, ncodes, len(loc))
            locs.append(loc); shs.append(sh[rep]); ps.append(pa)
    if not locs:
        e = np.zeros(0, np.int64)
        return ErrorHits(e, e.copy(), e.copy())
    loc = np.concatenate(locs).astype(np.int64)
    shot = np.concatenate(shs).astype(np.int64)
    pauli = np.concatenate(ps).astype(np.int64)
    nz = pauli != 0
    return ErrorHits(loc[nz], shot[nz], pauli[nz])


def chunk_rng(seed: int, chunk: int, stream: int = 0) -> np.random.Generator:
    key = [int(seed) % 2**64, ((int(stream) % 2**32) << 32) | (int(chunk) % 2**32)]
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Shot batches


BINARY_MAGIC = 0xC5
BINARY_VERSION = 1


@dataclass
class ShotBatch:
    shots: int
    detectors: np.ndarray  # [num_detectors, words] uint64, shot-major bits
    observable: np.ndarray  # [words] uint64

    @property
    def num_detectors(self) -> int:
        return self.detectors.shape[0]

    def detector_bits(self) -> np.ndarray:
        """[shots, num_detectors] uint8."""
        return _unpack(self.detectors, self.shots).T.copy()

    def observable_bits(self) -> np.ndarray:
        return _unpack(self.observable[None, :], self.shots)[0]

    def packed_rows(self) -> np.ndarray:
        """[shots, ceil(num_detectors/8)] uint8, little-endian bit order per shot."""
        return np.packbits(_unpack(self.detectors, self.shots).T, axis=1, bitorder="little")

    @classmethod
    def from_bits(cls, det_bits: np.ndarray, obs_bits: np.ndarray) -> "ShotBatch":
        det_bits = np.asarray(det_bits, dtype=np.uint8)
        shots = det_bits.shape[0]
        return cls(shots, _pack(det_bits.T), _pack(np.asarray(obs_bits, np.uint8)[None, :])[0])

    @classmethod
    def concat(cls, batches) -> "ShotBatch":
        batches = list(batches)
        det = np.concatenate([b.detector_bits() for b in batches], axis=0)
        obs = np.concatenate([b.observable_bits() for b in batches])
        return cls.from_bits(det, obs)

    def to_text(self) -> str:
        det = self.detector_bits()
        obs = self.observable_bits()
        chars = np.where(det, ord("1"), ord("0")).astype(np.uint8)
        lines = [row.tobytes().decode() + " " + str(int(o)) for row, o in zip(chars, obs)]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "ShotBatch":
        det, obs = [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            bits, _, o = line.strip().partition(" ")
            det.append(np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"))
            obs.append(int(o or 0))
        if not det:
            return cls(0, np.zeros((0, 0), np.uint64), np.zeros(0, np.uint64))
        return cls.from_bits(np.array(det), np.array(obs))

    def to_binary(self) -> bytes:
        """8-byte header (magic u8, version u8, detectors u16, shots u32) then one packed row per shot."""
        if self.num_detectors >= 2**16:
            raise ValueError("binary format supports fewer than 65536 detectors")
        header = struct.pack("<BBHI", BINARY_MAGIC, BINARY_VERSION, self.num_detectors, self.shots)
        rows = np.concatenate([self.detector_bits(), self.observable_bits()[:, None]], axis=1)
        return header + np.packbits(rows, axis=1, bitorder="little").tobytes()

    @classmethod
    def from_binary(cls, data: bytes) -> "ShotBatch":
        magic, version, ndet, shots = struct.unpack("<BBHI", data[:8])
        if magic != BINARY_MAGIC or version != BINARY_VERSION:
            raise ValueError("not a detection-event binary file")
        width = (ndet + 1 + 7) // 8
        rows = np.frombuffer(data[8:], dtype=np.uint8).reshape(shots, width)
        bits = np.unpackbits(rows, axis=1, bitorder="little")[:, : ndet + 1]
        return cls.from_bits(bits[:, :ndet], bits[:, ndet])


def _unpack(words: np.ndarray, shots: int) -> np.ndarray:
    w = np.ascontiguousarray(words, dtype="<u8")
    bits = np.unpackbits(w.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :shots]


def _pack(bits: np.ndarray) -> np.ndarray:
    """[rows, shots] bits -> [rows, words] uint64."""
    rows, shots = bits.shape
    W = (shots + 63) // 64
    padded = np.zeros((rows, W * 64), dtype=np.uint8)
    padded[:, :shots] = bits
    return np.packbits(padded, axis=1, bitorder="little").view("<u8").astype(np.uint64)


# ---------------------------------------------------------------------------
# Sampling


NoiseLike = Union[NoiseSpec, MarginalModel, EventCatalog]


def as_catalog(circuit: MemoryCircuit, noise: NoiseLike) -> EventCatalog:
    if isinstance(noise, EventCatalog):
        return noise
    if isinstance(noise, MarginalModel):
        return noise.as_catalog()
    return build_event_catalog(circuit, noise)


@dataclass
class _Job:
    circuit: MemoryCircuit
    catalog: EventCatalog
    seed: int
    stream: int

    @cached_property
    def compiled(self) -> CompiledCircuit:
        return compile_circuit(self.circuit)

    def __call__(self, chunk: int):
        rng = chunk_rng(self.seed, chunk, self.stream)
        hits = draw_errors(self.catalog, CHUNK_SHOTS, rng)
        return run_frames(self.compiled, CHUNK_SHOTS, hits.loc, hits.shot, hits.pauli)


def default_workers() -> int:
    return int(os.environ.get("CORRSURF_WORKERS", "1"))


def iter_chunks(circuit: MemoryCircuit, noise: NoiseLike, shots: int, seed: int, *,
                stream: int = 0, workers: int | None = None):
    """Yield ShotBatch chunks covering shots ``[0, shots)`` in order."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    job = _Job(circuit, as_catalog(circuit, noise), seed, stream)
    nchunks = (shots + CHUNK_SHOTS - 1) // CHUNK_SHOTS
    workers = default_workers() if workers is None else workers

    def finish(c, res):
        det, obs = res
        n = min(CHUNK_SHOTS, shots - c * CHUNK_SHOTS)
        W = (n + 63) // 64
        det, obs = det[:, :W].copy(), obs[:W].copy()
        if n % 64:
            mask = np.uint64((1 << (n % 64)) - 1)
            det[:, -1] &= mask
            obs[-1] &= mask
        return ShotBatch(n, det, obs)

    if workers <= 1 or nchunks == 1:
        for c in range(nchunks):
            yield finish(c, job(c))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for c, res in enumerate(pool.map(job, range(nchunks))):
                yield finish(c, res)


def sample(circuit: MemoryCircuit, noise: NoiseLike, shots: int, seed: int, *,
           stream: int = 0, workers: int | None = None) -> ShotBatch:
    chunks = list(iter_chunks(circuit, noise, shots, seed, stream=stream, workers=workers))
    if len(chunks) == 1:
        return chunks[0]
    return ShotBatch(shots, np.concatenate([c.detectors for c in chunks], axis=1),
                     np.concatenate([c.observable for c in chunks]))


def inject(circuit: MemoryCircuit, errors, compiled: CompiledCircuit | None = None):
    """Deterministic symptoms of error sets.

    ``errors`` is a list of shots, each a list of ``(location, pauli)``.
    Returns ``(det_bits [shots, ndet], obs_bits [shots])``.
    """
    cc = compiled or compile_circuit(circuit)
    loc, shot, pauli = [], [], []
    for s, errs in enumerate(errors):
        for l, p in errs:
            loc.append(l); shot.append(s); pauli.append(p)
    n = max(len(errors), 1)
    det, obs = run_frames(cc, n, np.array(loc, np.int64), np.array(shot, np.int64), np.array(pauli, np.int64))
    b = ShotBatch(n, det, obs)
    return b.detector_bits()[: len(errors)], b.observable_bits()[: len(errors)]
