"""Rotated surface-code memory circuits.

Qubits live on a ``(2d+1) x (2d+1)`` grid: data qubits at odd/odd coordinates,
syndrome qubits at even/even coordinates.  X-type boundary checks sit on the
top and bottom edges, Z-type boundary checks on the left and right edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DATA = "data"
SYNDROME_X = "syndrome_x"
SYNDROME_Z = "syndrome_z"

# Data-qubit offsets visited by each check, one per CNOT layer.  The last two
# targets of an X check are horizontal neighbours and those of a Z check are
# vertical neighbours, so hook errors lie across the logical string they would
# otherwise shorten.
X_ORDER = ((1, 1), (-1, 1), (1, -1), (-1, -1))
Z_ORDER = ((1, 1), (1, -1), (-1, 1), (-1, -1))

CLASS0, CLASS1, CLASS2 = "class0", "class1", "class2"
BITFLIP1, DEPOL1, DEPOL2 = "bitflip1", "depol1", "depol2"
IDLE, AFTER_RESET, AFTER_CNOT, BEFORE_MEASURE = "idle", "after_reset", "after_cnot", "before_measure"

# Within-round layers.
L_RESET, L_H1, L_CNOT0, L_H2, L_MEASURE = 0, 1, 2, 6, 7


class InvalidParameter(ValueError):
    pass


@dataclass(frozen=True, order=True)
class QubitCoord:
    x: int
    y: int
    kind: str = field(compare=False)

    def __str__(self) -> str:
        return f"{self.x},{self.y}"


@dataclass(frozen=True)
class Layout:
    distance: int
    data: tuple[QubitCoord, ...]
    syndromes: tuple[QubitCoord, ...]
    # neighbors[j][k] is the data index touched by syndrome j in CNOT layer k, or -1.
    neighbors: tuple[tuple[int, ...], ...]
    x_order: tuple[tuple[int, int], ...] = X_ORDER
    z_order: tuple[tuple[int, int], ...] = Z_ORDER

    @property
    def qubits(self) -> tuple[QubitCoord, ...]:
        return self.data + self.syndromes

    @property
    def num_data(self) -> int:
        return len(self.data)

    @property
    def num_syndromes(self) -> int:
        return len(self.syndromes)

    def syndrome_support(self, j: int) -> list[int]:
        return [q for q in self.neighbors[j] if q >= 0]

    def cnots_in_layer(self, k: int) -> list[tuple[int, int]]:
        """(control, target) qubit indices of CNOT layer ``k``; syndromes offset by num_data."""
        out = []
        nd = self.num_data
        for j, s in enumerate(self.syndromes):
            q = self.neighbors[j][k]
            if q < 0:
                continue
            if s.kind == SYNDROME_X:
                out.append((nd + j, q))
            else:
                out.append((q, nd + j))
        return out


def build_layout(distance: int) -> Layout:
    if not isinstance(distance, (int, np.integer)) or distance < 3 or distance % 2 == 0:
        raise InvalidParameter(f"distance must be an odd integer >= 3, got {distance!r}")
    d = int(distance)
    data = tuple(QubitCoord(x, y, DATA) for y in range(1, 2 * d, 2) for x in range(1, 2 * d, 2))
    index = {(q.x, q.y): i for i, q in enumerate(data)}

    syndromes = []
    for y in range(0, 2 * d + 1, 2):
        for x in range(0, 2 * d + 1, 2):
            kind = SYNDROME_X if ((x + y) // 2) % 2 == 0 else SYNDROME_Z
            on_tb = y in (0, 2 * d)
            on_lr = x in (0, 2 * d)
            if on_tb and on_lr:
                continue
            if on_tb and kind != SYNDROME_X:
                continue
            if on_lr and kind != SYNDROME_Z:
                continue
            syndromes.append(QubitCoord(x, y, kind))

    neighbors = []
    for s in syndromes:
        order = X_ORDER if s.kind == SYNDROME_X else Z_ORDER
        neighbors.append(tuple(index.get((s.x + dx, s.y + dy), -1) for dx, dy in order))
    return Layout(d, data, tuple(syndromes), tuple(neighbors))


@dataclass(frozen=True)
class GateInstruction:
    kind: str  # reset, hadamard, cnot, measure
    qubits: tuple[int, ...]
    round: int
    layer: int


@dataclass(frozen=True)
class ErrorLocation:
    cls: str
    channel: str
    qubits: tuple[int, ...]
    round: int
    slot: str
    layer: int = -1  # CNOT layer for after_cnot, else -1


@dataclass(frozen=True)
class DetectorDef:
    s: QubitCoord
    t: int
    measurements: tuple[int, ...]


# Location families: each is a block of sites repeated identically every round.
FAMILIES = ("class0_idle", "class1_reset", "class2_cnot", "class1_measure")


@dataclass(frozen=True)
class MemoryCircuit:
    layout: Layout
    rounds: int
    basis: str
    gates: tuple[GateInstruction, ...]
    error_locations: tuple[ErrorLocation, ...]
    detectors: tuple[DetectorDef, ...]
    observable: tuple[int, ...]
    num_measurements: int

    @property
    def distance(self) -> int:
        return self.layout.distance

    @property
    def qubits(self) -> tuple[QubitCoord, ...]:
        return self.layout.qubits

    @property
    def num_qubits(self) -> int:
        return len(self.layout.qubits)

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)

    @cached_property
    def family_sizes(self) -> dict[str, int]:
        lay = self.layout
        ncx = sum(len(lay.syndrome_support(j)) for j in range(lay.num_syndromes))
        return {
            "class0_idle": lay.num_data,
            "class1_reset": lay.num_syndromes,
            "class2_cnot": ncx,
            "class1_measure": lay.num_syndromes,
        }

    @cached_property
    def family_offsets(self) -> dict[str, int]:
        off, out = 0, {}
        for f in FAMILIES:
            out[f] = off
            off += self.family_sizes[f]
        return out

    @property
    def locations_per_round(self) -> int:
        return sum(self.family_sizes.values())

    def location_id(self, family: str, t, site):
        """Location index of ``site`` of ``family`` in round ``t`` (1-based); vectorises over arrays."""
        return (np.asarray(t) - 1) * self.locations_per_round + self.family_offsets[family] + np.asarray(site)

    @cached_property
    def detector_index(self) -> dict[tuple[int, int, int], int]:
        return {(D.s.x, D.s.y, D.t): i for i, D in enumerate(self.detectors)}

    @cached_property
    def cnot_pairs(self) -> tuple[tuple[int, int], ...]:
        """(control, target) of each per-round CNOT in class2 site order."""
        return tuple(p for k in range(4) for p in self.layout.cnots_in_layer(k))

    def syndrome_measurement(self, j: int, t: int) -> int:
        return (t - 1) * self.layout.num_syndromes + j

    def data_measurement(self, i: int) -> int:
        return self.rounds * self.layout.num_syndromes + i


def build_memory_circuit(layout: Layout, rounds: int, basis: str = "Z") -> MemoryCircuit:
    if rounds < 1:
        raise InvalidParameter(f"rounds must be >= 1, got {rounds}")
    basis = basis.upper()
    if basis not in ("Z", "X"):
        raise InvalidParameter(f"basis must be 'Z' or 'X', got {basis!r}")
    nd, m = layout.num_data, layout.num_syndromes
    data_idx = tuple(range(nd))
    synd_idx = tuple(range(nd, nd + m))
    xs = tuple(nd + j for j, s in enumerate(layout.syndromes) if s.kind == SYNDROME_X)
    cnot_layers = [layout.cnots_in_layer(k) for k in range(4)]

    gates: list[GateInstruction] = []
    locs: list[ErrorLocation] = []

    # Round 0: data preparation in the memory basis.
    gates += [GateInstruction("reset", (q,), 0, 0) for q in data_idx]
    if basis == "X":
        gates += [GateInstruction("hadamard", (q,), 0, 1) for q in data_idx]

    for t in range(1, rounds + 1):
        # Location order here must follow FAMILIES.
        locs += [ErrorLocation(CLASS0, DEPOL1, (q,), t, IDLE) for q in data_idx]
        gates += [GateInstruction("reset", (q,), t, L_RESET) for q in synd_idx]
        locs += [ErrorLocation(CLASS1, BITFLIP1, (q,), t, AFTER_RESET) for q in synd_idx]
        gates += [GateInstruction("hadamard", (q,), t, L_H1) for q in xs]
        for k, layer in enumerate(cnot_layers):
            gates += [GateInstruction("cnot", pair, t, L_CNOT0 + k) for pair in layer]
            locs += [ErrorLocation(CLASS2, DEPOL2, pair, t, AFTER_CNOT, k) for pair in layer]
        gates += [GateInstruction("hadamard", (q,), t, L_H2) for q in xs]
        locs += [ErrorLocation(CLASS1, BITFLIP1, (q,), t, BEFORE_MEASURE) for q in synd_idx]
        gates += [GateInstruction("measure", (q,), t, L_MEASURE) for q in synd_idx]

    final = rounds + 1
    if basis == "X":
        gates += [GateInstruction("hadamard", (q,), final, 0) for q in data_idx]
    gates += [GateInstruction("measure", (q,), final, 1) for q in data_idx]

    # Detectors.
    active = SYNDROME_Z if basis == "Z" else SYNDROME_X
    detectors: list[DetectorDef] = []
    meas = lambda j, t: (t - 1) * m + j  # noqa: E731
    for t in range(1, rounds + 2):
        for j, s in enumerate(layout.syndromes):
            if t == 1:
                if s.kind != active:
                    continue
                refs = (meas(j, 1),)
            elif t <= rounds:
                refs = (meas(j, t - 1), meas(j, t))
            else:
                if s.kind != active:
                    continue
                refs = (meas(j, rounds),) + tuple(rounds * m + q for q in layout.syndrome_support(j))
            detectors.append(DetectorDef(s, t, refs))

    d = layout.distance
    if basis == "Z":
        line = [i for i, q in enumerate(layout.data) if q.y == 1]
    else:
        line = [i for i, q in enumerate(layout.data) if q.x == 1]
    assert len(line) == d
    observable = tuple(rounds * m + i for i in line)

    return MemoryCircuit(
        layout=layout,
        rounds=rounds,
        basis=basis,
        gates=tuple(gates),
        error_locations=tuple(locs),
        detectors=tuple(detectors),
        observable=observable,
        num_measurements=rounds * m + nd,
    )


def enumerate_error_locations(circuit: MemoryCircuit) -> tuple[ErrorLocation, ...]:
    return circuit.error_locations


def circuit_listing(circuit: MemoryCircuit) -> str:
    """One ``ROUND t LAYER l GATE qubits...`` line per gate instruction."""
    qs = circuit.qubits
    lines = []
    for g in circuit.gates:
        coords = " ".join(str(qs[q]) for q in g.qubits)
        lines.append(f"ROUND {g.round} LAYER {g.layer} {g.kind.upper()} {coords}")
    return "\n".join(lines) + "\n"


def detector_map(circuit: MemoryCircuit) -> str:
    """One ``DETECTOR s.x s.y t: m_ref...`` line per detector, in canonical order."""
    lines = []
    for D in circuit.detectors:
        refs = " ".join(f"m{r}" for r in D.measurements)
        lines.append(f"DETECTOR {D.s.x} {D.s.y} {D.t}: {refs}")
    return "\n".join(lines) + "\n"
