from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from corrsurf.circuit import (
    BEFORE_MEASURE,
    CLASS0,
    CLASS1,
    CLASS2,
    IDLE,
    SYNDROME_X,
    SYNDROME_Z,
    InvalidParameter,
    build_layout,
    build_memory_circuit,
    circuit_listing,
    detector_map,
    enumerate_error_locations,
)
from corrsurf.framesim import inject

odd_d = st.sampled_from([3, 5, 7])


def test_d3_counts():
    lay = build_layout(3)
    assert lay.num_data == 9
    kinds = Counter(s.kind for s in lay.syndromes)
    assert kinds == {SYNDROME_X: 4, SYNDROME_Z: 4}


@pytest.mark.parametrize("d", [1, 2, 4, 0, -3])
def test_rejects_bad_distance(d):
    with pytest.raises(InvalidParameter):
        build_layout(d)


def test_d5_cnots_per_round():
    lay = build_layout(5)
    assert lay.num_syndromes == 24
    # Independent count: every data-syndrome adjacency on the grid is one CNOT.
    total = sum(len(lay.syndrome_support(j)) for j in range(lay.num_syndromes))
    assert total == 4 * 5 * 4 == 80
    assert sum(len(lay.cnots_in_layer(k)) for k in range(4)) == 80


@given(odd_d)
def test_layout_shape(d):
    lay = build_layout(d)
    assert lay.num_data == d * d
    assert lay.num_syndromes == d * d - 1
    weights = Counter(len(lay.syndrome_support(j)) for j in range(lay.num_syndromes))
    assert weights == {4: (d - 1) ** 2, 2: 2 * (d - 1)}
    # each data qubit is touched at most once per CNOT layer
    for k in range(4):
        qs = [q for pair in lay.cnots_in_layer(k) for q in pair]
        assert len(qs) == len(set(qs))


def test_detector_counts():
    lay = build_layout(3)
    assert build_memory_circuit(lay, 6).num_detectors == 48
    c1 = build_memory_circuit(lay, 1)
    assert c1.num_detectors == 8
    assert Counter(D.t for D in c1.detectors) == {1: 4, 2: 4}
    assert all(D.s.kind == SYNDROME_Z for D in c1.detectors)


@given(odd_d, st.integers(1, 8), st.sampled_from("ZX"))
@settings(max_examples=25, deadline=None)
def test_detector_count_invariant(d, n, basis):
    c = build_memory_circuit(build_layout(d), n, basis)
    assert c.num_detectors == n * (d * d - 1)


def test_error_location_counts():
    lay = build_layout(3)
    one = Counter(L.cls for L in enumerate_error_locations(build_memory_circuit(lay, 1)))
    assert one == {CLASS0: 9, CLASS1: 16, CLASS2: 24}
    six = Counter(L.cls for L in enumerate_error_locations(build_memory_circuit(lay, 6)))
    assert six == {k: 6 * v for k, v in one.items()}


def test_locations_unique_and_one_per_cnot(d3n4):
    locs = d3n4.error_locations
    assert len(set(locs)) == len(locs)
    cnots = [(g.qubits, g.round, g.layer - 2) for g in d3n4.gates if g.kind == "cnot"]
    c2 = [(L.qubits, L.round, L.layer) for L in locs if L.cls == CLASS2]
    assert Counter(cnots) == Counter(c2)
    assert all(v == 1 for v in Counter(c2).values())


def test_schedule_is_time_invariant():
    c = build_memory_circuit(build_layout(5), 4)
    by_round = {}
    for g in c.gates:
        if 1 <= g.round <= c.rounds:
            by_round.setdefault(g.round, []).append((g.kind, g.qubits, g.layer))
    first = by_round[1]
    assert len(first) == 2 * 24 + 2 * 12 + 80
    assert all(v == first for v in by_round.values())


def test_48_gates_per_round_d3():
    c = build_memory_circuit(build_layout(3), 2)
    assert Counter(g.round for g in c.gates)[1] == 48
    text = circuit_listing(c)
    assert sum(1 for line in text.splitlines() if line.startswith("ROUND 1 ")) == 48
    assert len(detector_map(c).splitlines()) == 16


def _loc(c, cls, slot, qubit, t):
    for i, L in enumerate(c.error_locations):
        if L.cls == cls and L.slot == slot and L.qubits == (qubit,) and L.round == t:
            return i
    raise KeyError


def _fired(c, errs):
    det, obs = inject(c, [errs])
    return sorted(int(i) for i in det[0].nonzero()[0]), int(obs[0])


@given(odd_d, st.data())
@settings(max_examples=20, deadline=None)
def test_idle_x_fires_adjacent_z_detectors(d, data):
    c = build_memory_circuit(build_layout(d), 3)
    lay = c.layout
    q = data.draw(st.integers(0, lay.num_data - 1))
    t = data.draw(st.integers(2, 3))
    fired, _ = _fired(c, [(_loc(c, CLASS0, IDLE, q, t), 1)])
    zs = [j for j, s in enumerate(lay.syndromes) if s.kind == SYNDROME_Z and q in lay.syndrome_support(j)]
    expect = sorted(c.detector_index[(lay.syndromes[j].x, lay.syndromes[j].y, t)] for j in zs)
    assert fired == expect
    assert len(fired) in (1, 2)
    x, y = lay.data[q].x, lay.data[q].y
    bulk = 1 < y < 2 * d - 1  # X errors on the top and bottom rows reach one Z check
    assert len(fired) == (2 if bulk else 1)


@given(st.data())
@settings(max_examples=20, deadline=None)
def test_measure_flip_is_timelike(data):
    c = build_memory_circuit(build_layout(3), 5)
    lay = c.layout
    j = data.draw(st.integers(0, lay.num_syndromes - 1))
    t = data.draw(st.integers(2, 4))
    fired, obs = _fired(c, [(_loc(c, CLASS1, BEFORE_MEASURE, lay.num_data + j, t), 1)])
    s = lay.syndromes[j]
    assert fired == sorted([c.detector_index[(s.x, s.y, t)], c.detector_index[(s.x, s.y, t + 1)]])
    assert obs == 0


def test_observable_is_a_logical_line():
    for basis, axis in (("Z", "y"), ("X", "x")):
        c = build_memory_circuit(build_layout(5), 2, basis)
        qs = [q - c.rounds * c.layout.num_syndromes for q in c.observable]
        assert len(qs) == 5
        assert {getattr(c.layout.data[q], axis) for q in qs} == {1}
