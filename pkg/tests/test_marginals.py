import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrsurf.circuit import CLASS0, CLASS1, CLASS2, build_layout, build_memory_circuit
from corrsurf.framesim import chunk_rng, draw_errors
from corrsurf.marginals import (
    InvalidMarginal,
    MarginalModel,
    combine_marginals,
    event_marginal,
    marginalize_catalog,
)
from corrsurf.noise import (
    CorrelatedSpec,
    ErrorEvent,
    JointOutcomes,
    NoiseSpec,
    build_event_catalog,
)


def _pair_event(cls, p):
    c = build_memory_circuit(build_layout(3), 2)
    spec = NoiseSpec(**{cls: CorrelatedSpec("pairwise", "polynomial", 1.0, 2.0, p)})
    return next(build_event_catalog(c, spec).events())


def test_event_marginal_examples():
    e1 = _pair_event(CLASS1, 1e-3)
    assert event_marginal(e1, e1.sites[0]) == pytest.approx(1e-3, rel=1e-12)
    assert event_marginal(e1, e1.sites[1]) == pytest.approx(1e-3, rel=1e-12)
    e0 = _pair_event(CLASS0, 1e-3)
    # Count, by enumeration, two-time single-qubit Paulis that are non-identity at the first time.
    nonid = sum(1 for a in range(4) for b in range(4) if (a, b) != (0, 0) and a != 0)
    assert nonid == 12
    assert event_marginal(e0, e0.sites[0]) == pytest.approx(1e-3 * nonid / 15, rel=1e-12)
    zero = ErrorEvent(0, 0.0, (0, 1), JointOutcomes(np.array([[1, 1]]), np.array([1.0])))
    assert event_marginal(zero, 0) == 0.0
    assert event_marginal(e1, 10**6) == 0.0


def _twirl(kind, qs):
    """Compose Pauli channels through their transfer eigenvalues."""
    if kind == "bitflip1":
        lam = np.prod([1 - 2 * q for q in qs])
        return (1 - lam) / 2
    dim2 = 4 if kind == "depol1" else 16
    lam = np.prod([1 - dim2 * q / (dim2 - 1) for q in qs])
    return (1 - lam) * (dim2 - 1) / dim2


def test_combine_examples():
    assert combine_marginals("bitflip1", [0.1, 0.1]) == pytest.approx(0.18, abs=1e-12)
    assert combine_marginals("depol1", [0.15, 0.15]) == pytest.approx(0.27, abs=1e-12)
    assert 1 - 4 / 3 * 0.27 == pytest.approx(0.8**2)
    assert combine_marginals("depol2", [0.0123]) == 0.0123


@given(st.sampled_from(["bitflip1", "depol1", "depol2"]),
       st.lists(st.floats(0, 0.2), min_size=1, max_size=8))
def test_combine_matches_twirl_oracle(kind, qs):
    assert combine_marginals(kind, qs) == pytest.approx(_twirl(kind, qs), abs=1e-12)


@given(st.sampled_from(["bitflip1", "depol1", "depol2"]),
       st.lists(st.floats(0, 0.2), min_size=2, max_size=8), st.randoms())
def test_combine_order_invariant(kind, qs, r):
    shuffled = list(qs)
    r.shuffle(shuffled)
    assert combine_marginals(kind, shuffled) == pytest.approx(combine_marginals(kind, qs), abs=1e-12)


@given(st.sampled_from(["bitflip1", "depol1", "depol2"]),
       st.lists(st.floats(0, 0.2), min_size=2, max_size=6), st.floats(0, 0.05))
def test_combine_monotone(kind, qs, bump):
    hi = [qs[0] + bump] + qs[1:]
    assert combine_marginals(kind, hi) >= combine_marginals(kind, qs) - 1e-15


def test_combine_many_uses_stable_product():
    qs = np.full(5000, 1e-5)
    assert combine_marginals("depol1", qs) == pytest.approx(_twirl("depol1", qs), rel=1e-9)


def test_combine_rejects_unphysical():
    with pytest.raises(InvalidMarginal):
        combine_marginals("bitflip1", [0.6, 0.1])


def test_independent_identity(d3n4):
    cat = build_event_catalog(d3n4, NoiseSpec.standard(1e-3))
    m = marginalize_catalog(d3n4, cat)
    assert np.all(m.p == 1e-3)


def test_idempotent(d3n6):
    m = marginalize_catalog(d3n6, build_event_catalog(d3n6, NoiseSpec.full_correlated("streaky", 1e-3)))
    again = marginalize_catalog(d3n6, m.as_catalog())
    assert np.array_equal(again.p, m.p)


def test_middle_rounds_highest():
    c = build_memory_circuit(build_layout(3), 9)
    spec = NoiseSpec(class1=CorrelatedSpec("pairwise", "polynomial", 1.0, 2.0, 1e-3))
    m = marginalize_catalog(c, build_event_catalog(c, spec))
    per_round = [m[c.location_id("class1_measure", t, 0)] for t in range(1, 10)]
    assert per_round[4] == max(per_round)
    assert per_round[0] < per_round[4] and per_round[8] < per_round[4]
    assert per_round == pytest.approx(per_round[::-1], rel=1e-12)


def test_explicit_events_agree_with_blocks(d3n4):
    """Fast block path versus a per-event accumulation with combine_marginals."""
    for structure in ("pairwise", "streaky"):
        cat = build_event_catalog(d3n4, NoiseSpec.full_correlated(structure, 2e-3))
        m = marginalize_catalog(d3n4, cat)
        qs = {}
        for e in cat.events():
            for s in e.sites:
                qs.setdefault(s, []).append(event_marginal(e, s))
        for loc, lst in qs.items():
            assert m[loc] == pytest.approx(combine_marginals(m.channel(loc), lst), rel=1e-10, abs=1e-18)


def test_table_round_trip(d3n4):
    m = marginalize_catalog(d3n4, build_event_catalog(d3n4, NoiseSpec.full_correlated("pairwise", 1e-3)))
    back = MarginalModel.from_table(d3n4, m.to_table())
    assert np.array_equal(back.p, m.p)


@pytest.mark.parametrize("structure", ["pairwise", "streaky"])
@pytest.mark.parametrize("cls", [CLASS0, CLASS1, CLASS2])
def test_monte_carlo_marginals_per_class(structure, cls):
    c = build_memory_circuit(build_layout(3), 4)
    spec = NoiseSpec(**{cls: CorrelatedSpec(structure, "polynomial", 10.0, 2.0, 1e-2)})
    cat = build_event_catalog(c, spec)
    m = marginalize_catalog(c, cat)
    shots = 40_000
    hits = draw_errors(cat, shots, chunk_rng(7, 0)).combined()
    freq = np.bincount(hits.loc, minlength=len(m.p)) / shots
    active = m.p > 0
    z = (freq[active] - m.p[active]) / np.sqrt(m.p[active] * (1 - m.p[active]) / shots)
    # z-scores of a correct model are approximately standard normal
    assert abs(z.mean()) < 4 / math.sqrt(len(z))
    assert 0.6 < z.std() < 1.4
    assert np.mean(np.abs(z) <= 3) >= 0.97
    assert np.all(freq[~active] == 0)
