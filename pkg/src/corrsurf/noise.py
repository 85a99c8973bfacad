"""Error channels, per-class noise settings and error-event catalogs.

Pauli codes: a single-qubit Pauli is two bits ``x | z << 1`` (I=0, X=1, Z=2,
Y=3).  A two-qubit Pauli packs the first qubit in the low two bits and the
second qubit in the next two.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

from .circuit import (
    BITFLIP1,
    CLASS0,
    CLASS1,
    CLASS2,
    DEPOL1,
    DEPOL2,
    InvalidParameter,
    MemoryCircuit,
)

log = logging.getLogger(__name__)

I, X, Z, Y = 0, 1, 2, 3
PAULI_NAMES = "IXZY"

POLYNOMIAL, EXPONENTIAL = "polynomial", "exponential"
PAIRWISE, STREAKY = "pairwise", "streaky"

# Number of non-identity Paulis in each channel's support.
SUPPORT_SIZE = {BITFLIP1: 1, DEPOL1: 3, DEPOL2: 15}
CHANNEL_OF_CLASS = {CLASS0: DEPOL1, CLASS1: BITFLIP1, CLASS2: DEPOL2}
FAMILIES_OF_CLASS = {
    CLASS0: ("class0_idle",),
    CLASS1: ("class1_reset", "class1_measure"),
    CLASS2: ("class2_cnot",),
}


@dataclass(frozen=True)
class Channel:
    kind: str
    p: float

    def __post_init__(self):
        if self.kind not in SUPPORT_SIZE:
            raise InvalidParameter(f"unknown channel {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameter(f"channel probability {self.p} outside [0, 1]")

    def support(self) -> tuple[int, ...]:
        """Non-identity Pauli codes the channel can apply."""
        if self.kind == BITFLIP1:
            return (X,)
        if self.kind == DEPOL1:
            return (X, Z, Y)
        return tuple(range(1, 16))


def sample_channel(channel: Channel, rng: np.random.Generator, size=None):
    """Draw Pauli codes from ``channel``; identity with probability ``1 - p``."""
    support = np.asarray(channel.support())
    hit = rng.random(size) < channel.p
    which = support[rng.integers(0, len(support), size)]
    return np.where(hit, which, 0)


@dataclass(frozen=True)
class Independent:
    p: float


@dataclass(frozen=True)
class CorrelatedSpec:
    structure: str
    decay: str
    A: float
    exponent: float
    p: float

    def __post_init__(self):
        if self.structure not in (PAIRWISE, STREAKY):
            raise InvalidParameter(f"unknown structure {self.structure!r}")
        if self.decay not in (POLYNOMIAL, EXPONENTIAL):
            raise InvalidParameter(f"unknown decay {self.decay!r}")
        if self.A < 0 or self.p < 0 or not self.exponent > 0:
            raise InvalidParameter(f"invalid correlated parameters {self}")


ClassNoise = Union[None, Independent, CorrelatedSpec]


@dataclass(frozen=True)
class NoiseSpec:
    class0: ClassNoise = None
    class1: ClassNoise = None
    class2: ClassNoise = None

    def for_class(self, cls: str) -> ClassNoise:
        return getattr(self, cls)

    @classmethod
    def standard(cls, p: float) -> "NoiseSpec":
        return cls(Independent(p), Independent(p), Independent(p))

    @classmethod
    def full_correlated(cls, structure: str, p: float, A: float = 1.0, exponent: float = 2.0,
                        decay: str = POLYNOMIAL) -> "NoiseSpec":
        """All three classes correlated with ``A0 = A1 = 2 * A2 = A``."""
        mk = lambda a: CorrelatedSpec(structure, decay, a, exponent, p)  # noqa: E731
        return cls(mk(A), mk(A), mk(A / 2))

    @classmethod
    def single_class(cls, which: str, structure: str, p: float, A: float = 1.0,
                     exponent: float = 2.0, decay: str = POLYNOMIAL) -> "NoiseSpec":
        """One class correlated, the other two independent at rate ``p``."""
        parts = {c: Independent(p) for c in (CLASS0, CLASS1, CLASS2)}
        parts[which] = CorrelatedSpec(structure, decay, A, exponent, p)
        return cls(**parts)

    def to_dict(self) -> dict:
        out = {}
        for c in (CLASS0, CLASS1, CLASS2):
            v = self.for_class(c)
            if v is None:
                out[c] = {"type": "none"}
            elif isinstance(v, Independent):
                out[c] = {"type": "independent", "p": v.p}
            else:
                out[c] = {"type": "correlated", "structure": v.structure, "decay": v.decay,
                          "A": v.A, "exponent": "inf" if math.isinf(v.exponent) else v.exponent,
                          "p": v.p}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        parts = {}
        for c in (CLASS0, CLASS1, CLASS2):
            v = d.get(c) or {"type": "none"}
            kind = v.get("type", "correlated" if "structure" in v else "independent")
            if kind == "none":
                parts[c] = None
            elif kind == "independent":
                parts[c] = Independent(float(v["p"]))
            elif kind == "correlated":
                parts[c] = CorrelatedSpec(v["structure"], v.get("decay", POLYNOMIAL), float(v["A"]),
                                          float(v.get("exponent", 2.0)), float(v["p"]))
            else:
                raise InvalidParameter(f"unknown noise type {kind!r} for {c}")
        return cls(**parts)

    def scaled(self, p: float) -> "NoiseSpec":
        """Same structure with every characteristic rate replaced by ``p``."""
        parts = {}
        for c in (CLASS0, CLASS1, CLASS2):
            v = self.for_class(c)
            if isinstance(v, Independent):
                v = Independent(p)
            elif isinstance(v, CorrelatedSpec):
                v = CorrelatedSpec(v.structure, v.decay, v.A, v.exponent, p)
            parts[c] = v
        return NoiseSpec(**parts)


def raw_event_probability(spec: CorrelatedSpec, dt):
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 1):
        raise InvalidParameter("time separation must be >= 1")
    n = spec.exponent
    if spec.decay == POLYNOMIAL:
        if math.isinf(n):
            return np.where(dt == 1, spec.A * spec.p, 0.0)
        return spec.A * spec.p / dt**n
    if math.isinf(n):
        return np.zeros_like(dt)
    return spec.A * spec.p / n**dt


def event_probability(spec: CorrelatedSpec, dt):
    """``A p / dt^n`` (polynomial) or ``A p / n^dt`` (exponential), clipped to [0, 1]."""
    out = np.clip(raw_event_probability(spec, dt), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Events and outcome distributions


@dataclass(frozen=True)
class JointOutcomes:
    """Explicit table of per-site Pauli configurations and their probabilities."""

    configs: np.ndarray  # [k, nsites] Pauli codes
    probs: np.ndarray  # [k]

    def nonidentity_probability(self, site: int) -> float:
        return float(self.probs[self.configs[:, site] != 0].sum())

    def total(self) -> float:
        return float(self.probs.sum())


@dataclass(frozen=True)
class ProductOutcomes:
    """Independent per-site distributions over Pauli codes."""

    codes: np.ndarray  # [ncodes]
    probs: np.ndarray  # [ncodes], shared by every site
    nsites: int

    def nonidentity_probability(self, site: int) -> float:
        if not 0 <= site < self.nsites:
            return 0.0
        return float(self.probs[self.codes != 0].sum())

    def total(self) -> float:
        return float(self.probs.sum())


@dataclass(frozen=True)
class ErrorEvent:
    id: int
    probability: float
    sites: tuple[int, ...]  # location ids
    outcomes: Union[JointOutcomes, ProductOutcomes]


def _pairwise_outcomes(cls: str) -> JointOutcomes:
    if cls == CLASS0:
        codes = np.arange(1, 16)
        configs = np.stack([codes & 3, codes >> 2], axis=1)
    elif cls == CLASS1:
        configs = np.array([[X, X]])
    else:
        codes = np.arange(1, 256)
        configs = np.stack([codes & 15, codes >> 4], axis=1)
    return JointOutcomes(configs, np.full(len(configs), 1.0 / len(configs)))


def _streak_outcomes(cls: str, nsites: int) -> ProductOutcomes:
    ncodes = {CLASS0: 4, CLASS1: 2, CLASS2: 16}[cls]
    return ProductOutcomes(np.arange(ncodes), np.full(ncodes, 1.0 / ncodes), nsites)


# Per-site non-identity probability of one activated event of each kind.
PAIRWISE_SITE_Q = {CLASS0: 12 / 15, CLASS1: 1.0, CLASS2: 240 / 255}
STREAK_SITE_Q = {CLASS0: 3 / 4, CLASS1: 1 / 2, CLASS2: 15 / 16}


@dataclass
class IndependentBlock:
    cls: str
    channel: str
    loc: np.ndarray
    prob: np.ndarray

    def __len__(self):
        return len(self.loc)

    def site_marginals(self):
        return self.loc, self.prob


@dataclass
class PairwiseBlock:
    cls: str
    channel: str
    loc_a: np.ndarray
    loc_b: np.ndarray
    prob: np.ndarray

    def __len__(self):
        return len(self.loc_a)

    def site_marginals(self):
        q = self.prob * PAIRWISE_SITE_Q[self.cls]
        return np.concatenate([self.loc_a, self.loc_b]), np.concatenate([q, q])


@dataclass
class StreakyBlock:
    """Streak over rounds ``t1..t2`` inclusive at location ``base + (t - 1) * stride``."""

    cls: str
    channel: str
    base: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    prob: np.ndarray
    stride: int

    def __len__(self):
        return len(self.base)

    def lengths(self):
        return self.t2 - self.t1 + 1

    def expand(self, idx: np.ndarray):
        """Covered (event position, location) pairs for events ``idx``."""
        lens = self.lengths()[idx]
        rep = np.repeat(np.arange(len(idx)), lens)
        starts = np.cumsum(lens) - lens
        offs = np.arange(lens.sum()) - np.repeat(starts, lens)
        t = self.t1[idx][rep] + offs
        return rep, self.base[idx][rep] + (t - 1) * self.stride

    def site_marginals(self):
        rep, loc = self.expand(np.arange(len(self)))
        return loc, self.prob[rep] * STREAK_SITE_Q[self.cls]


@dataclass
class EventCatalog:
    num_locations: int
    blocks: list = field(default_factory=list)
    clipped: int = 0

    def __len__(self):
        return sum(len(b) for b in self.blocks)

    def events(self) -> Iterator[ErrorEvent]:
        """Explicit ErrorEvent objects, numbered in block order."""
        eid = 0
        for b in self.blocks:
            if isinstance(b, IndependentBlock):
                ch = Channel(b.channel, 1.0)
                sup = np.asarray(ch.support())
                out = JointOutcomes(sup[:, None], np.full(len(sup), 1.0 / len(sup)))
                for loc, p in zip(b.loc, b.prob):
                    yield ErrorEvent(eid, float(p), (int(loc),), out)
                    eid += 1
            elif isinstance(b, PairwiseBlock):
                out = _pairwise_outcomes(b.cls)
                for la, lb, p in zip(b.loc_a, b.loc_b, b.prob):
                    yield ErrorEvent(eid, float(p), (int(la), int(lb)), out)
                    eid += 1
            else:
                rep, locs = b.expand(np.arange(len(b)))
                bounds = np.cumsum(b.lengths())
                start = 0
                for i, stop in enumerate(bounds):
                    sites = tuple(int(v) for v in locs[start:stop])
                    yield ErrorEvent(eid, float(b.prob[i]), sites, _streak_outcomes(b.cls, len(sites)))
                    start = stop
                    eid += 1


def _round_pairs(rounds: int):
    t1, t2 = np.triu_indices(rounds, k=1)
    return t1 + 1, t2 + 1


def build_event_catalog(circuit: MemoryCircuit, spec: NoiseSpec) -> EventCatalog:
    n = circuit.rounds
    stride = circuit.locations_per_round
    cat = EventCatalog(num_locations=len(circuit.error_locations))
    t1, t2 = _round_pairs(n)
    for cls in (CLASS0, CLASS1, CLASS2):
        noise = spec.for_class(cls)
        if noise is None:
            continue
        channel = CHANNEL_OF_CLASS[cls]
        for fam in FAMILIES_OF_CLASS[cls]:
            nsites = circuit.family_sizes[fam]
            if isinstance(noise, Independent):
                if noise.p <= 0:
                    continue
                t = np.repeat(np.arange(1, n + 1), nsites)
                site = np.tile(np.arange(nsites), n)
                loc = circuit.location_id(fam, t, site)
                cat.blocks.append(IndependentBlock(cls, channel, loc, np.full(len(loc), float(noise.p))))
                continue
            if len(t1) == 0:
                continue
            raw = raw_event_probability(noise, t2 - t1)
            clipped = int(np.count_nonzero(raw > 1.0))
            if clipped:
                log.warning("%d %s event probabilities clipped to 1 (A=%g, p=%g)", clipped, cls, noise.A, noise.p)
                cat.clipped += clipped * nsites
            pr = np.clip(raw, 0.0, 1.0)
            keep = pr > 0
            pt1, pt2, pr = t1[keep], t2[keep], pr[keep]
            site = np.repeat(np.arange(nsites), len(pr))
            et1, et2 = np.tile(pt1, nsites), np.tile(pt2, nsites)
            prob = np.tile(pr, nsites)
            if noise.structure == PAIRWISE:
                cat.blocks.append(PairwiseBlock(cls, channel, circuit.location_id(fam, et1, site),
                                                circuit.location_id(fam, et2, site), prob))
            else:
                cat.blocks.append(StreakyBlock(cls, channel, circuit.location_id(fam, 1, site),
                                               et1, et2, prob, stride))
    return cat
