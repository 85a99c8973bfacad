"""Per-location marginal error rates of an event catalog.

Each event contributes ``q_i`` at a location; contributions combine through
``1 - t = prod(1 - t_i)`` with ``t = c * p`` and ``c`` the channel's
depolarizing scale (2, 4/3, 16/15).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import BITFLIP1, DEPOL1, DEPOL2, MemoryCircuit
from .noise import (
    EventCatalog,
    ErrorEvent,
    IndependentBlock,
)

SCALE = {BITFLIP1: 2.0, DEPOL1: 4.0 / 3.0, DEPOL2: 16.0 / 15.0}


class InvalidMarginal(ValueError):
    pass


def event_marginal(event: ErrorEvent, location: int) -> float:
    try:
        k = event.sites.index(location)
    except ValueError:
        return 0.0
    return event.probability * event.outcomes.nonidentity_probability(k)


def combine_marginals(channel_kind: str, qs) -> float:
    qs = np.asarray(qs, dtype=float)
    if len(qs) == 1:
        return float(qs[0])
    c = SCALE[channel_kind]
    t = c * qs
    if np.any(t > 1.0):
        raise InvalidMarginal(f"{channel_kind} contribution t_i = {t.max():.4g} exceeds 1")
    if len(qs) > 1000:
        prod = np.exp(np.sum(np.log1p(-t)))
    else:
        prod = np.prod(1.0 - t)
    return float((1.0 - prod) / c)


@dataclass
class MarginalModel:
    circuit: MemoryCircuit
    p: np.ndarray  # one rate per error location

    def __getitem__(self, loc: int) -> float:
        return float(self.p[loc])

    def channel(self, loc: int) -> str:
        return self.circuit.error_locations[loc].channel

    def as_catalog(self) -> EventCatalog:
        """Single-site independent events reproducing this model."""
        cat = EventCatalog(num_locations=len(self.p))
        locs = self.circuit.error_locations
        for kind in (BITFLIP1, DEPOL1, DEPOL2):
            sel = np.array([i for i, L in enumerate(locs) if L.channel == kind and self.p[i] > 0], dtype=np.int64)
            if len(sel):
                cls = locs[sel[0]].cls
                cat.blocks.append(IndependentBlock(cls, kind, sel, self.p[sel].copy()))
        return cat

    def to_table(self) -> str:
        lines = [f"{i} {L.channel} {float(self.p[i])!r}" for i, L in enumerate(self.circuit.error_locations)]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_table())

    @classmethod
    def from_table(cls, circuit: MemoryCircuit, text: str) -> "MarginalModel":
        p = np.zeros(len(circuit.error_locations))
        for line in text.splitlines():
            if not line.strip():
                continue
            loc, channel, val = line.split()
            loc = int(loc)
            if circuit.error_locations[loc].channel != channel:
                raise InvalidMarginal(f"location {loc}: channel {channel} does not match circuit")
            p[loc] = float(val)
        return cls(circuit, p)


def marginalize_catalog(circuit: MemoryCircuit, catalog: EventCatalog) -> MarginalModel:
    nloc = len(circuit.error_locations)
    scale = np.array([SCALE[L.channel] for L in circuit.error_locations])
    log_keep = np.zeros(nloc)
    count = np.zeros(nloc, dtype=np.int64)
    single = np.zeros(nloc)
    for block in catalog.blocks:
        loc, q = block.site_marginals()
        nz = q > 0
        loc, q = loc[nz], q[nz]
        t = scale[loc] * q
        if np.any(t > 1.0):
            bad = loc[np.argmax(t)]
            raise InvalidMarginal(f"location {bad}: contribution t_i = {t.max():.4g} exceeds 1")
        np.add.at(log_keep, loc, np.log1p(-t))
        np.add.at(count, loc, 1)
        single[loc] = q
    p = -np.expm1(log_keep) / scale
    # One contribution: the marginal is the contribution itself.
    p = np.where(count == 1, single, p)
    p[count == 0] = 0.0
    return MarginalModel(circuit, p)
