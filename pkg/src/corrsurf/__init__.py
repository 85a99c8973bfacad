"""Surface-code memory under temporally correlated circuit-level noise."""

from .circuit import build_layout, build_memory_circuit, enumerate_error_locations
from .noise import NoiseSpec, CorrelatedSpec, Independent, build_event_catalog, event_probability
from .marginals import marginalize_catalog, MarginalModel
from .framesim import sample, ShotBatch

__all__ = [
    "build_layout",
    "build_memory_circuit",
    "enumerate_error_locations",
    "NoiseSpec",
    "CorrelatedSpec",
    "Independent",
    "build_event_catalog",
    "event_probability",
    "marginalize_catalog",
    "MarginalModel",
    "sample",
    "ShotBatch",
]
