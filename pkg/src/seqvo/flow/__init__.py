"""Optical-flow front end: dense flow, flow cache files, encoder normalization."""

from ._backend import BACKEND
from .fileio import load_precomputed_flow, write_flow
from .frontend import (
    FlowProvider,
    OnTheFlyFlow,
    PrecomputedFlow,
    cache_path,
    compute_flow,
    flow_to_encoder_input,
    resize_flow,
    to_gray,
)

__all__ = [
    "BACKEND",
    "FlowProvider",
    "OnTheFlyFlow",
    "PrecomputedFlow",
    "cache_path",
    "compute_flow",
    "flow_to_encoder_input",
    "load_precomputed_flow",
    "resize_flow",
    "to_gray",
    "write_flow",
]
