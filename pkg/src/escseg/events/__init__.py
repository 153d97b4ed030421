"""Event records, voxel grids, semantic boundaries, correlation stats, simulation."""

from .boundary import dilate_boundary, extract_boundary
from .correlation import correlation_experiment, edge_event_ratios
from .io import read_events, read_events_csv, write_events
from .kernel import kernel_backend
from .simulator import EventSimConfig, inject_noise_events, simulate_events
from .types import (
    IGNORE_LABEL,
    BoundaryMap,
    ConfigurationError,
    ContractViolation,
    CorrelationSample,
    EventRecord,
    EventStream,
    InputError,
    SemanticMask,
    VoxelGrid,
    sort_events,
)
from .voxel import build_voxel_grid

__all__ = [
    "IGNORE_LABEL", "BoundaryMap", "ConfigurationError", "ContractViolation",
    "CorrelationSample", "EventRecord", "EventStream", "InputError",
    "SemanticMask", "VoxelGrid", "sort_events", "extract_boundary",
    "dilate_boundary", "build_voxel_grid", "edge_event_ratios",
    "correlation_experiment", "read_events", "read_events_csv", "write_events",
    "kernel_backend", "EventSimConfig", "simulate_events", "inject_noise_events",
]
