"""Core event-camera data containers.

Events are kept columnar (one array per field) because every operation in this
package is array-oriented; ``EventRecord`` exists for single-record I/O and
tests. All timestamps are integer microseconds. Polarity is exactly +1 or -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IGNORE_LABEL = 255


class InputError(ValueError):
    """Caller handed an operation data violating its preconditions."""


class ConfigurationError(ValueError):
    """A configuration value is outside its legal range."""


class ContractViolation(RuntimeError):
    """An internal pipeline contract was broken (bug, not bad input)."""


@dataclass(frozen=True)
class EventRecord:
    x: int
    y: int
    t: int  # microseconds
    p: int  # +1 or -1

    def __post_init__(self):
        if self.p not in (1, -1):
            raise InputError(f"polarity must be +1 or -1, got {self.p}")
        if self.x < 0 or self.y < 0 or self.t < 0:
            raise InputError("x, y, t must be non-negative")


@dataclass
class EventStream:
    """Time-ordered events inside the half-open-left window (t_start, t_end]."""

    x: np.ndarray  # int64
    y: np.ndarray  # int64
    t: np.ndarray  # int64, microseconds, non-decreasing
    p: np.ndarray  # int64, +-1
    t_start: int
    t_end: int
    width: int
    height: int

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.int64)
        self.p = np.asarray(self.p, dtype=np.int64)
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise InputError("event field arrays must have equal length")
        if n:
            if np.any(np.diff(self.t) < 0):
                raise InputError("event timestamps must be non-decreasing")
            if self.t[0] <= self.t_start or self.t[-1] > self.t_end:
                raise InputError("events must lie in (t_start, t_end]")
            if np.any((self.p != 1) & (self.p != -1)):
                raise InputError("polarities must be +1 or -1")
            if np.any(self.x < 0) or np.any(self.x >= self.width):
                raise InputError("event x out of sensor bounds")
            if np.any(self.y < 0) or np.any(self.y >= self.height):
                raise InputError("event y out of sensor bounds")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration_us(self) -> int:
        return self.t_end - self.t_start

    @classmethod
    def empty(cls, width: int, height: int, t_start: int, t_end: int) -> "EventStream":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), z.copy(), t_start, t_end, width, height)

    def records(self):
        for i in range(len(self)):
            yield EventRecord(int(self.x[i]), int(self.y[i]), int(self.t[i]), int(self.p[i]))


def sort_events(x, y, t, p):
    """Canonical event order: by (t, y, x, p). Stable and total up to duplicates."""
    order = np.lexsort((p, x, y, t))
    return x[order], y[order], t[order], p[order]


@dataclass
class VoxelGrid:
    """Signed polarity mass binned into ``bins`` temporal slices, HxWxB."""

    data: np.ndarray
    bins: int = field(default=0)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise InputError("voxel grid must be HxWxB")
        if self.bins == 0:
            self.bins = self.data.shape[2]
        elif self.bins != self.data.shape[2]:
            raise InputError("bins does not match data shape")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def total_mass(self) -> float:
        return float(self.data.sum())


@dataclass
class SemanticMask:
    """Per-pixel class labels in {1..categories} plus the ignore value 255."""

    labels: np.ndarray
    categories: int = 11

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise InputError("mask must be 2-D")
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise InputError("mask labels must be integers")
        valid = (self.labels == IGNORE_LABEL) | (
            (self.labels >= 1) & (self.labels <= self.categories)
        )
        if not valid.all():
            bad = np.unique(self.labels[~valid])
            raise InputError(f"labels outside 1..{self.categories} u {{255}}: {bad}")

    @property
    def shape(self):
        return self.labels.shape


@dataclass
class BoundaryMap:
    """Binary semantic-edge map, same resolution as the mask it came from."""

    edges: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges)
        if self.edges.ndim != 2:
            raise InputError("boundary map must be 2-D")
        if self.edges.dtype != np.uint8:
            if not np.isin(self.edges, (0, 1)).all():
                raise InputError("boundary map must be binary")
            self.edges = self.edges.astype(np.uint8)
        elif not np.isin(self.edges, (0, 1)).all():
            raise InputError("boundary map must be binary")

    @property
    def shape(self):
        return self.edges.shape


@dataclass(frozen=True)
class CorrelationSample:
    """One point of the events-vs-edge statistic: pixel ratio, event ratio, dilation."""

    edge_pixel_ratio: float
    edge_event_ratio: float
    dilation_iters: int

    def __post_init__(self):
        if not (0.0 <= self.edge_pixel_ratio <= 1.0 and 0.0 <= self.edge_event_ratio <= 1.0):
            raise InputError("ratios must lie in [0, 1]")
        if self.dilation_iters < 0:
            raise InputError("dilation_iters must be >= 0")
