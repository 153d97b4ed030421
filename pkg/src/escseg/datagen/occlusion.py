"""Spatial occlusion protocol: rectangular masking of frames and event streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..events.types import EventStream, InputError

TARGET_RGB = "rgb"
TARGET_EVENT = "event"
TARGET_BOTH = "both"
TARGET_NONE = "none"
_TARGETS = (TARGET_RGB, TARGET_EVENT, TARGET_BOTH, TARGET_NONE)

DEFAULT_RGB_ORIGIN = (350, 200)
DEFAULT_EVENT_ORIGIN = (150, 150)
DEFAULT_SIZE = 100


@dataclass(frozen=True)
class OcclusionSpec:
    """Rectangle <x0, y0, w, h> masked out of the named modality."""

    x0: int
    y0: int
    w: int
    h: int
    target: str

    def __post_init__(self):
        if self.target not in _TARGETS:
            raise InputError(f"target must be one of {_TARGETS}, got {self.target!r}")
        if self.w < 0 or self.h < 0:
            raise InputError("rectangle size must be non-negative")

    def clipped(self, width: int, height: int) -> Tuple[int, int, int, int]:
        # the part outside the frame is ignored
        x0 = max(0, self.x0)
        y0 = max(0, self.y0)
        x1 = min(width, self.x0 + self.w)
        y1 = min(height, self.y0 + self.h)
        return x0, y0, max(0, x1 - x0), max(0, y1 - y0)


def default_specs(target: str, size: int = DEFAULT_SIZE,
                  rgb_origin: Tuple[int, int] = DEFAULT_RGB_ORIGIN,
                  event_origin: Tuple[int, int] = DEFAULT_EVENT_ORIGIN) -> List[OcclusionSpec]:
    """The evaluation protocol's spec list: each modality keeps its own origin."""
    if target not in _TARGETS:
        raise InputError(f"target must be one of {_TARGETS}, got {target!r}")
    specs = []
    if target in (TARGET_RGB, TARGET_BOTH):
        specs.append(OcclusionSpec(rgb_origin[0], rgb_origin[1], size, size, TARGET_RGB))
    if target in (TARGET_EVENT, TARGET_BOTH):
        specs.append(OcclusionSpec(event_origin[0], event_origin[1], size, size,
                                   TARGET_EVENT))
    return specs


def apply_occlusion(rgb: np.ndarray, stream: EventStream,
                    spec: OcclusionSpec) -> Tuple[np.ndarray, EventStream]:
    """Zero out masked pixels / drop masked events; inputs are not mutated."""
    rgb = np.array(rgb, copy=True)
    if spec.target == TARGET_NONE:
        return rgb, stream

    if spec.target in (TARGET_RGB, TARGET_BOTH):
        x0, y0, w, h = spec.clipped(rgb.shape[1], rgb.shape[0])
        rgb[y0:y0 + h, x0:x0 + w] = 0.0

    if spec.target in (TARGET_EVENT, TARGET_BOTH):
        x0, y0, w, h = spec.clipped(stream.width, stream.height)
        inside = ((stream.x >= x0) & (stream.x < x0 + w) &
                  (stream.y >= y0) & (stream.y < y0 + h))
        keep = ~inside
        stream = EventStream(stream.x[keep], stream.y[keep], stream.t[keep],
                             stream.p[keep], stream.t_start, stream.t_end,
                             stream.width, stream.height)
    return rgb, stream


def apply_occlusions(rgb: np.ndarray, stream: EventStream,
                     specs: Sequence[OcclusionSpec]) -> Tuple[np.ndarray, EventStream]:
    for spec in specs:
        rgb, stream = apply_occlusion(rgb, stream, spec)
    return rgb, stream
