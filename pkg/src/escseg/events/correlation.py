"""Event-vs-semantic-edge correlation statistics.

Quantifies how strongly events cluster on semantic boundaries: compare the
fraction of the image covered by the (dilated) boundary with the fraction of
events landing on it. Polarities are counted combined, not per polarity.
"""

from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .boundary import dilate_boundary, extract_boundary
from .types import BoundaryMap, CorrelationSample, EventStream, InputError, SemanticMask


def edge_event_ratios(
    stream: EventStream, boundary: BoundaryMap, dilation_iters: int = 0
) -> CorrelationSample:
    """Ratio of boundary pixels to all pixels, and of on-boundary events to all events."""
    H, W = boundary.shape
    if (stream.height, stream.width) != (H, W):
        raise InputError(
            f"resolution mismatch: stream {stream.height}x{stream.width}, boundary {H}x{W}"
        )
    pixel_ratio = float(boundary.edges.sum()) / float(H * W)
    n = len(stream)
    if n == 0:
        event_ratio = 0.0
    else:
        on_edge = boundary.edges[stream.y, stream.x].astype(bool)
        event_ratio = float(on_edge.sum()) / float(n)
    return CorrelationSample(pixel_ratio, event_ratio, dilation_iters)


def correlation_experiment(
    samples: Sequence[Tuple[EventStream, SemanticMask]],
    max_iters: int = 10,
    seed: int = 0,
) -> List[CorrelationSample]:
    """Per sample: random dilation amount in [0, max_iters], then the ratio pair."""
    if len(samples) == 0:
        raise InputError("need at least one (stream, mask) sample")
    if max_iters < 1:
        raise InputError(f"max_iters must be >= 1, got {max_iters}")
    rng = np.random.default_rng(seed)
    out: List[CorrelationSample] = []
    for stream, mask in samples:
        iters = int(rng.integers(0, max_iters + 1))
        b = dilate_boundary(extract_boundary(mask), iters)
        out.append(edge_event_ratios(stream, b, iters))
    return out
