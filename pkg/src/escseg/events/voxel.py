"""Voxel-grid encoding of event streams."""

from __future__ import annotations

import numpy as np

from .types import EventStream, InputError, VoxelGrid


def build_voxel_grid(stream: EventStream, bins: int = 5) -> VoxelGrid:
    """Bin signed polarities into ``bins`` temporal slices with bilinear splitting.

    Normalized time t* = (bins-1) * (t - t_start) / (t_end - t_start) splits each
    event's polarity between the two adjacent bins; total signed mass is conserved.
    No spatial interpolation: events already sit on integer pixels.
    """
    if bins < 1:
        raise InputError(f"bins must be >= 1, got {bins}")
    if stream.t_end <= stream.t_start:
        raise InputError("degenerate window: t_end must exceed t_start")
    H, W = stream.height, stream.width
    grid = np.zeros(H * W * bins, dtype=np.float64)
    n = len(stream)
    if n == 0:
        return VoxelGrid(grid.reshape(H, W, bins))
    if bins == 1:
        tstar = np.zeros(n, dtype=np.float64)
    else:
        tstar = (bins - 1) * (stream.t - stream.t_start) / float(stream.t_end - stream.t_start)
    left = np.clip(np.floor(tstar).astype(np.int64), 0, bins - 1)
    frac = tstar - left
    base = (stream.y * W + stream.x) * bins
    pol = stream.p.astype(np.float64)
    grid += np.bincount(base + left, weights=pol * (1.0 - frac), minlength=grid.size)
    right = np.minimum(left + 1, bins - 1)  # frac is 0 whenever left is the last bin
    grid += np.bincount(base + right, weights=pol * frac, minlength=grid.size)
    return VoxelGrid(grid.reshape(H, W, bins))
