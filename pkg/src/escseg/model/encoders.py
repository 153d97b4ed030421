"""Toy modality backbones and the edge resolver.

Four-stage convolutional pyramids with overlapping-patch downsampling stand in
for the transformer backbones at desk scale; the image branch is wider than the
event branch. The resolver collapses a pyramid to one stride-4, n-channel map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import torch
import torch.nn.functional as F

from ..dictionary.tokenizer import ResidualBlock
from ..events.types import ConfigurationError, ContractViolation, InputError, VoxelGrid
from ..nnutil import DTYPE, as_tensor

log = logging.getLogger("escseg")


@dataclass
class FeatureMap:
    """Channel-last feature tensor with its downsampling stride."""

    data: torch.Tensor  # (H_f, W_f, C_f)
    stride: int

    def __post_init__(self):
        if self.data.dim() != 3:
            raise InputError("feature map must be H_f x W_f x C_f")
        if self.stride not in (4, 8, 16, 32):
            raise InputError(f"stride must be one of 4/8/16/32, got {self.stride}")

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class EncoderConfig:
    image_widths: Tuple[int, ...] = (32, 64, 128, 160)
    image_depths: Tuple[int, ...] = (2, 2, 2, 2)
    event_widths: Tuple[int, ...] = (16, 32, 64, 96)
    event_depths: Tuple[int, ...] = (1, 1, 1, 1)
    voxel_bins: int = 5
    image_channels: int = 3

    def __post_init__(self):
        for name in ("image_widths", "image_depths", "event_widths", "event_depths"):
            if len(getattr(self, name)) != 4:
                raise ConfigurationError(f"{name} must list 4 stages")
        if any(iw < ew for iw, ew in zip(self.image_widths, self.event_widths)):
            raise ConfigurationError(
                "image branch capacity must dominate the event branch per stage")
        if self.voxel_bins < 1:
            raise ConfigurationError("voxel_bins must be >= 1")


class _Stage(torch.nn.Module):
    """Overlapping-patch downsample then `depth` residual conv units."""

    def __init__(self, c_in: int, c_out: int, depth: int, first: bool):
        super().__init__()
        if first:
            self.patch = torch.nn.Conv2d(c_in, c_out, 7, stride=4, padding=3, dtype=DTYPE)
        else:
            self.patch = torch.nn.Conv2d(c_in, c_out, 3, stride=2, padding=1, dtype=DTYPE)
        self.convs = torch.nn.ModuleList(
            torch.nn.Conv2d(c_out, c_out, 3, padding=1, dtype=DTYPE) for _ in range(depth))

    def forward(self, x):
        h = F.relu(self.patch(x))
        for conv in self.convs:
            h = h + F.relu(conv(h))
        return h


class PyramidEncoder(torch.nn.Module):
    def __init__(self, in_channels: int, widths: Sequence[int], depths: Sequence[int]):
        super().__init__()
        stages = []
        prev = in_channels
        for i, (w, d) in enumerate(zip(widths, depths)):
            stages.append(_Stage(prev, w, d, first=(i == 0)))
            prev = w
        self.stages = torch.nn.ModuleList(stages)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        outs = []
        h = x
        for stage in self.stages:
            h = stage(h)
            outs.append(h)
        return outs


_STRIDES = (4, 8, 16, 32)


def encode_image(img, encoder: PyramidEncoder) -> List[FeatureMap]:
    """RGB image (H, W, 3) -> four FeatureMaps at strides 4/8/16/32."""
    t = as_tensor(img)
    if t.dim() != 3 or t.shape[2] != 3:
        raise InputError("image must be H x W x 3")
    H, W = t.shape[:2]
    if H % 32 or W % 32:
        raise ContractViolation(
            f"encoder got {H}x{W}; the harness must resize to multiples of 32")
    feats = encoder(t.permute(2, 0, 1)[None])
    return [FeatureMap(f[0].permute(1, 2, 0), s) for f, s in zip(feats, _STRIDES)]


def encode_events(voxels: VoxelGrid, encoder: PyramidEncoder,
                  expected_bins: int = 5) -> List[FeatureMap]:
    """Voxel grid (H, W, B) -> four FeatureMaps at strides 4/8/16/32."""
    if voxels.bins != expected_bins:
        raise ConfigurationError(
            f"voxel grid has {voxels.bins} bins, encoder expects {expected_bins}")
    t = as_tensor(voxels.data)
    H, W = t.shape[:2]
    if H % 32 or W % 32:
        raise ContractViolation(
            f"encoder got {H}x{W}; the harness must resize to multiples of 32")
    feats = encoder(t.permute(2, 0, 1)[None])
    return [FeatureMap(f[0].permute(1, 2, 0), s) for f, s in zip(feats, _STRIDES)]


class PyramidCollapse(torch.nn.Module):
    """Project every stage to n channels, upsample to stride 4, sum, refine.

    Used twice on the image side with independent weights: once as the edge
    resolver producing E^I, once as the context head producing the fusion
    query features.
    """

    def __init__(self, stage_widths: Sequence[int], n: int):
        super().__init__()
        self.n = n
        self.projs = torch.nn.ModuleList(
            torch.nn.Conv2d(w, n, 1, dtype=DTYPE) for w in stage_widths)
        self.refine = ResidualBlock(n)

    def forward(self, stages: List[torch.Tensor]) -> torch.Tensor:
        # stages: channel-first (1, C_s, H_s, W_s), finest first
        target = stages[0].shape[2:]
        acc = None
        for proj, s in zip(self.projs, stages):
            h = proj(s)
            if h.shape[2:] != target:
                h = F.interpolate(h, size=target, mode="bilinear", align_corners=False)
            acc = h if acc is None else acc + h
        return self.refine(acc)


def resolve_image_edges(features: List[FeatureMap], resolver: PyramidCollapse) -> FeatureMap:
    """Decouple an edge-focused stride-4, n-channel map from the image pyramid.

    Event features never pass through here: E^E is the event pyramid's stride-4
    stage taken directly.
    """
    if len(features) != 4 or [f.stride for f in features] != list(_STRIDES):
        raise InputError("resolver needs the complete 4-stage pyramid")
    stages = [f.data.permute(2, 0, 1)[None] for f in features]
    out = resolver(stages)
    return FeatureMap(out[0].permute(1, 2, 0), 4)


class EdgeEncoder(torch.nn.Module):
    """Projection block into the shared n-dimensional space (one per modality)."""

    def __init__(self, in_channels: int, n: int):
        super().__init__()
        self.proj = torch.nn.Conv2d(in_channels, n, 1, dtype=DTYPE)
        self.mix = torch.nn.Conv2d(n, n, 3, padding=1, dtype=DTYPE)

    def forward(self, x):
        return self.mix(F.relu(self.proj(x)))


def edge_encode(e: FeatureMap, block: EdgeEncoder,
                latent_hw: Tuple[int, int]) -> FeatureMap:
    """Map a stride-4 feature into the unified space, aligned to H' x W'."""
    if e.stride != 4:
        raise InputError(f"edge encoder expects stride-4 input, got {e.stride}")
    h = block(e.data.permute(2, 0, 1)[None])
    if h.shape[2:] != tuple(latent_hw):
        log.warning("edge_encode resampling %s -> %s", tuple(h.shape[2:]), tuple(latent_hw))
        h = F.interpolate(h, size=latent_hw, mode="bilinear", align_corners=False)
    return FeatureMap(h[0].permute(1, 2, 0), 4)
