"""Tokenizer/detokenizer pair mapping boundary maps to and from the latent grid.

Tokenizer: two stride-2 4x4 convs with ReLU, two residual blocks (three 3x3
convs with ReLU each, identity skip), then a 1x1 projection to n channels.
Detokenizer inverts the stack and ends in a 1-channel logit map. Spatial law:
H' = floor(H/4), recovered as 4*H' on the way back.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..events.types import BoundaryMap, InputError
from ..nnutil import DTYPE, as_tensor


class ResidualBlock(torch.nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.c1 = torch.nn.Conv2d(channels, channels, 3, padding=1, dtype=DTYPE)
        self.c2 = torch.nn.Conv2d(channels, channels, 3, padding=1, dtype=DTYPE)
        self.c3 = torch.nn.Conv2d(channels, channels, 3, padding=1, dtype=DTYPE)

    def forward(self, x):
        h = F.relu(self.c1(x))
        h = F.relu(self.c2(h))
        h = F.relu(self.c3(h))
        return x + h


class Tokenizer(torch.nn.Module):
    def __init__(self, n: int = 256):
        super().__init__()
        self.n = n
        mid = max(n // 2, 1)
        self.down1 = torch.nn.Conv2d(1, mid, 4, stride=2, padding=1, dtype=DTYPE)
        self.down2 = torch.nn.Conv2d(mid, n, 4, stride=2, padding=1, dtype=DTYPE)
        self.res1 = ResidualBlock(n)
        self.res2 = ResidualBlock(n)
        self.proj = torch.nn.Conv2d(n, n, 1, dtype=DTYPE)

    def forward(self, x):
        # x: (B, 1, H, W) with H, W >= 8
        h = F.relu(self.down1(x))
        h = F.relu(self.down2(h))
        h = self.res1(h)
        h = self.res2(h)
        return self.proj(h)


class Detokenizer(torch.nn.Module):
    def __init__(self, n: int = 256):
        super().__init__()
        self.n = n
        mid = max(n // 2, 1)
        self.proj = torch.nn.Conv2d(n, n, 1, dtype=DTYPE)
        self.res1 = ResidualBlock(n)
        self.res2 = ResidualBlock(n)
        self.up1 = torch.nn.ConvTranspose2d(n, mid, 4, stride=2, padding=1, dtype=DTYPE)
        self.up2 = torch.nn.ConvTranspose2d(mid, mid, 4, stride=2, padding=1, dtype=DTYPE)
        self.head = torch.nn.Conv2d(mid, 1, 3, padding=1, dtype=DTYPE)

    def forward(self, z):
        h = self.proj(z)
        h = self.res1(h)
        h = self.res2(h)
        h = F.relu(self.up1(h))
        h = F.relu(self.up2(h))
        return self.head(h)


def boundary_to_tensor(b: BoundaryMap) -> torch.Tensor:
    return as_tensor(b.edges)[None, None, :, :]


def tokenize(b: BoundaryMap, tok: Tokenizer) -> torch.Tensor:
    """BoundaryMap -> (H', W', n) edge embeddings."""
    H, W = b.shape
    if H < 8 or W < 8:
        raise InputError(f"boundary map must be at least 8x8, got {H}x{W}")
    out = tok(boundary_to_tensor(b))  # (1, n, H', W')
    return out[0].permute(1, 2, 0)


def detokenize(g: torch.Tensor, detok: Detokenizer) -> torch.Tensor:
    """(H', W', n) embeddings -> (4H', 4W') reconstruction logits."""
    if g.dim() != 3:
        raise InputError("embeddings must be H' x W' x n")
    z = g.permute(2, 0, 1)[None]
    return detok(z)[0, 0]


def reconstruction_probability(logits: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(logits)
