"""The edge dictionary: a learnable K x n codebook with nearest-neighbour lookup."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..events.types import InputError
from ..nnutil import DTYPE, as_tensor


@dataclass
class KeyGrid:
    """H' x W' grid of 0-based codebook indices."""

    keys: torch.Tensor
    K: int

    def __post_init__(self):
        if self.keys.dim() != 2 or self.keys.dtype != torch.int64:
            raise InputError("keys must be a 2-D int64 grid")
        if self.keys.numel() and (self.keys.min() < 0 or self.keys.max() >= self.K):
            raise InputError(f"keys must lie in [0, {self.K})")

    @property
    def shape(self):
        return tuple(self.keys.shape)


class Codebook(torch.nn.Module):
    """Dictionary of K edge embeddings of dimension n; keys are 0-based."""

    def __init__(self, K: int = 128, n: int = 256, seed: int = 0):
        super().__init__()
        if K < 1 or n < 1:
            raise InputError("K and n must be positive")
        self.K = K
        self.n = n
        rng = np.random.default_rng(seed)
        init = rng.uniform(-1.0 / K, 1.0 / K, (K, n))
        self.items = torch.nn.Parameter(as_tensor(init))

    def lookup(self, keys: torch.Tensor) -> torch.Tensor:
        """v(k): rows of the dictionary at the given 0-based keys."""
        if keys.min() < 0 or keys.max() >= self.K:
            raise InputError("key out of range")
        return self.items[keys]


def quantize(g: torch.Tensor, cb: Codebook, chunk: int = 256):
    """Nearest-neighbour quantization of an H' x W' x n embedding grid.

    Returns (quantized, KeyGrid): quantized cells are dictionary rows (so
    gradients reach the codebook), key grid is H' x W' int64. Ties break to the
    lowest index. Distances use exact squared differences, chunked to bound
    memory.
    """
    if g.dim() != 3:
        raise InputError("embeddings must be H' x W' x n")
    if g.shape[2] != cb.n:
        raise InputError(f"embedding dim {g.shape[2]} != codebook n {cb.n}")
    Hp, Wp, n = g.shape
    flat = g.detach().reshape(-1, n)
    items = cb.items.detach()
    m = flat.shape[0]
    keys = torch.empty(m, dtype=torch.int64)
    arange_k = torch.arange(cb.K, dtype=torch.int64)
    for s in range(0, m, chunk):
        block = flat[s:s + chunk]
        diff = block[:, None, :] - items[None, :, :]
        d = (diff * diff).sum(-1)
        dmin = d.min(dim=1, keepdim=True).values
        # first index attaining the minimum, robust to argmin backend quirks
        keys[s:s + chunk] = torch.where(d == dmin, arange_k[None, :], cb.K).min(dim=1).values
    keys = keys.reshape(Hp, Wp)
    quantized = cb.items[keys]
    return quantized, KeyGrid(keys, cb.K)
