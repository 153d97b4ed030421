"""Dictionary losses and the straight-through gradient estimator.

Reduction conventions: reconstruction averages squared error over pixels;
embedding and commitment sum squared error over channels, then average over
latent cells (so a uniform 0.1 offset on every channel gives 0.01*n per cell).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..events.types import InputError

ALPHA_DEFAULT = 0.25


@dataclass
class DictLossParts:
    reconstruction: torch.Tensor
    embedding: torch.Tensor
    commitment: torch.Tensor
    alpha: float = ALPHA_DEFAULT

    def __post_init__(self):
        for name in ("reconstruction", "embedding", "commitment"):
            v = getattr(self, name)
            if float(v.detach() if isinstance(v, torch.Tensor) else v) < 0:
                raise InputError(f"{name} must be non-negative")

    @property
    def total(self) -> torch.Tensor:
        return self.reconstruction + self.embedding + self.alpha * self.commitment


def dict_loss(b: torch.Tensor, b_recon: torch.Tensor, g: torch.Tensor,
              g_quantized: torch.Tensor, alpha: float = ALPHA_DEFAULT) -> DictLossParts:
    """L_dict = ||B - B'||^2 + ||v(K) - sg(G)||^2 + alpha * ||sg(v(K)) - G||^2.

    b, b_recon: (H, W) target boundary and squashed reconstruction.
    g, g_quantized: (H', W', n). Leading batch dimensions are allowed; cells
    then mean over batch and grid together. Gradient routing via stop-gradients:
    the embedding term trains the codebook, the commitment term the tokenizer.
    """
    if b.shape != b_recon.shape:
        raise InputError(f"boundary shapes differ: {tuple(b.shape)} vs {tuple(b_recon.shape)}")
    if g.shape != g_quantized.shape:
        raise InputError(f"embedding shapes differ: {tuple(g.shape)} vs {tuple(g_quantized.shape)}")
    rec = ((b - b_recon) ** 2).mean()
    emb = ((g_quantized - g.detach()) ** 2).sum(-1).mean()
    com = ((g_quantized.detach() - g) ** 2).sum(-1).mean()
    return DictLossParts(rec, emb, com, alpha)


def straight_through(g: torch.Tensor, g_quantized: torch.Tensor) -> torch.Tensor:
    """Forward the quantized values, pass gradients to g with identity Jacobian.

    Written as gq + (g - sg(g)) rather than g + sg(gq - g): the correction term
    is exactly zero elementwise, so the forward value equals g_quantized bit for
    bit instead of reintroducing rounding. Gradient reaches g only; the codebook
    trains through the embedding loss, not through this path.
    """
    if g.shape != g_quantized.shape:
        raise InputError("straight_through needs matching shapes")
    return g_quantized.detach() + (g - g.detach())
