"""Edge-awareness Latent Re-coding.

The frozen dictionary supplies a one-hot prior over edge keys from the ground
truth boundary; each modality predicts its own categorical key distribution;
argmax key maps are re-coded into dictionary rows; L_edge pulls the modality
distributions toward the prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..dictionary.codebook import Codebook, KeyGrid, quantize
from ..dictionary.tokenizer import Tokenizer, tokenize
from ..events.types import BoundaryMap, ContractViolation, InputError
from ..nnutil import DTYPE
from .encoders import FeatureMap

LOG_EPS = 1e-8

PRIOR_ONE_HOT = "prior-one-hot"
MODALITY_SOFTMAX = "modality-softmax"


@dataclass
class EdgeDistribution:
    """Per-cell categorical distribution over the K dictionary keys."""

    probs: torch.Tensor  # (H', W', K)
    kind: str

    def __post_init__(self):
        if self.probs.dim() != 3:
            raise InputError("probs must be H' x W' x K")
        if self.kind not in (PRIOR_ONE_HOT, MODALITY_SOFTMAX):
            raise InputError(f"unknown distribution kind {self.kind!r}")
        p = self.probs.detach()
        if float(p.min()) < 0:
            raise InputError("probabilities must be non-negative")
        sums = p.sum(-1)
        if float((sums - 1).abs().max()) > 1e-6:
            raise InputError("per-cell probabilities must sum to 1")
        if self.kind == PRIOR_ONE_HOT:
            if not (((p == 0) | (p == 1)).all() and (p.sum(-1) == 1).all()):
                raise InputError("prior distribution must be exactly one-hot per cell")

    @property
    def K(self) -> int:
        return self.probs.shape[2]


@dataclass
class RecodedFeature:
    """H' x W' x n features whose cells are codebook rows."""

    data: torch.Tensor

    def __post_init__(self):
        if self.data.dim() != 3:
            raise InputError("recoded features must be H' x W' x n")


def _assert_frozen(tok: Tokenizer, cb: Codebook) -> None:
    if any(p.requires_grad for p in tok.parameters()) or cb.items.requires_grad:
        raise ContractViolation(
            "dictionary must be frozen (requires_grad=False) before re-coding")


def freeze_dictionary(tok: Tokenizer, cb: Codebook) -> None:
    for p in tok.parameters():
        p.requires_grad_(False)
    cb.items.requires_grad_(False)


def prior_distribution(b: BoundaryMap, tok: Tokenizer, cb: Codebook) -> EdgeDistribution:
    """q(K|B): one-hot at the nearest dictionary item per tokenized cell."""
    _assert_frozen(tok, cb)
    with torch.no_grad():
        g = tokenize(b, tok)
        _, kg = quantize(g, cb)
    probs = torch.zeros(*kg.shape, cb.K, dtype=DTYPE)
    probs.scatter_(2, kg.keys[:, :, None], 1.0)
    return EdgeDistribution(probs, PRIOR_ONE_HOT)


class KeyHead(torch.nn.Module):
    """Two-layer per-cell perceptron from the unified space to K logits."""

    def __init__(self, n: int, K: int, hidden: int = 0):
        super().__init__()
        hidden = hidden or n
        self.fc1 = torch.nn.Conv2d(n, hidden, 1, dtype=DTYPE)
        self.fc2 = torch.nn.Conv2d(hidden, K, 1, dtype=DTYPE)

    def forward(self, x):
        return self.fc2(F.relu(self.fc1(x)))


def modality_distribution(e_encoded: FeatureMap, head: KeyHead) -> EdgeDistribution:
    """p(K|M): per-cell softmax over the K keys from the modality's features."""
    if e_encoded.stride != 4:
        raise InputError("modality head expects the stride-4 unified-space map")
    logits = head(e_encoded.data.permute(2, 0, 1)[None])[0]  # (K, H', W')
    probs = torch.softmax(logits, dim=0).permute(1, 2, 0)
    return EdgeDistribution(probs, MODALITY_SOFTMAX)


def key_map(p: EdgeDistribution) -> KeyGrid:
    """Per-cell argmax key; ties break to the lowest index."""
    probs = p.probs.detach()
    K = probs.shape[2]
    pmax = probs.max(dim=2, keepdim=True).values
    idx = torch.arange(K, dtype=torch.int64)
    keys = torch.where(probs == pmax, idx[None, None, :], K).min(dim=2).values
    return KeyGrid(keys, K)


def recode_features(keys: KeyGrid, cb: Codebook) -> RecodedFeature:
    """Gamma^M = v(key) per cell; stop-gradient (heads learn via L_edge only)."""
    if int(keys.keys.max()) >= cb.K or int(keys.keys.min()) < 0:
        raise ContractViolation("key grid holds out-of-range indices")
    return RecodedFeature(cb.items.detach()[keys.keys])


def edge_loss(q: EdgeDistribution, p_img: EdgeDistribution,
              p_evt: EdgeDistribution) -> torch.Tensor:
    """L_edge = mean over cells of -[log p_I(k*) + log p_E(k*)], k* from q."""
    if q.kind != PRIOR_ONE_HOT:
        raise InputError("q must be the one-hot prior")
    if q.probs.shape != p_img.probs.shape or q.probs.shape != p_evt.probs.shape:
        raise InputError("distribution shapes must match")
    kstar = key_map(q).keys[:, :, None]
    terms = []
    for p in (p_img, p_evt):
        picked = p.probs.gather(2, kstar)[:, :, 0]
        terms.append(torch.log(picked.clamp(min=LOG_EPS)))
    return -(terms[0] + terms[1]).mean()
