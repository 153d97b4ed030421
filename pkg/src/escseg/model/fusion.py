"""Re-coded Consolidation, Uncertainty Optimization, prediction head, total loss.

RC consolidates image features against both modalities' re-coded edge features
with a 3-position per-cell attention; UO runs a 2-position attention per
modality (the second key scaled by that modality's uncertainty) and blends the
two results by normalized confidence weights.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ..events.types import ContractViolation, InputError, SemanticMask
from ..nnutil import DTYPE
from .elr import MODALITY_SOFTMAX, EdgeDistribution, RecodedFeature
from .encoders import FeatureMap

log = logging.getLogger("escseg")

BETA_DEFAULT = 0.1
CE_IGNORE = -100


@dataclass
class ConfidenceMaps:
    """Per-cell confidence C and uncertainty U with C + U = 1 exactly."""

    C: torch.Tensor  # (H', W')
    U: torch.Tensor  # (H', W')

    def __post_init__(self):
        if self.C.shape != self.U.shape or self.C.dim() != 2:
            raise InputError("C and U must be matching 2-D maps")
        C, U = self.C.detach(), self.U.detach()
        if float(C.min()) < 0 or float(C.max()) > 1 or float(U.min()) < 0 or float(U.max()) > 1:
            raise InputError("C and U must lie in [0, 1]")
        if not torch.equal(C + U, torch.ones_like(C)):
            raise InputError("C + U must equal 1 exactly")


def uo_confidence(p: EdgeDistribution) -> ConfidenceMaps:
    """C = max_k p(k), U = 1 - C. For a K-way softmax C >= 1/K holds.

    Detached: the key heads are supervised by the edge loss alone, so the
    prediction loss must not reach them through the confidence weights.
    """
    if p.kind != MODALITY_SOFTMAX:
        raise InputError("confidence comes from a modality-softmax distribution")
    C = p.probs.detach().max(dim=2).values
    return ConfidenceMaps(C, 1.0 - C)


class CellAttention(torch.nn.Module):
    """Multi-head scaled dot-product attention over a short per-cell sequence.

    One query per cell; keys/values are L aligned n-vectors per cell. Plain
    projections without biases, m heads of width d_k with m*d_k = n.
    """

    def __init__(self, n: int, heads: int = 4):
        super().__init__()
        if n % heads:
            raise InputError(f"head count {heads} must divide n={n}")
        self.n = n
        self.m = heads
        self.d_k = n // heads
        shape = (heads, n, self.d_k)
        self.w_q = torch.nn.Parameter(torch.empty(shape, dtype=DTYPE))
        self.w_k = torch.nn.Parameter(torch.empty(shape, dtype=DTYPE))
        self.w_v = torch.nn.Parameter(torch.empty(shape, dtype=DTYPE))
        self.w_o = torch.nn.Parameter(torch.empty(n, n, dtype=DTYPE))
        std = 1.0 / math.sqrt(n)
        for p in (self.w_q, self.w_k, self.w_v, self.w_o):
            torch.nn.init.normal_(p, 0.0, std)

    def forward(self, query: torch.Tensor, keys: torch.Tensor, values: torch.Tensor,
                return_attn: bool = False):
        # query: (cells, n); keys/values: (cells, L, n)
        if keys.shape != values.shape or query.shape[0] != keys.shape[0]:
            raise InputError("query/key/value cell counts must align")
        q = torch.einsum("cn,hnd->chd", query, self.w_q)
        k = torch.einsum("cln,hnd->chld", keys, self.w_k)
        v = torch.einsum("cln,hnd->chld", values, self.w_v)
        scores = torch.einsum("chd,chld->chl", q, k) / math.sqrt(self.d_k)
        attn = torch.softmax(scores, dim=-1)
        mixed = torch.einsum("chl,chld->chd", attn, v)
        out = mixed.reshape(-1, self.n) @ self.w_o
        if return_attn:
            return out, attn
        return out


class NoiseEmbeddings(torch.nn.Module):
    """Six learnable n-vectors: RC's N_K/N_V and UO's per-modality N_K/N_V."""

    def __init__(self, n: int):
        super().__init__()
        for name in ("rc_nk", "rc_nv", "uo_nk_img", "uo_nk_evt", "uo_nv_img", "uo_nv_evt"):
            setattr(self, name, torch.nn.Parameter(torch.zeros(n, dtype=DTYPE)))


def _aligned(*tensors) -> Tuple[int, int, int]:
    shapes = {tuple(t.shape) for t in tensors}
    if len(shapes) != 1:
        raise InputError(f"fusion inputs must align, got {sorted(shapes)}")
    return tensors[0].shape


def rc_forward(f_img: FeatureMap, g_img: RecodedFeature, g_evt: RecodedFeature,
               attn: CellAttention, noise: NoiseEmbeddings,
               return_attn: bool = False):
    """Phi = F^I + MHA(q=F^I, K=[F^I+N_K, G^I, G^E], V=[F^I+N_V, G^I, G^E])."""
    Hp, Wp, n = _aligned(f_img.data, g_img.data, g_evt.data)
    f = f_img.data.reshape(-1, n)
    gi = g_img.data.reshape(-1, n)
    ge = g_evt.data.reshape(-1, n)
    keys = torch.stack([f + noise.rc_nk, gi, ge], dim=1)
    values = torch.stack([f + noise.rc_nv, gi, ge], dim=1)
    out = attn(f, keys, values, return_attn=return_attn)
    if return_attn:
        out, weights = out
        return FeatureMap((f + out).reshape(Hp, Wp, n), 4), weights
    return FeatureMap((f + out).reshape(Hp, Wp, n), 4)


def _uo_branch(e_self, e_other, conf_self: ConfidenceMaps, nk, nv,
               attn: CellAttention, return_attn: bool = False):
    cells, n = e_self.shape
    u = conf_self.U.reshape(-1, 1)
    keys = torch.stack([e_self + nk, u * e_self], dim=1)
    values = torch.stack([e_self + nv, e_other], dim=1)
    out = attn(e_self, keys, values, return_attn=return_attn)
    if return_attn:
        out, weights = out
        return e_self + out, weights
    return e_self + out


def uo_forward(e_img: FeatureMap, e_evt: FeatureMap,
               conf_img: ConfidenceMaps, conf_evt: ConfidenceMaps,
               attn_img: CellAttention, attn_evt: CellAttention,
               noise: NoiseEmbeddings) -> FeatureMap:
    """Psi = (C^I*Psi^I + C^E*Psi^E) / (C^I + C^E), per-cell convex blend."""
    Hp, Wp, n = _aligned(e_img.data, e_evt.data)
    if conf_img.C.shape != (Hp, Wp) or conf_evt.C.shape != (Hp, Wp):
        raise InputError("confidence maps must match the latent grid")
    ei = e_img.data.reshape(-1, n)
    ee = e_evt.data.reshape(-1, n)
    psi_i = _uo_branch(ei, ee, conf_img, noise.uo_nk_img, noise.uo_nv_img, attn_img)
    psi_e = _uo_branch(ee, ei, conf_evt, noise.uo_nk_evt, noise.uo_nv_evt, attn_evt)
    ci = conf_img.C.reshape(-1, 1)
    ce = conf_evt.C.reshape(-1, 1)
    denom = ci + ce
    if float(denom.detach().min()) <= 0:
        raise ContractViolation("confidence sum must be positive (C >= 1/K)")
    psi = (ci * psi_i + ce * psi_e) / denom
    return FeatureMap(psi.reshape(Hp, Wp, n), 4)


class PredictHead(torch.nn.Module):
    """Per-pixel two-layer MLP over [Phi, Psi] concatenation to c class logits."""

    def __init__(self, n: int, classes: int = 11, hidden: int = 0):
        super().__init__()
        hidden = hidden or n
        self.classes = classes
        self.fc1 = torch.nn.Conv2d(2 * n, hidden, 1, dtype=DTYPE)
        self.fc2 = torch.nn.Conv2d(hidden, classes, 1, dtype=DTYPE)

    def forward(self, x):
        return self.fc2(F.relu(self.fc1(x)))


def predict_mask(phi: FeatureMap, psi: FeatureMap, head: PredictHead,
                 out_hw: Optional[Tuple[int, int]] = None) -> torch.Tensor:
    """Class logits (H, W, c): concat [Phi, Psi], per-pixel MLP, x4 upsample."""
    Hp, Wp, n = _aligned(phi.data, psi.data)
    cat = torch.cat([phi.data, psi.data], dim=2).permute(2, 0, 1)[None]
    logits = head(cat)
    size = out_hw if out_hw is not None else (4 * Hp, 4 * Wp)
    logits = F.interpolate(logits, size=size, mode="bilinear", align_corners=False)
    return logits[0].permute(1, 2, 0)


def logits_to_mask(logits: torch.Tensor, categories: int = 11) -> SemanticMask:
    """Argmax prediction as 1-based labels; ties break to the lowest class."""
    p = logits.detach()
    c = p.shape[2]
    pmax = p.max(dim=2, keepdim=True).values
    idx = torch.arange(c, dtype=torch.int64)
    cls = torch.where(p == pmax, idx[None, None, :], c).min(dim=2).values
    return SemanticMask((cls + 1).numpy().astype(np.int64), categories)


def total_loss(logits: torch.Tensor, mask: SemanticMask, l_edge: torch.Tensor,
               beta: float = BETA_DEFAULT) -> torch.Tensor:
    """L = L_pred + beta * L_edge, cross-entropy over non-ignore pixels."""
    if beta < 0:
        raise InputError(f"beta must be >= 0, got {beta}")
    H, W, c = logits.shape
    if mask.shape != (H, W):
        raise InputError(f"mask {mask.shape} does not match logits {(H, W)}")
    labels = torch.from_numpy(mask.labels.astype("int64"))
    target = torch.where(labels == 255, torch.tensor(CE_IGNORE, dtype=torch.int64),
                         labels - 1)
    if int((target != CE_IGNORE).sum()) == 0:
        log.warning("total_loss: every pixel ignored; L_pred set to 0")
        l_pred = torch.zeros((), dtype=DTYPE)
    else:
        l_pred = F.cross_entropy(logits.permute(2, 0, 1)[None], target[None],
                                 ignore_index=CE_IGNORE)
    return l_pred + beta * l_edge
