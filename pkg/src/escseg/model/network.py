"""Full segmentation network: encoders, re-coding, fusion, prediction.

EscNet owns every trainable stage. The edge dictionary (tokenizer + codebook)
is held frozen and deliberately kept out of the module's parameter list; it is
referenced in checkpoints by fingerprint only.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from ..checkpoint import MAGIC_SEG, load_arrays, save_arrays
from ..dictionary.codebook import Codebook
from ..dictionary.tokenizer import Tokenizer
from ..events.types import BoundaryMap, ConfigurationError, ContractViolation, VoxelGrid
from ..nnutil import init_parameters, load_arrays_into, parameters_to_arrays
from .elr import (EdgeDistribution, _assert_frozen, edge_loss, key_map,
                  modality_distribution, prior_distribution, recode_features, KeyHead)
from .encoders import (EncoderConfig, FeatureMap, PyramidCollapse, PyramidEncoder,
                       EdgeEncoder, edge_encode, encode_events, encode_image,
                       resolve_image_edges)
from .fusion import (CellAttention, ConfidenceMaps, NoiseEmbeddings, PredictHead,
                     predict_mask, rc_forward, uo_confidence, uo_forward)


@dataclass
class NetConfig:
    K: int = 128
    n: int = 256
    classes: int = 11
    bins: int = 5
    heads: int = 4
    encoders: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.K < 2 or self.n < 1 or self.classes < 2:
            raise ConfigurationError("need K >= 2, n >= 1, classes >= 2")
        if self.n % self.heads:
            raise ConfigurationError(f"heads={self.heads} must divide n={self.n}")
        if self.encoders.voxel_bins != self.bins:
            raise ConfigurationError("encoder voxel_bins must match config bins")


@dataclass
class ModelOutput:
    logits: torch.Tensor  # (H, W, c)
    p_img: EdgeDistribution
    p_evt: EdgeDistribution
    conf_img: ConfidenceMaps
    conf_evt: ConfidenceMaps
    phi: FeatureMap
    psi: FeatureMap
    l_edge: torch.Tensor  # scalar; 0 when no boundary supervision was given


def dictionary_fingerprint(tok: Tokenizer, cb: Codebook) -> str:
    """Order-stable sha256 over the frozen dictionary's parameter bytes."""
    h = hashlib.sha256()
    for prefix, module in (("codebook", cb), ("tokenizer", tok)):
        for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
            arr = np.ascontiguousarray(p.detach().cpu().numpy())
            h.update(f"{prefix}.{name}|{arr.dtype.str}|{arr.shape}|".encode())
            h.update(arr.tobytes())
    return h.hexdigest()


class EscNet(torch.nn.Module):
    """End-to-end edge-aware fusion segmenter over a frozen edge dictionary."""

    def __init__(self, tok: Tokenizer, cb: Codebook, config: Optional[NetConfig] = None):
        super().__init__()
        config = config or NetConfig()
        if cb.K != config.K or cb.n != config.n:
            raise ConfigurationError(
                f"dictionary is K={cb.K}, n={cb.n}; config wants K={config.K}, n={config.n}")
        _assert_frozen(tok, cb)
        self.config = config
        # tuple attribute keeps the frozen pair out of named_parameters()
        self._dictionary = (tok, cb)

        enc = config.encoders
        n = config.n
        self.image_encoder = PyramidEncoder(enc.image_channels, enc.image_widths,
                                            enc.image_depths)
        self.event_encoder = PyramidEncoder(enc.voxel_bins, enc.event_widths,
                                            enc.event_depths)
        self.context_head = PyramidCollapse(enc.image_widths, n)
        self.edge_resolver = PyramidCollapse(enc.image_widths, n)
        self.edge_enc_img = EdgeEncoder(n, n)
        self.edge_enc_evt = EdgeEncoder(enc.event_widths[0], n)
        self.key_head_img = KeyHead(n, config.K)
        self.key_head_evt = KeyHead(n, config.K)
        self.rc_attn = CellAttention(n, config.heads)
        self.uo_attn_img = CellAttention(n, config.heads)
        self.uo_attn_evt = CellAttention(n, config.heads)
        self.noise = NoiseEmbeddings(n)
        self.predict = PredictHead(n, config.classes)

    @property
    def tokenizer(self) -> Tokenizer:
        return self._dictionary[0]

    @property
    def codebook(self) -> Codebook:
        return self._dictionary[1]

    def forward(self, img, voxels: VoxelGrid,
                boundary: Optional[BoundaryMap] = None) -> ModelOutput:
        tok, cb = self._dictionary
        _assert_frozen(tok, cb)

        feats_i = encode_image(img, self.image_encoder)
        feats_e = encode_events(voxels, self.event_encoder, self.config.bins)
        f_ctx = resolve_image_edges(feats_i, self.context_head)
        e_img_raw = resolve_image_edges(feats_i, self.edge_resolver)
        e_evt_raw = feats_e[0]  # events keep the stride-4 stage directly

        latent_hw = tuple(f_ctx.data.shape[:2])
        e_img = edge_encode(e_img_raw, self.edge_enc_img, latent_hw)
        e_evt = edge_encode(e_evt_raw, self.edge_enc_evt, latent_hw)

        p_img = modality_distribution(e_img, self.key_head_img)
        p_evt = modality_distribution(e_evt, self.key_head_evt)
        g_img = recode_features(key_map(p_img), cb)
        g_evt = recode_features(key_map(p_evt), cb)
        conf_img = uo_confidence(p_img)
        conf_evt = uo_confidence(p_evt)

        phi = rc_forward(f_ctx, g_img, g_evt, self.rc_attn, self.noise)
        psi = uo_forward(e_img, e_evt, conf_img, conf_evt,
                         self.uo_attn_img, self.uo_attn_evt, self.noise)
        logits = predict_mask(phi, psi, self.predict)

        if boundary is not None:
            q = prior_distribution(boundary, tok, cb)
            l_edge = edge_loss(q, p_img, p_evt)
        else:
            l_edge = torch.zeros((), dtype=logits.dtype)
        return ModelOutput(logits, p_img, p_evt, conf_img, conf_evt, phi, psi, l_edge)

    def init_weights(self, seed: int) -> None:
        init_parameters(self, np.random.default_rng(seed))


def save_model(path, net: EscNet, seed: int, alpha: float = 0.25,
               beta: float = 0.1, extra: Optional[dict] = None) -> None:
    cfg = net.config
    meta = {
        "format": "segmentation",
        "K": cfg.K, "n": cfg.n, "alpha": alpha, "beta": beta,
        "bins": cfg.bins, "classes": cfg.classes, "heads": cfg.heads,
        "image_widths": list(cfg.encoders.image_widths),
        "image_depths": list(cfg.encoders.image_depths),
        "event_widths": list(cfg.encoders.event_widths),
        "event_depths": list(cfg.encoders.event_depths),
        "dictionary_sha256": dictionary_fingerprint(net.tokenizer, net.codebook),
        "seed": seed,
    }
    if extra:
        meta.update(extra)
    save_arrays(path, MAGIC_SEG, meta, parameters_to_arrays(net))


def load_model(path, tok: Tokenizer, cb: Codebook):
    """Rebuild an EscNet from an ESCSEG1 file against the same frozen dictionary."""
    meta, arrays = load_arrays(path, MAGIC_SEG)
    got = dictionary_fingerprint(tok, cb)
    if got != meta["dictionary_sha256"]:
        raise ContractViolation(
            "dictionary fingerprint mismatch: model was trained against a "
            f"different edge dictionary ({meta['dictionary_sha256'][:12]}.. vs {got[:12]}..)")
    enc = EncoderConfig(tuple(meta["image_widths"]), tuple(meta["image_depths"]),
                        tuple(meta["event_widths"]), tuple(meta["event_depths"]),
                        voxel_bins=meta["bins"])
    cfg = NetConfig(K=meta["K"], n=meta["n"], classes=meta["classes"],
                    bins=meta["bins"], heads=meta["heads"], encoders=enc)
    net = EscNet(tok, cb, cfg)
    load_arrays_into(net, arrays)
    return net, meta
