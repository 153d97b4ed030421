"""Standalone dictionary-training stage.

Trains tokenizer + codebook + detokenizer on boundary maps by minimizing
L_dict. The detokenizer only exists for this stage; the frozen codebook and
tokenizer are what the segmentation model consumes later.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np
import torch

from ..checkpoint import MAGIC_DICT, load_arrays, save_arrays
from ..events.types import BoundaryMap, ConfigurationError, InputError
from ..nnutil import as_tensor, init_parameters, load_arrays_into, parameters_to_arrays
from .codebook import Codebook, quantize
from .losses import ALPHA_DEFAULT, DictLossParts, dict_loss, straight_through
from .tokenizer import Detokenizer, Tokenizer, reconstruction_probability


class DivergenceError(RuntimeError):
    """Training loss went non-finite; carries the step it happened at."""


@dataclass
class DictTrainConfig:
    K: int = 128
    n: int = 256
    alpha: float = ALPHA_DEFAULT
    lr: float = 1e-3
    weight_decay: float = 0.01
    steps: int = 300
    batch_size: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.n < 1:
            raise ConfigurationError("K and n must be positive")
        if self.lr <= 0 or self.steps < 1 or self.batch_size < 1:
            raise ConfigurationError("lr, steps, batch_size must be positive")
        if not 0 <= self.alpha:
            raise ConfigurationError("alpha must be >= 0")


@dataclass
class DictionaryArtifacts:
    codebook: Codebook
    tokenizer: Tokenizer
    detokenizer: Detokenizer
    loss_curve: List[float]
    config: DictTrainConfig


def _batch_forward(maps: torch.Tensor, tok, detok, cb, alpha) -> DictLossParts:
    # maps: (B, 1, H, W)
    feats = tok(maps)  # (B, n, H', W')
    g = feats.permute(0, 2, 3, 1)  # (B, H', W', n)
    Bn, Hp, Wp, n = g.shape
    quantized, _ = quantize(g.reshape(Bn * Hp, Wp, n), cb)
    gq = quantized.reshape(Bn, Hp, Wp, n)
    st = straight_through(g, gq)
    logits = detok(st.permute(0, 3, 1, 2))  # (B, 1, 4H', 4W')
    prob = reconstruction_probability(logits)
    target = maps[:, :, : prob.shape[2], : prob.shape[3]]
    return dict_loss(target[:, 0], prob[:, 0], g, gq, alpha)


def train_dictionary(boundaries: Sequence[BoundaryMap],
                     config: DictTrainConfig) -> DictionaryArtifacts:
    """Gradient-descent loop over L_dict; deterministic per config seed."""
    if len(boundaries) == 0:
        raise InputError("dictionary training needs at least one boundary map")
    shapes = {b.shape for b in boundaries}
    if len(shapes) != 1:
        raise InputError(f"boundary maps must share one resolution, got {shapes}")
    H, W = shapes.pop()
    if H < 8 or W < 8:
        raise InputError("boundary maps must be at least 8x8")
    rng = np.random.default_rng(config.seed)
    tok = Tokenizer(config.n)
    detok = Detokenizer(config.n)
    init_parameters(tok, rng)
    init_parameters(detok, rng)
    cb = Codebook(config.K, config.n, seed=int(rng.integers(0, 2**31)))
    data = torch.stack([as_tensor(b.edges) for b in boundaries])[:, None]  # (N,1,H,W)
    n_data = data.shape[0]
    opt = torch.optim.AdamW(
        list(tok.parameters()) + list(detok.parameters()) + list(cb.parameters()),
        lr=config.lr, weight_decay=config.weight_decay,
    )
    curve: List[float] = []
    for step in range(config.steps):
        take = min(config.batch_size, n_data)
        idx = rng.choice(n_data, size=take, replace=False)
        batch = data[torch.from_numpy(np.sort(idx))]
        parts = _batch_forward(batch, tok, detok, cb, config.alpha)
        total = parts.total
        val = float(total.detach())
        if not np.isfinite(val):
            raise DivergenceError(
                f"non-finite dictionary loss at step {step}: "
                f"rec={float(parts.reconstruction.detach())}, "
                f"emb={float(parts.embedding.detach())}, "
                f"com={float(parts.commitment.detach())}"
            )
        curve.append(val)
        opt.zero_grad()
        total.backward()
        opt.step()
    return DictionaryArtifacts(cb, tok, detok, curve, config)


def evaluate_dictionary(boundaries: Sequence[BoundaryMap],
                        art: DictionaryArtifacts) -> DictLossParts:
    data = torch.stack([as_tensor(b.edges) for b in boundaries])[:, None]
    with torch.no_grad():
        return _batch_forward(data, art.tokenizer, art.detokenizer,
                              art.codebook, art.config.alpha)


def save_dictionary(path: Union[str, os.PathLike], art: DictionaryArtifacts) -> None:
    arrays = {"codebook.items": art.codebook.items.detach().numpy().copy()}
    for name, arr in parameters_to_arrays(art.tokenizer).items():
        arrays[f"tokenizer.{name}"] = arr
    for name, arr in parameters_to_arrays(art.detokenizer).items():
        arrays[f"detokenizer.{name}"] = arr
    arrays["loss_curve"] = np.asarray(art.loss_curve, dtype=np.float64)
    meta = {"K": art.config.K, "n": art.config.n, "alpha": art.config.alpha,
            "seed": art.config.seed, "steps": art.config.steps}
    save_arrays(path, MAGIC_DICT, meta, arrays)


def load_dictionary(path: Union[str, os.PathLike]) -> DictionaryArtifacts:
    meta, arrays = load_arrays(path, MAGIC_DICT)
    cfg = DictTrainConfig(K=meta["K"], n=meta["n"], alpha=meta["alpha"],
                          seed=meta["seed"], steps=meta["steps"])
    cb = Codebook(cfg.K, cfg.n, seed=0)
    with torch.no_grad():
        cb.items.copy_(as_tensor(arrays["codebook.items"]))
    tok = Tokenizer(cfg.n)
    detok = Detokenizer(cfg.n)
    load_arrays_into(tok, {k[len("tokenizer."):]: v for k, v in arrays.items()
                           if k.startswith("tokenizer.")})
    load_arrays_into(detok, {k[len("detokenizer."):]: v for k, v in arrays.items()
                             if k.startswith("detokenizer.")})
    curve = arrays["loss_curve"].tolist()
    return DictionaryArtifacts(cb, tok, detok, curve, cfg)
