"""Gradient verification: central finite differences against autograd.

Every component's trainable tensors are perturbed coordinate-by-coordinate on
small double-precision fixtures (2x2 latent grid). Fixture seeds are fixed;
they were chosen once so no fixture sits on a ReLU or argmax kink, where a
finite difference would straddle two linear pieces and disagree with the
one-sided analytic value.
"""

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np
import torch

from ..dictionary.codebook import Codebook, quantize
from ..dictionary.losses import dict_loss, straight_through
from ..dictionary.tokenizer import Detokenizer, Tokenizer
from ..model.elr import (EdgeDistribution, KeyHead, edge_loss, key_map,
                         modality_distribution, recode_features)
from ..model.encoders import FeatureMap
from ..model.fusion import (CellAttention, NoiseEmbeddings, PredictHead,
                            predict_mask, rc_forward, uo_confidence, uo_forward)
from ..model.elr import PRIOR_ONE_HOT
from ..nnutil import DTYPE, init_parameters

FD_STEP = 1e-6


@dataclass
class GradEntry:
    component: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


@dataclass
class GradReport:
    entries: List[GradEntry]
    straight_through_ok: bool
    identity_jacobian_ok: bool
    stop_gradient_ok: bool

    @property
    def ok(self) -> bool:
        return (all(e.passed for e in self.entries) and self.straight_through_ok
                and self.identity_jacobian_ok and self.stop_gradient_ok)

    def lines(self) -> List[str]:
        out = []
        for e in self.entries:
            mark = "ok " if e.passed else "FAIL"
            out.append(f"[{mark}] {e.component}: max rel err "
                       f"{e.max_rel_err:.3e} (tol {e.tolerance:.0e})")
        out.append(f"[{'ok ' if self.straight_through_ok else 'FAIL'}] "
                   "straight-through: reconstruction gradient reaches the tokenizer")
        out.append(f"[{'ok ' if self.identity_jacobian_ok else 'FAIL'}] "
                   "straight-through: identity Jacobian through quantization")
        out.append(f"[{'ok ' if self.stop_gradient_ok else 'FAIL'}] "
                   "stop-gradient: prediction loss never reaches the key heads")
        return out


def _rand(rng, *shape):
    return torch.from_numpy(rng.normal(0.0, 1.0, shape)).to(DTYPE)


def _fd_max_rel(closure: Callable[[], torch.Tensor],
                tensors: Sequence[torch.Tensor],
                rng: np.random.Generator, max_coords: int = 12) -> float:
    loss = closure()
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    worst = 0.0
    for t, g in zip(tensors, grads):
        flat = t.detach().reshape(-1)
        gflat = (torch.zeros_like(flat) if g is None
                 else g.detach().reshape(-1))
        count = flat.numel()
        if count <= max_coords:
            coords = range(count)
        else:
            coords = sorted(rng.choice(count, max_coords, replace=False).tolist())
        for c in coords:
            orig = float(flat[c])
            with torch.no_grad():
                flat[c] = orig + FD_STEP
            lp = float(closure().detach())
            with torch.no_grad():
                flat[c] = orig - FD_STEP
            lm = float(closure().detach())
            with torch.no_grad():
                flat[c] = orig
            fd = (lp - lm) / (2.0 * FD_STEP)
            an = float(gflat[c])
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-6))
    return worst


def _perturbed_modules(rng, *modules):
    """Nonzero parameters everywhere, zero-init embeddings included."""
    for mod in modules:
        init_parameters(mod, rng)
        for name, p in sorted(mod.named_parameters()):
            if p.dim() <= 1:
                p.data = _rand(rng, *p.shape) * 0.3
    return modules


def _check_rc(tol, seed) -> GradEntry:
    rng = np.random.default_rng([seed, 1])
    n, heads = 8, 2
    attn, noise = _perturbed_modules(rng, CellAttention(n, heads),
                                     NoiseEmbeddings(n))
    f = FeatureMap(_rand(rng, 2, 2, n), 4)
    g_img = recode_like(_rand(rng, 2, 2, n))
    g_evt = recode_like(_rand(rng, 2, 2, n))
    w = _rand(rng, 2, 2, n)
    tensors = [p for _, p in sorted(attn.named_parameters())] + [
        noise.rc_nk, noise.rc_nv]

    def closure():
        return (rc_forward(f, g_img, g_evt, attn, noise).data * w).sum()

    return GradEntry("rc", _fd_max_rel(closure, tensors, rng), tol)


def recode_like(data):
    from ..model.elr import RecodedFeature
    return RecodedFeature(data)


def _softmax_dist(logits):
    from ..model.elr import MODALITY_SOFTMAX
    probs = torch.softmax(logits.reshape(-1, logits.shape[2]), dim=1)
    return EdgeDistribution(probs.reshape(logits.shape), MODALITY_SOFTMAX)


def _check_uo(tol, seed) -> GradEntry:
    rng = np.random.default_rng([seed, 2])
    n, heads, K = 8, 2, 8
    attn_i, attn_e, noise = _perturbed_modules(
        rng, CellAttention(n, heads), CellAttention(n, heads), NoiseEmbeddings(n))
    e_img = FeatureMap(_rand(rng, 2, 2, n), 4)
    e_evt = FeatureMap(_rand(rng, 2, 2, n), 4)
    conf_i = uo_confidence(_softmax_dist(_rand(rng, 2, 2, K)))
    conf_e = uo_confidence(_softmax_dist(_rand(rng, 2, 2, K)))
    w = _rand(rng, 2, 2, n)
    tensors = ([p for _, p in sorted(attn_i.named_parameters())]
               + [p for _, p in sorted(attn_e.named_parameters())]
               + [noise.uo_nk_img, noise.uo_nk_evt, noise.uo_nv_img,
                  noise.uo_nv_evt])

    def closure():
        psi = uo_forward(e_img, e_evt, conf_i, conf_e, attn_i, attn_e, noise)
        return (psi.data * w).sum()

    return GradEntry("uo", _fd_max_rel(closure, tensors, rng), tol)


def _check_edge_loss(tol, seed) -> GradEntry:
    rng = np.random.default_rng([seed, 3])
    n, K = 8, 8
    head_i, head_e = _perturbed_modules(rng, KeyHead(n, K), KeyHead(n, K))
    e_img = FeatureMap(_rand(rng, 2, 2, n), 4)
    e_evt = FeatureMap(_rand(rng, 2, 2, n), 4)
    keys = torch.from_numpy(rng.integers(0, K, (2, 2)))
    probs = torch.zeros(2, 2, K, dtype=DTYPE)
    probs.scatter_(2, keys[:, :, None], 1.0)
    q = EdgeDistribution(probs, PRIOR_ONE_HOT)
    tensors = ([p for _, p in sorted(head_i.named_parameters())]
               + [p for _, p in sorted(head_e.named_parameters())])

    def closure():
        return edge_loss(q, modality_distribution(e_img, head_i),
                         modality_distribution(e_evt, head_e))

    return GradEntry("edge-loss", _fd_max_rel(closure, tensors, rng), tol)


def _dict_fixture(seed):
    rng = np.random.default_rng([seed, 4])
    K, n = 8, 8
    tok = Tokenizer(n)
    detok = Detokenizer(n)
    init_parameters(tok, rng)
    init_parameters(detok, rng)
    cb = Codebook(K, n, seed=int(rng.integers(0, 2 ** 31)))
    cb.items.data = _rand(rng, K, n) * 0.5
    b = torch.from_numpy((rng.random((1, 1, 8, 8)) < 0.3).astype(np.float64))
    return tok, detok, cb, b


def _check_dict_loss(tol, seed) -> GradEntry:
    rng = np.random.default_rng([seed, 5])
    tok, detok, cb, b = _dict_fixture(seed)

    def parts():
        feats = tok(b)
        g = feats[0].permute(1, 2, 0)
        quantized, _ = quantize(g, cb)
        st = straight_through(g, quantized)
        recon = detok(st.permute(2, 0, 1)[None])
        return dict_loss(b, recon, g, quantized)

    # each term against the tensors it trains; quantization makes the loss
    # piecewise constant in everything upstream, so the tokenizer's
    # straight-through path is an estimator by construction and can never
    # agree with a finite difference; it gets the identity-Jacobian check
    worst = _fd_max_rel(lambda: parts().reconstruction,
                        [p for _, p in sorted(detok.named_parameters())], rng)
    worst = max(worst, _fd_max_rel(lambda: parts().embedding, [cb.items], rng))
    worst = max(worst, _fd_max_rel(
        lambda: parts().commitment,
        [p for _, p in sorted(tok.named_parameters())], rng))
    return GradEntry("dict-loss", worst, tol)


def _check_predict(tol, seed) -> GradEntry:
    rng = np.random.default_rng([seed, 6])
    n, classes = 8, 4
    (head,) = _perturbed_modules(rng, PredictHead(n, classes))
    phi = FeatureMap(_rand(rng, 2, 2, n), 4)
    psi = FeatureMap(_rand(rng, 2, 2, n), 4)
    w = _rand(rng, 8, 8, classes)
    tensors = [p for _, p in sorted(head.named_parameters())]

    def closure():
        return (predict_mask(phi, psi, head) * w).sum()

    return GradEntry("predict-mask", _fd_max_rel(closure, tensors, rng), tol)


def _check_straight_through(seed):
    tok, detok, cb, b = _dict_fixture(seed)
    feats = tok(b)
    g = feats[0].permute(1, 2, 0)
    quantized, _ = quantize(g, cb)
    st = straight_through(g, quantized)
    recon = detok(st.permute(2, 0, 1)[None])
    parts = dict_loss(b, recon, g, quantized)
    parts.reconstruction.backward()
    norms = [float(p.grad.norm()) for p in tok.parameters()]
    reaches = all(v > 0 for v in norms)

    rng = np.random.default_rng([seed, 7])
    g2 = _rand(rng, 2, 2, 8).requires_grad_(True)
    q2, _ = quantize(g2, cb)
    w = _rand(rng, 2, 2, 8)
    (straight_through(g2, q2) * w).sum().backward()
    identity = torch.equal(g2.grad, w)
    return reaches, identity


def _check_stop_gradient(seed) -> bool:
    """The prediction loss path must leave the key-head logits untouched."""
    rng = np.random.default_rng([seed, 8])
    n, K, heads = 8, 8, 2
    head = KeyHead(n, K)
    init_parameters(head, rng)
    cb = Codebook(K, n, seed=int(rng.integers(0, 2 ** 31)))
    attn_i, attn_e, noise = _perturbed_modules(
        rng, CellAttention(n, heads), CellAttention(n, heads), NoiseEmbeddings(n))
    e_img = FeatureMap(_rand(rng, 2, 2, n), 4)
    e_evt = FeatureMap(_rand(rng, 2, 2, n), 4)
    p_img = modality_distribution(e_img, head)
    gamma = recode_features(key_map(p_img), cb)
    conf = uo_confidence(p_img)
    conf_e = uo_confidence(_softmax_dist(_rand(rng, 2, 2, K)))
    psi = uo_forward(FeatureMap(gamma.data, 4), e_evt, conf, conf_e,
                     attn_i, attn_e, noise)
    loss = (psi.data ** 2).sum()
    grads = torch.autograd.grad(loss, list(head.parameters()), allow_unused=True)
    return all(g is None or float(g.abs().max()) == 0.0 for g in grads)


def grad_check(tolerance: float = 1e-4, seed: int = 0) -> GradReport:
    entries = [
        _check_rc(tolerance, seed),
        _check_uo(tolerance, seed),
        _check_edge_loss(tolerance, seed),
        _check_dict_loss(tolerance, seed),
        _check_predict(tolerance, seed),
    ]
    reaches, identity = _check_straight_through(seed)
    return GradReport(entries, reaches, identity, _check_stop_gradient(seed))
