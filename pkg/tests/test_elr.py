"""Latent re-coding tests: prior/modality distributions, key maps, L_edge."""

import math

import numpy as np
import pytest
import torch

from escseg.dictionary.codebook import Codebook, KeyGrid, quantize
from escseg.dictionary.tokenizer import Tokenizer, tokenize
from escseg.events.types import BoundaryMap, ContractViolation, InputError
from escseg.model.elr import (LOG_EPS, MODALITY_SOFTMAX, PRIOR_ONE_HOT,
                              EdgeDistribution, KeyHead, edge_loss,
                              freeze_dictionary, key_map, modality_distribution,
                              prior_distribution, recode_features)
from escseg.model.encoders import FeatureMap
from escseg.nnutil import DTYPE, init_parameters, zero_parameters


def frozen_pair(K=16, n=8, seed=0):
    cb = Codebook(K=K, n=n, seed=seed)
    tok = Tokenizer(n=n)
    init_parameters(tok, np.random.default_rng(seed + 1))
    freeze_dictionary(tok, cb)
    return tok, cb


def random_boundary(rng, h=16, w=16):
    return BoundaryMap((rng.random((h, w)) < 0.3).astype(np.uint8))


def softmax_dist(rng, h, w, K):
    logits = rng.standard_normal((h, w, K))
    e = np.exp(logits - logits.max(axis=2, keepdims=True))
    probs = e / e.sum(axis=2, keepdims=True)
    return EdgeDistribution(torch.tensor(probs, dtype=DTYPE), MODALITY_SOFTMAX)


def one_hot_dist(keys, K):
    probs = torch.zeros(*keys.shape, K, dtype=DTYPE)
    probs.scatter_(2, torch.as_tensor(keys, dtype=torch.int64)[:, :, None], 1.0)
    return EdgeDistribution(probs, PRIOR_ONE_HOT)


class TestEdgeDistribution:
    def test_rejects_bad_sum(self):
        p = torch.full((2, 2, 4), 0.3, dtype=DTYPE)
        with pytest.raises(InputError):
            EdgeDistribution(p, MODALITY_SOFTMAX)

    def test_rejects_negative(self):
        p = torch.tensor([[[1.5, -0.5]]], dtype=DTYPE)
        with pytest.raises(InputError):
            EdgeDistribution(p, MODALITY_SOFTMAX)

    def test_prior_must_be_one_hot(self):
        p = torch.full((1, 1, 2), 0.5, dtype=DTYPE)
        with pytest.raises(InputError):
            EdgeDistribution(p, PRIOR_ONE_HOT)
        EdgeDistribution(p, MODALITY_SOFTMAX)

    def test_rejects_unknown_kind(self):
        with pytest.raises(InputError):
            EdgeDistribution(torch.ones(1, 1, 1, dtype=DTYPE), "whatever")


class TestPriorDistribution:
    def test_one_hot_law(self):
        tok, cb = frozen_pair()
        q = prior_distribution(random_boundary(np.random.default_rng(0)), tok, cb)
        assert q.kind == PRIOR_ONE_HOT
        p = q.probs
        assert torch.equal(p.sum(-1), torch.ones_like(p.sum(-1)))
        assert (((p == 0) | (p == 1)).all())

    def test_argmax_grid_matches_quantize_keys(self):
        tok, cb = frozen_pair()
        for seed in range(10):
            b = random_boundary(np.random.default_rng(seed), 16, 24)
            q = prior_distribution(b, tok, cb)
            with torch.no_grad():
                _, kg = quantize(tokenize(b, tok), cb)
            assert torch.equal(key_map(q).keys, kg.keys)

    def test_cell_matching_item_exactly_is_one_hot_there(self):
        tok, cb = frozen_pair(K=8, n=4)
        b = random_boundary(np.random.default_rng(3), 8, 8)
        with torch.no_grad():
            g = tokenize(b, tok)
            # plant item 5 exactly on one tokenized cell, push the rest far off
            cb.items[:] = 100.0 + torch.arange(8, dtype=DTYPE)[:, None] * 10
            cb.items[5] = g[1, 1]
        q = prior_distribution(b, tok, cb)
        assert float(q.probs[1, 1, 5]) == 1.0

    def test_unfrozen_dictionary_is_contract_violation(self):
        cb = Codebook(K=8, n=4, seed=0)
        tok = Tokenizer(n=4)
        with pytest.raises(ContractViolation):
            prior_distribution(random_boundary(np.random.default_rng(4)), tok, cb)


class TestModalityDistribution:
    def feature(self, rng, h=4, w=4, n=8):
        return FeatureMap(torch.tensor(rng.standard_normal((h, w, n)), dtype=DTYPE), 4)

    def test_zero_logits_give_uniform(self):
        head = KeyHead(8, 16)
        zero_parameters(head)
        p = modality_distribution(self.feature(np.random.default_rng(5)), head)
        assert p.kind == MODALITY_SOFTMAX
        assert torch.allclose(p.probs.detach(),
                              torch.full_like(p.probs.detach(), 1 / 16), atol=1e-15)

    def test_large_logit_approaches_one_hot(self):
        head = KeyHead(8, 16)
        zero_parameters(head)
        with torch.no_grad():
            head.fc2.bias[3] = 50.0
        p = modality_distribution(self.feature(np.random.default_rng(6)), head)
        assert float(p.probs.detach()[:, :, 3].min()) > 1 - 1e-12

    def test_matches_log_sum_exp_recomputation(self):
        head = KeyHead(8, 16)
        init_parameters(head, np.random.default_rng(7))
        f = self.feature(np.random.default_rng(8))
        p = modality_distribution(f, head).probs.detach().numpy()
        logits = head(f.data.permute(2, 0, 1)[None])[0].detach().numpy()
        for i in range(4):
            for j in range(4):
                z = logits[:, i, j]
                lse = math.log(np.exp(z - z.max()).sum()) + z.max()
                for k in range(16):
                    ref = math.exp(z[k] - lse)
                    assert abs(p[i, j, k] - ref) <= 1e-9

    def test_rejects_wrong_stride(self):
        head = KeyHead(8, 16)
        f = FeatureMap(torch.zeros(4, 4, 8, dtype=DTYPE), 8)
        with pytest.raises(InputError):
            modality_distribution(f, head)


class TestKeyMap:
    def test_one_hot_at_12(self):
        keys = np.full((3, 3), 12)
        p = one_hot_dist(keys, 16)
        assert (key_map(p).keys == 12).all()

    def test_uniform_ties_break_low(self):
        p = EdgeDistribution(torch.full((2, 2, 8), 0.125, dtype=DTYPE), MODALITY_SOFTMAX)
        assert torch.equal(key_map(p).keys, torch.zeros(2, 2, dtype=torch.int64))

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(9)
        p = softmax_dist(rng, 6, 7, 16)
        got = key_map(p).keys.numpy()
        want = np.argmax(p.probs.numpy(), axis=2)
        assert (got == want).all()


class TestRecodeFeatures:
    def test_constant_key_copies_row(self):
        _, cb = frozen_pair(K=8, n=4)
        kg = KeyGrid(torch.full((3, 5), 3, dtype=torch.int64), 8)
        g = recode_features(kg, cb)
        assert torch.equal(g.data, cb.items.detach()[3].expand(3, 5, 4))

    def test_prior_chain_equals_quantize_values(self):
        tok, cb = frozen_pair()
        b = random_boundary(np.random.default_rng(10))
        q = prior_distribution(b, tok, cb)
        g = recode_features(key_map(q), cb)
        with torch.no_grad():
            quantized, _ = quantize(tokenize(b, tok), cb)
        assert torch.equal(g.data, quantized)

    def test_out_of_range_key_is_contract_violation(self):
        _, cb = frozen_pair(K=8, n=4)
        kg = KeyGrid(torch.full((2, 2), 7, dtype=torch.int64), 8)
        object.__setattr__(kg, "keys", torch.full((2, 2), 9, dtype=torch.int64))
        with pytest.raises(ContractViolation):
            recode_features(kg, cb)

    def test_stop_gradient_blocks_head_logits(self):
        tok, cb = frozen_pair(K=8, n=4)
        head = KeyHead(4, 8)
        init_parameters(head, np.random.default_rng(11))
        f = FeatureMap(torch.tensor(np.random.default_rng(12).standard_normal((4, 4, 4)),
                                    dtype=DTYPE), 4)
        p = modality_distribution(f, head)
        downstream = recode_features(key_map(p), cb).data.sum()
        assert downstream.grad_fn is None
        for prm in head.parameters():
            assert prm.grad is None


class TestEdgeLoss:
    def test_matching_one_hot_is_zero(self):
        keys = np.random.default_rng(13).integers(0, 16, (4, 4))
        q = one_hot_dist(keys, 16)
        p = EdgeDistribution(q.probs.clone(), MODALITY_SOFTMAX)
        assert float(edge_loss(q, p, p)) == 0.0

    def test_uniform_128_gives_two_log_128(self):
        keys = np.zeros((3, 3), dtype=np.int64)
        q = one_hot_dist(keys, 128)
        u = EdgeDistribution(torch.full((3, 3, 128), 1 / 128, dtype=DTYPE),
                             MODALITY_SOFTMAX)
        val = float(edge_loss(q, u, u))
        assert abs(val - 2 * math.log(128)) <= 1e-6

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(14)
        K = 16
        keys = rng.integers(0, K, (5, 6))
        q = one_hot_dist(keys, K)
        pi = softmax_dist(rng, 5, 6, K)
        pe = softmax_dist(rng, 5, 6, K)
        got = float(edge_loss(q, pi, pe))
        acc = 0.0
        for i in range(5):
            for j in range(6):
                k = int(keys[i, j])
                acc -= math.log(max(float(pi.probs[i, j, k]), LOG_EPS))
                acc -= math.log(max(float(pe.probs[i, j, k]), LOG_EPS))
        assert abs(got - acc / 30) <= 1e-9

    def test_non_negative_and_zero_only_when_matched(self):
        rng = np.random.default_rng(15)
        keys = rng.integers(0, 8, (4, 4))
        q = one_hot_dist(keys, 8)
        pi = softmax_dist(rng, 4, 4, 8)
        assert float(edge_loss(q, pi, pi)) > 0.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(16)
        K = 16
        keys = rng.integers(0, K, (4, 5))
        q = one_hot_dist(keys, K)
        pi = softmax_dist(rng, 4, 5, K)
        pe = softmax_dist(rng, 4, 5, K)
        base = float(edge_loss(q, pi, pe))
        perm = torch.as_tensor(rng.permutation(K))
        qp = EdgeDistribution(q.probs[:, :, perm], PRIOR_ONE_HOT)
        pip = EdgeDistribution(pi.probs[:, :, perm], MODALITY_SOFTMAX)
        pep = EdgeDistribution(pe.probs[:, :, perm], MODALITY_SOFTMAX)
        assert float(edge_loss(qp, pip, pep)) == pytest.approx(base, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        q = one_hot_dist(np.zeros((2, 2), dtype=np.int64), 8)
        p = softmax_dist(np.random.default_rng(17), 3, 2, 8)
        with pytest.raises(InputError):
            edge_loss(q, p, p)

    def test_requires_one_hot_prior(self):
        p = softmax_dist(np.random.default_rng(18), 2, 2, 8)
        with pytest.raises(InputError):
            edge_loss(p, p, p)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(19)
        K = 8
        keys = rng.integers(0, K, (2, 2))
        q = one_hot_dist(keys, K)
        logits = torch.tensor(rng.standard_normal((2, 2, K)), dtype=DTYPE,
                              requires_grad=True)

        def loss_of(z):
            pi = EdgeDistribution(torch.softmax(z, dim=2), MODALITY_SOFTMAX)
            pe = softmax_dist(np.random.default_rng(20), 2, 2, K)
            return edge_loss(q, pi, pe)

        loss_of(logits).backward()
        h = 1e-6
        for flat in range(logits.numel()):
            idx = np.unravel_index(flat, logits.shape)
            plus = logits.detach().clone()
            minus = logits.detach().clone()
            plus[idx] += h
            minus[idx] -= h
            fd = (float(loss_of(plus).detach()) - float(loss_of(minus).detach())) / (2 * h)
            an = float(logits.grad[idx])
            assert abs(fd - an) <= 1e-5 * max(1.0, abs(an))
