"""Backbone, resolver, and edge-encoder contract tests."""

import logging
import math

import numpy as np
import pytest
import torch

from escseg.events.types import ConfigurationError, ContractViolation, InputError, VoxelGrid
from escseg.model.encoders import (EdgeEncoder, EncoderConfig, FeatureMap,
                                   PyramidCollapse, PyramidEncoder, edge_encode,
                                   encode_events, encode_image, resolve_image_edges)
from escseg.nnutil import init_parameters, zero_parameters


def tiny_image_encoder(widths=(4, 6, 8, 8), depths=(1, 1, 1, 1), seed=0):
    enc = PyramidEncoder(3, widths, depths)
    init_parameters(enc, np.random.default_rng(seed))
    return enc


def tiny_event_encoder(bins=5, widths=(4, 4, 4, 4), seed=1):
    enc = PyramidEncoder(bins, widths, (1, 1, 1, 1))
    init_parameters(enc, np.random.default_rng(seed))
    return enc


class TestEncoderConfig:
    def test_defaults_valid(self):
        EncoderConfig()

    def test_event_branch_must_not_exceed_image_branch(self):
        with pytest.raises(ConfigurationError):
            EncoderConfig(image_widths=(8, 8, 8, 8), event_widths=(16, 8, 8, 8))

    def test_needs_four_stages(self):
        with pytest.raises(ConfigurationError):
            EncoderConfig(image_widths=(8, 8, 8))


class TestEncodeImage:
    def test_pyramid_shape_law_256(self):
        enc = tiny_image_encoder()
        img = np.random.default_rng(0).random((256, 256, 3))
        feats = encode_image(img, enc)
        assert [f.stride for f in feats] == [4, 8, 16, 32]
        assert [tuple(f.data.shape[:2]) for f in feats] == [
            (64, 64), (32, 32), (16, 16), (8, 8)]
        assert [f.channels for f in feats] == [4, 6, 8, 8]

    def test_zero_input_zero_weights_zero_features(self):
        enc = tiny_image_encoder()
        zero_parameters(enc)
        feats = encode_image(np.zeros((64, 64, 3)), enc)
        for f in feats:
            assert torch.equal(f.data, torch.zeros_like(f.data))

    def test_purity(self):
        enc = tiny_image_encoder()
        img = np.random.default_rng(1).random((64, 64, 3))
        a = encode_image(img, enc)
        b = encode_image(img, enc)
        for fa, fb in zip(a, b):
            assert torch.equal(fa.data, fb.data)

    def test_non_divisible_input_rejected(self):
        enc = tiny_image_encoder()
        with pytest.raises(ContractViolation):
            encode_image(np.zeros((100, 96, 3)), enc)

    def test_bad_channel_count_rejected(self):
        with pytest.raises(InputError):
            encode_image(np.zeros((64, 64, 4)), tiny_image_encoder())


class TestEncodeEvents:
    def test_pyramid_shape_law(self):
        enc = tiny_event_encoder()
        vox = VoxelGrid(np.random.default_rng(2).standard_normal((64, 96, 5)))
        feats = encode_events(vox, enc, expected_bins=5)
        assert [tuple(f.data.shape[:2]) for f in feats] == [
            (16, 24), (8, 12), (4, 6), (2, 3)]

    def test_bin_mismatch_is_configuration_error(self):
        enc = tiny_event_encoder(bins=5)
        vox = VoxelGrid(np.zeros((64, 64, 3)))
        with pytest.raises(ConfigurationError):
            encode_events(vox, enc, expected_bins=5)

    def test_zero_input_zero_weights(self):
        enc = tiny_event_encoder()
        zero_parameters(enc)
        feats = encode_events(VoxelGrid(np.zeros((64, 64, 5))), enc)
        for f in feats:
            assert float(f.data.detach().abs().max()) == 0.0


def random_pyramid(rng, widths=(4, 6, 8, 8), hw=(16, 16), requires_grad=False):
    maps = []
    for i, (w, s) in enumerate(zip(widths, (4, 8, 16, 32))):
        t = torch.tensor(rng.standard_normal((hw[0] >> i, hw[1] >> i, w)),
                         dtype=torch.float64, requires_grad=requires_grad)
        maps.append(FeatureMap(t, s))
    return maps


class TestResolver:
    def test_output_stride4_n_channels(self):
        n = 8
        coll = PyramidCollapse((4, 6, 8, 8), n)
        init_parameters(coll, np.random.default_rng(3))
        pyr = random_pyramid(np.random.default_rng(4))
        out = resolve_image_edges(pyr, coll)
        assert out.stride == 4
        assert tuple(out.data.shape) == (16, 16, n)

    def test_zero_pyramid_zero_weights_zero_output(self):
        coll = PyramidCollapse((4, 6, 8, 8), 8)
        zero_parameters(coll)
        pyr = [FeatureMap(torch.zeros(16 >> i, 16 >> i, w, dtype=torch.float64), s)
               for i, (w, s) in enumerate(zip((4, 6, 8, 8), (4, 8, 16, 32)))]
        out = resolve_image_edges(pyr, coll)
        assert float(out.data.detach().abs().max()) == 0.0

    def test_incomplete_pyramid_rejected(self):
        coll = PyramidCollapse((4, 6, 8, 8), 8)
        pyr = random_pyramid(np.random.default_rng(5))
        with pytest.raises(InputError):
            resolve_image_edges(pyr[:3], coll)

    def test_coarse_stage_gradient_matches_fd(self):
        # every pyramid level feeds the collapse; spot-check with central FD
        coll = PyramidCollapse((4, 6, 8, 8), 8)
        init_parameters(coll, np.random.default_rng(6))
        rng = np.random.default_rng(7)
        leaves = [t.data.clone().requires_grad_(True)
                  for t in random_pyramid(rng)]
        weight = torch.tensor(rng.standard_normal((16, 16, 8)), dtype=torch.float64)

        def scalar(tensors):
            maps = [FeatureMap(t, s) for t, s in zip(tensors, (4, 8, 16, 32))]
            return (resolve_image_edges(maps, coll).data * weight).sum()

        scalar(leaves).backward()
        coarse = leaves[3]
        assert float(coarse.grad.abs().max()) > 0
        h = 1e-6
        for flat in (0, coarse.numel() // 2, coarse.numel() - 1):
            idx = np.unravel_index(flat, coarse.shape)
            plus = coarse.detach().clone()
            minus = coarse.detach().clone()
            plus[idx] += h
            minus[idx] -= h

            def ev(t):
                tensors = [x.detach() for x in leaves[:3]] + [t]
                return float(scalar(tensors).detach())

            fd = (ev(plus) - ev(minus)) / (2 * h)
            an = float(coarse.grad[idx])
            assert abs(fd - an) <= 1e-5 * max(1.0, abs(an))


class TestEdgeEncode:
    def test_same_structure_same_weights_same_output(self):
        a = EdgeEncoder(6, 8)
        b = EdgeEncoder(6, 8)
        init_parameters(a, np.random.default_rng(8))
        b.load_state_dict(a.state_dict())
        x = FeatureMap(torch.tensor(np.random.default_rng(9).standard_normal((12, 12, 6)),
                                    dtype=torch.float64), 4)
        ya = edge_encode(x, a, (12, 12))
        yb = edge_encode(x, b, (12, 12))
        assert torch.equal(ya.data, yb.data)

    def test_alignment_resamples_with_warning(self, caplog):
        blk = EdgeEncoder(6, 8)
        init_parameters(blk, np.random.default_rng(10))
        x = FeatureMap(torch.tensor(np.random.default_rng(11).standard_normal((10, 10, 6)),
                                    dtype=torch.float64), 4)
        with caplog.at_level(logging.WARNING, logger="escseg"):
            y = edge_encode(x, blk, (12, 12))
        assert tuple(y.data.shape) == (12, 12, 8)
        assert any("resampling" in r.message for r in caplog.records)

    def test_rejects_non_stride4(self):
        blk = EdgeEncoder(6, 8)
        x = FeatureMap(torch.zeros(4, 4, 6, dtype=torch.float64), 8)
        with pytest.raises(InputError):
            edge_encode(x, blk, (4, 4))

    def test_norm_within_lipschitz_estimate(self):
        # ||conv(x)|| <= ||K||_F sqrt(kh kw) ||x|| + ||b|| sqrt(positions);
        # ReLU never increases the norm.
        blk = EdgeEncoder(6, 8)
        init_parameters(blk, np.random.default_rng(12))
        H = W = 12
        x = FeatureMap(torch.tensor(np.random.default_rng(13).standard_normal((H, W, 6)),
                                    dtype=torch.float64), 4)
        y = edge_encode(x, blk, (H, W))
        positions = math.sqrt(H * W)
        xn = float(x.data.norm())
        w1, b1 = blk.proj.weight, blk.proj.bias
        w2, b2 = blk.mix.weight, blk.mix.bias
        bound1 = float(w1.detach().norm()) * 1.0 * xn + float(b1.detach().norm()) * positions
        bound = float(w2.detach().norm()) * 3.0 * bound1 + float(b2.detach().norm()) * positions
        assert float(y.data.detach().norm()) <= bound * (1 + 1e-12)
        assert torch.isfinite(y.data.detach()).all()
