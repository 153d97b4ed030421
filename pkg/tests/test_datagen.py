"""Data synthesis tests: ISP pipeline, occlusion protocol, scenes, dataset IO."""

import hashlib

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from escseg.datagen import (DEFAULT_SIZE, EventSimConfig, IspConfig, OcclusionSpec,
                            SceneConfig, apply_occlusion, apply_occlusions,
                            calibrate_attenuation, class_palette, default_specs,
                            generate_dataset, generate_toy_scene, identity_config,
                            isp_forward, isp_unprocess, list_sequences,
                            lowlight_simulate, luminance, read_sequence,
                            simulate_events)
from escseg.events.boundary import extract_boundary
from escseg.events.correlation import edge_event_ratios
from escseg.events.types import ConfigurationError, EventStream, InputError

# produced once from the implementation under review, then frozen; guards
# against silent pipeline drift on this platform
GOLDEN_FORWARD_SHA = "c7cec7528c6395603b12ec40986d9fd06e2ea3f8f03fedf3a850f810f8e673a5"


def natural_fixture(seed, h=64, w=64):
    """Smooth mid-gamut RGB, the kind the round-trip bound is stated for."""
    rng = np.random.default_rng(seed)
    img = np.stack([gaussian_filter(rng.random((h, w)), 3.0) for _ in range(3)], axis=2)
    return 0.15 + 0.7 * (img - img.min()) / (img.max() - img.min())


def psnr(a, b):
    mse = float(((a - b) ** 2).mean())
    return np.inf if mse == 0 else 10 * np.log10(1.0 / mse)


class TestIspConfig:
    def test_defaults_valid(self):
        IspConfig()

    def test_singular_ccm_rejected(self):
        with pytest.raises(ConfigurationError):
            IspConfig(ccm=np.zeros((3, 3)))

    def test_bad_gains_rejected(self):
        with pytest.raises(ConfigurationError):
            IspConfig(gain=0.0)
        with pytest.raises(ConfigurationError):
            IspConfig(wb_gains=(1.0, -1.0, 1.0))

    def test_only_bggr(self):
        with pytest.raises(ConfigurationError):
            IspConfig(bayer="RGGB")


class TestIspForward:
    def test_identity_chain_gray_mosaic(self):
        out = isp_forward(np.full((8, 8), 0.3), identity_config())
        assert np.abs(out - 0.3).max() == 0.0

    def test_output_range_clamped(self):
        rng = np.random.default_rng(0)
        out = isp_forward(rng.random((16, 16)) * 50.0, IspConfig())
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_golden_hash_stable(self):
        mosaic = np.random.default_rng(2026).random((32, 32))
        out = isp_forward(mosaic, IspConfig())
        assert hashlib.sha256(out.tobytes()).hexdigest() == GOLDEN_FORWARD_SHA
        again = isp_forward(mosaic, IspConfig())
        assert np.array_equal(out, again)

    def test_odd_dimensions_rejected(self):
        with pytest.raises(InputError):
            isp_forward(np.zeros((7, 8)), IspConfig())


class TestIspRoundTrip:
    def test_psnr_forty_on_frozen_fixtures(self):
        cfg = IspConfig()
        for seed in range(8):
            x = natural_fixture(seed)
            y = isp_forward(isp_unprocess(x, cfg), cfg)
            assert psnr(x, y) >= 40.0, f"fixture {seed}"

    def test_gray_round_trip_exact(self):
        cfg = IspConfig()
        g = np.full((16, 16, 3), 0.4273)
        y = isp_forward(isp_unprocess(g, cfg), cfg)
        assert np.abs(y - g).max() <= 1e-12

    def test_tone_inverse_is_monotone_bijection(self):
        from escseg.datagen.isp import _tone, _tone_inverse
        ys = np.linspace(0.0, 1.0, 1001)
        xs = _tone_inverse(ys, "smoothstep")
        assert (np.diff(xs) >= 0).all()
        assert np.abs(_tone(xs, "smoothstep") - ys).max() <= 1e-12

    def test_unprocess_shape_checks(self):
        with pytest.raises(InputError):
            isp_unprocess(np.zeros((8, 8)), IspConfig())
        with pytest.raises(InputError):
            isp_unprocess(np.zeros((7, 8, 3)), IspConfig())


class TestLowlight:
    def test_degenerate_parameters_equal_round_trip(self):
        cfg = IspConfig()
        x = natural_fixture(3)
        a = lowlight_simulate(x, 1.0, 0.0, 0, cfg)
        b = isp_forward(isp_unprocess(x, cfg), cfg)
        assert np.array_equal(a, b)

    def test_mean_monotone_in_attenuation(self):
        x = natural_fixture(4)
        means = [float(lowlight_simulate(x, a, 0.0, 0).mean())
                 for a in (0.02, 0.1, 0.4, 1.0)]
        assert all(m0 < m1 for m0, m1 in zip(means, means[1:]))

    def test_deterministic_per_seed(self):
        x = natural_fixture(5)
        a = lowlight_simulate(x, 0.1, 0.01, seed=9)
        b = lowlight_simulate(x, 0.1, 0.01, seed=9)
        c = lowlight_simulate(x, 0.1, 0.01, seed=10)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_calibration_hits_dataset_statistic(self):
        # mean pixel value target 6.16/255, tolerance 20 percent
        x = natural_fixture(6)
        target = 6.16 / 255.0
        att = calibrate_attenuation(x, target)
        got = float(lowlight_simulate(x, att, 0.0, 0).mean())
        assert abs(got - target) <= 0.2 * target

    def test_bad_attenuation_rejected(self):
        with pytest.raises(ConfigurationError):
            lowlight_simulate(natural_fixture(7), 0.0, 0.0, 0)
        with pytest.raises(ConfigurationError):
            lowlight_simulate(natural_fixture(7), -0.5, 0.0, 0)


def make_stream(xs, ys, ts, ps, width=640, height=360, t_end=1000):
    return EventStream(np.array(xs), np.array(ys), np.array(ts), np.array(ps),
                       0, t_end, width, height)


class TestOcclusion:
    def test_none_is_identity(self):
        rgb = np.random.default_rng(8).random((360, 640, 3))
        stream = make_stream([10], [10], [5], [1])
        out_rgb, out_stream = apply_occlusion(rgb, stream,
                                              OcclusionSpec(0, 0, 100, 100, "none"))
        assert np.array_equal(out_rgb, rgb)
        assert out_stream is stream

    def test_default_event_rect_containment(self):
        stream = make_stream([160, 100], [160, 100], [5, 6], [1, -1])
        spec = default_specs("event")[0]
        assert (spec.x0, spec.y0, spec.w, spec.h) == (150, 150, 100, 100)
        _, out = apply_occlusion(np.zeros((360, 640, 3)), stream, spec)
        assert out.x.tolist() == [100] and out.y.tolist() == [100]

    def test_default_rgb_rect_zeroed(self):
        rgb = np.ones((360, 640, 3))
        spec = default_specs("rgb")[0]
        assert (spec.x0, spec.y0) == (350, 200)
        out, _ = apply_occlusion(rgb, make_stream([0], [0], [5], [1]), spec)
        assert out[200:300, 350:450].max() == 0.0
        assert out[199, 350] == pytest.approx(1.0)
        assert out[200, 349] == pytest.approx(1.0)
        assert float(out.sum()) == pytest.approx(3 * (360 * 640 - 100 * 100))

    def test_oversize_rect_clips(self):
        # 250x250 at <350, 200> on a 640x360 frame leaves 250x160 masked
        rgb = np.ones((360, 640, 3))
        out, _ = apply_occlusion(rgb, make_stream([0], [0], [5], [1]),
                                 OcclusionSpec(350, 200, 250, 250, "rgb"))
        masked = (out[:, :, 0] == 0).sum()
        assert masked == 250 * 160

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        rgb = rng.random((360, 640, 3))
        stream = make_stream(rng.integers(0, 640, 50), rng.integers(0, 360, 50),
                             np.sort(rng.integers(1, 1000, 50)),
                             rng.choice([-1, 1], 50))
        spec = OcclusionSpec(100, 100, 150, 150, "both")
        r1, s1 = apply_occlusion(rgb, stream, spec)
        r2, s2 = apply_occlusion(r1, s1, spec)
        assert np.array_equal(r1, r2)
        assert np.array_equal(s1.x, s2.x) and np.array_equal(s1.t, s2.t)

    def test_default_specs_both_uses_per_modality_origins(self):
        specs = default_specs("both", size=80)
        assert [s.target for s in specs] == ["rgb", "event"]
        assert (specs[0].x0, specs[0].y0) == (350, 200)
        assert (specs[1].x0, specs[1].y0) == (150, 150)
        assert all(s.w == 80 and s.h == 80 for s in specs)
        assert default_specs("none") == []
        assert DEFAULT_SIZE == 100

    def test_apply_occlusions_composes(self):
        rgb = np.ones((360, 640, 3))
        stream = make_stream([160, 400], [160, 210], [5, 6], [1, 1])
        out_rgb, out_stream = apply_occlusions(rgb, stream, default_specs("both"))
        assert out_rgb[210, 400, 0] == 0.0
        assert len(out_stream.t) == 1 and out_stream.x[0] == 400

    def test_bad_target_rejected(self):
        with pytest.raises(InputError):
            OcclusionSpec(0, 0, 10, 10, "frames")


class TestToyScenes:
    def test_zero_objects_background_only(self):
        scene = generate_toy_scene(SceneConfig(n_objects=0), seed=0)
        for m in scene.masks:
            assert (m.labels == 1).all()

    def test_single_object_pixel_count_constant(self):
        for seed in range(12):
            scene = generate_toy_scene(SceneConfig(n_objects=1), seed=seed)
            counts = [int((m.labels != 1).sum()) for m in scene.masks]
            assert len(set(counts)) == 1, f"seed {seed}: {counts}"
            assert counts[0] > 0

    def test_object_pixels_flat_shaded_to_palette(self):
        scene = generate_toy_scene(SceneConfig(n_objects=2), seed=3)
        pal = class_palette(11)
        for f, m in zip(scene.frames, scene.masks):
            for cls in np.unique(m.labels):
                if cls == 1:
                    continue
                sel = m.labels == cls
                assert np.abs(f[sel] - pal[cls]).max() <= 1e-12

    def test_deterministic_per_seed(self):
        a = generate_toy_scene(SceneConfig(), seed=4)
        b = generate_toy_scene(SceneConfig(), seed=4)
        c = generate_toy_scene(SceneConfig(), seed=5)
        assert np.array_equal(a.frames, b.frames)
        assert all(np.array_equal(x.labels, y.labels)
                   for x, y in zip(a.masks, b.masks))
        assert not np.array_equal(a.frames, c.frames)

    def test_events_concentrate_on_boundaries(self):
        sim = EventSimConfig(sigma_theta=0.0, leak_rate_hz=0.0, shot_rate_hz=0.0,
                             refractory_s=0.0)
        gaps = []
        for seed in range(10):
            scene = generate_toy_scene(SceneConfig(), seed=seed)
            stream = simulate_events(luminance(scene.frames), scene.timestamps_us,
                                     sim, seed=seed)
            if not len(stream.t):
                continue
            b = extract_boundary(scene.masks[0])
            r = edge_event_ratios(stream, b, dilation_iters=2)
            gaps.append(r.edge_event_ratio - r.edge_pixel_ratio)
        assert len(gaps) >= 8
        assert float(np.mean(gaps)) > 0.05

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            SceneConfig(frames=1)
        with pytest.raises(ConfigurationError):
            SceneConfig(min_size=0)
        with pytest.raises(ConfigurationError):
            SceneConfig(height=8)


class TestDatasetIo:
    def test_generate_write_read_roundtrip(self, tmp_path):
        cfg = SceneConfig(frames=3, n_objects=2)
        sim = EventSimConfig(sigma_theta=0.0)
        paths = generate_dataset(str(tmp_path), "train", 2, cfg, sim, seed=7)
        assert [p.name for p in paths] == ["0000", "0001"]
        seq = read_sequence(paths[0])
        assert seq.frames.shape == (3, 64, 64, 3)
        assert len(seq.masks) == 3
        scene = generate_toy_scene(cfg, seed=int(np.random.default_rng(
            [7, 0]).integers(0, 2 ** 31)))
        # masks survive PNG exactly; frames only up to 8-bit quantization
        for got, want in zip(seq.masks, scene.masks):
            assert np.array_equal(got.labels, want.labels)
        assert np.abs(seq.frames - scene.frames).max() <= 0.5 / 255 + 1e-12
        assert seq.meta["categories"] == 11
        assert list(seq.timestamps_us) == [0, 10000, 20000]

    def test_events_survive_exactly(self, tmp_path):
        cfg = SceneConfig(frames=3)
        sim = EventSimConfig(sigma_theta=0.0)
        generate_dataset(str(tmp_path), "val", 1, cfg, sim, seed=8)
        seq = read_sequence(list_sequences(str(tmp_path), "val")[0])
        scene = generate_toy_scene(cfg, seed=int(np.random.default_rng(
            [8, 0]).integers(0, 2 ** 31)))
        stream = simulate_events(luminance(scene.frames), scene.timestamps_us, sim,
                                 seed=int(np.random.default_rng(
                                     [8, 0, 1]).integers(0, 2 ** 31)))
        assert np.array_equal(seq.stream.x, stream.x)
        assert np.array_equal(seq.stream.t, stream.t)
        assert np.array_equal(seq.stream.p, stream.p)

    def test_env_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ESC_DATA_ROOT", str(tmp_path))
        cfg = SceneConfig(frames=2)
        generate_dataset(None, "train", 1, cfg, EventSimConfig(), seed=9)
        assert len(list_sequences(None, "train")) == 1

    def test_missing_root_raises(self, monkeypatch):
        monkeypatch.delenv("ESC_DATA_ROOT", raising=False)
        with pytest.raises(InputError):
            list_sequences(None, "train")

    def test_missing_split_lists_empty(self, tmp_path):
        assert list_sequences(str(tmp_path), "nope") == []
