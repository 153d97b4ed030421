"""Toy ISP: forward processing, unprocessing, and low-light synthesis.

The forward chain is gain, white balance, bilinear demosaic, color correction,
gamma compression, tone mapping. Unprocessing runs the exact inverses in
reverse order and re-mosaics; demosaic interpolation is the only lossy step on
natural content.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.ndimage import convolve

from ..events.types import ConfigurationError, InputError

TONE_SMOOTHSTEP = "smoothstep"
TONE_IDENTITY = "identity"

# BGGR: (0,0)=B (0,1)=G (1,0)=G (1,1)=R
_CHANNEL_OF_SITE = np.array([[2, 1], [1, 0]])

_KERNEL_G = np.array([[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]]) / 4.0
_KERNEL_RB = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 4.0


def _default_ccm() -> np.ndarray:
    return np.array([[1.06, -0.03, -0.03],
                     [-0.05, 1.10, -0.05],
                     [-0.02, -0.08, 1.10]])


@dataclass
class IspConfig:
    gain: float = 1.0
    wb_gains: Tuple[float, float, float] = (2.0, 1.0, 1.5)  # R, G, B
    ccm: np.ndarray = field(default_factory=_default_ccm)
    gamma: float = 2.2
    tone_curve: str = TONE_SMOOTHSTEP
    bayer: str = "BGGR"

    def __post_init__(self):
        self.ccm = np.asarray(self.ccm, dtype=np.float64)
        if self.ccm.shape != (3, 3):
            raise ConfigurationError("ccm must be 3x3")
        if abs(np.linalg.det(self.ccm)) < 1e-9:
            raise ConfigurationError("ccm must be invertible")
        if self.gain <= 0 or self.gamma <= 0 or min(self.wb_gains) <= 0:
            raise ConfigurationError("gain, gamma, and wb gains must be positive")
        if self.tone_curve not in (TONE_SMOOTHSTEP, TONE_IDENTITY):
            raise ConfigurationError(f"unknown tone curve {self.tone_curve!r}")
        if self.bayer != "BGGR":
            raise ConfigurationError("only the BGGR pattern is supported")


def identity_config() -> IspConfig:
    """Unit gains, identity CCM, gamma 1, identity tone curve."""
    return IspConfig(gain=1.0, wb_gains=(1.0, 1.0, 1.0), ccm=np.eye(3),
                     gamma=1.0, tone_curve=TONE_IDENTITY)


def _site_masks(h: int, w: int):
    yy, xx = np.mgrid[0:h, 0:w]
    chan = _CHANNEL_OF_SITE[yy % 2, xx % 2]
    return [(chan == c) for c in range(3)]  # R, G, B


def _tone(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == TONE_IDENTITY:
        return x
    return x * x * (3.0 - 2.0 * x)


def _tone_inverse(y: np.ndarray, kind: str) -> np.ndarray:
    if kind == TONE_IDENTITY:
        return y
    # exact analytic inverse of 3x^2 - 2x^3 on [0, 1]
    return 0.5 - np.sin(np.arcsin(1.0 - 2.0 * np.clip(y, 0.0, 1.0)) / 3.0)


def _demosaic(mosaic: np.ndarray) -> np.ndarray:
    h, w = mosaic.shape
    out = np.empty((h, w, 3))
    masks = _site_masks(h, w)
    for c, mask in enumerate(masks):
        kernel = _KERNEL_G if c == 1 else _KERNEL_RB
        num = convolve(np.where(mask, mosaic, 0.0), kernel, mode="mirror")
        den = convolve(mask.astype(np.float64), kernel, mode="mirror")
        out[:, :, c] = num / den
    return out


def isp_forward(raw: np.ndarray, cfg: IspConfig) -> np.ndarray:
    """BGGR mosaic (H, W) in [0,1] -> display RGB (H, W, 3) in [0,1]."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise InputError("raw mosaic must be 2-D")
    h, w = raw.shape
    if h % 2 or w % 2:
        raise InputError(f"mosaic dimensions must be even, got {h}x{w}")
    x = raw * cfg.gain
    masks = _site_masks(h, w)
    for c, mask in enumerate(masks):
        x = np.where(mask, x * cfg.wb_gains[c], x)
    rgb = _demosaic(x)
    rgb = rgb @ cfg.ccm.T
    rgb = np.clip(rgb, 0.0, None) ** (1.0 / cfg.gamma)
    rgb = _tone(rgb, cfg.tone_curve)
    return np.clip(rgb, 0.0, 1.0)


def isp_unprocess(rgb: np.ndarray, cfg: IspConfig) -> np.ndarray:
    """Display RGB -> BGGR mosaic: exact inverses in reverse order, re-mosaic."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InputError("rgb must be H x W x 3")
    h, w = rgb.shape[:2]
    if h % 2 or w % 2:
        raise InputError(f"image dimensions must be even, got {h}x{w}")
    x = _tone_inverse(np.clip(rgb, 0.0, 1.0), cfg.tone_curve)
    x = np.clip(x, 0.0, None) ** cfg.gamma
    x = x @ np.linalg.inv(cfg.ccm).T
    yy, xx = np.mgrid[0:h, 0:w]
    chan = _CHANNEL_OF_SITE[yy % 2, xx % 2]
    mosaic = np.take_along_axis(x, chan[:, :, None], axis=2)[:, :, 0]
    wb = np.asarray(cfg.wb_gains)[chan]
    mosaic = mosaic / wb / cfg.gain
    return np.clip(mosaic, 0.0, 1.0)


def lowlight_simulate(rgb: np.ndarray, attenuation: float, shot_noise_scale: float,
                      seed: int, cfg: IspConfig | None = None) -> np.ndarray:
    """Attenuate and add signal-dependent noise in the RAW domain.

    Noise is Gaussian with variance = scale * signal, the usual Poisson
    stand-in; everything is deterministic per seed.
    """
    if attenuation <= 0:
        raise ConfigurationError(f"attenuation must be > 0, got {attenuation}")
    if shot_noise_scale < 0:
        raise ConfigurationError("shot_noise_scale must be >= 0")
    cfg = cfg or IspConfig()
    raw = isp_unprocess(rgb, cfg) * attenuation
    if shot_noise_scale > 0:
        rng = np.random.default_rng(seed)
        sigma = np.sqrt(shot_noise_scale * np.clip(raw, 0.0, None))
        raw = raw + rng.normal(0.0, 1.0, raw.shape) * sigma
    return isp_forward(np.clip(raw, 0.0, 1.0), cfg)


def calibrate_attenuation(rgb: np.ndarray, target_mean: float,
                          cfg: IspConfig | None = None, iters: int = 40) -> float:
    """Bisection for the attenuation whose noiseless low-light mean matches.

    The output mean is monotone in the attenuation, so plain bisection on
    (0, 1] converges; used to hit dataset-statistic targets.
    """
    cfg = cfg or IspConfig()
    lo, hi = 1e-6, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        mean = float(lowlight_simulate(rgb, mid, 0.0, 0, cfg).mean())
        if mean > target_mean:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
