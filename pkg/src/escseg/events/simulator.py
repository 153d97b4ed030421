"""DVS-style event simulation from intensity frame sequences.

The deterministic signal path (log-intensity crossing recurrence with per-pixel
thresholds and a refractory period) runs in a swappable kernel; leak and shot
noise are drawn here so both kernel backends see identical noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import compute_signal_events
from .types import ConfigurationError, EventStream, InputError, sort_events

INTENSITY_FLOOR = 1e-4
THETA_FLOOR = 1e-3


@dataclass
class EventSimConfig:
    theta_pos: float = 0.2
    theta_neg: float = 0.2
    sigma_theta: float = 0.05
    leak_rate_hz: float = 0.1
    shot_rate_hz: float = 5.0
    refractory_s: float = 0.0005

    def __post_init__(self):
        if self.theta_pos <= 0 or self.theta_neg <= 0:
            raise ConfigurationError("thresholds must be positive")
        if self.sigma_theta < 0:
            raise ConfigurationError("sigma_theta must be >= 0")
        if self.leak_rate_hz < 0 or self.shot_rate_hz < 0:
            raise ConfigurationError("noise rates must be >= 0")
        if self.refractory_s < 0:
            raise ConfigurationError("refractory period must be >= 0")


def _enforce_refractory(x, y, t, p, width, refr_us):
    """Keep the earliest event per pixel, then only events >= refr_us later."""
    pid = y * width + x
    last = {}
    keep = np.ones(len(t), dtype=bool)
    for j in range(len(t)):
        pj = int(pid[j])
        prev = last.get(pj)
        if prev is not None and t[j] < prev + refr_us:
            keep[j] = False
        else:
            last[pj] = int(t[j])
    return x[keep], y[keep], t[keep], p[keep]


def _draw_noise(rng, rate_hz, width, height, t_start, t_end, polarity=None):
    """Poisson number of uniform-pixel, uniform-time events in (t_start, t_end]."""
    dur_s = (t_end - t_start) / 1e6
    lam = rate_hz * dur_s * width * height
    n = int(rng.poisson(lam)) if lam > 0 else 0
    x = rng.integers(0, width, n).astype(np.int64)
    y = rng.integers(0, height, n).astype(np.int64)
    t = rng.integers(t_start + 1, t_end + 1, n).astype(np.int64)
    if polarity is None:
        p = (rng.integers(0, 2, n) * 2 - 1).astype(np.int64)
    else:
        p = np.full(n, polarity, dtype=np.int64)
    return x, y, t, p


def simulate_events(frames, timestamps_us, cfg: EventSimConfig, seed: int = 0) -> EventStream:
    """Simulate an event stream from >= 2 intensity frames.

    Per pixel the log intensity is linearly interpolated between frames; each
    strict threshold crossing emits an event and steps the running reference by
    one threshold. Per-pixel thresholds are drawn once from N(theta, sigma^2)
    and clipped positive. Leak events (+1) and shot-noise events (random
    polarity) are overlaid, and the refractory period is enforced on the merged
    stream. Deterministic per (inputs, cfg, seed).
    """
    frames = np.asarray(frames, dtype=np.float64)
    ts = np.asarray(timestamps_us, dtype=np.int64)
    if frames.ndim != 3 or frames.shape[0] < 2:
        raise InputError("need at least 2 frames shaped (F, H, W)")
    if ts.shape != (frames.shape[0],):
        raise InputError("one timestamp per frame required")
    if np.any(np.diff(ts) <= 0):
        raise InputError("timestamps must be strictly increasing")
    F, H, W = frames.shape
    log_frames = np.ascontiguousarray(np.log(np.maximum(frames, INTENSITY_FLOOR)))
    rng = np.random.default_rng(seed)
    theta_pos = np.clip(rng.normal(cfg.theta_pos, cfg.sigma_theta, (H, W)), THETA_FLOOR, None)
    theta_neg = np.clip(rng.normal(cfg.theta_neg, cfg.sigma_theta, (H, W)), THETA_FLOOR, None)
    refr_us = int(round(cfg.refractory_s * 1e6))
    x, y, t, p = compute_signal_events(
        log_frames, ts,
        np.ascontiguousarray(theta_pos), np.ascontiguousarray(theta_neg), refr_us,
    )
    t_start, t_end = int(ts[0]), int(ts[-1])
    lx, ly, lt, lp = _draw_noise(rng, cfg.leak_rate_hz, W, H, t_start, t_end, polarity=1)
    sx, sy, st, sp = _draw_noise(rng, cfg.shot_rate_hz, W, H, t_start, t_end)
    n_noise = len(lt) + len(st)
    x = np.concatenate([x, lx, sx])
    y = np.concatenate([y, ly, sy])
    t = np.concatenate([t, lt, st])
    p = np.concatenate([p, lp, sp])
    x, y, t, p = sort_events(x, y, t, p)
    if refr_us > 0 and n_noise > 0:
        # the kernel already spaced its own events; collisions involve noise
        x, y, t, p = _enforce_refractory(x, y, t, p, W, refr_us)
    return EventStream(x, y, t, p, t_start, t_end, W, H)


def inject_noise_events(stream: EventStream, rate_hz: float, seed: int = 0) -> EventStream:
    """Overlay pure-noise events at rate_hz per pixel, merged time-ordered."""
    if rate_hz < 0:
        raise ConfigurationError(f"rate must be >= 0, got {rate_hz}")
    if rate_hz == 0:
        return EventStream(stream.x.copy(), stream.y.copy(), stream.t.copy(),
                           stream.p.copy(), stream.t_start, stream.t_end,
                           stream.width, stream.height)
    rng = np.random.default_rng(seed)
    nx, ny, nt, np_ = _draw_noise(rng, rate_hz, stream.width, stream.height,
                                  stream.t_start, stream.t_end)
    x, y, t, p = sort_events(
        np.concatenate([stream.x, nx]), np.concatenate([stream.y, ny]),
        np.concatenate([stream.t, nt]), np.concatenate([stream.p, np_]),
    )
    return EventStream(x, y, t, p, stream.t_start, stream.t_end,
                       stream.width, stream.height)
