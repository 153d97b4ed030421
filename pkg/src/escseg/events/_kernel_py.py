"""Pure-NumPy signal-event kernel.

Vectorized over pixels per frame interval. Every floating-point expression is
written in the same order as the compiled kernel (and that one is built with
FMA contraction disabled), so the two backends agree bit for bit.
"""

from __future__ import annotations

import numpy as np

_LAST_INIT = -(2**62)


def compute_signal_events(log_frames, ts, theta_pos, theta_neg, refr_us):
    """Crossing-recurrence scan over linearly interpolated log intensities.

    Returns (x, y, t, p) int64 arrays in no particular order; the caller sorts.
    Counting rule: an interval fires iff d = l1 - ref exceeds the threshold
    strictly, then emits floor(d / theta) events at the crossed levels, and the
    reference steps by that many thresholds. Refractory drops the emission but
    the reference still steps.
    """
    F, H, W = log_frames.shape
    P = H * W
    ref = log_frames[0].reshape(P).copy()
    tp = theta_pos.reshape(P)
    tn = theta_neg.reshape(P)
    xs_flat = np.tile(np.arange(W, dtype=np.int64), H)
    ys_flat = np.repeat(np.arange(H, dtype=np.int64), W)
    last = np.full(P, _LAST_INIT, dtype=np.int64)
    out_x, out_y, out_t, out_p = [], [], [], []
    for i in range(F - 1):
        l0 = log_frames[i].reshape(P)
        l1 = log_frames[i + 1].reshape(P)
        t0 = int(ts[i])
        t1 = int(ts[i + 1])
        d = l1 - ref
        pos = d > tp
        neg = d < -tn
        n = np.zeros(P, dtype=np.int64)
        n[pos] = np.floor(d[pos] / tp[pos]).astype(np.int64)
        n[neg] = np.floor((-d[neg]) / tn[neg]).astype(np.int64)
        idx = np.flatnonzero(n)
        if idx.size:
            reps = n[idx]
            pix = np.repeat(idx, reps)
            csum = np.cumsum(reps)
            kk = (np.arange(csum[-1], dtype=np.int64)
                  - np.repeat(csum - reps, reps) + 1).astype(np.float64)
            sign = np.where(pos[pix], 1.0, -1.0)
            th = np.where(pos[pix], tp[pix], tn[pix])
            # negation is exact, so folding the sign into the product matches
            # the compiled kernel's separate +/- branches bitwise
            levels = ref[pix] + (kk * sign) * th
            dl = l1[pix] - l0[pix]
            dtd = float(t1 - t0)
            t0d = float(t0)
            t1d = float(t1)
            dl_safe = np.where(dl == 0.0, 1.0, dl)
            tc = np.where(dl == 0.0, t1d, t0d + ((levels - l0[pix]) * dtd) / dl_safe)
            t_int = np.minimum(t1, np.maximum(t0 + 1, np.ceil(tc).astype(np.int64)))
            pol = np.where(pos[pix], 1, -1).astype(np.int64)
            if refr_us > 0:
                keep = np.ones(len(pix), dtype=bool)
                for j in range(len(pix)):
                    pj = pix[j]
                    if t_int[j] >= last[pj] + refr_us:
                        last[pj] = t_int[j]
                    else:
                        keep[j] = False
                pix, t_int, pol = pix[keep], t_int[keep], pol[keep]
            out_x.append(xs_flat[pix])
            out_y.append(ys_flat[pix])
            out_t.append(t_int)
            out_p.append(pol)
        nd = n.astype(np.float64)
        ref = np.where(pos, ref + nd * tp, np.where(neg, ref - nd * tn, ref))
    if out_x:
        return (np.concatenate(out_x), np.concatenate(out_y),
                np.concatenate(out_t), np.concatenate(out_p))
    z = np.zeros(0, dtype=np.int64)
    return z, z.copy(), z.copy(), z.copy()
