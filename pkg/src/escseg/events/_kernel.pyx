# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled signal-event kernel.

Scalar crossing-recurrence per pixel. Expression order mirrors _kernel_py
exactly and the extension is compiled with -ffp-contract=off, so results are
bit-identical to the NumPy fallback.
"""

from libc.math cimport ceil, floor

import numpy as np

cimport numpy as cnp

cdef long long _LAST_INIT = -(2 ** 62)


def compute_signal_events(cnp.float64_t[:, :, ::1] log_frames,
                          cnp.int64_t[::1] ts,
                          cnp.float64_t[:, ::1] theta_pos,
                          cnp.float64_t[:, ::1] theta_neg,
                          long long refr_us):
    cdef Py_ssize_t F = log_frames.shape[0]
    cdef Py_ssize_t H = log_frames.shape[1]
    cdef Py_ssize_t W = log_frames.shape[2]
    cdef Py_ssize_t cap = 1024
    cdef Py_ssize_t count = 0
    out_x = np.empty(cap, dtype=np.int64)
    out_y = np.empty(cap, dtype=np.int64)
    out_t = np.empty(cap, dtype=np.int64)
    out_p = np.empty(cap, dtype=np.int64)
    cdef cnp.int64_t[::1] vx = out_x
    cdef cnp.int64_t[::1] vy = out_y
    cdef cnp.int64_t[::1] vt = out_t
    cdef cnp.int64_t[::1] vp = out_p

    cdef Py_ssize_t y, x, i
    cdef long long k, n, t0, t1, t_int, last, pol
    cdef double ref, d, tp, tn, l0, l1, dl, dtd, t0d, t1d, level, tc, kd, nd

    for y in range(H):
        for x in range(W):
            ref = log_frames[0, y, x]
            tp = theta_pos[y, x]
            tn = theta_neg[y, x]
            last = _LAST_INIT
            for i in range(F - 1):
                l0 = log_frames[i, y, x]
                l1 = log_frames[i + 1, y, x]
                t0 = ts[i]
                t1 = ts[i + 1]
                d = l1 - ref
                if d > tp:
                    n = <long long>floor(d / tp)
                    pol = 1
                elif d < -tn:
                    n = <long long>floor((-d) / tn)
                    pol = -1
                else:
                    continue
                dl = l1 - l0
                dtd = <double>(t1 - t0)
                t0d = <double>t0
                t1d = <double>t1
                for k in range(1, n + 1):
                    kd = <double>k
                    if pol == 1:
                        level = ref + kd * tp
                    else:
                        level = ref - kd * tn
                    if dl == 0:
                        tc = t1d
                    else:
                        tc = t0d + ((level - l0) * dtd) / dl
                    t_int = <long long>ceil(tc)
                    if t_int < t0 + 1:
                        t_int = t0 + 1
                    if t_int > t1:
                        t_int = t1
                    if refr_us <= 0 or t_int >= last + refr_us:
                        if count == cap:
                            cap *= 2
                            nx = np.empty(cap, dtype=np.int64); nx[:count] = out_x[:count]
                            ny = np.empty(cap, dtype=np.int64); ny[:count] = out_y[:count]
                            nt = np.empty(cap, dtype=np.int64); nt[:count] = out_t[:count]
                            np_ = np.empty(cap, dtype=np.int64); np_[:count] = out_p[:count]
                            out_x, out_y, out_t, out_p = nx, ny, nt, np_
                            vx = out_x; vy = out_y; vt = out_t; vp = out_p
                        vx[count] = x
                        vy[count] = y
                        vt[count] = t_int
                        vp[count] = pol
                        count += 1
                        last = t_int
                nd = <double>n
                if pol == 1:
                    ref = ref + nd * tp
                else:
                    ref = ref - nd * tn
    return (out_x[:count].copy(), out_y[:count].copy(),
            out_t[:count].copy(), out_p[:count].copy())
