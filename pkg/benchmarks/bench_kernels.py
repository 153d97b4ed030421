"""Compare the compiled event kernel against the NumPy fallback.

The signal-event sweep is the hot loop of data synthesis: every frame pair of
every sequence walks each pixel's log-intensity ramp. Run as

    python3 benchmarks/bench_kernels.py [--height 240] [--width 320]
        [--frames 12] [--repeats 5]

Both backends are invoked through the same wrapper and must return identical
bits; the benchmark asserts that before timing.
"""

import argparse
import time

import numpy as np

from escseg.events import _kernel_py
from escseg.events.kernel import kernel_backend
from escseg.events.simulator import EventSimConfig, simulate_events

try:
    from escseg.events import _kernel
except ImportError:
    _kernel = None


def make_workload(height, width, frames, seed=0):
    rng = np.random.default_rng(seed)
    base = rng.random((height, width)) * 0.6 + 0.2
    stack = [base]
    for _ in range(frames - 1):
        drift = rng.normal(0.0, 0.04, (height, width))
        stack.append(np.clip(stack[-1] + drift, 0.01, 1.0))
    ts = (np.arange(frames) * 10_000).astype(np.int64)
    log_frames = np.log(np.maximum(np.stack(stack), 1e-4))
    return np.ascontiguousarray(log_frames), ts


def time_backend(impl, log_frames, ts, repeats):
    _, height, width = log_frames.shape
    theta = np.full((height, width), 0.2)
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = impl.compute_signal_events(log_frames, ts, theta, theta, 500)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--height", type=int, default=240)
    ap.add_argument("--width", type=int, default=320)
    ap.add_argument("--frames", type=int, default=12)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    log_frames, ts = make_workload(args.height, args.width, args.frames)
    print(f"workload: {args.height}x{args.width}, {args.frames} frames, "
          f"active backend {kernel_backend()!r}")

    t_py, r_py = time_backend(_kernel_py, log_frames, ts, args.repeats)
    n_events = len(r_py[0])
    print(f"numpy fallback : {t_py * 1e3:8.1f} ms   ({n_events} events)")

    if _kernel is None:
        print("compiled kernel: not built (pip install -e . builds it)")
        return

    t_cy, r_cy = time_backend(_kernel, log_frames, ts, args.repeats)

    def canonical(res):
        x, y, t, p = res
        order = np.lexsort((p, x, y, t))
        return [a[order] for a in (x, y, t, p)]

    for a, b in zip(canonical(r_py), canonical(r_cy)):
        assert np.array_equal(a, b), "backends disagree"
    print(f"compiled kernel: {t_cy * 1e3:8.1f} ms   (identical after sorting)")
    print(f"speedup: {t_py / t_cy:.1f}x")

    # end-to-end check with noise + sorting on top of the kernel
    frames = np.exp(log_frames)
    cfg = EventSimConfig()
    t0 = time.perf_counter()
    stream = simulate_events(frames, ts, cfg, seed=1)
    dt = time.perf_counter() - t0
    print(f"full simulate_events ({kernel_backend()}): {dt * 1e3:8.1f} ms, "
          f"{len(stream.t)} events")


if __name__ == "__main__":
    main()
