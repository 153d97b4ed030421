"""Kernel backend selection.

The compiled extension is preferred when present; the NumPy fallback gives the
same bits. ESC_KERNEL=py or ESC_KERNEL=cy forces a backend.
"""

from __future__ import annotations

import os

from .types import ConfigurationError


def _select():
    pref = os.environ.get("ESC_KERNEL", "").strip().lower()
    if pref not in ("", "py", "cy"):
        raise ConfigurationError(f"ESC_KERNEL must be 'py' or 'cy', got {pref!r}")
    if pref != "py":
        try:
            from . import _kernel
            return _kernel, "cy"
        except ImportError:
            if pref == "cy":
                raise ConfigurationError("ESC_KERNEL=cy but the compiled kernel is not built")
    from . import _kernel_py
    return _kernel_py, "py"


_impl, _backend = _select()


def kernel_backend() -> str:
    """'cy' when the compiled extension is active, else 'py'."""
    return _backend


def compute_signal_events(log_frames, ts, theta_pos, theta_neg, refr_us):
    return _impl.compute_signal_events(log_frames, ts, theta_pos, theta_neg, refr_us)
