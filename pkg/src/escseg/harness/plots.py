"""Report figures. Agg only, metadata stripped so reruns are byte-identical."""

from typing import Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..events.types import CorrelationSample

# matplotlib stamps its version into the PNG tEXt chunk unless told not to
_NO_STAMP = {"metadata": {"Software": None}}


def scatter_correlation(samples: Sequence[CorrelationSample], path) -> str:
    """Edge pixel ratio vs edge event ratio, one dot per (scene, dilation)."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5), dpi=120)
    xs = [s.edge_pixel_ratio for s in samples]
    ys = [s.edge_event_ratio for s in samples]
    ax.scatter(xs, ys, s=14, alpha=0.75, edgecolors="none")
    lim = max(0.05, max(xs + ys) * 1.05)
    ax.plot([0, lim], [0, lim], lw=1, ls="--", color="gray")
    ax.set_xlim(0, lim)
    ax.set_ylim(0, lim)
    ax.set_xlabel("edge pixel ratio")
    ax.set_ylabel("edge event ratio")
    ax.set_title("events vs semantic edges")
    fig.tight_layout()
    fig.savefig(path, **_NO_STAMP)
    plt.close(fig)
    return str(path)


def plot_degradation(sweep: dict, path) -> str:
    """mIoU against mask size, one line per occlusion target."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0), dpi=120)
    for target in sweep["targets"]:
        rows = [r for r in sweep["rows"] if r["target"] == target]
        ax.plot([r["size"] for r in rows], [r["mIoU"] for r in rows],
                marker="o", ms=4, label=target)
    ax.set_xlabel("mask side length (px)")
    ax.set_ylabel("mIoU (%)")
    ax.set_title("occlusion degradation")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_NO_STAMP)
    plt.close(fig)
    return str(path)


def plot_training(log: Sequence[dict], path) -> str:
    fig, ax = plt.subplots(figsize=(5.5, 4.0), dpi=120)
    ax.plot([e["step"] for e in log], [e["loss"] for e in log], lw=1)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title("training loss")
    fig.tight_layout()
    fig.savefig(path, **_NO_STAMP)
    plt.close(fig)
    return str(path)
