"""Evaluation: resize-to-stride protocol, confusion accumulation, occlusion sweep."""

import warnings
from typing import List, Optional, Sequence

import numpy as np
import torch

from ..datagen.dataset import Sequence as DataSequence
from ..datagen.occlusion import (DEFAULT_EVENT_ORIGIN, DEFAULT_RGB_ORIGIN,
                                 OcclusionSpec, apply_occlusions)
from ..events.types import InputError, SemanticMask, VoxelGrid
from ..events.voxel import build_voxel_grid
from ..metrics import ConfusionMatrix, accumulate, summarize
from ..model import EscNet

SWEEP_SIZES = (50, 100, 150, 200, 250)
SWEEP_TARGETS = ("none", "rgb", "event", "both")


def _to_multiple(x: int, m: int = 32) -> int:
    return ((x + m - 1) // m) * m


def _resize_chw(arr: np.ndarray, hw) -> np.ndarray:
    t = torch.from_numpy(np.ascontiguousarray(arr)).permute(2, 0, 1)[None]
    out = torch.nn.functional.interpolate(t, size=hw, mode="bilinear",
                                          align_corners=False)
    return out[0].permute(1, 2, 0).numpy()


def predict_sequence(net: EscNet, frame: np.ndarray, grid: VoxelGrid) -> np.ndarray:
    """Upsample to the nearest multiple of 32, forward, downsample the logits."""
    h, w = frame.shape[:2]
    hw32 = (_to_multiple(h), _to_multiple(w))
    f = frame if hw32 == (h, w) else _resize_chw(frame, hw32)
    v = grid.data if hw32 == (h, w) else _resize_chw(grid.data, hw32)
    out = net(f, VoxelGrid(v))
    logits = out.logits
    if hw32 != (h, w):
        t = logits.permute(2, 0, 1)[None]
        logits = torch.nn.functional.interpolate(
            t, size=(h, w), mode="bilinear", align_corners=False)[0].permute(1, 2, 0)
    return logits.argmax(dim=2).numpy() + 1


def evaluate_model(net: EscNet, sequences: Sequence[DataSequence],
                   specs: Optional[List[OcclusionSpec]] = None) -> dict:
    """Metrics over sequences, each sample's last frame, optional occlusion."""
    if not sequences:
        raise InputError("no sequences to evaluate")
    cm = ConfusionMatrix(sequences[0].masks[0].categories)
    skipped = 0
    net.eval()
    with torch.no_grad():
        for seq in sequences:
            frame = np.asarray(seq.frames[-1], dtype=np.float64)
            mask = seq.masks[-1]
            if frame.shape[:2] != mask.shape:
                warnings.warn(f"skipping {seq.seq_id}: frame {frame.shape[:2]} "
                              f"vs mask {mask.shape}", stacklevel=2)
                skipped += 1
                continue
            stream = seq.stream
            if specs:
                frame, stream = apply_occlusions(frame, stream, specs)
            grid = build_voxel_grid(stream, net.config.bins)
            pred = predict_sequence(net, frame, grid)
            accumulate(cm, pred, mask)
    return {"metrics": summarize(cm), "evaluated": len(sequences) - skipped,
            "skipped": skipped}


def occlusion_sweep(net: EscNet, sequences: Sequence[DataSequence],
                    sizes: Sequence[int] = SWEEP_SIZES,
                    targets: Sequence[str] = SWEEP_TARGETS,
                    rgb_origin=DEFAULT_RGB_ORIGIN,
                    event_origin=DEFAULT_EVENT_ORIGIN) -> dict:
    """The full target x size grid; each row is one masked evaluation."""
    rows = []
    for target in targets:
        for size in sizes:
            specs = []
            if target in ("rgb", "both"):
                specs.append(OcclusionSpec(rgb_origin[0], rgb_origin[1],
                                           size, size, "rgb"))
            if target in ("event", "both"):
                specs.append(OcclusionSpec(event_origin[0], event_origin[1],
                                           size, size, "event"))
            report = evaluate_model(net, sequences, specs)
            m = report["metrics"]
            rows.append({"target": target, "size": int(size),
                         "gACC": m["gACC"], "mACC": m["mACC"], "mIoU": m["mIoU"]})
    return {"rows": rows, "sizes": [int(s) for s in sizes],
            "targets": list(targets),
            "rgb_origin": list(rgb_origin), "event_origin": list(event_origin)}


def degradation_csv(sweep: dict) -> str:
    lines = ["target,size,gACC,mACC,mIoU"]
    for row in sweep["rows"]:
        lines.append(f'{row["target"]},{row["size"]},{row["gACC"]:.6f},'
                     f'{row["mACC"]:.6f},{row["mIoU"]:.6f}')
    return "\n".join(lines) + "\n"
