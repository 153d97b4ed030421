"""On-disk dataset layout and batch generation.

Layout: <root>/<split>/<seq_id>/{frames/%06d.png, events.evt, masks/%06d.png,
meta.json}. Frames are 8-bit RGB PNGs, masks single-channel PNGs holding class
ids (255 = ignore), events the native binary container. ESC_DATA_ROOT supplies
the default root.
"""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from ..events.io import read_events, write_events
from ..events.simulator import EventSimConfig, simulate_events
from ..events.types import EventStream, InputError, SemanticMask
from .scenes import SceneConfig, ToyScene, generate_toy_scene, luminance

ENV_DATA_ROOT = "ESC_DATA_ROOT"


def data_root(root: Optional[str] = None) -> Path:
    if root:
        return Path(root)
    env = os.environ.get(ENV_DATA_ROOT)
    if not env:
        raise InputError(f"no dataset root given and {ENV_DATA_ROOT} is unset")
    return Path(env)


def _frame_to_png(frame: np.ndarray) -> Image.Image:
    arr = np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(arr, mode="RGB")


def write_sequence(seq_dir: Path, scene: ToyScene, stream: EventStream,
                   meta: dict) -> None:
    frames_dir = seq_dir / "frames"
    masks_dir = seq_dir / "masks"
    frames_dir.mkdir(parents=True, exist_ok=True)
    masks_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(scene.frames):
        _frame_to_png(frame).save(frames_dir / f"{i:06d}.png")
    for i, mask in enumerate(scene.masks):
        Image.fromarray(mask.labels.astype(np.uint8), mode="L").save(
            masks_dir / f"{i:06d}.png")
    write_events(seq_dir / "events.evt", stream)
    with open(seq_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")


@dataclasses.dataclass
class Sequence:
    seq_id: str
    frames: np.ndarray            # (T, H, W, 3) float64 in [0, 1]
    masks: List[SemanticMask]
    stream: EventStream
    timestamps_us: np.ndarray
    meta: dict


def read_sequence(seq_dir: Path) -> Sequence:
    seq_dir = Path(seq_dir)
    with open(seq_dir / "meta.json") as fh:
        meta = json.load(fh)
    frame_files = sorted((seq_dir / "frames").glob("*.png"))
    mask_files = sorted((seq_dir / "masks").glob("*.png"))
    if not frame_files or len(frame_files) != len(mask_files):
        raise InputError(f"broken sequence at {seq_dir}")
    frames = np.stack([np.asarray(Image.open(f), dtype=np.float64) / 255.0
                       for f in frame_files])
    categories = int(meta.get("categories", 11))
    masks = [SemanticMask(np.asarray(Image.open(f), dtype=np.int64), categories)
             for f in mask_files]
    stream = read_events(seq_dir / "events.evt")
    ts = np.asarray(meta["timestamps_us"], dtype=np.int64)
    return Sequence(seq_dir.name, frames, masks, stream, ts, meta)


def list_sequences(root: Optional[str], split: str) -> List[Path]:
    base = data_root(root) / split
    if not base.is_dir():
        return []
    return sorted(p for p in base.iterdir() if (p / "meta.json").is_file())


def generate_dataset(root: Optional[str], split: str, count: int,
                     scene_cfg: SceneConfig, sim_cfg: EventSimConfig,
                     seed: int) -> List[Path]:
    """Render `count` sequences; sample i is a pure function of (seed, i)."""
    base = data_root(root) / split
    written = []
    for i in range(count):
        scene = generate_toy_scene(scene_cfg, seed=int(np.random.default_rng(
            [seed, i]).integers(0, 2 ** 31)))
        stream = simulate_events(luminance(scene.frames), scene.timestamps_us,
                                 sim_cfg, seed=int(np.random.default_rng(
                                     [seed, i, 1]).integers(0, 2 ** 31)))
        seq_dir = base / f"{i:04d}"
        meta = {
            "seq_id": f"{i:04d}",
            "resolution": [scene_cfg.height, scene_cfg.width],
            "categories": scene_cfg.categories,
            "timestamps_us": [int(t) for t in scene.timestamps_us],
            "scene_config": dataclasses.asdict(scene_cfg),
            "sim_config": dataclasses.asdict(sim_cfg),
            "seed": seed,
            "index": i,
        }
        write_sequence(seq_dir, scene, stream, meta)
        written.append(seq_dir)
    return written
