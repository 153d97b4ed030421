"""Segmentation training: augmentation, param groups, LR schedule, checkpoints.

The dictionary stage runs first (see escseg.dictionary.training); this stage
freezes its output and trains everything else. All randomness is drawn from
per-step generators seeded (seed, step), so a resumed run replays the exact
trajectory of an unbroken one.
"""

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from .. import checkpoint
from ..datagen.dataset import Sequence as DataSequence
from ..datagen.dataset import list_sequences, read_sequence
from ..dictionary.training import DivergenceError, load_dictionary
from ..events.boundary import extract_boundary
from ..events.types import IGNORE_LABEL, ConfigurationError, InputError, SemanticMask
from ..events.voxel import build_voxel_grid
from ..model import EscNet, NetConfig, EncoderConfig, save_model, total_loss
from ..nnutil import DTYPE
from .config import RunConfig
from .evaluate import evaluate_model

MAGIC_OPT = b"ESCOPT1"


@dataclass
class TrainSample:
    frame: np.ndarray     # (H, W, 3) float64 in [0, 1]
    voxels: np.ndarray    # (H, W, B) float64
    labels: np.ndarray    # (H, W) int64, 255 = ignore


@dataclass
class TrainResult:
    net: EscNet
    log: List[dict]
    val_curve: List[Tuple[int, float]]
    best_path: str
    last_path: str
    best_miou: float
    best_step: int


def prepare_samples(sequences: Sequence[DataSequence], bins: int) -> List[TrainSample]:
    """One training sample per sequence: last frame + whole-window voxels."""
    out = []
    for seq in sequences:
        grid = build_voxel_grid(seq.stream, bins)
        out.append(TrainSample(np.asarray(seq.frames[-1], dtype=np.float64),
                               grid.data,
                               np.asarray(seq.masks[-1].labels, dtype=np.int64)))
    return out


def _resize_bilinear(arr: np.ndarray, hw: Tuple[int, int]) -> np.ndarray:
    t = torch.from_numpy(np.ascontiguousarray(arr)).permute(2, 0, 1)[None]
    out = torch.nn.functional.interpolate(t, size=hw, mode="bilinear",
                                          align_corners=False)
    return out[0].permute(1, 2, 0).numpy()


def _resize_nearest_labels(labels: np.ndarray, hw: Tuple[int, int]) -> np.ndarray:
    h, w = labels.shape
    rows = np.minimum((np.arange(hw[0]) * h) // hw[0], h - 1)
    cols = np.minimum((np.arange(hw[1]) * w) // hw[1], w - 1)
    return labels[np.ix_(rows, cols)]


def augment_sample(rng: np.random.Generator, sample: TrainSample,
                   cfg: RunConfig) -> TrainSample:
    """Jitter, flip, blur, random resize, pad, random crop."""
    frame, voxels, labels = sample.frame, sample.voxels, sample.labels
    if cfg.jitter:
        gains = rng.uniform(0.9, 1.1, 3)
        offset = rng.uniform(-0.05, 0.05)
        frame = np.clip(frame * gains + offset, 0.0, 1.0)
    if cfg.flip and rng.random() < 0.5:
        frame = frame[:, ::-1]
        voxels = voxels[:, ::-1]
        labels = labels[:, ::-1]
    if cfg.blur and rng.random() < 0.5:
        from scipy.ndimage import gaussian_filter
        sigma = rng.uniform(0.3, 1.0)
        frame = np.stack([gaussian_filter(frame[:, :, c], sigma) for c in range(3)],
                         axis=2)
    scale = rng.uniform(cfg.resize_min, cfg.resize_max)
    if scale != 1.0:
        hw = (max(1, round(frame.shape[0] * scale)),
              max(1, round(frame.shape[1] * scale)))
        frame = _resize_bilinear(frame, hw)
        voxels = _resize_bilinear(voxels, hw)
        labels = _resize_nearest_labels(labels, hw)
    pad_h = max(0, cfg.crop - frame.shape[0])
    pad_w = max(0, cfg.crop - frame.shape[1])
    if pad_h or pad_w:
        frame = np.pad(frame, ((0, pad_h), (0, pad_w), (0, 0)))
        voxels = np.pad(voxels, ((0, pad_h), (0, pad_w), (0, 0)))
        labels = np.pad(labels, ((0, pad_h), (0, pad_w)),
                        constant_values=IGNORE_LABEL)
    y0 = int(rng.integers(0, frame.shape[0] - cfg.crop + 1))
    x0 = int(rng.integers(0, frame.shape[1] - cfg.crop + 1))
    sl = np.s_[y0:y0 + cfg.crop, x0:x0 + cfg.crop]
    return TrainSample(np.ascontiguousarray(frame[sl]),
                       np.ascontiguousarray(voxels[sl]),
                       np.ascontiguousarray(labels[sl]))


def net_config_from(cfg: RunConfig) -> NetConfig:
    enc = EncoderConfig(image_widths=cfg.image_widths, image_depths=cfg.image_depths,
                        event_widths=cfg.event_widths, event_depths=cfg.event_depths,
                        voxel_bins=cfg.bins)
    return NetConfig(K=cfg.K, n=cfg.n, classes=cfg.categories, bins=cfg.bins,
                     heads=cfg.heads, encoders=enc)


def param_groups(net: EscNet, cfg: RunConfig):
    """Prediction head learns at decoder_lr_mult times the base rate."""
    head, body = [], []
    for name, p in sorted(net.named_parameters()):
        (head if name.startswith("predict.") else body).append(p)
    return [{"params": body, "lr": cfg.lr},
            {"params": head, "lr": cfg.lr * cfg.decoder_lr_mult}]


def build_scheduler(opt, cfg: RunConfig, steps_per_epoch: int,
                    last_epoch: int = -1):
    if cfg.scheduler == "cyclic":
        half = max(1, (cfg.cycle_epochs * steps_per_epoch) // 2)
        return torch.optim.lr_scheduler.CyclicLR(
            opt,
            base_lr=[g["lr"] for g in opt.param_groups],
            max_lr=[g["lr"] * cfg.max_lr_factor for g in opt.param_groups],
            step_size_up=half, mode="triangular", cycle_momentum=False,
            last_epoch=last_epoch)
    if cfg.scheduler == "warmup-poly":
        warm = max(1, cfg.warmup_steps)

        def lam(step):
            if step < warm:
                return (step + 1) / warm
            frac = (step - warm) / max(1, cfg.steps - warm)
            return (1.0 - min(frac, 1.0)) ** cfg.poly_power

        return torch.optim.lr_scheduler.LambdaLR(opt, lam, last_epoch=last_epoch)
    return torch.optim.lr_scheduler.LambdaLR(opt, lambda step: 1.0,
                                             last_epoch=last_epoch)


def _loss_parts(net: EscNet, batch: List[TrainSample], cfg: RunConfig):
    total = torch.zeros((), dtype=DTYPE)
    pred_part = torch.zeros((), dtype=DTYPE)
    edge_part = torch.zeros((), dtype=DTYPE)
    for s in batch:
        mask = SemanticMask(s.labels, cfg.categories)
        boundary = extract_boundary(mask)
        from ..events.types import VoxelGrid
        out = net(s.frame, VoxelGrid(s.voxels), boundary)
        loss = total_loss(out.logits, mask, out.l_edge, cfg.beta)
        total = total + loss
        edge_part = edge_part + out.l_edge.detach()
        pred_part = pred_part + (loss.detach() - cfg.beta * out.l_edge.detach())
    k = len(batch)
    return total / k, float(pred_part) / k, float(edge_part) / k


def save_optimizer(path, opt, step: int, best_miou: float, best_step: int):
    arrays = {}
    flat = [p for g in opt.param_groups for p in g["params"]]
    steps = []
    for idx, p in enumerate(flat):
        state = opt.state.get(p, {})
        if not state:
            steps.append(0.0)
            continue
        arrays[f"{idx:04d}.exp_avg"] = state["exp_avg"].numpy()
        arrays[f"{idx:04d}.exp_avg_sq"] = state["exp_avg_sq"].numpy()
        steps.append(float(state["step"]))
    meta = {"step": step, "best_miou": best_miou, "best_step": best_step,
            "state_steps": steps}
    checkpoint.save_arrays(path, MAGIC_OPT, meta, arrays)


def load_optimizer(path, opt) -> dict:
    meta, arrays = checkpoint.load_arrays(path, MAGIC_OPT)
    flat = [p for g in opt.param_groups for p in g["params"]]
    if len(meta["state_steps"]) != len(flat):
        raise InputError("optimizer checkpoint does not match this model")
    for idx, p in enumerate(flat):
        key = f"{idx:04d}.exp_avg"
        if key not in arrays:
            continue
        opt.state[p] = {
            "step": torch.tensor(meta["state_steps"][idx]),
            "exp_avg": torch.from_numpy(arrays[key].copy()),
            "exp_avg_sq": torch.from_numpy(arrays[f"{idx:04d}.exp_avg_sq"].copy()),
        }
    return meta


def train_segmentation(cfg: RunConfig, dict_path, out_dir,
                       train_seqs: Optional[Sequence[DataSequence]] = None,
                       val_seqs: Optional[Sequence[DataSequence]] = None,
                       root=None, resume: bool = False) -> TrainResult:
    """Train the segmentation stage on top of a frozen dictionary checkpoint.

    Sequences may be passed directly (tests) or loaded from `root`'s
    train/val splits. With resume=True, picks up from out_dir's last
    checkpoint and replays the remaining steps bit-identically.
    """
    if not os.path.exists(dict_path):
        raise ConfigurationError(
            f"dictionary checkpoint missing: {dict_path}; run the dictionary "
            "stage first")
    art = load_dictionary(dict_path)
    tok, cb = art.tokenizer, art.codebook
    for p in list(tok.parameters()) + list(cb.parameters()):
        p.requires_grad_(False)
    if art.config.K != cfg.K or art.config.n != cfg.n:
        raise ConfigurationError(
            f"dictionary is K={art.config.K}, n={art.config.n}; "
            f"config wants K={cfg.K}, n={cfg.n}")

    if train_seqs is None:
        train_seqs = [read_sequence(p) for p in list_sequences(root, "train")]
    if val_seqs is None:
        val_seqs = [read_sequence(p) for p in list_sequences(root, "val")]
    if not train_seqs:
        raise InputError("no training sequences")
    samples = prepare_samples(train_seqs, cfg.bins)

    net = EscNet(tok, cb, net_config_from(cfg))
    net.init_weights(cfg.seed)
    opt = torch.optim.AdamW(param_groups(net, cfg), lr=cfg.lr,
                            weight_decay=cfg.weight_decay)
    steps_per_epoch = max(1, (len(samples) + cfg.batch_size - 1) // cfg.batch_size)

    os.makedirs(out_dir, exist_ok=True)
    best_path = os.path.join(out_dir, "best.ckpt")
    last_path = os.path.join(out_dir, "last.ckpt")
    opt_path = os.path.join(out_dir, "last.opt")
    log_path = os.path.join(out_dir, "train_log.json")

    start_step = 0
    best_miou = -1.0
    best_step = -1
    log: List[dict] = []
    val_curve: List[Tuple[int, float]] = []
    if resume:
        if not (os.path.exists(last_path) and os.path.exists(opt_path)):
            raise InputError(f"nothing to resume in {out_dir}")
        from ..model import load_model
        net, _ = load_model(last_path, tok, cb)
        opt = torch.optim.AdamW(param_groups(net, cfg), lr=cfg.lr,
                                weight_decay=cfg.weight_decay)
        meta = load_optimizer(opt_path, opt)
        start_step = int(meta["step"])
        best_miou = float(meta["best_miou"])
        best_step = int(meta["best_step"])
        if os.path.exists(log_path):
            with open(log_path) as fh:
                stored = json.load(fh)
            log = stored.get("steps", [])[:start_step]
            val_curve = [tuple(v) for v in stored.get("val", [])
                         if v[0] <= start_step]
    for g in opt.param_groups:
        g.setdefault("initial_lr", g["lr"])
    sched = build_scheduler(opt, cfg, steps_per_epoch,
                            last_epoch=start_step - 1 if start_step else -1)

    def run_validation(step):
        nonlocal best_miou, best_step
        if not val_seqs:
            return
        net.eval()
        with torch.no_grad():
            report = evaluate_model(net, val_seqs)
        net.train()
        miou = report["metrics"]["mIoU"]
        val_curve.append((step, miou))
        if miou > best_miou:
            best_miou = miou
            best_step = step
            save_model(best_path, net, cfg.seed, cfg.alpha, cfg.beta,
                       extra={"step": step, "val_miou": miou, "kind": "best"})

    if start_step == 0:
        run_validation(0)

    for step in range(start_step, cfg.steps):
        rng = np.random.default_rng([cfg.seed, step])
        idx = rng.choice(len(samples), size=cfg.batch_size,
                         replace=len(samples) < cfg.batch_size)
        batch = [augment_sample(rng, samples[i], cfg) for i in idx]
        opt.zero_grad(set_to_none=True)
        loss, l_pred, l_edge = _loss_parts(net, batch, cfg)
        if not torch.isfinite(loss):
            raise DivergenceError(
                f"loss went non-finite at step {step}: "
                f"pred={l_pred}, edge={l_edge}")
        loss.backward()
        opt.step()
        log.append({"step": step, "loss": float(loss.detach()),
                    "l_pred": l_pred, "l_edge": l_edge,
                    "lr": float(opt.param_groups[0]["lr"])})
        sched.step()
        done = step + 1
        if done % cfg.val_every == 0 or done == cfg.steps:
            run_validation(done)

    save_model(last_path, net, cfg.seed, cfg.alpha, cfg.beta,
               extra={"step": cfg.steps, "kind": "last"})
    save_optimizer(opt_path, opt, cfg.steps, best_miou, best_step)
    if best_step < 0:  # no validation split: best is last
        best_miou = float("nan")
        save_model(best_path, net, cfg.seed, cfg.alpha, cfg.beta,
                   extra={"step": cfg.steps, "kind": "best"})
        best_step = cfg.steps
    with open(log_path, "w") as fh:
        json.dump({"steps": log, "val": [list(v) for v in val_curve],
                   "config": dataclasses.asdict(cfg)}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return TrainResult(net, log, val_curve, best_path, last_path,
                       best_miou, best_step)


def train_pixel_accuracy(net: EscNet, samples: Sequence[TrainSample],
                         categories: int) -> float:
    """Un-augmented accuracy over the given samples, ignore pixels excluded."""
    from ..events.types import VoxelGrid
    from ..model import logits_to_mask
    correct = 0
    total = 0
    net.eval()
    with torch.no_grad():
        for s in samples:
            out = net(s.frame, VoxelGrid(s.voxels))
            pred = logits_to_mask(out.logits, categories).labels
            keep = s.labels != IGNORE_LABEL
            correct += int((pred[keep] == s.labels[keep]).sum())
            total += int(keep.sum())
    net.train()
    if total == 0:
        raise InputError("no labeled pixels")
    return correct / total
