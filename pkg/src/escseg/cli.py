"""The `esc` command line.

Subcommands: gen-data, train-dict, train, eval, eval-occlusion, stats-edge,
grad-check, report. Exit codes: 0 success, 1 usage error, 2 runtime failure.
Every run is a pure function of (flags, config file, seed), so rerunning a
subcommand rewrites byte-identical artifacts.
"""

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

ENV_CKPT_DIR = "ESC_CKPT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here says 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_dataclass_flags(parser, cls, prefix=""):
    for f in dataclasses.fields(cls):
        flag = "--" + (prefix + f.name).replace("_", "-")
        if isinstance(f.default, bool):
            parser.add_argument(flag, type=lambda s: s.lower() in ("1", "true", "yes"),
                                default=f.default)
        else:
            parser.add_argument(flag, type=type(f.default), default=f.default)


def _dataclass_from_args(cls, args, prefix=""):
    kwargs = {f.name: getattr(args, prefix + f.name) for f in dataclasses.fields(cls)}
    return cls(**kwargs)


def _pair(text):
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated integers")
    return tuple(parts)


def _rect(text):
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected x,y,w,h")
    return tuple(parts)


def _int_list(text):
    return [int(v) for v in text.split(",")]


def _ckpt_dir(args_out):
    if args_out:
        return Path(args_out)
    return Path(os.environ.get(ENV_CKPT_DIR, "runs"))


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def build_parser() -> _Parser:
    from escseg.datagen.scenes import SceneConfig
    from escseg.events.simulator import EventSimConfig

    top = _Parser(prog="esc", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", metavar="command",
                             parser_class=_Parser)

    p = sub.add_parser("gen-data",
                       help="render a toy dataset split")
    p.add_argument("--root", default=None)
    p.add_argument("--split", default="train")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    _add_dataclass_flags(p, SceneConfig)
    _add_dataclass_flags(p, EventSimConfig, prefix="sim_")

    p = sub.add_parser("train-dict", help="train the edge dictionary")
    p.add_argument("--root", default=None)
    p.add_argument("--split", default="train")
    p.add_argument("--out", default=None)
    p.add_argument("--K", type=int, default=128)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train the segmentation stage")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--dict", dest="dict_path", required=True)
    p.add_argument("--root", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dict", dest="dict_path", required=True)
    p.add_argument("--root", default=None)
    p.add_argument("--split", default="val")
    p.add_argument("--report", default=None)
    p.add_argument("--mask-rgb", action="store_true")
    p.add_argument("--mask-event", action="store_true")
    p.add_argument("--mask-rect", type=_rect, default=None)

    p = sub.add_parser("eval-occlusion",
                       help="run the full occlusion sweep grid")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dict", dest="dict_path", required=True)
    p.add_argument("--root", default=None)
    p.add_argument("--split", default="val")
    p.add_argument("--sizes", type=_int_list, default=[50, 100, 150, 200, 250])
    p.add_argument("--rgb-origin", type=_pair, default=(350, 200))
    p.add_argument("--event-origin", type=_pair, default=(150, 150))
    p.add_argument("--report", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--plot", default=None)

    p = sub.add_parser("stats-edge",
                       help="events-vs-edges correlation statistic")
    p.add_argument("--root", default=None)
    p.add_argument("--split", default="train")
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None)
    p.add_argument("--plot", default=None)

    p = sub.add_parser("grad-check",
                       help="finite-difference gradient verification")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", help="convert JSON reports to CSV")
    p.add_argument("--in", dest="inputs", action="append", required=True)
    p.add_argument("--csv", default=None)
    return top


def _load_net(args):
    from escseg.dictionary.training import load_dictionary
    from escseg.model import load_model
    from escseg.model.elr import freeze_dictionary
    art = load_dictionary(args.dict_path)
    freeze_dictionary(art.tokenizer, art.codebook)
    net, meta = load_model(args.ckpt, art.tokenizer, art.codebook)
    net.eval()
    return net, meta


def _load_split(root, split):
    from escseg.datagen.dataset import list_sequences, read_sequence
    from escseg.events.types import InputError
    paths = list_sequences(root, split)
    if not paths:
        raise InputError(f"no sequences under split {split!r}")
    return [read_sequence(p) for p in paths]


def cmd_gen_data(args) -> int:
    from escseg.datagen.dataset import generate_dataset
    from escseg.datagen.scenes import SceneConfig
    from escseg.events.simulator import EventSimConfig
    scene = _dataclass_from_args(SceneConfig, args)
    sim = _dataclass_from_args(EventSimConfig, args, prefix="sim_")
    paths = generate_dataset(args.root, args.split, args.count, scene, sim,
                             args.seed)
    print(f"wrote {len(paths)} sequences under {paths[0].parent}"
          if paths else "wrote 0 sequences")
    return 0


def cmd_train_dict(args) -> int:
    from escseg.dictionary.training import (DictTrainConfig, save_dictionary,
                                            train_dictionary)
    from escseg.events.boundary import extract_boundary
    seqs = _load_split(args.root, args.split)
    boundaries = [extract_boundary(m) for seq in seqs for m in seq.masks]
    cfg = DictTrainConfig(K=args.K, n=args.n, alpha=args.alpha, lr=args.lr,
                          weight_decay=args.weight_decay, steps=args.steps,
                          batch_size=args.batch_size, seed=args.seed)
    art = train_dictionary(boundaries, cfg)
    out = _ckpt_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "dictionary.ckpt"
    save_dictionary(ckpt, art)
    _write_json(out / "dict_log.json",
                {"loss_curve": art.loss_curve, "config": dataclasses.asdict(cfg)})
    print(f"dictionary -> {ckpt} (final loss {art.loss_curve[-1]:.6f})")
    return 0


def cmd_train(args) -> int:
    from escseg.harness.config import load_config
    from escseg.harness.train import train_segmentation
    cfg = load_config(args.config, args.set)
    out = _ckpt_dir(args.out)
    result = train_segmentation(cfg, args.dict_path, out, root=args.root,
                                resume=args.resume)
    best = ("none" if result.best_step < 0
            else f"{result.best_miou:.2f} mIoU at step {result.best_step}")
    print(f"trained {cfg.steps} steps; best validation {best}; "
          f"checkpoints under {out}")
    return 0


def _eval_specs(args):
    from escseg.datagen.occlusion import (DEFAULT_EVENT_ORIGIN,
                                          DEFAULT_RGB_ORIGIN, DEFAULT_SIZE,
                                          OcclusionSpec)
    specs = []
    if args.mask_rgb:
        x, y, w, h = args.mask_rect or (*DEFAULT_RGB_ORIGIN,
                                        DEFAULT_SIZE, DEFAULT_SIZE)
        specs.append(OcclusionSpec(x, y, w, h, "rgb"))
    if args.mask_event:
        x, y, w, h = args.mask_rect or (*DEFAULT_EVENT_ORIGIN,
                                        DEFAULT_SIZE, DEFAULT_SIZE)
        specs.append(OcclusionSpec(x, y, w, h, "event"))
    return specs


def cmd_eval(args) -> int:
    from escseg.harness.evaluate import evaluate_model
    net, _ = _load_net(args)
    seqs = _load_split(args.root, args.split)
    report = evaluate_model(net, seqs, _eval_specs(args))
    m = report["metrics"]
    print(f"gACC {m['gACC']:.2f}  mACC {m['mACC']:.2f}  mIoU {m['mIoU']:.2f}  "
          f"({report['evaluated']} sequences, {report['skipped']} skipped)")
    if args.report:
        _write_json(args.report, report)
    return 0


def cmd_eval_occlusion(args) -> int:
    from escseg.harness.evaluate import degradation_csv, occlusion_sweep
    net, _ = _load_net(args)
    seqs = _load_split(args.root, args.split)
    sweep = occlusion_sweep(net, seqs, sizes=args.sizes,
                            rgb_origin=args.rgb_origin,
                            event_origin=args.event_origin)
    for row in sweep["rows"]:
        print(f"{row['target']:>6} {row['size']:>4}: mIoU {row['mIoU']:.2f}")
    if args.report:
        _write_json(args.report, sweep)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(degradation_csv(sweep))
    if args.plot:
        from escseg.harness.plots import plot_degradation
        Path(args.plot).parent.mkdir(parents=True, exist_ok=True)
        plot_degradation(sweep, args.plot)
    return 0


def cmd_stats_edge(args) -> int:
    from escseg.events.correlation import correlation_experiment
    seqs = _load_split(args.root, args.split)
    samples = correlation_experiment(
        [(seq.stream, seq.masks[0]) for seq in seqs],
        max_iters=args.max_iters, seed=args.seed)
    lines = ["edge_pixel_ratio,edge_event_ratio,dilation_iters"]
    lines += [f"{s.edge_pixel_ratio:.8f},{s.edge_event_ratio:.8f},{s.dilation_iters}"
              for s in samples]
    mean_gap = sum(s.edge_event_ratio - s.edge_pixel_ratio
                   for s in samples) / len(samples)
    print(f"{len(samples)} samples, mean event-over-pixel gap {mean_gap:+.4f}")
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text("\n".join(lines) + "\n")
    if args.plot:
        from escseg.harness.plots import scatter_correlation
        Path(args.plot).parent.mkdir(parents=True, exist_ok=True)
        scatter_correlation(samples, args.plot)
    return 0


def cmd_grad_check(args) -> int:
    from escseg.harness.gradcheck import grad_check
    report = grad_check(args.tol, args.seed)
    print("\n".join(report.lines()))
    return 0 if report.ok else 2


def cmd_report(args) -> int:
    from escseg.harness.evaluate import degradation_csv
    rows = []
    for name in args.inputs:
        with open(name) as fh:
            payload = json.load(fh)
        if "rows" in payload:
            print(degradation_csv(payload), end="")
            if args.csv:
                Path(args.csv).write_text(degradation_csv(payload))
            continue
        m = payload["metrics"]
        rows.append(f"{name},{m['gACC']:.6f},{m['mACC']:.6f},{m['mIoU']:.6f}")
    if rows:
        text = "source,gACC,mACC,mIoU\n" + "\n".join(rows) + "\n"
        print(text, end="")
        if args.csv:
            Path(args.csv).write_text(text)
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-dict": cmd_train_dict,
    "train": cmd_train,
    "eval": cmd_eval,
    "eval-occlusion": cmd_eval_occlusion,
    "stats-edge": cmd_stats_edge,
    "grad-check": cmd_grad_check,
    "report": cmd_report,
}


def cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary of the program
        print(f"esc: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli(sys.argv[1:]))
