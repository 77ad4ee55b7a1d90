"""Command-line entry points: synth | train | eval | infer | gmacs."""

from __future__ import annotations

import argparse
import json
import sys

from . import complexity
from .checkpoint import load_checkpoint, restore_model
from .config import load_config
from .data import build_dataset, load_dataset
from .evaluate import evaluate_dataset, format_table
from .infer import restore_directory
from .network import CascadedDeblurNet, DeblurNet
from .train import train


def _load_model(checkpoint_path, stack=False):
    cfg, params, _ = load_checkpoint(checkpoint_path)
    model = CascadedDeblurNet(cfg) if stack else DeblurNet(cfg)
    target = model.stage1 if stack else model
    restore_model(target, params)
    return model, cfg


def cmd_synth(args):
    with open(args.spec) as fh:
        spec = json.load(fh)
    manifest = build_dataset(spec, args.out)
    print(f"wrote {len(manifest['sequences'])} sequence(s) to {args.out}")
    return 0


def cmd_train(args):
    cfg = load_config(args.config)
    result = train(cfg, log_print=not args.quiet)
    print(f"final total loss {result['total']:.6f} after {result['seconds']:.1f}s")
    print(f"checkpoint: {result['checkpoint']}")
    print(f"log: {result['log']}")
    return 0


def cmd_eval(args):
    model, _ = _load_model(args.checkpoint, stack=args.stack)
    sequences = load_dataset(args.dataset, args.split)
    per_seq, aggregate = evaluate_dataset(model, sequences, stack=args.stack)
    print(format_table(per_seq, aggregate))
    return 0


def cmd_infer(args):
    model, _ = _load_model(args.checkpoint, stack=args.stack)
    written = restore_directory(model, args.frames, args.out, stack=args.stack,
                                dump_attention=args.dump_attention)
    print(f"restored {len(written)} frame(s) into {args.out}")
    return 0


def cmd_gmacs(args):
    cfg = load_config(args.config).network_config()
    print(complexity.format_report(cfg, (args.height, args.width)))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vdeblur",
        description="Flow-guided deformable-attention video deblurring")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic blur dataset")
    p.add_argument("spec", help="scene specification (JSON)")
    p.add_argument("out", help="output dataset root")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train from a run config file")
    p.add_argument("config", help="key = value run config")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM table for a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("dataset", help="dataset root containing manifest.json")
    p.add_argument("--split", default="train")
    p.add_argument("--stack", action="store_true", help="evaluate the 5-frame cascade")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("infer", help="restore a directory of frames")
    p.add_argument("checkpoint")
    p.add_argument("frames", help="directory of input frames")
    p.add_argument("out", help="output directory")
    p.add_argument("--stack", action="store_true")
    p.add_argument("--dump-attention", action="store_true",
                   help="write per-source-frame attention heatmaps")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("gmacs", help="analytic multiply-add counts")
    p.add_argument("config", help="run config providing the network shape")
    p.add_argument("height", type=int)
    p.add_argument("width", type=int)
    p.set_defaults(fn=cmd_gmacs)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, FloatingPointError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
