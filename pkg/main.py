"""
JAFFNet defect saliency detector
Main entry point: train, infer, eval, synth and inspect sub-commands
"""
import argparse
import logging
import sys
import traceback
from typing import List, Optional

from src.commands import cmd_eval, cmd_infer, cmd_inspect, cmd_synth, cmd_train
from src.errors import JaffNetError
from src.models import DefectKind
from src.runtime import configure_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jaffnet", description="Surface-defect saliency detection")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train a model on images/ + masks/")
    train.add_argument("--config", help="key=value config file")
    train.add_argument("--data", required=True, help="dataset directory")
    train.add_argument("--out", required=True, help="output directory for checkpoints and loss_log.csv")
    train.add_argument("--ckpt", help="checkpoint to resume from")
    train.add_argument("--seed", type=int)
    train.add_argument("--steps", type=int)

    infer = commands.add_parser("infer", help="write saliency maps for a PNG or a directory of PNGs")
    infer.add_argument("--ckpt", required=True)
    infer.add_argument("--data", required=True, help="input PNG or directory")
    infer.add_argument("--out", required=True)
    infer.add_argument("--config", help="must match the checkpoint's network config")
    infer.add_argument("--size", type=int, default=256, help="network input size")

    evaluate = commands.add_parser("eval", help="score saliency maps against ground truth")
    evaluate.add_argument("--pred", required=True, help="directory of predicted maps")
    evaluate.add_argument("--gt", required=True, help="directory of masks (or a dataset root)")
    evaluate.add_argument("--out", required=True, help="report CSV path")
    evaluate.add_argument("--plot", action="store_true", help="also write the curve PNG")

    synth = commands.add_parser("synth", help="generate a synthetic defect dataset")
    synth.add_argument("--out", required=True)
    synth.add_argument("--n", type=int, default=8)
    synth.add_argument("--size", type=int, default=64)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--kind", action="append", choices=[k.value for k in DefectKind],
                       help="defect kind (repeatable); default cycles scratch, patch, inclusion")
    synth.add_argument("--noisy-fraction", type=float, default=0.0,
                       help="share of samples corrupted with 20%% salt-and-pepper noise")

    inspect = commands.add_parser("inspect", help="parameter count and per-stage shapes")
    inspect.add_argument("--config")
    inspect.add_argument("--ckpt")
    inspect.add_argument("--size", type=int, default=224)
    return parser


def run_command(args: argparse.Namespace) -> None:
    if args.command == "train":
        cmd_train(args.config, args.data, args.out, ckpt=args.ckpt, seed=args.seed, steps=args.steps)
    elif args.command == "infer":
        cmd_infer(args.ckpt, args.data, args.out, config_path=args.config, size=args.size)
    elif args.command == "eval":
        cmd_eval(args.pred, args.gt, args.out, plot=args.plot)
    elif args.command == "synth":
        cmd_synth(args.out, n=args.n, size=args.size, seed=args.seed, kinds=args.kind,
                  noisy_fraction=args.noisy_fraction)
    elif args.command == "inspect":
        cmd_inspect(args.config, ckpt=args.ckpt, size=args.size)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        run_command(args)
    except JaffNetError as e:
        print(f"Error: {e}")
        return e.exit_code
    except Exception as e:
        print(f"Error running {args.command}: {e}")
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
