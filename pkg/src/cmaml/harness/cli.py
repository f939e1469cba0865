"""Command-line entry point: ``python -m cmaml <command> [--config FILE] [--section.field VALUE ...]``.

Every ExperimentConfig field is a flag named by its dotted key. Values are
resolved as flag, then ``--config`` file, then built-in default. Exit codes:
0 success, 1 usage error, 2 runtime failure, 3 acceptance-check failure.
"""
from __future__ import annotations

import argparse
import sys

from . import experiments
from .config import ConfigError, ExperimentConfig, apply_overrides, keys
from .metrics import MetricsParseError
from .plots import emit_plots

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
COMMANDS = ("meta-train", "finetune", "compare", "ablate-eta", "oracle-check", "plot")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config_flags(p):
    g = p.add_argument_group("config fields (flag > --config file > default)")
    for key in keys():
        g.add_argument(f"--{key}", dest=f"cfg:{key}", default=None, metavar="VALUE")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--workers", type=int, default=None, help="worker processes for fine-tuning")
    p.add_argument("--out", default=None, help="output directory (suffixed if it exists)")


def build_parser():
    parser = _Parser(prog="cmaml", description="Constrained meta-RL experiments")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "plot":
            p.add_argument("metrics_csv")
            p.add_argument("--out", required=True, help="SVG file to write")
            p.add_argument("--cost-limit", type=float, default=None)
            p.add_argument("--title", default="")
            continue
        _config_flags(p)
        if name == "finetune":
            p.add_argument("--init", default="random", help="'random' or a checkpoint path")
        if name == "oracle-check":
            p.add_argument("--required", type=int, default=8, help="tasks that must pass per algorithm")
    return parser


def resolve_config(args, base=None) -> ExperimentConfig:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = base or ExperimentConfig()
    if args.config:
        try:
            cfg = ExperimentConfig.load(args.config, cfg)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
    pairs = [(k[4:], v) for k, v in vars(args).items() if k.startswith("cfg:") and v is not None]
    if args.workers is not None:
        pairs.append(("experiment.workers", str(args.workers)))
    return apply_overrides(cfg, pairs)


def _print_summary(out_dir):
    print(f"output: {out_dir}")
    try:
        with open(f"{out_dir}/summary.txt", encoding="utf-8") as f:
            sys.stdout.write(f.read())
    except OSError:
        pass


def run(args) -> int:
    if args.command == "plot":
        emit_plots(args.metrics_csv, args.out, args.cost_limit, args.title)
        print(f"wrote {args.out}")
        return EXIT_OK
    base = experiments.oracle_check_config() if args.command == "oracle-check" else None
    cfg = resolve_config(args, base)
    if args.command == "meta-train":
        _print_summary(experiments.cmd_meta_train(cfg, args.out)["out_dir"])
    elif args.command == "finetune":
        print(f"output: {experiments.cmd_finetune(cfg, args.init, args.out)['out_dir']}")
    elif args.command == "compare":
        _print_summary(experiments.cmd_compare(cfg, args.out)["out_dir"])
    elif args.command == "ablate-eta":
        _print_summary(experiments.cmd_ablate_eta(cfg, args.out)["out_dir"])
    elif args.command == "oracle-check":
        ok, _ = experiments.cmd_oracle_check(cfg, required=args.required)
        return EXIT_OK if ok else EXIT_CHECK
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("cmaml: a command is required: " + ", ".join(COMMANDS))
        return run(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MetricsParseError, OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
