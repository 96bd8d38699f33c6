"""Command-line front end: ``tsadv {train,attack,defend,sweep,report,all}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiment import STAGES, ConfigError, StageError, load_config, lookback_sweep, rebuild_outputs, run, run_stage

COMMANDS = ("train", "attack", "defend", "sweep", "report", "all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsadv", description="Adversarial attacks and defenses "
                                     "for LSTM time-series forecasters.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "report", help="YAML experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        if name == "all":
            p.add_argument("--stage", choices=STAGES, default="report", help="stop after this stage")
        if name == "sweep":
            p.add_argument("--lookbacks", type=int, nargs="+", help="override sweep.lookbacks")
    return parser


def _fail(stage: str, msg: str) -> int:
    print(f"tsadv: [{stage}] {msg}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        if not args.out and not args.config:
            return _fail("report", "need --out or --config")
        try:
            out = args.out or load_config(args.config).output
            rebuild_outputs(out)
        except (ConfigError, OSError, RuntimeError, ValueError) as exc:
            return _fail("report", str(exc))
        print(out)
        return 0
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        return _fail("config", str(exc))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out:
        cfg = cfg.with_output(args.out)
    try:
        if args.command == "sweep":
            lookback_sweep(cfg, args.lookbacks)
        elif args.command == "all":
            run(cfg, until=args.stage)
        else:
            run_stage(cfg, args.command)
    except StageError as exc:
        return _fail(exc.stage, f"{type(exc.cause).__name__}: {exc.cause}")
    except ConfigError as exc:
        return _fail("config", str(exc))
    print(cfg.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
