"""Command-line entry point: ``framerestore <subcommand> --config <path> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, FrameRestoreError
from .metrics import render_report
from .pipeline import (
    PipelineConfig,
    e2e_config,
    e2e_synthetic,
    run_scenario,
    stage_degrade,
    stage_detect_eval,
    stage_report,
    stage_split,
    stage_train,
    stage_translate,
)

SUBCOMMANDS = ("degrade", "split", "train", "translate", "detect-eval", "report", "e2e-synthetic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framerestore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML or JSON pipeline config")
        p.add_argument("--seed", type=int, help="override the stage's seed")
        p.add_argument("--out", type=Path, help="output root (default: config output_root)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("degrade", "split", "train", "translate", "detect-eval"):
            p.add_argument("--manifest", help="input manifest (overrides inputs.manifest)")
        if name in ("translate", "detect-eval"):
            p.add_argument("--checkpoint", help="checkpoint directory (overrides inputs.checkpoint)")
        if name == "translate":
            p.add_argument("--bench", action="store_true", help="print per-frame timing and fps")
        if name == "train":
            p.add_argument("--resume", help="checkpoint directory to resume from")
        if name == "detect-eval":
            p.add_argument("--detections", help="detection file; default runs the toy blob detector")
            p.add_argument("--scenario", choices=("raw", "translated"),
                           help="split the manifest and evaluate the test split under this scenario")
        if name == "report":
            p.add_argument("raw", type=Path, help="report JSON for raw frames")
            p.add_argument("translated", type=Path, help="report JSON for translated frames")
        if name == "e2e-synthetic":
            p.add_argument("--epochs", type=int, help="override training epochs")
            p.add_argument("--frames", type=int, help="override number of synthetic scenes")
    return parser


def _with_seed(config: PipelineConfig, command: str, seed: int | None) -> PipelineConfig:
    if seed is None:
        return config
    if command == "degrade":
        return replace(config, degradation_seed=seed)
    if command in ("split", "detect-eval"):
        return replace(config, split_seed=seed)
    if command == "train":
        return replace(config, gan=replace(config.gan, seed=seed))
    if command == "e2e-synthetic":
        return replace(config, synthetic=replace(config.synthetic, seed=seed), degradation_seed=seed,
                       split_seed=seed, gan=replace(config.gan, seed=seed))
    return config


def run(args: argparse.Namespace) -> int:
    if args.command == "e2e-synthetic" and args.config is None:
        config = e2e_config()
    else:
        config = PipelineConfig.load(args.config)
    config = _with_seed(config, args.command, args.seed)
    inputs = dict(config.inputs)
    for key in ("manifest", "checkpoint", "detections", "resume"):
        value = getattr(args, key, None)
        if value is not None:
            inputs[key] = str(Path(value).resolve())
    config = replace(config, inputs=inputs)
    out = Path(args.out) if args.out is not None else Path(config.output_root)

    if args.command == "degrade":
        print(json.dumps(stage_degrade(config, out), indent=2))
    elif args.command == "split":
        print(json.dumps(stage_split(config, out), indent=2))
    elif args.command == "train":
        print(stage_train(config, out))
    elif args.command == "translate":
        record = stage_translate(config, out, bench=args.bench)
        if not args.bench:
            print(json.dumps(record["timing"], indent=2))
    elif args.command == "detect-eval":
        if args.scenario:
            report = run_scenario(replace(config, scenario=args.scenario), out)
        else:
            report = stage_detect_eval(config, out)
        print(render_report(report))
    elif args.command == "report":
        print(stage_report(config, out, args.raw, args.translated))
    elif args.command == "e2e-synthetic":
        if args.epochs is not None:
            config = replace(config, gan=replace(config.gan, epochs=args.epochs))
        if args.frames is not None:
            config = replace(config, synthetic=replace(config.synthetic, n_frames=args.frames))
        result = e2e_synthetic(config, out, progress=lambda m: print(m, flush=True))
        print(json.dumps({k: v for k, v in result.summary().items() if not k.endswith("_report")}, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except FrameRestoreError as exc:
        code = exc.exit_code
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    except (TypeError, ValueError) as exc:
        code = ConfigError.exit_code
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
