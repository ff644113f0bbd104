"""Command-line front end.

    fdsim fft run    --config cfg.json [--seed N] [--out DIR] [--format text|json]
    fdsim fft sweep  --config cfg.json ...
    fdsim i2s run    --config cfg.json [--timeline-dump] ...
    fdsim i2s sweep  --config cfg.json ...
    fdsim schedule dump --config cfg.json [--stage N | --reorder] [--out DIR]

Exit codes: 0 all checks pass, 1 invariant failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .fft import ConfigurationError
from .harness import load_config, run_experiment, write_report
from .schedule import (dump_reorder_schedule, dump_stage_schedule,
                       schedule_reorder, schedule_stage)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2


def _add_common(parser):
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--format", choices=("text", "json"), default="text",
                        help="stdout report format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdsim",
        description="Cycle-level FFT engine / banked memory / audio bus model")
    top = parser.add_subparsers(dest="group", required=True)

    fft = top.add_parser("fft", help="fixed-point FFT experiments")
    fft_sub = fft.add_subparsers(dest="verb", required=True)
    _add_common(fft_sub.add_parser("run", help="one end-to-end FFT run"))
    _add_common(fft_sub.add_parser("sweep", help="size/dtype sweep"))

    i2s = top.add_parser("i2s", help="audio bus scenarios")
    i2s_sub = i2s.add_subparsers(dest="verb", required=True)
    run = i2s_sub.add_parser("run", help="encode/decode one scenario")
    _add_common(run)
    run.add_argument("--timeline-dump", action="store_true",
                     help="write timeline.vcd to the output directory")
    _add_common(i2s_sub.add_parser("sweep", help="mode/device-count sweep"))

    sched = top.add_parser("schedule", help="inspect port schedules")
    sched_sub = sched.add_subparsers(dest="verb", required=True)
    dump = sched_sub.add_parser("dump", help="print per-cycle transactions")
    dump.add_argument("--config", required=True,
                      help="fft-run config naming n_points and dtype")
    dump.add_argument("--stage", type=int, default=None,
                      help="dump only this stage")
    dump.add_argument("--reorder", action="store_true",
                      help="dump only the reorder pass")
    dump.add_argument("--out", default=None, help="output directory")
    return parser


def _expected_kind(config, expected):
    if config.kind != expected:
        raise ConfigurationError(
            f"this command needs a {expected!r} config, got {config.kind!r}")


def _cmd_experiment(args, expected_kind):
    config = load_config(args.config)
    _expected_kind(config, expected_kind)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    report, _rows = run_experiment(config, out_dir=args.out,
                                   timeline_dump=getattr(args, "timeline_dump", False))
    if args.out:
        write_report(report, args.out)
    sys.stdout.write(report.to_json() if args.format == "json"
                     else report.to_text())
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_schedule_dump(args):
    config = load_config(args.config)
    _expected_kind(config, "fft-run")
    spec = config.spec
    pieces = []
    if not args.reorder:
        stages = ([args.stage] if args.stage is not None
                  else range(spec.n_points.bit_length() - 1))
        for s in stages:
            pieces.append(dump_stage_schedule(
                schedule_stage(spec.n_points, spec.dtype, s)))
    if args.reorder or args.stage is None:
        pieces.append(dump_reorder_schedule(
            schedule_reorder(spec.n_points, spec.dtype)))
    text = "\n".join(pieces)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "schedule.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.group == "schedule":
            return _cmd_schedule_dump(args)
        kind = f"{args.group}-{args.verb}"
        return _cmd_experiment(args, kind)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"invalid argument: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
