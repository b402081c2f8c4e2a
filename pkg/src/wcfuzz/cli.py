"""Command-line experiment runner."""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from . import __version__
from .experiments import (
    ALGORITHMS,
    ConfigError,
    RunSpec,
    config_from_dict,
    run_experiment,
)
from .targets import SubprocessTargetConfig, TargetError, subject_help


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wcfuzz",
        description="Search for worst-case resource-usage inputs of a black-box target.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment (seeded repetitions)")
    run_p.add_argument(
        "--subject",
        required=True,
        help="built-in subject, e.g. 'insertion-sort:n=16,lo=0,hi=255', or 'subprocess'",
    )
    run_p.add_argument("--algorithm", choices=ALGORITHMS, default="dse-smc")
    run_p.add_argument("--seed", type=int, default=None, help="base seed (repetition r adds r)")
    run_p.add_argument("--repetitions", type=int, default=1)
    run_p.add_argument("--max-epochs", type=int, default=None)
    run_p.add_argument("--max-evaluations", type=int, default=None)
    run_p.add_argument("--max-wall-ms", type=int, default=None)
    run_p.add_argument("--config", type=Path, default=None, help="JSON config file")
    run_p.add_argument("--out", type=Path, default=Path("results"))
    run_p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    run_p.add_argument(
        "--subprocess-cmd",
        default=None,
        help="child command line for --subject subprocess (hex line protocol)",
    )
    run_p.add_argument("--genome-length", type=int, default=None)
    run_p.add_argument("--timeout-ms", type=int, default=5000)
    run_p.add_argument("--failure-policy", choices=["error", "penalty"], default="error")
    run_p.add_argument("--penalty-tick", type=float, default=-1e18)

    sub.add_parser("list-subjects", help="list built-in subjects and their parameters")
    return parser


def _load_config(args: argparse.Namespace):
    data = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
    cfg = config_from_dict(data)
    if args.seed is not None:
        cfg.seed = args.seed
    for attr in ("max_epochs", "max_evaluations", "max_wall_ms"):
        value = getattr(args, attr)
        if value is not None:
            setattr(cfg, attr, value)
    cfg.validate()
    return cfg


def _run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    subprocess_config = None
    genome_length = None
    if args.subject == "subprocess":
        if not args.subprocess_cmd or args.genome_length is None:
            raise ConfigError(
                "--subject subprocess needs --subprocess-cmd and --genome-length"
            )
        subprocess_config = SubprocessTargetConfig(
            command=shlex.split(args.subprocess_cmd),
            timeout_ms=args.timeout_ms,
            failure_policy=args.failure_policy,
            penalty_tick=args.penalty_tick,
        )
        genome_length = args.genome_length
    spec = RunSpec(
        subject=args.subject,
        algorithm=args.algorithm,
        config=cfg,
        repetitions=args.repetitions,
        out_dir=args.out,
        figures=not args.no_figures,
        subprocess_config=subprocess_config,
        genome_length=genome_length,
    )
    out = run_experiment(spec)
    with open(out["summary"]) as fh:
        summary = json.load(fh)
    print(f"subject:   {summary['subject']}")
    print(f"algorithm: {summary['algorithm']}")
    print(
        "best tick: median {best_tick_median} (min {best_tick_min}, max {best_tick_max})".format(
            **summary
        )
    )
    print(f"report:    {out['summary']}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-subjects":
        print(subject_help())
        print("\nsubprocess       external command speaking the hex line protocol"
              "  [--subprocess-cmd, --genome-length]")
        return 0
    try:
        return _run(args)
    except (ConfigError, TargetError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
