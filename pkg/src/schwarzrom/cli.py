"""Command-line front end for the experiment pipelines.

Subcommands:
    run         execute a configured pipeline (optionally a single stage)
    train-pod   compute bases from existing snapshots
    train-ecsw  solve element weights from existing snapshots and bases
    couple      run the coupled model variants against existing training
    report      render metric, Pareto, and projection CSVs

Every subcommand takes --config and --out; `run` additionally accepts
--stage and --scale. Exit codes: 0 success, 1 configuration/usage error,
2-6 failures in the snapshots/pod/ecsw/couple/report stages respectively.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .config import ExperimentConfig, config_from_dict, load_config
from .errors import SchwarzRomError, StageError
from .ics import ic_rounded_square, ic_symmetric_gaussian, make_initial_condition
from .pipelines import (
    PipelineRunner,
    pipeline_predictive,
    pipeline_reproductive,
    run_pipeline,
)

__all__ = [
    "main",
    "ic_symmetric_gaussian",
    "ic_rounded_square",
    "make_initial_condition",
    "ExperimentConfig",
    "config_from_dict",
    "load_config",
    "pipeline_reproductive",
    "pipeline_predictive",
    "run_pipeline",
]

_STAGE_EXIT_CODES = {"snapshots": 2, "pod": 3, "ecsw": 4, "couple": 5, "report": 6}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schwarzrom",
        description="Coupled full/reduced-order wave-propagation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment configuration (YAML)")
        p.add_argument("--out", required=True, help="artifact output directory")
        p.add_argument(
            "--scale",
            default="desk",
            help="discretization profile from the config's scales block (default: desk)",
        )

    run_p = sub.add_parser("run", help="execute the configured pipeline")
    add_common(run_p)
    run_p.add_argument(
        "--stage",
        default="all",
        choices=["all", "snapshots", "pod", "ecsw", "couple", "report"],
        help="run a single stage against existing artifacts (default: all)",
    )

    for name, stage in (
        ("train-pod", "pod"),
        ("train-ecsw", "ecsw"),
        ("couple", "couple"),
        ("report", "report"),
    ):
        p = sub.add_parser(name, help=f"run the {stage} stage")
        add_common(p)
        p.set_defaults(stage=stage)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except (OSError, SchwarzRomError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    stage = getattr(args, "stage", "all")
    try:
        if args.command == "run":
            run_pipeline(config, args.out, scale=args.scale, stage=args.stage)
        else:
            PipelineRunner(config, args.out, args.scale).run(stage)
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return _STAGE_EXIT_CODES.get(err.stage, 1)
    except SchwarzRomError as err:
        print(f"error ({stage}): {err}", file=sys.stderr)
        traceback.print_exc()
        return _STAGE_EXIT_CODES.get(stage, 1) if stage != "all" else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
