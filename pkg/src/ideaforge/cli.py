"""Command-line entry point.

    ideaforge run --config run.json [--force] [--out DIR]
    ideaforge <stage> --config run.json [--force] [--out DIR]

Stages: ingest, prep, sweep, fit, evolve, bursts, trends, ideas, report.
The IDEAFORGE_OUT environment variable overrides the configured output
directory; --out overrides both.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .errors import ConfigError, DataError
from .pipeline import Pipeline, RunConfig, _STAGE_ORDER


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors by default; the contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="ideaforge",
                     description="Idea mining pipeline over timestamped corpora")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--force", action="store_true",
                       help="rerun even when inputs are unchanged")
        p.add_argument("--out", default=None,
                       help="output directory (overrides config and IDEAFORGE_OUT)")

    add_common(sub.add_parser("run", help="execute all stages in order"))
    for stage in _STAGE_ORDER:
        add_common(sub.add_parser(stage, help=f"execute the {stage} stage"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = RunConfig.from_file(args.config)
        pipeline = Pipeline(config, output_dir=args.out)
        if args.command == "run":
            statuses = pipeline.run_all(force=args.force)
        else:
            statuses = [pipeline.run_stage(args.command, force=args.force)]
        for status in statuses:
            print(f"{status.stage}: {'ran' if status.ran else 'skipped (up to date)'}")
        return 0
    except ConfigError as exc:
        print(f"ideaforge: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"ideaforge: data error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        print("ideaforge: internal error", file=sys.stderr)
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
