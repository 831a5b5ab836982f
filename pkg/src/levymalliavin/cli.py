"""Command-line batch runner.

    levymalliavin run <config.toml>      execute one experiment
    levymalliavin validate <config.toml> check a config without running
    levymalliavin list-presets           print the preset catalog

Exit codes: 0 success/pass, 1 numeric or statistical failure,
2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .reports import write_report
from .runner import list_presets, run

EXIT_PASS = 0
EXIT_NUMERIC_FAIL = 1
EXIT_CONFIG_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levymalliavin",
        description="Batch verification experiments for the pathwise "
                    "Levy derivative calculus.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment in a config file")
    p_run.add_argument("config", help="path to a TOML config")
    p_run.add_argument("--output", help="override output.path", default=None)

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config", help="path to a TOML config")

    sub.add_parser("list-presets", help="print the preset catalog as JSON")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "list-presets":
        print(json.dumps(list_presets(), indent=2, sort_keys=True))
        return EXIT_PASS

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if args.command == "validate":
        print(f"ok: {args.config} is a valid {cfg.kind!r} config")
        return EXIT_PASS

    if args.output:
        cfg.output["path"] = args.output
    report = run(cfg)
    written = write_report(report, cfg)
    if written:
        print(f"report written to {written}")
    else:
        print(report.to_json())
    if report.failure_cause:
        print(f"FAIL ({report.failure_cause})")
        return EXIT_NUMERIC_FAIL
    print("PASS" if report.passed else "FAIL")
    return EXIT_PASS if report.passed else EXIT_NUMERIC_FAIL


if __name__ == "__main__":
    sys.exit(main())
