"""Command-line entry point: ``pathframes {list,describe,run,verify}``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration error,
3 construction error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, PathFramesError
from .scenarios import describe, list_geometries, load_config, normalize_config, run_scenario

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_CONSTRUCTION = 0, 1, 2, 3


def _parse_tolerance(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("tolerance overrides look like name=value")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value in '{text}'") from None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pathframes",
        description="Frames with vanishing connection components along paths")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list built-in geometries")

    p = sub.add_parser("describe", help="show a geometry's coefficients and default paths")
    p.add_argument("geometry")

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("config", help="YAML scenario file")
    p.add_argument("--out", default="pathframes-out", help="output directory")
    p.add_argument("--steps-per-unit", type=int, default=None,
                   help="override the transport grid density")
    p.add_argument("--tol", action="append", type=_parse_tolerance, default=[],
                   metavar="NAME=VALUE", help="override a tolerance (repeatable)")

    p = sub.add_parser("verify", help="run every acceptance check")
    p.add_argument("--only", action="append", default=None, metavar="ID",
                   help="run only the given criterion ids (repeatable)")
    return parser


def _run(args):
    try:
        if not Path(args.config).is_file():
            raise ConfigError(f"no such scenario file: {args.config}")
        config = load_config(Path(args.config))
        raw = dict(config)
        if args.steps_per_unit is not None:
            raw["steps_per_unit"] = args.steps_per_unit
        if args.tol:
            raw["tolerances"] = dict(config["tolerances"], **dict(args.tol))
        config = normalize_config(raw)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_scenario(config, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PathFramesError as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    summary = report.summary
    print(f"{summary['name']}: {summary['status']} (holonomicity: {summary['holonomicity']})")
    for key, verdict in summary["verdicts"].items():
        print(f"  {key:28s} {verdict}")
    if "holonomy_deficit" in summary["diagnostics"]:
        print(f"  holonomy deficit             {summary['diagnostics']['holonomy_deficit']:.12f}")
    for path in report.files:
        print(f"  wrote {path}")
    return EXIT_OK if report.passed else EXIT_VERDICT


def _verify(args):
    from .acceptance import run_all

    results = run_all(args.only)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERDICT


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in list_geometries():
            print(name)
        return EXIT_OK
    if args.command == "describe":
        try:
            print(json.dumps(describe(args.geometry), indent=2))
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    if args.command == "run":
        return _run(args)
    return _verify(args)


if __name__ == "__main__":
    sys.exit(main())
