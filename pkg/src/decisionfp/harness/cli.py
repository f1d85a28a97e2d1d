"""Command-line entry point.

    decisionfp run <config.toml>       backends for every case (+ sweep if configured)
    decisionfp sweep <config.toml>     three-well sweep only
    decisionfp plot <run-dir>          SVG figures from a finished run
    decisionfp validate <config.toml>  parse and validate, print the resolved config

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigError, DecisionFPError, MissingArtifact, ParseError, ValidationError
from .config import load_config
from .experiment import run_experiment
from .plots import emit_plots

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decisionfp", description="Bistable decision model: SDE, 2D and reduced "
                                "Fokker-Planck backends")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run all backends and cases"), ("sweep", "run the three-well sweep"),
                        ("validate", "check a config file")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config")
        if name != "validate":
            sp.add_argument("--no-plots", action="store_true", help="skip SVG emission")
    sp = sub.add_parser("plot", help="emit SVG figures for a run directory")
    sp.add_argument("run_dir")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "plot":
            for f in emit_plots(args.run_dir):
                print(f)
            return EXIT_OK
        config = load_config(args.config)
        if args.command == "validate":
            print(json.dumps(config.to_dict(), indent=2, sort_keys=True, default=str))
            return EXIT_OK
        if args.command == "sweep":
            if config.sweep is None:
                raise ValidationError("sweep", "the config has no [sweep] table")
            record = run_experiment(config, cases=False, sweep=True)
        else:
            record = run_experiment(config)
        if not args.no_plots:
            try:
                emit_plots(record)
            except MissingArtifact:
                pass
        print(record.run_dir)
        for r in record.reports:
            print(f"{r['case']:>9} {r['backend']:>8}  RT={r['reaction_time']:.6g}  perf={r['performance']:.6g}"
                  f"  {r['status']}")
        if record.failed or any(r.get("status") != "ok" for r in record.sweep):
            return EXIT_NUMERICAL
        return EXIT_OK
    except ParseError as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DecisionFPError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
