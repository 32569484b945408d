"""Command-line entry point: ``dsgdrer <subcommand> ...``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 acceptance or verification failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ..exceptions import (ConfigError, ConvergenceError, DivergenceError, InvalidTopologyError,
                          NotPositiveDefiniteError, UnstableSystemError)
from ..trace import ErrorTrace
from . import criteria
from .config import load_config
from .experiment import OUTPUT_ENV, run_experiment
from .plotting import PlotStyle, emit_plot
from .presets import PRESETS, preset
from .summary import summarize, summary_csv, summary_text
from .verify import run_verification

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPT = 0, 1, 2, 3
NUMERICAL_ERRORS = (ConvergenceError, DivergenceError, NotPositiveDefiniteError, UnstableSystemError,
                    np.linalg.LinAlgError, FloatingPointError)

log = logging.getLogger("dsgdrer")


def resolve_config(source: str):
    """A preset name, an INI config file, or a run manifest (``manifest.json``)."""
    if source in PRESETS:
        return preset(source)
    return load_config(source)


def _output_dir(args, config) -> Path:
    return Path(args.output or os.environ.get(OUTPUT_ENV) or config.output_dir)


def _report(result, out: Path, title: str) -> None:
    rows = summarize(result.traces)
    text = summary_text(rows)
    (out / "summary.txt").write_text(text)
    (out / "summary.csv").write_text(summary_csv(rows))
    (out / "errors.svg").write_text(emit_plot(result.traces, PlotStyle(title=title)))
    print(text, end="")
    print(f"wrote {len(result.traces)} traces, summary and plot to {out}")


def _run(args, checks=()) -> int:
    config = resolve_config(args.config)
    out = _output_dir(args, config)
    log.info("running %s (config %s) into %s", config.name, config.digest, out)
    result = run_experiment(config, workers=args.workers, output_dir=out)
    _report(result, out, config.name)
    if not args.check:
        return EXIT_OK
    verdicts = [check(result.traces) for check in checks]
    for v in verdicts:
        print(v.line())
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_ACCEPT


def cmd_run(args) -> int:
    return _run(args)


def cmd_sweep_size(args) -> int:
    return _run(args, (criteria.size_scaling,))


def cmd_sweep_topology(args) -> int:
    checks = [criteria.topology_ordering]
    config = resolve_config(args.config)
    if any(a.name == "vanilla_dsgd" for a in config.algorithms):
        checks.append(criteria.bias_separation)
    return _run(args, checks)


def cmd_verify(args) -> int:
    items = run_verification(quick=args.quick, seed=args.seed)
    for item in items:
        print(item.line())
    return EXIT_OK if all(i.passed for i in items) else EXIT_ACCEPT


def _read_traces(paths) -> list:
    files = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    files = [f for f in files if f.name != "summary.csv"]
    if not files:
        raise ConfigError("no trace files given")
    return [ErrorTrace.read(f) for f in files]


def cmd_plot(args) -> int:
    traces = _read_traces(args.traces)
    svg = emit_plot(traces, PlotStyle(title=args.title))
    Path(args.output).write_text(svg)
    print(f"wrote {args.output} ({len(traces)} traces)")
    return EXIT_OK


def cmd_summarize(args) -> int:
    rows = summarize(_read_traces(args.traces), reference=args.reference)
    print(summary_text(rows), end="")
    if args.csv:
        Path(args.csv).write_text(summary_csv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsgdrer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def runner(name, func, help_, default=None):
        p = sub.add_parser(name, help=help_)
        if default is None:
            p.add_argument("config", help="preset name, config file or manifest.json")
        else:
            p.add_argument("config", nargs="?", default=default,
                           help=f"preset name, config file or manifest.json (default {default})")
        p.add_argument("-o", "--output", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
        p.add_argument("-j", "--workers", type=int, default=1, help="parallel worker processes")
        p.add_argument("--check", action="store_true", help="exit 3 unless the sweep's expected ordering holds")
        p.set_defaults(func=func)

    runner("run", cmd_run, "run every entry of a config")
    runner("sweep-size", cmd_sweep_size, "network-size sweep", "paper-fig2-desk")
    runner("sweep-topology", cmd_sweep_topology, "topology sweep", "paper-fig3-desk")

    p = sub.add_parser("verify", help="numerical property suite")
    p.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="render trace CSVs as an SVG")
    p.add_argument("traces", nargs="+", help="trace CSV files or directories")
    p.add_argument("-o", "--output", required=True, help="SVG path")
    p.add_argument("--title", default="estimation error")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("summarize", help="final-error table of trace CSVs")
    p.add_argument("traces", nargs="+", help="trace CSV files or directories")
    p.add_argument("--reference", help="group used as the ratio denominator")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, InvalidTopologyError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
