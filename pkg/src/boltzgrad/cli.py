"""Command line entry point: ``boltzgrad run | plot | validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import lab
from .errors import (
    AmbiguousInverseError,
    BudgetExceeded,
    ConfigError,
    EventBudgetError,
    InvalidConfigurationError,
    NumericalFailure,
    PackingTooDenseError,
    PotentialDomainError,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_BUDGET = 0, 2, 3, 4

log = logging.getLogger("boltzgrad")


def exit_code(exc: BaseException) -> int:
    """Map a package error to the documented process exit status."""
    if isinstance(exc, (BudgetExceeded, EventBudgetError, PackingTooDenseError)):
        return EXIT_BUDGET
    if isinstance(exc, (ConfigError, FileNotFoundError)):
        return EXIT_CONFIG
    if isinstance(exc, (NumericalFailure, PotentialDomainError, AmbiguousInverseError,
                        InvalidConfigurationError, ArithmeticError, FloatingPointError)):
        return EXIT_NUMERICAL
    return 1


def _run(args) -> int:
    cfg = lab.load_config(args.config)
    log.info("running %s into %s", cfg.name, cfg.output)
    result = lab.run_experiment(cfg)
    for k, v in result.summary.items():
        print(f"{k} = {v if isinstance(v, str) else lab.fmt(v)}")
    print(f"manifest = {result.output / 'manifest.ini'}")
    return EXIT_OK


def _plot(args) -> int:
    bad = lab.verify_manifest(args.manifest)
    if bad:
        raise ConfigError("files missing or modified since the run: " + ", ".join(bad))
    print(lab.emit_plot_script(args.manifest))
    return EXIT_OK


def _validate(args) -> int:
    cfg = lab.load_config(args.config)
    print(f"{args.config}: ok ({cfg.name}, N = {', '.join(map(str, cfg.N))}, "
          f"horizon = {cfg.horizon:g} t0 = {cfg.t_final:.6g}, R = {cfg.R})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boltzgrad", description="Kinetic theory laboratory.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a configuration file")
    r.add_argument("config")
    r.set_defaults(func=_run)
    q = sub.add_parser("plot", help="write a gnuplot script for a finished run")
    q.add_argument("manifest")
    q.set_defaults(func=_plot)
    v = sub.add_parser("validate", help="check a configuration file without running it")
    v.add_argument("config")
    v.set_defaults(func=_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code(exc)
        if code == 1:
            raise
        print(f"boltzgrad: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
