"""Command line entry point: zenosim {run,sweep,validate,list-scenarios}."""
from __future__ import annotations

import argparse
import contextlib
import random
import sys

import numpy as np

from .config import SCENARIOS, ConfigError, load_config
from .scenarios import run, sweep

EXIT_OK, EXIT_CONFIG, EXIT_SIMULATION = 0, 2, 3


@contextlib.contextmanager
def no_rng():
    """Make any random number generator call fail loudly."""

    def forbidden(*_a, **_k):
        raise RuntimeError("a random number generator was consulted under --seedless")

    targets = [(random, name) for name in ("random", "seed", "randint", "uniform", "gauss")]
    targets += [(np.random, name) for name in ("default_rng", "seed", "rand", "randn",
                                               "random", "normal", "uniform")]
    saved = [(mod, name, getattr(mod, name)) for mod, name in targets]
    for mod, name in targets:
        setattr(mod, name, forbidden)
    try:
        yield
    finally:
        for mod, name, fn in saved:
            setattr(mod, name, fn)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zenosim",
                                     description="Measured decay of a quantum-dot electron.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run one scenario"),
                            ("sweep", "run a parameter sweep"),
                            ("validate", "parse and check a config without running it")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--out", metavar="DIR", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
        p.add_argument("--seedless", action="store_true",
                       help="fail if any random number generator is consulted")
    sub.add_parser("list-scenarios", help="list scenario names")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        for name, text in SCENARIOS.items():
            print(f"{name:12s} {text}")
        return EXIT_OK
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        cfg = load_config(args.config)
        if args.command == "sweep" and cfg.sweep is None:
            raise ConfigError("sweep needs a [sweep] section", field="sweep")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {cfg.scenario}")
        return EXIT_OK

    guard = no_rng() if args.seedless else contextlib.nullcontext()
    try:
        with guard:
            if args.command == "run":
                paths = run(cfg, args.out)
            else:
                paths = sweep(cfg, args.out, args.jobs)
    except Exception as exc:
        print(f"simulation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
