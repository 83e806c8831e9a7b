"""Command-line entry point.

Subcommands map one-to-one onto experiment kinds; a JSON config file can set
every knob and individual flags override it.  Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..hamiltonians import DegenerateSpectrumError
from ..matcore import ConvergenceError
from .config import ConfigError, ExperimentConfig, default_config
from .output import emit_results
from .runners import NumericalFailure, run_experiment

_SUBCOMMANDS = {
    "dos": "dos_histogram",
    "ensemble": "bath_ensemble",
    "beta-sweep": "beta_sweep",
    "zeno": "zeno_probe",
    "chain2": "chain2_sweep",
    "dm-distance": "random_dm_distance",
    "correlate": "correlation_sweep",
}

THREADS_ENV = "GIBBSIM_THREADS"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gibbsim",
        description="Seeded equilibration-channel and chain experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {kind} experiment")
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out-dir", help="output directory (default: out)")
        p.add_argument("--samples", type=int, help="ensemble sample count")
        p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    kind = _SUBCOMMANDS[args.command]
    if args.config:
        cfg = ExperimentConfig.from_json_file(args.config)
        if cfg.kind != kind:
            raise ConfigError(
                f"config kind {cfg.kind!r} does not match the {args.command!r} subcommand"
            )
    else:
        cfg = default_config(kind)
    env_threads = os.environ.get(THREADS_ENV)
    threads = None
    if env_threads is not None:
        try:
            threads = int(env_threads)
        except ValueError as exc:
            raise ConfigError(f"bad {THREADS_ENV} value {env_threads!r}") from exc
    if args.threads is not None:
        threads = args.threads
    return cfg.override(
        seed=args.seed, out_dir=args.out_dir, samples=args.samples, threads=threads
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg)
        paths = emit_results(result, cfg.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, ConvergenceError, DegenerateSpectrumError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {paths['csv']} and {paths['summary']} ({len(result.rows)} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
