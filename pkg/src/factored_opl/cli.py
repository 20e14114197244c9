"""Command-line entry point.

Subcommands:

- ``run <config>``: run the configured sweep, write the results CSV.
- ``sweep-rho <config>``: constrained-kappa sweep over lower bounds on the
  new-action mass (the config's sweep.values are the bounds).
- ``gen-fixture <dir>``: write the miniature real-data fixture.
- ``validate <config>``: parse and validate a config, building nothing.

``--seeds``, ``--out`` and ``--jobs`` override the config; the
FACTORED_OPL_JOBS environment variable is honored when --jobs is absent.
"""
import argparse
import sys
from dataclasses import replace

from .config import load_config
from .dataset_io import generate_fixture
from .errors import ConfigurationError, ParseError
from .runner import run_experiment, run_sweep_rho


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="path to the YAML experiment config")
    parser.add_argument("--seeds", type=int, default=None, help="override seed count")
    parser.add_argument("--out", default=None, help="override output CSV path")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factored-opl",
        description="Benchmark harness for off-policy learning with new actions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("run", help="run the configured sweep"))
    _add_common(sub.add_parser("sweep-rho", help="sweep lower bounds on new-action mass"))

    fixture = sub.add_parser("gen-fixture", help="write the miniature real-data fixture")
    fixture.add_argument("dir", help="output directory")
    fixture.add_argument("--seed", type=int, default=7)

    validate = sub.add_parser("validate", help="check a config file")
    validate.add_argument("config")
    return parser


def _load(args) -> object:
    config = load_config(args.config)
    if args.seeds is not None:
        config = replace(config, seeds=args.seeds)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            out = run_experiment(_load(args), jobs=args.jobs, output=args.out)
            print(f"wrote {out}")
        elif args.command == "sweep-rho":
            out = run_sweep_rho(_load(args), jobs=args.jobs, output=args.out)
            print(f"wrote {out}")
        elif args.command == "gen-fixture":
            paths = generate_fixture(args.dir, seed=args.seed)
            for name, path in paths.items():
                print(f"wrote {name}: {path}")
        elif args.command == "validate":
            load_config(args.config)
            print("config ok")
    except (ConfigurationError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
