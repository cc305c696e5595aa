"""Command-line interface.

    tpe-precoding describe --preset fig3
    tpe-precoding run --preset fig3 --trials 500 --seed 7 --out results/fig3
    tpe-precoding run --config manifest.json --out rerun
    tpe-precoding sweep --config system.json --axis snr_db=0:5:20 --axis tau=0.1,0.4

Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import ConfigError, NumericalError
from .experiments import run_experiment
from .precoders import TpeWeights
from .presets import PRESET_NAMES, describe, get_preset, parse_grid, resolve_custom

__all__ = ["main", "build_parser", "resolve_params"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_AXES = {"snr_db": float, "tau": float, "J": int}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpe-precoding",
        description="TPE/RZF precoding experiments: Monte Carlo rates, large-system "
                    "predictions and operation counts.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_run=True):
        p.add_argument("--preset", choices=PRESET_NAMES,
                       help="named experiment (custom requires --config)")
        p.add_argument("--config", help="JSON system configuration or a run manifest")
        if not with_run:
            return
        p.add_argument("--trials", type=int, help="Monte Carlo trials per point (default 500)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=int, default=1,
                       help="threads for Monte Carlo trials; output does not depend on it")
        p.add_argument("--weights", help="JSON file pinning the TPE coefficients")

    common(sub.add_parser("run", help="run a preset or configuration"))
    common(sub.add_parser("describe", help="print the resolved parameter sheet"),
           with_run=False)
    sw = sub.add_parser("sweep", help="rates sweep with axis overrides")
    common(sw)
    sw.add_argument("--axis", action="append", default=[], metavar="NAME=GRID",
                    help="override snr_db, tau or J; GRID is start:step:stop or a,b,c")
    sw.add_argument("--schemes", help="comma-separated subset of rzf,tpe,tpeopt,mrt")
    return parser


def resolve_params(args) -> dict:
    """Preset dict from ``--preset`` / ``--config`` plus command-line overrides."""
    if args.config:
        params = resolve_custom(load_config(args.config))
        if args.preset and args.preset not in ("custom", params.get("name")):
            raise ConfigError(f"--config describes preset {params.get('name')!r}, "
                              f"not {args.preset!r}")
    elif args.preset in (None, "custom"):
        raise ConfigError("--preset custom (or no preset) requires --config")
    else:
        params = get_preset(args.preset)
    for key in ("trials", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if getattr(args, "trials", None) is not None and args.trials < 1:
        raise ConfigError("--trials must be positive")
    for spec in getattr(args, "axis", []) or []:
        name, _, grid = spec.partition("=")
        if name not in _AXES or not grid:
            raise ConfigError(f"bad --axis {spec!r}; expected one of {sorted(_AXES)}=GRID")
        params[name] = [_AXES[name](v) for v in parse_grid(grid)]
    if getattr(args, "schemes", None):
        params["schemes"] = [s.strip() for s in args.schemes.split(",") if s.strip()]
    return params


def _load_weights(path):
    if not path:
        return None
    try:
        with open(path) as fh:
            return TpeWeights.from_json(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read weights {path}: {exc}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    log = logging.getLogger("tpeprecoding")
    try:
        params = resolve_params(args)
        if args.command == "describe":
            sys.stdout.write(describe(params))
            return EXIT_OK
        if args.command == "sweep" and params["kind"] != "rates":
            raise ConfigError(f"sweep needs a rates-type configuration, got {params['kind']!r}")
        paths = run_experiment(params, args.out, args.format, max(1, args.workers),
                               _load_weights(args.weights), progress=log.info)
        for p in paths:
            print(p)
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
