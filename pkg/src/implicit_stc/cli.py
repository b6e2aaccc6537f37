"""Command-line front end.

    implicit-stc simulate <config> [--out DIR]
    implicit-stc verify <suite> [--seed N]
    implicit-stc sweep <config> [--jobs N] [--out DIR]

``<config>`` is a YAML path or the name of a bundled configuration
(``implicit-stc simulate --list`` shows them).  The exit code is 0 when
everything ran and every check passed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .errors import ParameterError, SimulationError
from .scenarios import ConfigError, bundled_configs, load_scenario, load_sweep, run_sweep, simulate
from .verify import DEFAULT_SEED, SUITES, run_suite

log = logging.getLogger("implicit_stc")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_simulate(args) -> int:
    if args.list:
        print("\n".join(bundled_configs()))
        return 0
    if args.config is None:
        print("error: simulate needs a config path or bundled name", file=sys.stderr)
        return 2
    config = load_scenario(args.config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj, metrics = simulate(config)
    for w in caught:
        log.warning("%s", w.message)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{config.name}_trajectory.csv"
    json_path = out / f"{config.name}_metrics.json"
    traj.to_csv(csv_path)
    json_path.write_text(_dump(metrics))
    sys.stdout.write(_dump(metrics))
    log.info("wrote %s and %s", csv_path, json_path)
    return 0


def cmd_verify(args) -> int:
    report = run_suite(args.suite, seed=args.seed).to_dict()
    sys.stdout.write(_dump(report))
    return 0 if report["passed"] else 1


def cmd_sweep(args) -> int:
    sweep = load_sweep(args.config)
    text = run_sweep(sweep, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{sweep.base.name}_sweep.csv"
    path.write_text(text)
    sys.stdout.write(text)
    log.info("wrote %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="implicit-stc", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario, write trajectory CSV and metrics JSON")
    p.add_argument("config", nargs="?", help="YAML file or bundled config name")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--list", action="store_true", help="list bundled configs and exit")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run a randomized property suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a parameter grid, write one metrics row per point")
    p.add_argument("config", help="YAML file with a 'grid' section, or bundled name")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
