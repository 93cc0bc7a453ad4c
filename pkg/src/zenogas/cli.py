"""Command-line entry point: one subcommand per scenario.

Exit code 0 only when every stage converged; failures land in the manifest
with the stage name and diagnostics.
"""

from __future__ import annotations

import argparse
import sys

from .config import RunConfig, SCENARIOS, load_config
from .scenarios import run_scenario


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="zenogas",
        description="Zeno-suppressed loss dynamics of reactive lattice gases")
    sub = p.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name.replace("_", "-"),
                            help=f"run the {name} scenario")
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seeds", type=int, help="ensemble seed count")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--cache", help="multiband rate cache directory")
        sp.add_argument("--fast", action="store_true",
                        help="reduced sweep sizes for smoke runs")
        sp.set_defaults(scenario_name=name)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.config:
        cfg = load_config(args.config)
        if cfg.scenario != args.scenario_name:
            print(f"note: config scenario {cfg.scenario!r} overridden by "
                  f"subcommand {args.scenario_name!r}", file=sys.stderr)
            cfg.scenario = args.scenario_name
    else:
        cfg = RunConfig(scenario=args.scenario_name)
    if args.out:
        cfg.out_dir = args.out
    if args.seeds is not None:
        cfg.seeds = args.seeds
    if args.threads is not None:
        cfg.threads = args.threads
    if args.cache:
        cfg.cache_dir = args.cache
    if args.fast:
        cfg.fast = True
    man, ok = run_scenario(cfg)
    if man.error:
        print(f"FAILED: {man.error}", file=sys.stderr)
    else:
        names = ", ".join(f["path"] for f in man.files)
        print(f"{cfg.scenario}: wrote {names} in {cfg.out_dir} "
              f"({man.wall_seconds:.1f} s)")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
