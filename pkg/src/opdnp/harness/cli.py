"""Command-line entry point: ``opdnp <scenario> --config FILE``."""

import argparse
import logging
import sys
from pathlib import Path

from .config import SCENARIOS, ConfigError, config_from_dict, parse_config
from .runner import run_scenario

log = logging.getLogger("opdnp")


def build_parser():
    ap = argparse.ArgumentParser(prog="opdnp", description=__doc__)
    sub = ap.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run a {name} scenario")
        p.add_argument("--config", type=Path, help="TOML scenario file (defaults if omitted)")
        p.add_argument("--out", help="run root directory (env OPDNP_OUT, default ./runs)")
        p.add_argument("--workers", type=int, help="worker processes (env OPDNP_WORKERS)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--verbose", "-v", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config is not None:
            cfg = parse_config(args.config.read_text(encoding="utf-8"), args.scenario)
        else:
            cfg = config_from_dict({}, args.scenario)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be >= 0")
            cfg.seed = args.seed
    except (ConfigError, OSError) as exc:
        print(f"opdnp: configuration error: {exc}", file=sys.stderr)
        return 2
    if args.workers is not None and args.workers < 1:
        print("opdnp: --workers must be >= 1", file=sys.stderr)
        return 2
    man, _ = run_scenario(cfg, workers=args.workers, out=args.out)
    print(man.run_dir)
    if not man.ok:
        print(f"opdnp: run status {man.status}" + (f": {man.error}" if man.error else ""),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
