"""``verify --experiment E4 [--config cfg.json] [--out dir] [--seed k] [--threads k] [--plot]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, ConfigError, load_config, make_config
from .runner import run

log = logging.getLogger("sparsedom.verify")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="verify", description="Run a sparse-domination experiment and write a report.")
    ap.add_argument("--experiment", required=True, help=f"one of {', '.join(EXPERIMENTS)}")
    ap.add_argument("--config", help="flat JSON config; unknown keys are rejected")
    ap.add_argument("--out", default="verify_out", help="output directory (default: %(default)s)")
    ap.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (overrides config)")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (overrides config)")
    ap.add_argument("--plot", action="store_true", help="also write SVG plots")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config:
            cfg = load_config(args.config, args.experiment, args.seed, args.threads)
        else:
            cfg = make_config({}, args.experiment, args.seed, args.threads)
    except (ConfigError, OSError) as e:
        print(f"verify: {e}", file=sys.stderr)
        return 2
    log.info("running %s with %d thread(s)", cfg.experiment, cfg.threads)
    res = run(cfg, args.out, args.plot)
    for name, c in res.checks.items():
        print(f"{cfg.experiment} {name}: {'PASS' if c['pass'] else 'FAIL'} (value={c['value']}, threshold={c['threshold']})")
    print(f"{cfg.experiment}: {'PASS' if res.passed else 'FAIL'}; report in {args.out}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
