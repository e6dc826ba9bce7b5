"""Command line: ``hardcore-thin <experiment> --config <file> [--key value ...] --out <dir>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, parse_config
from .runner import run


def _overrides(extra: list) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        flag = extra[i]
        if not flag.startswith("--"):
            raise ConfigError(f"unexpected argument {flag!r}")
        key, eq, val = flag[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise ConfigError("flag without a value", key=key)
            val = extra[i + 1]
            i += 1
        key = key.replace("-", "_")
        if key in out:
            raise ConfigError("flag given twice", key=key)
        out[key] = val
        i += 1
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hardcore-thin", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=Path, help="key = value file")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: CPU count, capped by HARDCORE_THIN_THREADS)")
    args, extra = parser.parse_known_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
        cfg = parse_config(text, _overrides(extra), experiment=args.experiment)
    except (ConfigError, OSError) as exc:
        print(f"hardcore-thin: config error: {exc}", file=sys.stderr)
        return 2
    out = args.out or (Path(cfg.output) if cfg.output else None)
    if out is None:
        print("hardcore-thin: --out (or output in the config) is required", file=sys.stderr)
        return 2
    summary = run(cfg, out, args.workers)
    for name, ok in summary["assertions"].items():
        print(f"{'PASS' if ok else 'FAIL'} {cfg.experiment}: {name}")
    if summary["row_errors"]:
        print(f"{summary['row_errors']} replicate rows recorded errors", file=sys.stderr)
    return 0 if summary["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
