"""Command-line entry point: ``qig <experiment> --config <path> [--out DIR] [--threads N] [--seed S]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from .config import DEFAULTS, load_config
from .errors import ConfigError, NumericalError
from .experiments import write_run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qig", description="Run an information-geometry experiment from a TOML config.")
    ap.add_argument("experiment", choices=sorted(DEFAULTS))
    ap.add_argument("--config", required=True, help="TOML config file")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--threads", type=int, help="worker threads (default: config, then QIG_THREADS, then 1)")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    return ap


def resolve_threads(cli: Optional[int], configured: Optional[int]) -> int:
    if cli is not None:
        threads = cli
    elif configured is not None:
        threads = configured
    else:
        env = os.environ.get("QIG_THREADS", "").strip()
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"QIG_THREADS must be an integer, got {env!r}") from None
    if threads < 1:
        raise ConfigError("thread count must be positive")
    return threads


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config, experiment=args.experiment)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative")
            config.seed = args.seed
        if args.out is not None:
            config.output_dir = args.out
        threads = resolve_threads(args.threads, config.threads)
        manifest = write_run(config, config.output_dir, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    files = ", ".join(o["file"] for o in manifest["outputs"])
    print(f"{config.experiment}: wrote {files} and manifest.json to {config.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
