"""Command line entry point: ``tksd <experiment> [--config cfg.json] ...``."""
import argparse
import sys

import numpy as np

from .geometry import InfeasibleDomainError
from .harness import (
    EXPERIMENTS, ConfigError, ExperimentConfig, records_to_csv, records_to_json, run,
    summarize, table_to_csv,
)
from .kernels import DegenerateDataError, NotPositiveDefiniteError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="tksd", description=__doc__)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat key-value JSON file")
    p.add_argument("--seeds", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--json", action="store_true", help="emit a JSON array instead of CSV")
    return p


def _load_config(args):
    overrides = dict(experiment=args.experiment, seeds=args.seeds,
                     base_seed=args.base_seed, workers=args.workers, out=args.out)
    if args.config:
        return ExperimentConfig.from_json(args.config, **overrides)
    return ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def _render(result, as_json):
    if isinstance(result, tuple):  # consistency: (records, grid)
        result = result[0]
    if result and isinstance(result[0], dict):
        if as_json:
            import json
            return json.dumps(result, indent=1)
        return table_to_csv(result)
    return records_to_json(result) if as_json else records_to_csv(result)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, NotPositiveDefiniteError, InfeasibleDomainError,
            DegenerateDataError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = _render(result, args.json)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if isinstance(result, tuple):
        print("mean error grid (rows n, cols m):", file=sys.stderr)
        print(np.array2string(result[1], precision=4), file=sys.stderr)
    elif result and not isinstance(result[0], dict):
        for row in summarize(result):
            print("{method:>16} d={d} m={m} n={n}: {mean_error:.4f} +- {se:.4f}".format(**row),
                  file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
