"""Command-line entry point.

Usage::

    sim <experiment> [--config path.json] [--seed N] [--out DIR]

``--config`` accepts either a plain configuration JSON or a previously
written ``manifest.json`` (the experiment name inside a manifest must match
the one given on the command line).  ``--seed`` replaces the seed list (or
single seed) of experiments that have one.  Results land in ``--out``,
defaulting to ``runs/<experiment>/``.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import EXPERIMENTS, run_experiment


def _load_config(path: str, experiment: str) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    if isinstance(payload, dict) and set(payload) == {"experiment", "config"}:
        if payload["experiment"] != experiment:
            raise ValueError(
                f"manifest is for {payload['experiment']!r}, not {experiment!r}"
            )
        return payload["config"]
    return payload


def _apply_seed(config: dict, experiment: str, seed: int) -> dict:
    from .experiments import DEFAULTS

    keys = set(DEFAULTS[experiment])
    if "seeds" in keys:
        config["seeds"] = [seed]
    elif "seed" in keys:
        config["seed"] = seed
    else:
        raise ValueError(f"experiment {experiment!r} takes no --seed")
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sim", description="run a named simulation experiment"
    )
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS))
    parser.add_argument("--config", help="JSON config or manifest.json from a prior run")
    parser.add_argument("--seed", type=int, help="override the run seed(s)")
    parser.add_argument("--out", help="output directory (default runs/<experiment>)")
    args = parser.parse_args(argv)

    config = _load_config(args.config, args.experiment) if args.config else {}
    if args.seed is not None:
        config = _apply_seed(config, args.experiment, args.seed)

    summary = run_experiment(args.experiment, config, args.out)
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
