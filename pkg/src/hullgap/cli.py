"""Command-line entry point.

Settings are resolved as built-in defaults, then the ``--config`` JSON file,
then explicit flags.  Every output file echoes the resolved config.

Examples
--------
    hullgap distances --config mnist.json --train-n 5000 --test-n 200 --out runs/d
    hullgap project --config mnist.json --query-index 3 --per-class
    hullgap baselines --config mnist.json --threads 4
    hullgap boundary --out runs/boundary
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from hullgap import experiment
from hullgap.errors import HullgapError

COMMANDS = {
    "distances": experiment.run_distances,
    "project": experiment.run_project,
    "baselines": experiment.run_baselines,
    "boundary": experiment.run_boundary,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="seed for subsampling, baselines and boundary runs")
    common.add_argument("--threads", type=int, help="worker threads for batched solves")
    common.add_argument("--train-n", type=int, help="training subsample size")
    common.add_argument("--test-n", type=int, help="test subsample size")
    common.add_argument("--space", choices=("pixel", "wavelet", "imported"))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hullgap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("distances", parents=[common], help="distance of each query to the training hull")
    p = sub.add_parser("project", parents=[common], help="minimum perturbation images for one query")
    p.add_argument("--query-index", type=int)
    p.add_argument("--per-class", action="store_true", default=None)
    sub.add_parser("baselines", parents=[common], help="real vs pixel-shuffled vs random data")
    sub.add_parser("boundary", parents=[common], help="MLP decision boundaries inside and outside the hull")
    return parser


def overrides_from(args) -> dict:
    """Translate explicit flags into a config fragment."""
    o: dict = {}
    if args.out is not None:
        o["out"] = args.out
    if args.threads is not None:
        o["threads"] = args.threads
    if args.space is not None:
        o["space"] = {"kind": args.space}
    sub = {}
    if args.train_n is not None:
        sub["train_n"] = args.train_n
    if args.test_n is not None:
        sub["test_n"] = args.test_n
    if args.seed is not None:
        sub["seed"] = args.seed
        o["baselines"] = {"seed": args.seed}
        if args.command == "boundary":
            o["boundary"] = {"seeds": [args.seed]}
    if sub:
        o["subsample"] = sub
    if args.command == "project":
        proj = {}
        if args.query_index is not None:
            proj["query_index"] = args.query_index
        if args.per_class:
            proj["per_class"] = True
        if proj:
            o["project"] = proj
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = experiment.load_config(args.config, overrides_from(args))
        COMMANDS[args.command](cfg)
    except (HullgapError, OSError, KeyError, TypeError, ValueError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        offset = getattr(exc, "offset", None)
        if offset is not None:
            err["offset"] = offset
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
