"""Command-line interface: ``poreuq <stage> [options]``.

Every subcommand accepts ``--config``, ``--out``, ``--seed``, ``--jobs``,
``--preset`` and ``--model``; flags override the config file. Failures
print one JSON object ``{"error": ..., "message": ...}`` on stderr and exit
with a nonzero status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .config import load_config
from .pipeline import STAGES, run_pipeline, run_stage

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, 2)


def _fail(kind, message, code=1):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    sys.exit(code)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--jobs", type=int, metavar="N", help="worker processes for forward solves")
    common.add_argument("--preset", choices=("narrow", "physical"))
    common.add_argument("--model", choices=("p0", "p1", "p2"))
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = _Parser(prog="poreuq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"poreuq {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    help_ = {
        "sample": "draw prior samples (samples.csv, corr.csv)",
        "solve": "forward solves of the training design, or of one point with --point",
        "fit": "fit the polynomial-chaos surrogates",
        "density": "kernel density estimates of the QoIs",
        "gsa": "mutual-information indices and rankings",
        "compare": "Cramér tests against the comparison model",
        "pipeline": "run every stage",
    }
    for name in (*STAGES, "pipeline"):
        sp = sub.add_parser(name, parents=[common], help=help_[name])
        if name == "sample":
            sp.add_argument("-n", type=int, help="number of samples")
        if name == "solve":
            sp.add_argument("--point", nargs=4, type=float, metavar=("R", "THETA", "D", "L"),
                            help="solve a single parameter set and print JSON")
            sp.add_argument("--resolution", type=int)
    return p


def _config(args):
    overrides = {"out": args.out, "seed": args.seed, "jobs": args.jobs, "preset": args.preset,
                 "model": args.model}
    if getattr(args, "n", None) is not None:
        overrides["sample.n"] = args.n
    if getattr(args, "resolution", None) is not None:
        overrides["solver.resolution"] = args.resolution
    return load_config(args.config, **overrides)


def _solve_point(cfg, point):
    from .closure import DiffusivityField, forward_model
    from .geometry import PoreParams

    field = DiffusivityField(1.0, cfg["solver.diffusivity_ratio"])
    props = forward_model(PoreParams(*point), field,
                          resolution=cfg["solver.resolution"], tol=cfg["solver.tol"],
                          bc=cfg["solver.bc"])
    print(json.dumps(props.as_dict()))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cfg = _config(args)
        if args.command == "solve" and args.point is not None:
            _solve_point(cfg, args.point)
        elif args.command == "pipeline":
            store = run_pipeline(cfg)
            print(store.root)
        else:
            store = run_stage(cfg, args.command)
            print(store.root)
    except Exception as exc:  # reported as one machine-readable line
        _fail(type(exc).__name__, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
