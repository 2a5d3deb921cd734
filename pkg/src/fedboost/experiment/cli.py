"""``fedboost`` command line: gen-data, run, plot, verify.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
``FEDBOOST_LOG`` sets the log level (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .. import data as D
from ..federation import FedConfigError
from ..gbt import ConfigError
from .spec import TRANSPORTS, SpecError, load_generator, load_spec

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
CONFIG_ERRORS = (SpecError, ConfigError, FedConfigError, D.GeneratorConfigError,
                 D.InfeasiblePartitionError, D.EmptyFeatureGroupError)

GLOBAL_FLAGS = ("config", "out", "seed", "transport")

log = logging.getLogger("fedboost")


def _common() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", type=Path, help="TOML spec file")
    p.add_argument("--out", type=Path, help="output file or directory")
    p.add_argument("--seed", type=int, help="override the data seed (gen-data) or run seeds (run)")
    p.add_argument("--transport", choices=sorted(TRANSPORTS), help="federation transport")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="fedboost", parents=[common],
                                     description="Federated boosted-tree power models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write a synthetic measurement CSV")
    p.add_argument("--repeats", type=int, help="samples per load level for every node type")

    p = sub.add_parser("run", parents=[common], help="run baseline and federations from a spec")
    p.add_argument("spec", nargs="?", type=Path, help="spec file (same as --config)")

    p = sub.add_parser("plot", parents=[common], help="draw per-metric figures for a run directory")
    p.add_argument("run_dir", type=Path)

    p = sub.add_parser("verify", parents=[common], help="check a serialized model file")
    p.add_argument("model", type=Path)
    return parser


def cmd_gen_data(args) -> int:
    cfg = load_generator(args.config) if args.config else D.GeneratorConfig(D.DEFAULT_NODES)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.repeats is not None:
        cfg = replace(cfg, nodes=tuple(replace(n, repeats=args.repeats) for n in cfg.nodes))
    out = args.out or Path("synthetic.csv")
    dataset = D.gen_synthetic(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    D.write_csv(dataset, out)
    print(f"wrote {len(dataset)} rows to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .runner import run_experiment

    path = args.spec or args.config
    if path is None:
        raise SpecError("run needs a spec file")
    spec = load_spec(path)
    out = args.out or Path("runs") / Path(path).stem
    run_experiment(spec, out,
                   transport=TRANSPORTS[args.transport] if args.transport else None,
                   seeds=(args.seed,) if args.seed is not None else None)
    print(f"run written to {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plot import plot_run

    for path in plot_run(args.run_dir, args.out):
        print(path)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import verify_model

    results = verify_model(args.model)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME


COMMANDS = {"gen-data": cmd_gen_data, "run": cmd_run, "plot": cmd_plot, "verify": cmd_verify}


def main(argv=None) -> int:
    level = os.environ.get("FEDBOOST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    for flag in GLOBAL_FLAGS:
        if not hasattr(args, flag):
            setattr(args, flag, None)
    try:
        return COMMANDS[args.command](args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("command failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
