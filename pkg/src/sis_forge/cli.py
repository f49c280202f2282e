"""``sis-forge`` command line."""
from __future__ import annotations

import argparse
import logging
import sys

from . import bench, trainer
from .config import ExperimentSpec, parse_config
from .errors import ConfigError, ConvergenceError, DivergenceError, ShapeError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sis-forge", description="Train and evaluate stacked-surface MIMO links.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [("converge", "SER/loss versus epoch for every objective"),
                        ("sweep", "final SER over the N x L grid"),
                        ("gradcheck", "finite-difference check of the phase gradients"),
                        ("eval", "test SER of saved phase checkpoints")]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="key = value config file (defaults if omitted)")
        s.add_argument("--out", help="output directory (overrides out_dir)")
        s.add_argument("--seed", type=int, help="base seed (overrides config)")
        s.add_argument("--workers", type=int, default=1, help="parallel cells")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "eval":
            s.add_argument("--checkpoint", required=True,
                           help="directory holding tx.txt and rx.txt")
        if name == "gradcheck":
            s.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    return p


def _load(args) -> ExperimentSpec:
    spec = parse_config(args.config) if args.config else ExperimentSpec()
    if args.seed is not None:
        spec.base = spec.base.replace(seed=args.seed)
        spec.seeds = [args.seed]
    if args.out:
        spec.out_dir = args.out
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = _load(args)
        if args.command == "converge":
            print(bench.run_convergence(spec, workers=args.workers))
        elif args.command == "sweep":
            print(bench.run_sweep(spec, workers=args.workers))
        elif args.command == "gradcheck":
            text, ok = bench.run_gradcheck(spec, corrupt=args.corrupt_gradient)
            print(text)
            return EXIT_OK if ok else EXIT_NUMERIC
        elif args.command == "eval":
            stack_t, stack_r = bench.load_checkpoint(args.checkpoint)
            cfg = spec.base.replace(nt=stack_t.elements, lt=stack_t.layers,
                                    nr=stack_r.elements, lr=stack_r.layers)
            res = trainer.evaluate(stack_t, stack_r, cfg)
            print(f"test SER {res.ser:.6g} +/- {res.stderr:.3g} "
                  f"({cfg.test_realizations} realizations x {cfg.test_symbols} symbols)")
    except (ConfigError, ShapeError, FileNotFoundError) as exc:
        print(f"sis-forge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, ConvergenceError, FloatingPointError) as exc:
        print(f"sis-forge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
