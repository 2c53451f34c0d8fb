"""Command-line front end. ``citemap run`` does everything; each stage is also its own subcommand."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import __version__
from .pipeline import STAGE_ORDER, ConfigError, RunConfig, StageError, load_config_file, run_pipeline, run_stage

FLAG_KEYS = ["span", "min_count", "tau", "k", "alpha", "smooth_span", "min_overlap", "seed", "workers",
             "out", "rules", "highlight"]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("inputs", nargs="*", help="field-tagged export files (parse/run only)")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--span", type=int, help="window length in years (4)")
    p.add_argument("--min-count", type=int, help="keep venues cited more than this often (20)")
    p.add_argument("--tau", type=float, help="cosine threshold, edges need cosine > tau (0.2)")
    p.add_argument("--k", type=int, help="factors to extract (5)")
    p.add_argument("--alpha", type=float, help="temporal anchoring weight for layouts (0.5)")
    p.add_argument("--smooth-span", type=int, help="frames averaged for the layout anchor (4)")
    p.add_argument("--min-overlap", type=float, help="share that makes a flow edge significant (0.3)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="processes for per-window stages")
    p.add_argument("--out", help="output directory")
    p.add_argument("--rules", help="TSV of extra venue normalization rules")
    p.add_argument("--highlight", help="venue flagged in loading reports")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--weighted", dest="weighted", action="store_true", default=None)
    g.add_argument("--unweighted", dest="weighted", action="store_false")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citemap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"citemap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("run", parents=[common], help="all stages in order")
    for name in STAGE_ORDER:
        sub.add_parser(name, parents=[common], help=f"{name} stage")
    syn = sub.add_parser("synth", help="write a synthetic export with two planted communities")
    syn.add_argument("path")
    syn.add_argument("--seed", type=int, default=7)
    syn.add_argument("--first-year", type=int, default=2000)
    syn.add_argument("--years", type=int, default=12)
    syn.add_argument("--docs", type=int, default=300)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = load_config_file(args.config) if args.config else {}
    if args.inputs:
        values["inputs"] = list(args.inputs)
    for key in FLAG_KEYS + ["weighted"]:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in known}).validate()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        from .synthetic import SyntheticSpec, write_export

        spec = SyntheticSpec(n_docs=args.docs, first_year=args.first_year, n_years=args.years, seed=args.seed)
        docs = write_export(args.path, spec)
        print(f"wrote {len(docs)} records to {args.path}")
        return 0
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"citemap: config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            man = run_pipeline(cfg)
            print(f"done: {len(man['stages'])} stages, outputs in {cfg.out}")
        else:
            counts = run_stage(cfg, args.command)
            print(f"{args.command}: {counts}")
    except StageError as exc:
        print(f"citemap: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
