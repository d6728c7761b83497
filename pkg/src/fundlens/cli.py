"""Command-line interface: fundlens <command> --config <file> [options]."""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import FundlensError
from . import pipeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundlens",
        description="Extract visual/textual features from crowdfunding "
        "listings and train predictive models over nested variable sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config file (JSON or TOML)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        return p

    add("ingest", "validate input records; write records + rejects reports")
    add("fetch-images", "populate the content-addressed image cache")
    add("annotate", "run annotation providers over cached images")
    add("extract", "build the tagged feature table (CSV + manifest)")

    train = add("train", "fit learners over the nested variable sets")
    train.add_argument("--set", type=int, choices=range(1, 6), default=None,
                       help="train a single variable set (default: config)")
    train.add_argument("--model", choices=["ridge", "lasso", "gbt", "bart"],
                       default=None, help="train a single learner (default: config)")

    add("importance", "BART inclusion proportions with replicate intervals")

    pdp = add("pdp", "partial dependence curves at quintiles")
    pdp.add_argument("--variable", action="append", default=None,
                     help="variable name (repeatable; default: config)")

    add("report", "bundle evaluation, importance, and PDP outputs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "ingest":
            result = pipeline.stage_ingest(cfg)
            print(f"{len(result.records)} records, {len(result.rejects)} rejects")
        elif args.command == "fetch-images":
            manifest = pipeline.stage_fetch_images(cfg)
            print(f"{len(manifest)} images cached")
        elif args.command == "annotate":
            results = pipeline.stage_annotate(cfg)
            print(f"{len(results)} annotation sets")
        elif args.command == "extract":
            table = pipeline.stage_extract(cfg)
            print(f"feature table: {len(table.ids)} rows x {len(table.columns)} columns")
        elif args.command == "train":
            sets = [args.set] if args.set else None
            learners = [args.model] if args.model else None
            rows = pipeline.stage_train(cfg, seed=args.seed, sets=sets, learners=learners)
            print(f"trained {len(rows)} model/set combinations")
        elif args.command == "importance":
            report = pipeline.stage_importance(cfg, seed=args.seed)
            print(f"importance over {len(report.variables)} variables")
        elif args.command == "pdp":
            curves = pipeline.stage_pdp(cfg, variables=args.variable, seed=args.seed)
            print(f"{len(curves)} PDP curves")
        elif args.command == "report":
            path = pipeline.stage_report(cfg)
            print(f"wrote {path}")
    except FundlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
