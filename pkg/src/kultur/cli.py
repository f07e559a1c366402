"""Command line entry point.

One subcommand per pipeline stage plus ``pipeline`` to run them all and
``eval`` for scoring prediction files against gold answers:

    kultur select   --config cfg.json
    kultur images   --config cfg.json --replay listings.jsonl
    kultur generate --config cfg.json
    kultur mcq      --config cfg.json --replay
    kultur refine   --config cfg.json --replay
    kultur filter   --config cfg.json --replay
    kultur sample   --config cfg.json --budget 500 --t-region 4.0 --t-lang 1.5
    kultur stats    --config cfg.json
    kultur pipeline --config cfg.json
    kultur eval     --gold gold.jsonl --pred system_a.jsonl --pred system_b.jsonl
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .evalharness import read_gold_items, read_predictions, render_score_table, score_predictions
from .pipeline import FILES, PipelineError, run_pipeline, run_stage, write_run_manifest

logger = logging.getLogger(__name__)

STAGE_COMMANDS = ("select", "images", "generate", "mcq", "refine", "filter", "sample", "stats")

_STAGE_HELP = {
    "select": "pick culturally anchored entities from a knowledge graph dump",
    "images": "attach image candidates to selected entities",
    "generate": "instantiate question/answer templates",
    "mcq": "generate multiple-choice and true/false variants via the model gateway",
    "refine": "rewrite templated questions via the model gateway",
    "filter": "keep records the verifier model accepts",
    "sample": "draw a temperature-balanced subset",
    "stats": "tabulate per-region and per-language dataset counts",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, metavar="PATH", help="pipeline configuration file")
    p.add_argument("--workdir", metavar="DIR", help="override the working directory")
    p.add_argument("--seed", type=int, metavar="N", help="override the sampling seed")
    p.add_argument("--budget", type=int, metavar="N", help="override the sample budget")
    p.add_argument("--t-region", type=float, metavar="T", help="override the region temperature")
    p.add_argument("--t-lang", type=float, metavar="T", help="override the language temperature")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument(
        "--replay", nargs="?", const="", metavar="STORE",
        help="serve model responses from the response store (optionally STORE)",
    )
    mode.add_argument(
        "--record", nargs="?", const="", metavar="STORE",
        help="call models live and record responses (optionally to STORE)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kultur",
        description="Build culturally grounded visual question answering datasets "
        "from a multilingual knowledge graph.",
    )
    parser.add_argument(
        "--log-level", default="warning",
        choices=("debug", "info", "warning", "error"),
        help="stderr logging threshold (default: warning)",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    for name in STAGE_COMMANDS:
        _add_common(sub.add_parser(name, help=_STAGE_HELP[name]))
    _add_common(sub.add_parser("pipeline", help="run every stage in order"))

    ev = sub.add_parser("eval", help="score predictions against gold answers")
    ev.add_argument("--gold", required=True, metavar="PATH", help="gold answer file")
    ev.add_argument(
        "--pred", required=True, action="append", metavar="PATH",
        help="prediction file; repeat for several systems",
    )
    ev.add_argument("--out", metavar="PATH", help="also write the score table here")
    return parser


def _configure(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.workdir:
        cfg.workdir = Path(args.workdir)
    if args.seed is not None:
        cfg.sampling.seed = args.seed
    if args.budget is not None:
        cfg.sampling.budget = args.budget
    if args.t_region is not None:
        cfg.sampling.t_region = args.t_region
    if args.t_lang is not None:
        cfg.sampling.t_lang = args.t_lang
    if args.replay is not None:
        cfg.gateway_policy.mode = "replay"
        if args.replay:
            cfg.gateway_store = Path(args.replay)
    elif args.record is not None:
        cfg.gateway_policy.mode = "record"
        if args.record:
            cfg.gateway_store = Path(args.record)
    return cfg


def _run_eval(args: argparse.Namespace) -> int:
    golds = read_gold_items(args.gold)
    reports = {}
    for pred_path in args.pred:
        name = Path(pred_path).stem
        reports[name] = score_predictions(read_predictions(pred_path), golds)
    table = render_score_table(reports)
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n", encoding="utf-8")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "eval":
            return _run_eval(args)
        cfg = _configure(args)
        if args.command == "pipeline":
            for report in run_pipeline(cfg):
                print(report.line())
            print(f"run manifest: {cfg.workdir / FILES['run_manifest']}")
            return 0
        report = run_stage(args.command, cfg)
        print(report.line())
        for note in report.notes:
            print(f"note: {note}")
        if args.command == "stats":
            print((cfg.workdir / FILES["stats_table"]).read_text(encoding="utf-8"), end="")
        if args.command == "sample":
            print((cfg.workdir / FILES["plan"]).read_text(encoding="utf-8"), end="")
        write_run_manifest(cfg, [report])
        return 0
    except (ConfigError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
