from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence
import argparse
import asyncio
import json
import logging
import sys
from pydantic import ValidationError

from .config import SUBCOMMANDS, Config, RunConfig, _deep_update, load_config
from .enums import SkillAlgorithm
from .manager import EXIT_INVALID, PipelineManager
from .ui.console import configure_logging, print_error

logger = logging.getLogger(__name__)

HELP = {
    "ingest": "Parse, merge and fill raw flight CSVs into canonical tables",
    "stats": "Descriptive statistics and unreliable-variable screening",
    "repair": "Replace isolated points of one or all flagged columns",
    "importance": "Random-forest feature importance for the landing G value",
    "quantify": "Train the BP network mapping flight state to control inputs",
    "eda": "Frequency, weekday and route analysis of an exceedance log",
    "skill": "Rate pilot landing skill with boosted trees or a neural network",
    "monitor": "Stream flights through the warning rules, alerts as JSON lines",
    "simulate": "Exceedance occurrence rates over a fleet of flights",
    "synth": "Write synthetic flights, schema, rules, event log and skill table",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("inputs", nargs="*", type=Path, help="Input files or directories ('-' reads stdin in monitor)")
    common.add_argument("--schema", type=Path, help="Column schema JSON")
    common.add_argument("--rules", type=Path, help="Threshold rules JSON")
    common.add_argument("--refs", type=Path, help="Per-flight Vref/V2 JSON")
    common.add_argument("--output", type=Path, help="Output directory")
    common.add_argument("--seed", type=int, help="Global seed")
    common.add_argument("--config", type=Path, help="JSON file of configuration overrides")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(prog="qar-monitor", description="QAR flight data monitoring toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    parsers = {name: sub.add_parser(name, parents=[common], help=HELP[name]) for name in SUBCOMMANDS}
    parsers["repair"].add_argument("--column", help="Column to repair")
    parsers["repair"].add_argument("--radius", type=float, help="DBSCAN neighborhood radius")
    parsers["repair"].add_argument("--min-pts", dest="min_pts", type=int, help="DBSCAN core threshold")
    parsers["importance"].add_argument("--target", help="Target column (default COG NORM ACCEL)")
    parsers["importance"].add_argument("--trees", type=int, help="Number of trees")
    parsers["quantify"].add_argument("--epochs", type=int, help="Training epochs")
    parsers["quantify"].add_argument("--hidden", type=int, help="Hidden units")
    parsers["quantify"].add_argument("--beta", type=float, help="Learning rate of the update rules")
    parsers["eda"].add_argument("--top", type=int, help="Rows shown in ranked tables")
    parsers["skill"].add_argument("--eta", type=float, help="Boosting learning rate")
    parsers["skill"].add_argument("--rounds", type=int, help="Boosting rounds")
    parsers["skill"].add_argument("--depth", type=int, help="Maximum tree depth")
    parsers["skill"].add_argument("--lambda", dest="reg_lambda", type=float, help="L2 leaf regularization")
    parsers["skill"].add_argument("--gamma", type=float, help="Minimum split gain")
    parsers["skill"].add_argument("--split", type=float, help="Train share of the train/test split")
    parsers["repair"].add_argument("--all-flagged", action="store_true", help="Repair every column with CV above the threshold")
    parsers["eda"].add_argument("--event", help="Event name to drill down (default: most frequent)")
    parsers["skill"].add_argument("--algo", choices=[a.value for a in SkillAlgorithm], help="Rating algorithm")
    parsers["monitor"].add_argument("--fail-on-critical", action="store_true", help="Exit 3 when a critical rule fires")
    parsers["synth"].add_argument("--flights", type=int, default=8, help="Number of synthetic flights")
    return parser


FLAG_OVERRIDES = {
    "radius": ("outliers", "radius"),
    "min_pts": ("outliers", "min_pts"),
    "target": ("forest", "target"),
    "trees": ("forest", "n_trees"),
    "epochs": ("bpnet", "epochs"),
    "hidden": ("bpnet", "hidden"),
    "beta": ("bpnet", "beta"),
    "top": ("eda", "top"),
    "eta": ("boost", "eta"),
    "rounds": ("boost", "rounds"),
    "depth": ("boost", "max_depth"),
    "reg_lambda": ("boost", "reg_lambda"),
    "gamma": ("boost", "gamma"),
    "split": ("skill", "train_ratio"),
    "algo": ("skill", "algo"),
    "fail_on_critical": ("warning", "fail_on_critical"),
}


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """Defaults < environment < --config file < flags."""
    config = load_config(args.config)
    overrides: Dict[str, Dict] = {}
    for flag, (section, field) in FLAG_OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None and value is not False:
            overrides.setdefault(section, {})[field] = value
    if overrides:
        config = Config.model_validate(_deep_update(config.model_dump(), overrides))
    if args.log_level:
        config = config.model_copy(update={"log_level": args.log_level.upper()})
    return RunConfig(
        subcommand=args.subcommand,
        inputs=list(args.inputs),
        schema_path=args.schema,
        rules_path=args.rules,
        refs_path=args.refs,
        output_dir=args.output or Path(config.output_dir),
        seed=config.seed if args.seed is None else args.seed,
        column=getattr(args, "column", None),
        all_flagged=getattr(args, "all_flagged", False),
        event=getattr(args, "event", None),
        flights=getattr(args, "flights", 8),
        config=config,
    )


async def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or "INFO")
    try:
        run = run_config_from_args(args)
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        print_error(f"Invalid configuration: {messages}")
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError, ValueError) as e:
        print_error(f"Cannot load configuration: {str(e)}")
        return EXIT_INVALID
    configure_logging(run.config.log_level)
    manager = PipelineManager(run)
    return await manager.dispatch()


def run(argv: Optional[List[str]] = None) -> None:
    sys.exit(asyncio.run(main(argv)))
