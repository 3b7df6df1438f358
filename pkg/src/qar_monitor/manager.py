from __future__ import annotations

from pathlib import Path
from typing import Any, List, Optional, TextIO
import json
import logging
import math
import sys
import traceback
import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import RunConfig, derive_seed
from .events.eda import drilldown, event_scatter, frequency_tables, load_event_log, summarize, weekday_split
from .exceptions import ConfigurationError, QarMonitorError, SchemaError
from .ingest.reader import load_flight, read_sidecar, write_flight_csv
from .ingest.table import ColumnSchema, FlightTable, load_schema
from .learn.control import build_control_layout, quantify_controls, save_checkpoint, train_control_model
from .learn.forest import ForestParams, fit_forest, importance_mdi, predict, regression_metrics, train_test_split
from .learn.skill import load_skill_table, prune_features, rate_flights
from .quality.outliers import DbscanParams, repair_columns
from .quality.reliability import boxplot_fences, flag_unreliable, profile_table, profiles_frame
from .synth import write_synthetic_dataset
from .ui.console import console, print_error, print_frame, print_success, print_summary, print_warning
from .ui.printer import Printer
from .warning.engine import AlertEvent
from .warning.report import simulate_report
from .warning.rules import default_rules, load_refs, load_rules, refs_for
from .warning.stream import iter_csv_frames, run_stream

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2
EXIT_CRITICAL = 3


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, NaN and inf become None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(payload: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_plain(payload), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def write_csv(frame: pd.DataFrame, path: Path, index: bool = False) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, encoding="utf-8", lineterminator="\n")
    return path


def expand_inputs(paths: List[Path]) -> List[Path]:
    """Files as given; directories contribute their *.csv files in name order."""
    expanded = []
    for path in paths:
        path = Path(path)
        if path.is_dir():
            expanded.extend(sorted(p for p in path.glob("*.csv")))
        else:
            expanded.append(path)
    return expanded


class PipelineManager:
    """Runs one subcommand of a validated RunConfig and writes its artifacts."""

    def __init__(self, run: RunConfig, stdout: Optional[TextIO] = None):
        self.run = run
        self.config = run.config
        self.stdout = stdout or sys.stdout
        self.printer = Printer(console)
        logger.info(f"Initializing PipelineManager for {run.subcommand}")

    @property
    def out_dir(self) -> Path:
        return Path(self.run.output_dir) / self.run.subcommand

    def seed_for(self, module: str) -> int:
        return derive_seed(self.run.seed, module)

    async def dispatch(self) -> int:
        """Run the subcommand; returns the process exit status."""
        handler = getattr(self, f"_run_{self.run.subcommand}")
        self.printer.update_item("header", f"[bold blue]qar-monitor {self.run.subcommand}[/bold blue]",
                                 hide_checkmark=True)
        try:
            status = await handler()
        except (QarMonitorError, ValidationError, FileNotFoundError) as e:
            print_error(str(e))
            logger.debug(f"Stack trace: {traceback.format_exc()}")
            return EXIT_INVALID
        except Exception as e:
            print_error(f"Unexpected error in {self.run.subcommand}: {str(e)}")
            logger.debug(f"Stack trace: {traceback.format_exc()}")
            return EXIT_UNEXPECTED
        if status == EXIT_OK:
            print_success(f"{self.run.subcommand} finished, outputs in {self.out_dir}")
        return status

    def _schema(self) -> ColumnSchema:
        return load_schema(self.run.schema_path) if self.run.schema_path else ColumnSchema.permissive()

    def _load_flights(self) -> List[FlightTable]:
        paths = expand_inputs(self.run.inputs)
        if not paths:
            raise ConfigurationError(f"No flight CSV files under {', '.join(map(str, self.run.inputs))}")
        schema = self._schema()
        self.printer.update_item("load", f"Loading {len(paths)} flight(s)...")
        flights = [load_flight(path, schema, self.config.ingest) for path in paths]
        self.printer.update_item("load", f"Loaded {len(flights)} flight(s)", is_done=True)
        return flights

    async def _run_ingest(self) -> int:
        rows = []
        for table in self._load_flights():
            path = write_flight_csv(table, self.out_dir / f"{table.flight_id}.csv")
            rows.append([table.flight_id, table.length, len(table.names), table.sample_rate_hz, str(path)])
        frame = pd.DataFrame(rows, columns=["flight_id", "rows", "columns", "sample_rate_hz", "path"])
        write_csv(frame, self.out_dir / "manifest.csv")
        print_frame("Ingested flights", frame)
        return EXIT_OK

    async def _run_stats(self) -> int:
        profiles, fences, flagged = [], [], {}
        for table in self._load_flights():
            rows = profile_table(table)
            frame = profiles_frame(rows)
            frame.insert(0, "flight_id", table.flight_id)
            profiles.append(frame)
            flagged[table.flight_id] = flag_unreliable(rows, self.config.outliers.cv_threshold)
            for name in table.names:
                try:
                    box = boxplot_fences(table.column(name))
                except QarMonitorError as e:
                    logger.warning(f"No boxplot for {name}: {e}")
                    continue
                fences.append([table.flight_id, name, box.q1, box.q3, box.iqr, box.lower_fence, box.upper_fence,
                               len(box.outlier_indices)])
        profile = pd.concat(profiles, ignore_index=True)
        write_csv(profile, self.out_dir / "profile.csv")
        write_csv(pd.DataFrame(fences, columns=["flight_id", "name", "q1", "q3", "iqr", "lower_fence",
                                                "upper_fence", "outliers"]), self.out_dir / "boxplot.csv")
        write_json({"cv_threshold": self.config.outliers.cv_threshold, "unreliable": flagged},
                   self.out_dir / "unreliable.json")
        print_frame("Variable profiles", profile.drop(columns=["flight_id"]) if len(flagged) == 1 else profile)
        for flight_id, names in flagged.items():
            if names:
                print_warning(f"{flight_id}: unreliable variables (CV > {self.config.outliers.cv_threshold:g}): "
                              f"{', '.join(names)}")
        return EXIT_OK

    async def _run_repair(self) -> int:
        if not self.run.column and not self.run.all_flagged:
            raise ConfigurationError("repair needs --column NAME or --all-flagged")
        params = DbscanParams(radius=self.config.outliers.radius, min_pts=self.config.outliers.min_pts)
        summary_rows = []
        for table in self._load_flights():
            if self.run.column:
                if not table.has_column(self.run.column):
                    raise SchemaError(f"Flight {table.flight_id} has no column {self.run.column!r}")
                columns = [self.run.column]
            else:
                flagged = flag_unreliable(profile_table(table), self.config.outliers.cv_threshold)
                columns = [c for c in flagged if c not in table.discretes]
            self.printer.update_item(f"repair_{table.flight_id}",
                                     f"Repairing {len(columns)} column(s) of {table.flight_id}...")
            repaired, summaries, _ = repair_columns(table, columns, params, self.config.outliers.max_passes)
            write_flight_csv(repaired, self.out_dir / f"{table.flight_id}.csv")
            summary_rows.extend([table.flight_id, s.column, s.noise, s.core, s.border, s.replacement]
                                for s in summaries)
            self.printer.mark_item_done(f"repair_{table.flight_id}")
        frame = pd.DataFrame(summary_rows, columns=["flight_id", "column", "noise", "core", "border", "replacement"])
        write_csv(frame, self.out_dir / "repair_summary.csv")
        print_frame("Isolated points replaced", frame)
        return EXIT_OK

    async def _run_importance(self) -> int:
        cfg = self.config.forest
        flights = self._load_flights()
        frame = pd.concat([t.frame for t in flights], ignore_index=True)
        if cfg.target not in frame.columns:
            raise SchemaError(f"Target column {cfg.target!r} not in the flights")
        features = [c for c in frame.columns if c != cfg.target and frame[c].notna().all()]
        X = frame[features].to_numpy(dtype=np.float64)
        y = frame[cfg.target].to_numpy(dtype=np.float64)
        seed = self.seed_for("forest")
        train, test = train_test_split(len(y), cfg.train_ratio, seed)
        params = ForestParams(n_trees=cfg.n_trees, max_depth=cfg.max_depth, min_leaf=cfg.min_leaf,
                              mtry=cfg.mtry, bootstrap=cfg.bootstrap)
        self.printer.update_item("fit", f"Growing {cfg.n_trees} trees on {train.size} rows, {len(features)} features...")
        model = fit_forest(X[train], y[train], params, seed=seed, feature_names=features)
        self.printer.mark_item_done("fit")

        weights = pd.DataFrame(importance_mdi(model), columns=["feature", "weight"])
        metrics = {
            "target": cfg.target,
            "train": vars(regression_metrics(y[train], predict(model, X[train]))),
            "test": vars(regression_metrics(y[test], predict(model, X[test]))),
            "train_rows": int(train.size),
            "test_rows": int(test.size),
            "seed": seed,
        }
        write_csv(weights, self.out_dir / "importance.csv")
        write_json(metrics, self.out_dir / "metrics.json")
        print_frame(f"Feature importance for {cfg.target}", weights, limit=20)
        print_summary("Regression error", f"train MSE {metrics['train']['mse']:.6g}\ntest MSE {metrics['test']['mse']:.6g}")
        return EXIT_OK

    async def _run_quantify(self) -> int:
        cfg = self.config.bpnet
        layouts = [build_control_layout(t, cfg.state_columns, cfg.control_columns) for t in self._load_flights()]
        X = np.vstack([layout[0] for layout in layouts])
        Y = np.vstack([layout[1] for layout in layouts])
        names = layouts[0][2]
        seed = self.seed_for("bpnet")
        train, test = train_test_split(X.shape[0], cfg.train_ratio, seed)
        self.printer.update_item("train", f"Training {cfg.epochs} epochs on {train.size} per-second rows...")
        model, history = train_control_model(X[train], Y[train], cfg, seed=seed, feature_names=names,
                                             control_names=cfg.control_columns)
        self.printer.mark_item_done("train")

        result = quantify_controls(model, X[test], Y[test])
        predictions = result.frame()
        save_checkpoint(model, self.out_dir / "model.json")
        write_csv(predictions, self.out_dir / "predictions.csv")
        write_csv(pd.DataFrame({"epoch": np.arange(len(history)), "loss": history}), self.out_dir / "loss.csv")
        summary = result.error_summary()
        write_json({"relative_error": summary, "final_loss": history[-1] if history else None, "seed": seed},
                   self.out_dir / "summary.json")
        rows = [[name, s["mean_relative_error"], s["max_relative_error"], s["defined_rows"]] for name, s in summary.items()]
        print_frame("Relative error per control", pd.DataFrame(rows, columns=["control", "mean", "max", "rows"]))
        return EXIT_OK

    async def _run_eda(self) -> int:
        records, rejected = load_event_log(self.run.inputs[0])
        tables = frequency_tables(records)
        split = weekday_split(records)
        for name, table in tables.items():
            write_csv(table, self.out_dir / f"{name}.csv")
        write_csv(event_scatter(records), self.out_dir / "scatter.csv")
        write_csv(pd.DataFrame(rejected, columns=["row", "reason"]), self.out_dir / "rejected.csv")

        summary = summarize(records, tables, split)
        event = self.run.event or summary["top_event"]
        if event is not None:
            drill = drilldown(records, event)
            write_csv(drill.by_aircraft, self.out_dir / "drilldown_aircraft.csv")
            write_csv(drill.by_dep, self.out_dir / "drilldown_dep.csv")
            write_csv(drill.by_arr, self.out_dir / "drilldown_arr.csv")
            write_csv(drill.dep_arr_grid, self.out_dir / "drilldown_grid.csv", index=True)
            summary["drilldown_event"] = event
            if drill.notice:
                print_warning(drill.notice)
        write_json(summary, self.out_dir / "summary.json")

        top = self.config.eda.top
        print_frame("Exceedance events", tables["by_event"], limit=top)
        print_frame("Routes", tables["by_route"], limit=top)
        print_summary("Workday / weekend", f"{split.workday} : {split.weekend} (ratio {split.ratio})")
        return EXIT_OK

    async def _run_skill(self) -> int:
        data = prune_features(load_skill_table(self.run.inputs[0]), self.config.skill)
        algo = self.config.skill.algo
        self.printer.update_item("rate", f"Rating {len(data)} flights with {algo.value}...")
        report = rate_flights(data, self.config, seed=self.seed_for("skill"), algo=algo)
        self.printer.mark_item_done("rate")

        write_json({"algo": report.algo.value, "train_accuracy": report.train_accuracy, **report.metrics.as_dict()},
                   self.out_dir / "metrics.json")
        write_csv(report.metrics.confusion_frame(), self.out_dir / "confusion.csv", index=True)
        write_csv(report.probabilities, self.out_dir / "probabilities.csv")
        write_csv(report.shares, self.out_dir / "pilot_shares.csv", index=True)
        if report.importance is not None:
            importance = pd.DataFrame(report.importance, columns=["feature", "share"])
            write_csv(importance, self.out_dir / "importance.csv")
            print_frame("Feature importance", importance, limit=15)
        print_frame("Rating share per pilot (%)", report.shares.rename_axis("pilot"))
        print_summary("Classification", f"test accuracy {report.metrics.accuracy:.4f}\n"
                                        f"train accuracy {report.train_accuracy:.4f}")
        return EXIT_OK

    def _rules(self):
        return load_rules(self.run.rules_path) if self.run.rules_path else default_rules()

    async def _run_monitor(self) -> int:
        if self.run.rules_path is None:
            raise ConfigurationError("monitor needs --rules PATH")
        rules = self._rules()
        critical = {r.rule_id for r in rules if r.critical}
        refs = load_refs(self.run.refs_path)
        schema = self._schema()
        rate = schema.sample_rate_hz or self.config.ingest.default_sample_rate_hz
        warn = self.config.warning
        status = EXIT_OK
        rows = []

        def emit(alert: AlertEvent):
            self.stdout.write(json.dumps(_plain(alert.as_dict(rate)), sort_keys=True, ensure_ascii=False) + "\n")
            self.stdout.flush()

        for path in self.run.inputs:
            flight_id = "stdin" if str(path) == "-" else Path(path).stem
            flight_refs = refs_for(flight_id, refs, warn.vref, warn.v2)
            self.printer.update_item(f"stream_{flight_id}", f"Monitoring {flight_id}...")
            discretes = set(schema.discrete)
            if str(path) != "-":
                discretes |= set(read_sidecar(Path(path)).get("discretes", []))
            handle = sys.stdin if str(path) == "-" else open(path, newline="", encoding="utf-8")
            try:
                frames = iter_csv_frames(handle, self.config.ingest.blank_tokens, discretes)
                result = await run_stream(frames, rules,
                                          flight_refs, warn, flight_id=flight_id, sample_rate_hz=rate, on_alert=emit)
            finally:
                if handle is not sys.stdin:
                    handle.close()
            rows.extend(a.as_dict(rate) for a in result.report)
            self.printer.update_item(f"stream_{flight_id}",
                                     f"{flight_id}: {len(result.report)} alert(s) over {(result.last_tick or 0) + 1} ticks",
                                     is_done=True)
            if result.halted:
                print_error(f"{flight_id}: {result.error}")
                status = EXIT_INVALID
            elif warn.fail_on_critical and any(a.rule_id in critical for a in result.report):
                status = max(status, EXIT_CRITICAL)

        columns = ["flight_id", "tick", "seconds", "rule_id", "event_name", "phase", "measured", "threshold_resolved"]
        write_csv(pd.DataFrame(rows, columns=columns), self.out_dir / "alerts.csv")
        if status == EXIT_CRITICAL:
            print_error("Critical exceedance detected")
        return status

    async def _run_simulate(self) -> int:
        rules = self._rules()
        flights = self._load_flights()
        refs = load_refs(self.run.refs_path)
        table = simulate_report(flights, rules, refs, self.config.warning)
        write_csv(table, self.out_dir / "rates.csv")
        print_frame("Exceedance occurrence rates", table[["event_name", "flights_with_phase", "flights_with_alert",
                                                          "rate_percent"]])
        return EXIT_OK

    async def _run_synth(self) -> int:
        self.printer.update_item("synth", f"Writing {self.run.flights} synthetic flights...")
        manifest = write_synthetic_dataset(self.out_dir, n_flights=self.run.flights, seed=self.run.seed)
        self.printer.mark_item_done("synth")
        print_summary("Synthetic dataset", "\n".join([
            f"flights: {len(manifest.flights)} under {self.out_dir / 'flights'}",
            f"schema: {manifest.schema}",
            f"rules: {manifest.rules}",
            f"refs: {manifest.refs}",
            f"events: {manifest.events}",
            f"skill: {manifest.skill}",
        ]))
        return EXIT_OK
