from .rules import ThresholdRule, default_rules, dump_rules, load_refs, load_rules, refs_for
from .keypoints import FlightPhaseWindow, derived_metrics, detect_keypoints
from .engine import AlertEvent, FlightEvaluation, evaluate_flight, evaluate_rules
from .stream import StreamMonitor, StreamResult, replay_table, run_stream
from .report import simulate_report

__all__ = [
    "ThresholdRule",
    "default_rules",
    "dump_rules",
    "load_refs",
    "load_rules",
    "refs_for",
    "FlightPhaseWindow",
    "derived_metrics",
    "detect_keypoints",
    "AlertEvent",
    "FlightEvaluation",
    "evaluate_flight",
    "evaluate_rules",
    "StreamMonitor",
    "StreamResult",
    "replay_table",
    "run_stream",
    "simulate_report",
]
