from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple
import logging
import numpy as np

from ..config import WarningConfig
from ..enums import Comparator, Phase
from ..ingest.table import FlightTable
from .keypoints import FlightPhaseWindow, detect_keypoints, in_band, metric_arrays, runs, table_signals
from .rules import ThresholdRule, check_refs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlertEvent:
    rule_id: str
    flight_id: str
    tick: int
    measured: float
    threshold_resolved: float
    phase: Phase
    event_name: str = ""

    def as_dict(self, sample_rate_hz: Optional[float] = None) -> Dict:
        payload = asdict(self)
        payload["phase"] = self.phase.value
        if sample_rate_hz:
            payload["seconds"] = self.tick / sample_rate_hz
        return payload


@dataclass
class FlightEvaluation:
    flight_id: str
    alerts: List[AlertEvent] = field(default_factory=list)
    phases_present: Set[Phase] = field(default_factory=set)

    def fired(self, rule_id: str) -> bool:
        return any(a.rule_id == rule_id for a in self.alerts)


def report_order(rules: Sequence[ThresholdRule]):
    """Sort key shared by the batch and streaming reports: tick, then rule order."""
    position = {rule.rule_id: i for i, rule in enumerate(rules)}
    return lambda alert: (alert.tick, position[alert.rule_id])


def extremal_violation(values: np.ndarray, comparator: Comparator, threshold: float) -> Optional[int]:
    """Offset of the most extreme violating value, earliest on ties; None without a violation."""
    defined = np.isfinite(values)
    hits = defined & (values >= threshold if comparator is Comparator.GE else values <= threshold)
    if not hits.any():
        return None
    if comparator is Comparator.GE:
        return int(np.argmax(np.where(hits, values, -np.inf)))
    return int(np.argmin(np.where(hits, values, np.inf)))


def phase_segments(phase: Phase, windows: Sequence[FlightPhaseWindow], metrics: Mapping[str, np.ndarray],
                   length: int) -> List[Tuple[int, int]]:
    """Inclusive tick ranges a rule of this phase is evaluated on, one alert at most per range."""
    if phase.is_window:
        return [(w.start, w.end) for w in windows if w.kind is phase]
    if phase is Phase.ANY:
        return [(0, length - 1)] if length else []
    return runs(in_band(phase, metrics["altitude"], metrics["descent_rate"]))


def evaluate_flight(table: FlightTable, rules: Sequence[ThresholdRule], refs: Mapping[str, Optional[float]],
                    config: Optional[WarningConfig] = None) -> FlightEvaluation:
    config = config or WarningConfig()
    check_refs(rules, refs)
    windows = detect_keypoints(table, config)
    metrics = metric_arrays(table_signals(table, config), config)
    segments = {phase: phase_segments(phase, windows, metrics, table.length) for phase in Phase}

    evaluation = FlightEvaluation(flight_id=table.flight_id,
                                  phases_present={phase for phase, seg in segments.items() if seg})
    for rule in rules:
        threshold = rule.resolve(refs)
        values = metrics[rule.metric]
        for start, end in segments[rule.phase]:
            offset = extremal_violation(values[start:end + 1], rule.comparator, threshold)
            if offset is None:
                continue
            tick = start + offset
            evaluation.alerts.append(AlertEvent(
                rule_id=rule.rule_id, flight_id=table.flight_id, tick=tick, measured=float(values[tick]),
                threshold_resolved=threshold, phase=rule.phase, event_name=rule.event_name,
            ))
    evaluation.alerts.sort(key=report_order(rules))
    if evaluation.alerts:
        logger.info(f"Flight {table.flight_id}: {len(evaluation.alerts)} alerts "
                    f"({', '.join(sorted({a.rule_id for a in evaluation.alerts}))})")
    return evaluation


def evaluate_rules(table: FlightTable, rules: Sequence[ThresholdRule], refs: Mapping[str, Optional[float]],
                   config: Optional[WarningConfig] = None) -> List[AlertEvent]:
    """
    Batch rule evaluation over a whole flight.

    Each rule yields at most one alert per landing/takeoff window, per run of
    consecutive in-band ticks, or per flight for phase `any`, placed at the
    most extreme violating tick. Comparisons are inclusive.
    """
    return evaluate_flight(table, rules, refs, config).alerts
