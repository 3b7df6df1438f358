from __future__ import annotations

from typing import List, Mapping, Optional, Sequence
import logging
import pandas as pd

from ..config import WarningConfig
from ..ingest.table import FlightTable
from .engine import FlightEvaluation, evaluate_flight
from .rules import ThresholdRule, refs_for

logger = logging.getLogger(__name__)

RATE_COLUMNS = ["rule_id", "event_name", "flights_with_phase", "flights_with_alert", "rate_percent"]


def rate_table(evaluations: Sequence[FlightEvaluation], rules: Sequence[ThresholdRule]) -> pd.DataFrame:
    """Per rule: share of flights with the rule's phase that fired it at least once."""
    rows = []
    for rule in rules:
        with_phase = [e for e in evaluations if rule.phase in e.phases_present]
        fired = sum(1 for e in with_phase if e.fired(rule.rule_id))
        rate = 100.0 * fired / len(with_phase) if with_phase else 0.0
        rows.append([rule.rule_id, rule.event_name, len(with_phase), fired, rate])
    return pd.DataFrame(rows, columns=RATE_COLUMNS)


def simulate_report(flights: Sequence[FlightTable], rules: Sequence[ThresholdRule],
                    refs: Optional[Mapping[str, Mapping[str, float]]] = None,
                    config: Optional[WarningConfig] = None) -> pd.DataFrame:
    """Occurrence rate of every rule over a fleet, in rule order."""
    config = config or WarningConfig()
    refs = refs or {}
    if not flights:
        logger.warning("No flights to simulate")
    evaluations: List[FlightEvaluation] = []
    for table in flights:
        flight_refs = refs_for(table.flight_id, refs, config.vref, config.v2)
        evaluations.append(evaluate_flight(table, rules, flight_refs, config))
    table = rate_table(evaluations, rules)
    logger.info(f"Simulated {len(flights)} flights, {int(table['flights_with_alert'].sum())} rule firings")
    return table
