"""
Key points, phase membership and derived metrics of a flight.

The air/ground discrete reads 1 (TRUE) while airborne. A landing key point is
the first tick after a TRUE -> FALSE change, a takeoff key point the first
tick after FALSE -> TRUE; each gets a window of +/- window_seconds around it.
Every per-tick quantity here depends only on the current and previous tick,
so the streaming monitor can compute the same values as the batch engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple
import logging
import numpy as np

from ..config import WarningConfig
from ..enums import Phase
from ..exceptions import SchemaError
from ..ingest.table import FlightTable

logger = logging.getLogger(__name__)

CLIMB_SPEED_FACTOR = 3.28


@dataclass(frozen=True)
class FlightPhaseWindow:
    kind: Phase
    center_tick: int
    start: int
    end: int
    clipped: bool = False

    @property
    def ticks(self) -> range:
        return range(self.start, self.end + 1)


def half_width(sample_rate_hz: float, window_seconds: float) -> int:
    return int(round(window_seconds * sample_rate_hz))


def transition_kind(previous: float, current: float) -> Optional[Phase]:
    """Landing on airborne -> ground, takeoff on ground -> airborne."""
    was_air, is_air = previous >= 0.5, current >= 0.5
    if was_air and not is_air:
        return Phase.LANDING
    if is_air and not was_air:
        return Phase.TAKEOFF
    return None


def detect_keypoints(table: FlightTable, config: Optional[WarningConfig] = None) -> List[FlightPhaseWindow]:
    """One window per air/ground transition, clipped to the table bounds."""
    config = config or WarningConfig()
    if not table.has_column(config.air_ground_column):
        raise SchemaError(f"Flight {table.flight_id} lacks air/ground column {config.air_ground_column!r}")
    air = table.column(config.air_ground_column)
    h = half_width(table.sample_rate_hz, config.window_seconds)
    last = table.length - 1
    windows = []
    for tick in range(1, table.length):
        kind = transition_kind(air[tick - 1], air[tick])
        if kind is None:
            continue
        start, end = tick - h, tick + h
        windows.append(FlightPhaseWindow(kind=kind, center_tick=tick, start=max(0, start), end=min(last, end),
                                         clipped=start < 0 or end > last))
    logger.debug(f"Flight {table.flight_id}: {len(windows)} key points")
    return windows


def _column_or_nan(table: FlightTable, name: str) -> np.ndarray:
    return table.column(name) if table.has_column(name) else np.full(table.length, np.nan)


def table_signals(table: FlightTable, config: WarningConfig) -> Dict[str, np.ndarray]:
    """Raw per-tick inputs of the metric computation; absent optional columns are NaN."""
    for required in (config.descent_rate_column, config.ground_speed_column):
        if not table.has_column(required):
            raise SchemaError(f"Flight {table.flight_id} lacks column {required!r}")
    if table.has_column(config.radio_altitude_column):
        band = table.column(config.radio_altitude_column)
    elif table.has_column(config.altitude_column):
        band = table.column(config.altitude_column) - config.field_elevation
    else:
        logger.warning(f"Flight {table.flight_id} has no altitude column; altitude-band phases never occur")
        band = np.full(table.length, np.nan)
    return {
        "pitch": _column_or_nan(table, config.pitch_column),
        "airspeed": _column_or_nan(table, config.airspeed_column),
        "altitude": band,
        "descent_rate": table.column(config.descent_rate_column),
        "ground_speed": table.column(config.ground_speed_column),
        "gear": _column_or_nan(table, config.gear_column),
    }


def metric_arrays(signals: Dict[str, np.ndarray], config: WarningConfig,
                  previous_gear: float = np.nan) -> Dict[str, np.ndarray]:
    """
    Derived metrics for consecutive ticks.

    Undefined values are NaN: the climb gradient at zero ground speed, and the
    gear retraction altitude everywhere except the tick the gear goes down -> up.
    previous_gear is the gear state of the tick before the first one given.
    """
    dr = signals["descent_rate"]
    gs = signals["ground_speed"]
    gear = signals["gear"]
    with np.errstate(divide="ignore", invalid="ignore"):
        gradient = np.where(gs != 0, (-dr / gs) * 100.0, np.nan)
    prior = np.concatenate([[previous_gear], gear[:-1]])
    retracted = (prior >= 0.5) & (gear < 0.5)
    return {
        "pitch": signals["pitch"],
        "airspeed": signals["airspeed"],
        "altitude": signals["altitude"],
        "descent_rate": dr,
        "ground_speed": gs,
        "climb_speed_proxy": (-dr / 60.0) * CLIMB_SPEED_FACTOR * config.climb_speed_scale,
        "climb_gradient": gradient,
        "gear_retraction_altitude": np.where(retracted, signals["altitude"], np.nan),
    }


def in_band(phase: Phase, altitude: np.ndarray, descent_rate: np.ndarray) -> np.ndarray:
    """Band membership: low <= altitude < high, climbing (descent rate < 0) or descending (> 0)."""
    lo, hi, climbing = phase.band
    moving = descent_rate < 0 if climbing else descent_rate > 0
    return (altitude >= lo) & (altitude < hi) & moving


def runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Inclusive (start, end) tick pairs of consecutive True runs."""
    padded = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(s), int(e) - 1) for s, e in zip(edges[::2], edges[1::2])]


def derived_metrics(table: FlightTable, tick: int, config: Optional[WarningConfig] = None) -> Dict[str, Optional[float]]:
    """Metric map at one tick; undefined metrics are None."""
    config = config or WarningConfig()
    if not 0 <= tick < table.length:
        raise IndexError(f"Tick {tick} outside flight {table.flight_id} of {table.length} ticks")
    signals = table_signals(table, config)
    lo = max(0, tick - 1)
    window = {name: values[lo:tick + 1] for name, values in signals.items()}
    metrics = metric_arrays(window, config)
    out = {}
    for name, values in metrics.items():
        value = float(values[-1])
        out[name] = None if np.isnan(value) else value
    gear = float(signals["gear"][tick])
    out["gear"] = None if np.isnan(gear) else gear
    return out
