"""
Streaming rule evaluation.

StreamMonitor is a single-writer state machine fed one frame per tick. It
emits live alerts as soon as they are known: altitude-band and whole-flight
rules fire on the first violating tick of a run, landing and takeoff rules
when their window closes. Its consolidated report keeps one alert per
window or run at the extremal tick, the same set the batch engine yields.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import (Any, AsyncIterable, Callable, Deque, Dict, Iterable, Iterator, List, Mapping, Optional,
                    Sequence, Set, TextIO, Tuple, Union)
import asyncio
import csv
import inspect
import logging
import numpy as np

from ..config import WarningConfig
from ..enums import Phase
from ..exceptions import SchemaError, StreamError, StreamFrameError, StreamOrderError
from ..ingest.reader import dedupe_header, parse_token
from ..ingest.table import FlightTable
from .engine import AlertEvent, report_order
from .keypoints import half_width, in_band, metric_arrays, transition_kind
from .rules import ThresholdRule, check_refs

logger = logging.getLogger(__name__)

Frame = Mapping[str, float]
BAND_PHASES = [phase for phase in Phase if phase.band is not None]


class _Segment:
    """Extremal violation per rule over one window or run."""

    def __init__(self, phase: Phase, rule_indices: Sequence[int], monitor: "StreamMonitor"):
        self.phase = phase
        self.rule_indices = list(rule_indices)
        self.monitor = monitor
        self.best: Dict[int, Tuple[int, float]] = {}

    def observe(self, tick: int, metrics: Mapping[str, float]) -> List[int]:
        """Feed one tick; returns the rules violated for the first time in this segment."""
        first = []
        for i in self.rule_indices:
            rule = self.monitor.rules[i]
            value = metrics[rule.metric]
            if not np.isfinite(value) or not rule.comparator.violates(value, self.monitor.thresholds[i]):
                continue
            current = self.best.get(i)
            if current is None:
                first.append(i)
                self.best[i] = (tick, value)
            elif rule.comparator.more_extreme(value, current[1]):
                self.best[i] = (tick, value)
        return first

    def close(self) -> List[AlertEvent]:
        return [self.monitor.alert(i, tick, value) for i, (tick, value) in sorted(self.best.items())]


@dataclass
class _Window:
    segment: _Segment
    end_tick: int


@dataclass
class StreamResult:
    live: List[AlertEvent] = field(default_factory=list)
    report: List[AlertEvent] = field(default_factory=list)
    phases_present: Set[Phase] = field(default_factory=set)
    last_tick: Optional[int] = None
    error: Optional[StreamError] = None

    @property
    def halted(self) -> bool:
        return self.error is not None


class StreamMonitor:
    def __init__(self, rules: Sequence[ThresholdRule], refs: Mapping[str, Optional[float]],
                 config: Optional[WarningConfig] = None, flight_id: str = "stream",
                 sample_rate_hz: float = 1.0):
        self.config = config or WarningConfig()
        check_refs(rules, refs)
        self.rules = list(rules)
        self.thresholds = [rule.resolve(refs) for rule in self.rules]
        self.flight_id = flight_id
        self.sample_rate_hz = sample_rate_hz
        self.h = half_width(sample_rate_hz, self.config.window_seconds)
        self._by_phase: Dict[Phase, List[int]] = {phase: [] for phase in Phase}
        for i, rule in enumerate(self.rules):
            self._by_phase[rule.phase].append(i)

        self._history: Deque[Tuple[int, Dict[str, float]]] = deque(maxlen=self.h + 1)
        self._windows: List[_Window] = []
        self._bands: Dict[Phase, Optional[_Segment]] = {phase: None for phase in BAND_PHASES}
        self._whole: Optional[_Segment] = None
        self._closed: List[AlertEvent] = []
        self.live: List[AlertEvent] = []
        self.phases_present: Set[Phase] = set()
        self.first_tick: Optional[int] = None
        self.last_tick: Optional[int] = None
        self._previous_air: Optional[float] = None
        self._previous_gear: float = np.nan
        self.halted = False
        self.finished = False

    def alert(self, rule_index: int, tick: int, value: float) -> AlertEvent:
        rule = self.rules[rule_index]
        return AlertEvent(rule_id=rule.rule_id, flight_id=self.flight_id, tick=tick, measured=float(value),
                          threshold_resolved=self.thresholds[rule_index], phase=rule.phase,
                          event_name=rule.event_name)

    def _signals(self, frame: Frame) -> Dict[str, float]:
        c = self.config
        missing = [name for name in (c.air_ground_column, c.descent_rate_column, c.ground_speed_column)
                   if name not in frame]
        if missing:
            raise SchemaError(f"Frame lacks columns {missing}")
        if c.radio_altitude_column in frame:
            altitude = float(frame[c.radio_altitude_column])
        elif c.altitude_column in frame:
            altitude = float(frame[c.altitude_column]) - c.field_elevation
        else:
            altitude = np.nan
        optional = lambda name: float(frame[name]) if name in frame else np.nan
        return {
            "air": float(frame[c.air_ground_column]),
            "pitch": optional(c.pitch_column),
            "airspeed": optional(c.airspeed_column),
            "altitude": altitude,
            "descent_rate": float(frame[c.descent_rate_column]),
            "ground_speed": float(frame[c.ground_speed_column]),
            "gear": optional(c.gear_column),
        }

    def push(self, tick: int, frame: Frame) -> List[AlertEvent]:
        """Feed the next frame; returns the live alerts it triggers."""
        if self.finished:
            raise RuntimeError("Monitor already finished")
        expected = None if self.last_tick is None else self.last_tick + 1
        if self.halted or (expected is not None and tick != expected):
            self.halted = True
            raise StreamOrderError(tick, self.last_tick)

        signals = self._signals(frame)
        arrays = {name: np.array([value]) for name, value in signals.items() if name != "air"}
        metrics = {name: float(values[0])
                   for name, values in metric_arrays(arrays, self.config, self._previous_gear).items()}
        if self.first_tick is None:
            self.first_tick = tick
            self._whole = _Segment(Phase.ANY, self._by_phase[Phase.ANY], self)
            self.phases_present.add(Phase.ANY)
        self._history.append((tick, metrics))
        emitted: List[AlertEvent] = []

        for window in self._windows:
            window.segment.observe(tick, metrics)
        if self._previous_air is not None:
            kind = transition_kind(self._previous_air, signals["air"])
            if kind is not None:
                self.phases_present.add(kind)
                segment = _Segment(kind, self._by_phase[kind], self)
                start = max(self.first_tick, tick - self.h)
                for past_tick, past_metrics in self._history:
                    if past_tick >= start:
                        segment.observe(past_tick, past_metrics)
                self._windows.append(_Window(segment=segment, end_tick=tick + self.h))
        still_open = []
        for window in self._windows:
            if window.end_tick == tick:
                alerts = window.segment.close()
                self._closed.extend(alerts)
                emitted.extend(alerts)
            else:
                still_open.append(window)
        self._windows = still_open

        altitude = np.array([metrics["altitude"]])
        descent_rate = np.array([metrics["descent_rate"]])
        for phase in BAND_PHASES:
            segment = self._bands[phase]
            if in_band(phase, altitude, descent_rate)[0]:
                if segment is None:
                    segment = self._bands[phase] = _Segment(phase, self._by_phase[phase], self)
                    self.phases_present.add(phase)
                emitted.extend(self.alert(i, tick, metrics[self.rules[i].metric]) for i in segment.observe(tick, metrics))
            elif segment is not None:
                self._closed.extend(segment.close())
                self._bands[phase] = None

        emitted.extend(self.alert(i, tick, metrics[self.rules[i].metric]) for i in self._whole.observe(tick, metrics))

        self._previous_air = signals["air"]
        self._previous_gear = signals["gear"]
        self.last_tick = tick
        self.live.extend(emitted)
        return emitted

    def finish(self) -> List[AlertEvent]:
        """Close every open window and run; returns the live alerts that closing emits."""
        if self.finished:
            return []
        self.finished = True
        emitted = []
        for window in self._windows:
            alerts = window.segment.close()
            self._closed.extend(alerts)
            emitted.extend(alerts)
        self._windows = []
        for phase, segment in self._bands.items():
            if segment is not None:
                self._closed.extend(segment.close())
                self._bands[phase] = None
        if self._whole is not None:
            self._closed.extend(self._whole.close())
        self.live.extend(emitted)
        return emitted

    def report(self) -> List[AlertEvent]:
        """Consolidated alerts of the closed windows and runs, in batch report order."""
        return sorted(self._closed, key=report_order(self.rules))


def replay_table(table: FlightTable) -> Iterator[Tuple[int, Dict[str, float]]]:
    """(tick, frame) pairs of a filled table, in row order."""
    for tick, row in enumerate(table.frame.to_dict("records")):
        yield tick, row


def _release(pending: List[Tuple[int, Dict[str, float]]], first: Mapping[str, float],
             discretes: Iterable[str]) -> Iterator[Tuple[int, Dict[str, float]]]:
    for tick, frame in pending:
        for name in discretes:
            if np.isnan(frame[name]):
                frame[name] = first.get(name, 0.0)
        yield tick, frame


def iter_csv_frames(handle: TextIO, blank_tokens: Sequence[str] = ("",),
                    discretes: Iterable[str] = ()) -> Iterator[Tuple[int, Dict[str, float]]]:
    """
    (tick, frame) pairs read lazily from a CSV stream, filled the way fill_blanks fills a table.

    Blank continuous cells become 0 and blank discretes carry their last
    observation forward. Frames are held back until every discrete in the
    header has been observed once, so leading blanks take the first observed
    value; a discrete that stays blank to the end becomes 0.

    Raises:
        StreamFrameError: a row whose width differs from the header, after the
            frames before it have been yielded
    """
    reader = csv.reader(handle)
    header = next(reader, None)
    if header is None:
        return
    names = dedupe_header(header)
    wanted = set(discretes)
    carried = {name: np.nan for name in names if name in wanted}
    first: Dict[str, float] = {}
    pending: List[Tuple[int, Dict[str, float]]] = []
    tick = 0
    for index, row in enumerate(reader):
        if not row:
            continue
        if len(row) != len(names):
            yield from _release(pending, first, carried)
            last_good = tick - 1 if tick else None
            raise StreamFrameError(f"row {index}: expected {len(names)} fields, got {len(row)}", tick, last_good)
        frame = {}
        for name, cell in zip(names, row):
            value = parse_token(cell, blank_tokens)
            if name in carried:
                if np.isnan(value):
                    value = carried[name]
                else:
                    carried[name] = value
                    first.setdefault(name, value)
            elif np.isnan(value):
                value = 0.0
            frame[name] = value
        pending.append((tick, frame))
        tick += 1
        if len(first) == len(carried):
            yield from _release(pending, first, carried)
            pending = []
    yield from _release(pending, first, carried)


FrameSource = Union[Iterable[Tuple[int, Frame]], AsyncIterable[Tuple[int, Frame]]]


async def _aiter(frames: FrameSource):
    if hasattr(frames, "__aiter__"):
        async for item in frames:
            yield item
    else:
        for item in frames:
            yield item


async def run_stream(frames: FrameSource, rules: Sequence[ThresholdRule], refs: Mapping[str, Optional[float]],
                     config: Optional[WarningConfig] = None, flight_id: str = "stream",
                     sample_rate_hz: float = 1.0,
                     on_alert: Optional[Callable[[AlertEvent], Any]] = None) -> StreamResult:
    """
    Feed a frame stream through a StreamMonitor.

    An out-of-order tick or a malformed frame halts processing; the report
    then covers the ticks up to the last good one and the error is returned
    in the result.
    """
    monitor = StreamMonitor(rules, refs, config, flight_id=flight_id, sample_rate_hz=sample_rate_hz)
    result = StreamResult()

    async def deliver(alerts: List[AlertEvent]):
        if on_alert is None:
            return
        for alert in alerts:
            outcome = on_alert(alert)
            if inspect.isawaitable(outcome):
                await outcome

    try:
        async for tick, frame in _aiter(frames):
            await deliver(monitor.push(tick, frame))
            await asyncio.sleep(0)
    except StreamError as e:
        logger.error(f"Stream halted: {e}")
        result.error = e
    await deliver(monitor.finish())

    result.live = list(monitor.live)
    result.report = monitor.report()
    result.phases_present = set(monitor.phases_present)
    result.last_tick = monitor.last_tick
    logger.info(f"Stream {flight_id}: {0 if monitor.last_tick is None else monitor.last_tick + 1} ticks, "
                f"{len(result.live)} live alerts, {len(result.report)} in report")
    return result
