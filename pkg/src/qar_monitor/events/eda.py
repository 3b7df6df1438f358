"""
Exceedance-log analytics: frequency tables, weekday split and per-event drilldowns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple, Union
import logging
import pandas as pd

from ..exceptions import InvalidRecordError, SchemaError

logger = logging.getLogger(__name__)

ALERT_LEVELS = (2, 3)
LOG_COLUMNS = ["EVENT_NAME", "ALERT", "ARN", "DEP", "ARR", "DATE"]
TABLE_COLUMNS = ["key", "count", "percent"]


def _airport_order(airport: str) -> Tuple[int, Union[int, str]]:
    """Numeric ids sort numerically and before alphanumeric ones."""
    return (0, int(airport)) if airport.isdigit() else (1, airport)


@dataclass(frozen=True)
class RouteKey:
    lo: str
    hi: str

    @property
    def label(self) -> str:
        return f"{self.lo}-{self.hi}"

    def __str__(self) -> str:
        return self.label


def normalize_route(dep, arr) -> RouteKey:
    """Direction-free route key: (68, 3) and (3, 68) both give 3-68."""
    a, b = str(dep).strip(), str(arr).strip()
    if a == b:
        raise InvalidRecordError(f"Departure and arrival are both {a!r}")
    lo, hi = sorted((a, b), key=_airport_order)
    return RouteKey(lo=lo, hi=hi)


@dataclass(frozen=True)
class EventRecord:
    event_name: str
    alert_level: int
    arn: str
    dep: str
    arr: str
    date: Union[date, str]

    def __post_init__(self):
        for name in ("event_name", "arn", "dep", "arr"):
            object.__setattr__(self, name, str(getattr(self, name)).strip())
        if self.alert_level not in ALERT_LEVELS:
            raise InvalidRecordError(f"Alert level must be one of {ALERT_LEVELS}, got {self.alert_level}")
        if str(self.dep).strip() == str(self.arr).strip():
            raise InvalidRecordError(f"Departure and arrival are both {self.dep!r}")

    @property
    def route(self) -> RouteKey:
        return normalize_route(self.dep, self.arr)

    def parsed_date(self) -> Optional[date]:
        if isinstance(self.date, date):
            return self.date
        stamp = pd.to_datetime(str(self.date).strip(), errors="coerce", format="ISO8601")
        return None if pd.isna(stamp) else stamp.date()


@dataclass(frozen=True)
class WeekdaySplit:
    workday: int
    weekend: int
    ratio: Optional[float]
    rejected: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def shares(self) -> Tuple[Optional[float], Optional[float]]:
        total = self.workday + self.weekend
        if not total:
            return None, None
        return 100.0 * self.workday / total, 100.0 * self.weekend / total


@dataclass
class Drilldown:
    event_name: str
    by_aircraft: pd.DataFrame
    by_dep: pd.DataFrame
    by_arr: pd.DataFrame
    dep_arr_grid: pd.DataFrame
    notice: Optional[str] = None


def count_table(keys: Sequence[Hashable], order: Optional[Callable[[Hashable], object]] = None) -> pd.DataFrame:
    """Counts and percent of total, highest count first, ties by ascending key (or by `order`)."""
    counts = pd.Series(list(keys), dtype=object).value_counts(sort=False)
    rank = order or (lambda key: key)
    rows = sorted(counts.items(), key=lambda item: (-item[1], rank(item[0])))
    frame = pd.DataFrame(rows, columns=["key", "count"])
    frame["count"] = frame["count"].astype("int64")
    total = int(frame["count"].sum())
    frame["percent"] = (100.0 * frame["count"] / total) if total else frame["count"].astype("float64")
    return frame[TABLE_COLUMNS]


def _route_order(label: str):
    lo, hi = label.split("-", 1)
    return _airport_order(lo), _airport_order(hi)


def frequency_tables(records: Sequence[EventRecord]) -> Dict[str, pd.DataFrame]:
    """by_event, by_aircraft, by_route, by_alert_level and by_month (parseable dates only)."""
    months = [d.month for d in (r.parsed_date() for r in records) if d is not None]
    return {
        "by_event": count_table([r.event_name for r in records]),
        "by_aircraft": count_table([r.arn for r in records]),
        "by_route": count_table([r.route.label for r in records], order=_route_order),
        "by_alert_level": count_table([r.alert_level for r in records]),
        "by_month": count_table(months),
    }


def weekday_split(records: Sequence[EventRecord]) -> WeekdaySplit:
    """Monday to Friday against Saturday and Sunday; unparseable dates are rejected, not counted."""
    workday = weekend = 0
    rejected = []
    for i, record in enumerate(records):
        day = record.parsed_date()
        if day is None:
            rejected.append((i, str(record.date)))
            continue
        if day.weekday() < 5:
            workday += 1
        else:
            weekend += 1
    if rejected:
        logger.warning(f"{len(rejected)} records with unparseable dates left out of the weekday split")
    return WeekdaySplit(workday=workday, weekend=weekend,
                        ratio=workday / weekend if weekend else None, rejected=rejected)


def drilldown(records: Sequence[EventRecord], event_name: str) -> Drilldown:
    """Aircraft, departure and arrival counts for one event plus a DEP x ARR occurrence grid."""
    chosen = [r for r in records if r.event_name == event_name]
    notice = None
    if not chosen:
        notice = f"No records for event {event_name!r}"
        logger.warning(notice)
    deps = sorted({r.dep for r in chosen}, key=_airport_order)
    arrs = sorted({r.arr for r in chosen}, key=_airport_order)
    grid = pd.DataFrame(0, index=pd.Index(deps, name="DEP"), columns=pd.Index(arrs, name="ARR"), dtype="int64")
    for r in chosen:
        grid.loc[r.dep, r.arr] += 1
    return Drilldown(
        event_name=event_name,
        by_aircraft=count_table([r.arn for r in chosen]),
        by_dep=count_table([r.dep for r in chosen], order=_airport_order),
        by_arr=count_table([r.arr for r in chosen], order=_airport_order),
        dep_arr_grid=grid,
        notice=notice,
    )


def event_scatter(records: Sequence[EventRecord]) -> pd.DataFrame:
    """(aircraft, route, event) triples with stable integer codes from sorted keys."""
    arns = sorted({r.arn for r in records})
    routes = sorted({r.route for r in records}, key=lambda k: (_airport_order(k.lo), _airport_order(k.hi)))
    events = sorted({r.event_name for r in records})
    arn_code = {k: i for i, k in enumerate(arns)}
    route_code = {k: i for i, k in enumerate(routes)}
    event_code = {k: i for i, k in enumerate(events)}
    return pd.DataFrame({
        "arn": [r.arn for r in records],
        "route": [r.route.label for r in records],
        "event_name": [r.event_name for r in records],
        "arn_code": [arn_code[r.arn] for r in records],
        "route_code": [route_code[r.route] for r in records],
        "event_code": [event_code[r.event_name] for r in records],
    }, columns=["arn", "route", "event_name", "arn_code", "route_code", "event_code"])


def records_from_frame(frame: pd.DataFrame) -> Tuple[List[EventRecord], List[Tuple[int, str]]]:
    missing = [c for c in LOG_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"Event log lacks columns {missing}")
    records, rejected = [], []
    for i, row in enumerate(frame[LOG_COLUMNS].itertuples(index=False)):
        try:
            level = int(float(str(row.ALERT).strip()))
            records.append(EventRecord(event_name=str(row.EVENT_NAME).strip(), alert_level=level,
                                       arn=str(row.ARN).strip(), dep=str(row.DEP).strip(),
                                       arr=str(row.ARR).strip(), date=str(row.DATE).strip()))
        except (ValueError, InvalidRecordError) as e:
            rejected.append((i, str(e)))
    if rejected:
        logger.warning(f"Rejected {len(rejected)} of {len(frame)} event records")
    return records, rejected


def load_event_log(path: Path) -> Tuple[List[EventRecord], List[Tuple[int, str]]]:
    """Read an event-log CSV; invalid rows come back in the rejection list with their reason."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    records, rejected = records_from_frame(frame)
    logger.info(f"Loaded {len(records)} event records from {path}")
    return records, rejected


def summarize(records: Sequence[EventRecord], tables: Dict[str, pd.DataFrame], split: WeekdaySplit) -> Dict:
    top = tables["by_event"].head(1)
    workday_share, weekend_share = split.shares
    return {
        "records": len(records),
        "events": int(len(tables["by_event"])),
        "aircraft": int(len(tables["by_aircraft"])),
        "routes": int(len(tables["by_route"])),
        "top_event": None if top.empty else str(top["key"].iloc[0]),
        "top_event_percent": None if top.empty else float(top["percent"].iloc[0]),
        "workday": split.workday,
        "weekend": split.weekend,
        "workday_weekend_ratio": split.ratio,
        "workday_percent": workday_share,
        "weekend_percent": weekend_share,
        "rejected_dates": len(split.rejected),
    }
