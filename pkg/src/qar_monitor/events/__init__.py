from .eda import (
    Drilldown,
    EventRecord,
    RouteKey,
    WeekdaySplit,
    drilldown,
    event_scatter,
    frequency_tables,
    load_event_log,
    normalize_route,
    weekday_split,
)

__all__ = [
    "Drilldown",
    "EventRecord",
    "RouteKey",
    "WeekdaySplit",
    "drilldown",
    "event_scatter",
    "frequency_tables",
    "load_event_log",
    "normalize_route",
    "weekday_split",
]
