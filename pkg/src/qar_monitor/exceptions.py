from typing import Any, Dict, Optional


class QarMonitorError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigurationError(QarMonitorError, ValueError):
    """Invalid schema, rule set or run configuration."""


class SchemaError(ConfigurationError):
    """Raw header does not match the column schema."""


class FlightParseError(QarMonitorError, ValueError):
    """Malformed flight CSV."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class InsufficientDataError(QarMonitorError, ValueError):
    """Too few samples for the requested statistic."""


class DimensionError(QarMonitorError, ValueError):
    """Input width does not match the model or layout."""


class RepairError(QarMonitorError):
    """Outlier repair cannot produce a clean mean."""


class TrainingDivergedError(QarMonitorError):
    """A training update produced non-finite parameters."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(f"{message} ({self.diagnostics})" if self.diagnostics else message)


class InvalidRecordError(QarMonitorError, ValueError):
    """Exceedance log record violates its invariants."""


class StreamError(QarMonitorError):
    """A frame stream cannot be evaluated past its last good tick."""

    def __init__(self, message: str, tick: int, last_good_tick: Optional[int]):
        self.tick = tick
        self.last_good_tick = last_good_tick
        super().__init__(message)


class StreamOrderError(StreamError):
    """A frame arrived out of tick order."""

    def __init__(self, tick: int, last_good_tick: Optional[int]):
        super().__init__(f"Frame tick {tick} is not after last good tick {last_good_tick}", tick, last_good_tick)


class StreamFrameError(StreamError):
    """A streamed row does not fit the header."""
