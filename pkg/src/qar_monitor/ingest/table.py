from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence
import json
import logging
import numpy as np
import pandas as pd

from ..enums import ColumnKind
from ..exceptions import ConfigurationError, SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlightTable:
    """
    Time-indexed matrix of named flight parameters at a fixed sample rate.

    Blank cells are NaN until fill_blanks runs. Every operation returns a new
    table; the wrapped frame is never modified in place.
    """
    frame: pd.DataFrame
    sample_rate_hz: float
    flight_id: str
    units: Dict[str, str] = field(default_factory=dict)
    discretes: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ConfigurationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        names = list(self.frame.columns)
        if len(set(names)) != len(names):
            duplicates = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"Duplicate column names: {duplicates}")
        frame = self.frame.astype(np.float64).reset_index(drop=True)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "discretes", frozenset(self.discretes) & frozenset(names))

    @property
    def names(self) -> List[str]:
        return list(self.frame.columns)

    @property
    def length(self) -> int:
        return len(self.frame)

    def __len__(self) -> int:
        return self.length

    def has_column(self, name: str) -> bool:
        return name in self.frame.columns

    def kind(self, name: str) -> ColumnKind:
        return ColumnKind.DISCRETE if name in self.discretes else ColumnKind.CONTINUOUS

    def column(self, name: str) -> np.ndarray:
        """Copy of one column's values."""
        if name not in self.frame.columns:
            raise KeyError(f"Column {name!r} not in flight {self.flight_id}")
        return self.frame[name].to_numpy(dtype=np.float64, copy=True)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        missing = [n for n in names if n not in self.frame.columns]
        if missing:
            raise KeyError(f"Columns {missing} not in flight {self.flight_id}")
        return self.frame[list(names)].to_numpy(dtype=np.float64, copy=True)

    def blank_count(self) -> int:
        return int(self.frame.isna().to_numpy().sum())

    def with_frame(self, frame: pd.DataFrame, units: Optional[Dict[str, str]] = None,
                   discretes: Optional[Iterable[str]] = None) -> "FlightTable":
        return FlightTable(
            frame=frame,
            sample_rate_hz=self.sample_rate_hz,
            flight_id=self.flight_id,
            units=dict(self.units if units is None else units),
            discretes=frozenset(self.discretes if discretes is None else discretes),
        )

    def with_column(self, name: str, values: Sequence[float]) -> "FlightTable":
        """New table with one column replaced (or appended), order kept."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.length,):
            raise ValueError(f"Column {name!r} needs {self.length} values, got shape {values.shape}")
        frame = self.frame.copy()
        frame[name] = values
        return self.with_frame(frame)

    def seconds(self) -> np.ndarray:
        """Elapsed seconds of each row."""
        return np.arange(self.length, dtype=np.float64) / self.sample_rate_hz


@dataclass
class ColumnSchema:
    """
    Which raw columns to keep, drop and merge.

    merge_groups maps a canonical name to its same-name sub-sample columns
    (for example ten G readings per second); merge_rates records the raw
    rate of each group in Hz.
    """
    keep_set: FrozenSet[str] = frozenset()
    drop_set: FrozenSet[str] = frozenset()
    merge_groups: Dict[str, List[str]] = field(default_factory=dict)
    discrete: FrozenSet[str] = frozenset()
    units: Dict[str, str] = field(default_factory=dict)
    merge_rates: Dict[str, float] = field(default_factory=dict)
    sample_rate_hz: Optional[float] = None

    def __post_init__(self):
        self.keep_set = frozenset(self.keep_set)
        self.drop_set = frozenset(self.drop_set)
        self.discrete = frozenset(self.discrete)
        overlap = self.keep_set & self.drop_set
        if overlap:
            raise SchemaError(f"Columns both kept and dropped: {sorted(overlap)}")
        for canonical, members in self.merge_groups.items():
            dropped = set(members) & self.drop_set
            if dropped:
                raise SchemaError(f"Merge group {canonical!r} uses dropped columns {sorted(dropped)}")
        for canonical, rate in self.merge_rates.items():
            if rate <= 0:
                raise SchemaError(f"Merge group {canonical!r} has non-positive rate {rate}")
        if self.sample_rate_hz is not None and self.sample_rate_hz <= 0:
            raise SchemaError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    @classmethod
    def permissive(cls) -> "ColumnSchema":
        """Keep every column, drop and merge nothing."""
        return cls()

    def merge_members(self) -> FrozenSet[str]:
        return frozenset(m for members in self.merge_groups.values() for m in members)

    def check_header(self, header: Sequence[str]) -> None:
        """Raise SchemaError when the raw header cannot satisfy the schema."""
        present = set(header)
        missing_keep = sorted(name for name in self.keep_set
                              if name not in present and name not in self.merge_groups)
        if missing_keep:
            raise SchemaError(f"Header lacks kept columns: {missing_keep}")
        for canonical, members in self.merge_groups.items():
            absent = [m for m in members if m not in present]
            if absent:
                logger.warning(f"Merge group {canonical!r}: members {absent} not in header")

    def selected(self, header: Sequence[str]) -> List[str]:
        """Raw columns surviving the drop/keep rules, header order kept."""
        members = self.merge_members()
        selected = []
        for name in header:
            if name in self.drop_set:
                continue
            if self.keep_set and name not in self.keep_set and name not in members:
                logger.debug(f"Column {name!r} is neither kept nor merged, skipping")
                continue
            selected.append(name)
        return selected


def load_schema(path: Path) -> ColumnSchema:
    """Read a ColumnSchema from its JSON file."""
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read schema {path}: {e}") from e

    unknown = set(raw) - {"keep", "drop", "merge", "discrete", "units", "merge_rates", "sample_rate_hz"}
    if unknown:
        logger.warning(f"Ignoring unknown schema keys: {sorted(unknown)}")
    schema = ColumnSchema(
        keep_set=frozenset(raw.get("keep", [])),
        drop_set=frozenset(raw.get("drop", [])),
        merge_groups={k: list(v) for k, v in raw.get("merge", {}).items()},
        discrete=frozenset(raw.get("discrete", [])),
        units=dict(raw.get("units", {})),
        merge_rates={k: float(v) for k, v in raw.get("merge_rates", {}).items()},
        sample_rate_hz=raw.get("sample_rate_hz"),
    )
    logger.info(f"Loaded schema {path}: keep={len(schema.keep_set)} drop={len(schema.drop_set)} merge={len(schema.merge_groups)}")
    return schema


def dump_schema(schema: ColumnSchema, path: Path) -> None:
    payload = {
        "keep": sorted(schema.keep_set),
        "drop": sorted(schema.drop_set),
        "merge": schema.merge_groups,
        "discrete": sorted(schema.discrete),
        "units": schema.units,
        "merge_rates": schema.merge_rates,
        "sample_rate_hz": schema.sample_rate_hz,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False, sort_keys=True)
