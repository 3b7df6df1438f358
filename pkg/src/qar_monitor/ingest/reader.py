from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence
import csv
import json
import logging
import numpy as np
import pandas as pd

from ..config import IngestConfig
from ..exceptions import ConfigurationError, FlightParseError, SchemaError
from .table import ColumnSchema, FlightTable

logger = logging.getLogger(__name__)

TRUE_TOKENS = frozenset({"TRUE", "ON", "AIR", "DOWN", "YES"})
FALSE_TOKENS = frozenset({"FALSE", "OFF", "GROUND", "UP", "NO"})


def dedupe_header(header: Sequence[str]) -> List[str]:
    """Repeated names become NAME, NAME.1, NAME.2 ... (same-name sub-samples)."""
    seen: Dict[str, int] = {}
    names = []
    for raw in header:
        name = raw.strip()
        if name in seen:
            seen[name] += 1
            names.append(f"{name}.{seen[name]}")
        else:
            seen[name] = 0
            names.append(name)
    return names


def _parse_cells(cells: pd.Series, blank_tokens: Sequence[str]) -> pd.Series:
    """Numeric cells pass through, discrete tokens map to 1/0, everything else is blank."""
    tokens = cells.astype(str).str.strip()
    upper = tokens.str.upper()
    values = pd.to_numeric(tokens, errors="coerce").astype(np.float64)
    values = values.mask(upper.isin(TRUE_TOKENS), 1.0).mask(upper.isin(FALSE_TOKENS), 0.0)
    values = values.mask(tokens.isin(list(blank_tokens)))
    return values.where(np.isfinite(values))


def parse_token(cell, blank_tokens: Sequence[str] = ("",)) -> float:
    """Single-cell version of the column parser; blank or unparseable cells are NaN."""
    token = str(cell).strip()
    upper = token.upper()
    if token in blank_tokens:
        return float("nan")
    if upper in TRUE_TOKENS:
        return 1.0
    if upper in FALSE_TOKENS:
        return 0.0
    try:
        value = float(token)
    except ValueError:
        return float("nan")
    return value if np.isfinite(value) else float("nan")


def read_sidecar(path: Path) -> Dict:
    sidecar = path.with_suffix(".meta.json")
    if not sidecar.exists():
        return {}
    with open(sidecar, encoding="utf-8") as f:
        return json.load(f)


def parse_flight_csv(path: Path, schema: Optional[ColumnSchema] = None,
                     config: Optional[IngestConfig] = None,
                     flight_id: Optional[str] = None) -> FlightTable:
    """
    Parse a raw QAR CSV export into a FlightTable.

    Args:
        path: UTF-8 CSV with a header row, one row per sample tick
        schema: keep/drop/merge rules; permissive when omitted
        config: blank tokens and fallback sample rate
        flight_id: defaults to the file stem

    Returns:
        FlightTable with drop-set columns removed and unparseable cells blank (NaN)
    """
    path = Path(path)
    schema = schema or ColumnSchema.permissive()
    config = config or IngestConfig()
    if not path.exists():
        raise FileNotFoundError(f"Flight file not found: {path}")

    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise FlightParseError(f"{path} has no header row", row=None)
        header = dedupe_header(header)
        rows = []
        for index, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise FlightParseError(f"expected {len(header)} fields, got {len(row)} in {path}", row=index)
            rows.append(row)

    schema.check_header(header)
    selected = schema.selected(header)
    raw = pd.DataFrame(rows, columns=header, dtype=str) if rows else pd.DataFrame(columns=header, dtype=str)
    frame = pd.DataFrame({name: _parse_cells(raw[name], config.blank_tokens) for name in selected},
                         columns=selected)

    sidecar = read_sidecar(path)
    rate = schema.sample_rate_hz or sidecar.get("sample_rate_hz") or config.default_sample_rate_hz
    units = {**sidecar.get("units", {}), **schema.units}
    discretes = set(schema.discrete) | set(sidecar.get("discretes", []))
    table = FlightTable(
        frame=frame,
        sample_rate_hz=float(rate),
        flight_id=flight_id or sidecar.get("flight_id") or path.stem,
        units={k: v for k, v in units.items() if k in selected or k in schema.merge_groups},
        discretes=frozenset(discretes),
    )
    dropped = [name for name in header if name not in selected]
    logger.info(f"Parsed {path.name}: {table.length} rows, {len(selected)} columns, "
                f"{len(dropped)} dropped, {table.blank_count()} blank cells")
    return table


def fill_blanks(table: FlightTable) -> FlightTable:
    """
    Zero-fill blank continuous cells; discretes carry the last observation forward.

    Leading blanks of a discrete take its first observed value; an all-blank
    discrete becomes 0.
    """
    frame = table.frame.copy()
    for name in frame.columns:
        if name in table.discretes:
            frame[name] = frame[name].ffill().bfill().fillna(0.0)
        else:
            frame[name] = frame[name].fillna(0.0)
    filled = table.blank_count()
    if filled:
        logger.debug(f"Filled {filled} blank cells in flight {table.flight_id}")
    return table.with_frame(frame)


def merge_subsamples(table: FlightTable, schema: ColumnSchema) -> FlightTable:
    """
    Replace each merge group with one column holding the row-wise mean of its members.

    The merged column takes the position of the group's first present member.
    Blank member cells are skipped; a row with every member blank stays blank.
    """
    owner: Dict[str, str] = {}
    present: Dict[str, List[str]] = {}
    for canonical, members in schema.merge_groups.items():
        found = [m for m in members if m in table.frame.columns]
        if not found:
            raise ConfigurationError(f"Merge group {canonical!r} has no member present in flight {table.flight_id}")
        for member in found:
            if member in owner:
                raise ConfigurationError(f"Column {member!r} belongs to merge groups {owner[member]!r} and {canonical!r}")
            owner[member] = canonical
        if canonical in table.frame.columns and canonical not in found:
            raise SchemaError(f"Merged name {canonical!r} collides with an existing column")
        present[canonical] = found

    columns: Dict[str, pd.Series] = {}
    units = {k: v for k, v in table.units.items() if k not in owner}
    discretes = {d for d in table.discretes if d not in owner}
    for name in table.frame.columns:
        canonical = owner.get(name)
        if canonical is None:
            columns[name] = table.frame[name]
            continue
        if canonical in columns:
            continue
        members = table.frame[present[canonical]]
        mean = members.mean(axis=1, skipna=True)
        lo, hi = members.min(axis=1), members.max(axis=1)
        # identical members must reproduce the member value exactly
        columns[canonical] = mean.where(lo != hi, lo)
        unit = schema.units.get(canonical) or table.units.get(present[canonical][0])
        if unit:
            units[canonical] = unit
        if all(m in table.discretes for m in present[canonical]):
            discretes.add(canonical)
        rate = schema.merge_rates.get(canonical)
        logger.debug(f"Merged {len(present[canonical])} columns into {canonical!r}"
                     + (f" ({rate:g} Hz raw)" if rate else ""))

    frame = pd.DataFrame(columns, columns=list(columns))
    return table.with_frame(frame, units=units, discretes=discretes)


def write_flight_csv(table: FlightTable, path: Path) -> Path:
    """Write the canonical CSV plus a .meta.json sidecar with rate, units and discretes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.frame.to_csv(path, index=False)
    meta = {
        "flight_id": table.flight_id,
        "sample_rate_hz": table.sample_rate_hz,
        "units": table.units,
        "discretes": sorted(table.discretes),
    }
    with open(path.with_suffix(".meta.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, ensure_ascii=False, sort_keys=True)
    logger.info(f"Wrote flight {table.flight_id} to {path}")
    return path


def load_flight(path: Path, schema: Optional[ColumnSchema] = None,
                config: Optional[IngestConfig] = None) -> FlightTable:
    """parse, merge and fill in the order the preprocessing pipeline runs them"""
    schema = schema or ColumnSchema.permissive()
    table = parse_flight_csv(path, schema, config)
    if schema.merge_groups:
        table = merge_subsamples(table, schema)
    return fill_blanks(table)
