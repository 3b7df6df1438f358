"""
Synthetic flight, exceedance-log and skill datasets.

Each flight is a 1 Hz, 600-tick pattern: ground roll, takeoff at tick 30,
climb to 3000 ft until tick 200, cruise, descent from tick 300 and
touchdown at tick 560. The gear comes up near 100 ft (350 ft on a late
retraction) and the approach is flown at Vref + 5 (Vref + 20 on an
excess-speed flight). Raw exports add ten G sub-samples per second,
status columns the schema drops, scattered blanks and planted spikes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import List, Optional
import csv
import json
import logging
import numpy as np
import pandas as pd

from .config import CONTROL_COLUMNS, derive_seed
from .enums import SKILL_LABELS
from .ingest.table import ColumnSchema, FlightTable, dump_schema
from .warning.rules import default_rules, dump_rules

logger = logging.getLogger(__name__)

FLIGHT_TICKS = 600
TAKEOFF_TICK = 30
CLIMB_END_TICK = 200
DESCENT_START_TICK = 300
TOUCHDOWN_TICK = 560
CRUISE_ALTITUDE = 3000.0
FIELD_ELEVATION = 100.0
G_SUBSAMPLES = 10
SPIKE_EVERY = 100

G_COLUMN = "COG NORM ACCEL"
DISCRETE_COLUMNS = ["AIR GROUND", "GEAR DOWN"]
DROP_COLUMNS = ["DATE", "TIME", "FLIGHT PHASE"]
UNITS = {
    "COG NORM ACCEL": "g", "PITCH ATT": "deg", "ROLL ATT": "deg", "RUDD POSN": "deg",
    "COMPUTED AIR SPD": "kt", "GROUNDSPEED": "kt", "ALTITUDE": "ft", "RADIO ALT": "ft",
    "DESCENT RATE": "ft/min", "CAP CLM 1 POSN": "deg", "CAP WHL 1 POSN": "deg", "TRA-L": "deg", "TRA-R": "deg",
}
EVENT_NAMES = [
    ("着陆速度大", 30), ("下降率大 500-50(含)Ft", 22), ("着陆俯仰角大", 14), ("收起落架晚", 9),
    ("离地俯仰角大", 8), ("爬升速度小35-1000ft", 6), ("Go Around", 5), ("GPWS Warning", 3),
    ("TCAS RA", 2), ("抬头速率小", 1),
]


@dataclass(frozen=True)
class FlightPlan:
    flight_id: str
    vref: float
    v2: float
    excess_landing_speed: bool = False
    late_gear: bool = False


@dataclass
class SynthManifest:
    flights: List[Path] = field(default_factory=list)
    schema: Optional[Path] = None
    rules: Optional[Path] = None
    refs: Optional[Path] = None
    events: Optional[Path] = None
    skill: Optional[Path] = None


def fleet_plan(n_flights: int) -> List[FlightPlan]:
    """Flight 1 lands fast, flights 2 and 3 retract the gear late, the rest are nominal."""
    return [
        FlightPlan(flight_id=f"flight_{i + 1:03d}", vref=135.0 + (i % 4) * 2.0, v2=145.0 + (i % 4) * 2.0,
                   excess_landing_speed=(i == 0), late_gear=(i in (1, 2)))
        for i in range(n_flights)
    ]


def _altitude_profile(ticks: np.ndarray) -> np.ndarray:
    alt = np.zeros(ticks.size)
    climb = (ticks >= TAKEOFF_TICK) & (ticks < CLIMB_END_TICK)
    alt[climb] = CRUISE_ALTITUDE * (ticks[climb] - TAKEOFF_TICK) / (CLIMB_END_TICK - TAKEOFF_TICK)
    alt[(ticks >= CLIMB_END_TICK) & (ticks < DESCENT_START_TICK)] = CRUISE_ALTITUDE
    descent = (ticks >= DESCENT_START_TICK) & (ticks < TOUCHDOWN_TICK)
    alt[descent] = CRUISE_ALTITUDE * (TOUCHDOWN_TICK - ticks[descent]) / (TOUCHDOWN_TICK - DESCENT_START_TICK)
    return alt


def _airspeed_profile(ticks: np.ndarray, plan: FlightPlan) -> np.ndarray:
    approach = plan.vref + (20.0 if plan.excess_landing_speed else 5.0)
    knots = [0, TAKEOFF_TICK, 120, CLIMB_END_TICK, DESCENT_START_TICK, 500, TOUCHDOWN_TICK, FLIGHT_TICKS - 1]
    speeds = [0.0, plan.v2, plan.v2 + 10.0, 250.0, 250.0, approach, approach, 40.0]
    return np.interp(ticks, knots, speeds)


def _pitch_profile(ticks: np.ndarray) -> np.ndarray:
    knots = [0, 25, 32, CLIMB_END_TICK - 1, CLIMB_END_TICK, 554, TOUCHDOWN_TICK, 566, FLIGHT_TICKS - 1]
    pitch = [1.5, 1.5, 8.0, 8.0, 2.5, 2.5, 5.0, 1.5, 1.5]
    return np.interp(ticks, knots, pitch)


def synthetic_flight(plan: FlightPlan, seed: int = 0) -> FlightTable:
    """Canonical 1 Hz flight (merged G, no blanks or spikes)."""
    rng = np.random.default_rng(seed)
    ticks = np.arange(FLIGHT_TICKS)
    alt = _altitude_profile(ticks)
    airborne = (ticks >= TAKEOFF_TICK) & (ticks < TOUCHDOWN_TICK)
    radio = np.clip(alt + np.where(airborne, rng.normal(0.0, 2.0, ticks.size), 0.0), 0.0, None)
    descent_rate = -np.gradient(alt) * 60.0 + np.where(airborne, rng.normal(0.0, 20.0, ticks.size), 0.0)
    airspeed = _airspeed_profile(ticks, plan) + rng.normal(0.0, 0.5, ticks.size)
    airspeed = np.clip(airspeed, 0.0, None)
    pitch = _pitch_profile(ticks) + rng.normal(0.0, 0.05, ticks.size)

    gear = np.ones(ticks.size)
    retract_at = 350.0 if plan.late_gear else 100.0
    up = np.flatnonzero((ticks > TAKEOFF_TICK) & (radio >= retract_at))[0]
    extend = np.flatnonzero((ticks > DESCENT_START_TICK) & (alt < 1500.0))[0]
    gear[up:extend] = 0.0

    g = 1.0 + rng.normal(0.0, 0.02, ticks.size)
    g[TOUCHDOWN_TICK:TOUCHDOWN_TICK + 2] += 0.25
    dg = np.concatenate([[0.0], np.diff(g)])
    dpitch = np.concatenate([[0.0], np.diff(pitch)])
    column = 2.0 + 0.8 * pitch + 3.0 * dpitch + rng.normal(0.0, 0.05, ticks.size)
    wheel = 1.5 + 5.0 * (g - 1.0) + 0.2 * pitch + 2.0 * dg + rng.normal(0.0, 0.05, ticks.size)
    tra_l = 40.0 + 4.0 * pitch + 10.0 * dpitch + rng.normal(0.0, 0.3, ticks.size)
    tra_r = tra_l + rng.normal(0.0, 0.3, ticks.size)

    frame = pd.DataFrame({
        "AIR GROUND": airborne.astype(np.float64),
        "PITCH ATT": pitch,
        "ROLL ATT": 0.5 + rng.normal(0.0, 1.0, ticks.size),
        "RUDD POSN": 1.0 + rng.normal(0.0, 1.2, ticks.size),
        "COMPUTED AIR SPD": airspeed,
        "GROUNDSPEED": np.where(airborne, airspeed + 5.0, airspeed),
        "ALTITUDE": alt + FIELD_ELEVATION,
        "RADIO ALT": radio,
        "DESCENT RATE": descent_rate,
        "GEAR DOWN": gear,
        G_COLUMN: g,
        CONTROL_COLUMNS[0]: column,
        CONTROL_COLUMNS[1]: wheel,
        CONTROL_COLUMNS[2]: tra_l,
        CONTROL_COLUMNS[3]: tra_r,
    })
    return FlightTable(frame=frame, sample_rate_hz=1.0, flight_id=plan.flight_id, units=dict(UNITS),
                       discretes=frozenset(DISCRETE_COLUMNS))


def synth_schema() -> ColumnSchema:
    members = [G_COLUMN] + [f"{G_COLUMN}.{k}" for k in range(1, G_SUBSAMPLES)]
    return ColumnSchema(drop_set=frozenset(DROP_COLUMNS), merge_groups={G_COLUMN: members},
                        discrete=frozenset(DISCRETE_COLUMNS), units=dict(UNITS),
                        merge_rates={G_COLUMN: float(G_SUBSAMPLES)}, sample_rate_hz=1.0)


def _cell(name: str, value: float) -> str:
    if name == "AIR GROUND":
        return "AIR" if value >= 0.5 else "GROUND"
    if name == "GEAR DOWN":
        return "DOWN" if value >= 0.5 else "UP"
    return repr(float(value))


def write_raw_flight(table: FlightTable, path: Path, rng: np.random.Generator, day: date) -> Path:
    """Raw export: repeated G header for the sub-samples, drop-set status columns, blanks, spikes."""
    names = [n for n in table.names if n != G_COLUMN]
    header = DROP_COLUMNS + names + [G_COLUMN] * G_SUBSAMPLES
    g = table.column(G_COLUMN)
    roll = table.column("ROLL ATT")
    spikes = np.arange(SPIKE_EVERY // 2, table.length, SPIKE_EVERY)
    roll[spikes] += np.where(np.arange(spikes.size) % 2 == 0, 1.0, -1.0) * rng.uniform(20.0, 40.0, spikes.size)
    blank_names = {"ROLL ATT", "RUDD POSN"}

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for tick in range(table.length):
            phase = "GND" if table.frame["AIR GROUND"].iat[tick] < 0.5 else "AIR"
            row = [day.isoformat(), f"{tick // 3600:02d}:{tick // 60 % 60:02d}:{tick % 60:02d}", phase]
            for name in names:
                value = roll[tick] if name == "ROLL ATT" else table.frame[name].iat[tick]
                blank = name in blank_names and tick not in spikes and rng.random() < 0.01
                row.append("" if blank else _cell(name, value))
            subsamples = g[tick] + rng.normal(0.0, 0.01, G_SUBSAMPLES)
            row.extend("" if rng.random() < 0.01 else repr(float(v)) for v in subsamples)
            writer.writerow(row)
    return path


def event_log(n_records: int, rng: np.random.Generator) -> pd.DataFrame:
    names, weights = zip(*EVENT_NAMES)
    p = np.asarray(weights, dtype=np.float64) / sum(weights)
    airports = [3, 7, 12, 25, 41, 68]
    start = date(2015, 1, 1)
    rows = []
    for _ in range(n_records):
        dep = 68 if rng.random() < 0.5 else int(rng.choice(airports[:-1]))
        arr = int(rng.choice([a for a in airports if a != dep]))
        rows.append({
            "EVENT_NAME": names[int(rng.choice(len(names), p=p))],
            "ALERT": int(rng.choice([2, 3], p=[0.7, 0.3])),
            "ARN": f"B-{5100 + int(rng.integers(0, 20))}",
            "DEP": dep,
            "ARR": arr,
            "DATE": (start + timedelta(days=int(rng.integers(0, 365)))).isoformat(),
        })
    rows.append({"EVENT_NAME": "着陆速度大", "ALERT": 2, "ARN": "B-5100", "DEP": 3, "ARR": 68, "DATE": "2015-13-45"})
    return pd.DataFrame(rows, columns=["EVENT_NAME", "ALERT", "ARN", "DEP", "ARR", "DATE"])


def skill_table(n_rows: int, rng: np.random.Generator) -> pd.DataFrame:
    """Per-flight ratings driven by touchdown G, approach speed deviation and flare length."""
    pilot = rng.integers(1, 5, n_rows)
    bias = np.array([0.0, -0.3, 0.2, 0.4])[pilot - 1]
    touchdown_g = 1.2 + np.abs(rng.normal(0.0, 0.12, n_rows))
    speed_dev = rng.normal(5.0, 4.0, n_rows)
    flare = rng.normal(6.0, 1.5, n_rows)
    score = 3.0 * (touchdown_g - 1.2) / 0.12 + 0.25 * np.abs(speed_dev - 5.0) - 0.3 * (flare - 6.0) + bias
    cuts = np.quantile(score, [0.15, 0.3, 0.55, 0.75, 0.9])
    labels = [SKILL_LABELS[k] for k in np.searchsorted(cuts, score)]
    return pd.DataFrame({
        "flight_id": [f"F{i:04d}" for i in range(n_rows)],
        "DATE": [(date(2015, 1, 1) + timedelta(days=int(d))).isoformat() for d in rng.integers(0, 365, n_rows)],
        "pilot": pilot,
        "rating": labels,
        "TOUCHDOWN G": touchdown_g,
        "APPROACH SPD DEV": speed_dev,
        "FLARE SECONDS": flare,
        "MAX PITCH": 5.0 + rng.normal(0.0, 0.5, n_rows),
        "AUTOBRAKE": np.where(rng.random(n_rows) < 0.95, "OFF", "ON"),
        "AIRCRAFT TYPE": "B737-700",
        "FLAP SETTING": rng.choice(["30", "40"], n_rows),
        "REMARK": [""] * n_rows,
    })


def write_synthetic_dataset(output_dir: Path, n_flights: int = 8, seed: int = 20140407,
                            n_events: int = 600, n_skill_rows: int = 240) -> SynthManifest:
    """Write flights, schema, rules, reference speeds, event log and skill table under output_dir."""
    output_dir = Path(output_dir)
    root = np.random.SeedSequence(derive_seed(seed, "synth"))
    flight_seq, raw_seq, event_seq, skill_seq = root.spawn(4)
    manifest = SynthManifest()

    plans = fleet_plan(n_flights)
    raw_rng = np.random.default_rng(raw_seq)
    for plan, child in zip(plans, flight_seq.spawn(len(plans))):
        table = synthetic_flight(plan, seed=int(child.generate_state(1)[0]))
        day = date(2015, 6, 1) + timedelta(days=len(manifest.flights))
        manifest.flights.append(write_raw_flight(table, output_dir / "flights" / f"{plan.flight_id}.csv", raw_rng, day))

    manifest.schema = output_dir / "schema.json"
    dump_schema(synth_schema(), manifest.schema)
    manifest.rules = dump_rules(default_rules(), output_dir / "rules.json")
    manifest.refs = output_dir / "refs.json"
    with open(manifest.refs, "w", encoding="utf-8") as f:
        json.dump({p.flight_id: {"Vref": p.vref, "V2": p.v2} for p in plans}, f, indent=2, sort_keys=True)

    manifest.events = output_dir / "events.csv"
    event_log(n_events, np.random.default_rng(event_seq)).to_csv(manifest.events, index=False, encoding="utf-8")
    manifest.skill = output_dir / "skill.csv"
    skill_table(n_skill_rows, np.random.default_rng(skill_seq)).to_csv(manifest.skill, index=False, encoding="utf-8")
    logger.info(f"Wrote {len(plans)} flights, {n_events} events and {n_skill_rows} skill rows to {output_dir}")
    return manifest
