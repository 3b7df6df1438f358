from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union
import json
import logging
import re
from pydantic import BaseModel, Field, TypeAdapter, field_validator

from ..enums import Comparator, Phase
from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

METRICS = (
    "pitch",
    "airspeed",
    "altitude",
    "descent_rate",
    "ground_speed",
    "climb_speed_proxy",
    "climb_gradient",
    "gear_retraction_altitude",
)
REFERENCE_SPEEDS = ("Vref", "V2")
SYMBOLIC = re.compile(r"^\s*(Vref|V2)\s*([+-])\s*(\d+(?:\.\d+)?)\s*$")


class ThresholdRule(BaseModel):
    """One exceedance rule: metric compared to a fixed or reference-relative threshold in a phase."""
    rule_id: str = Field(..., description="Stable identifier")
    event_name: str = Field(..., description="Exceedance name as reported")
    phase: Phase = Field(..., description="Ticks the rule is evaluated on")
    metric: str = Field(..., description="Derived metric name")
    comparator: Comparator = Field(..., description="Inclusive comparator")
    threshold: Union[float, str] = Field(..., description="Number, or Vref/V2 plus or minus an offset")
    units: str = Field("", description="Units of the metric")
    critical: bool = Field(False, description="Counts toward a nonzero monitor exit")

    @field_validator("comparator", mode="before")
    def parse_comparator(cls, v):
        return v if isinstance(v, Comparator) else Comparator.parse(v)

    @field_validator("metric")
    def known_metric(cls, v):
        if v not in METRICS:
            raise ValueError(f"Unknown metric {v!r}, expected one of {', '.join(METRICS)}")
        return v

    @field_validator("threshold")
    def well_formed_threshold(cls, v):
        if isinstance(v, str):
            try:
                return float(v)
            except ValueError:
                if not SYMBOLIC.match(v):
                    raise ValueError(f"Threshold {v!r} is neither a number nor Vref/V2 +/- offset")
                return v.replace(" ", "")
        return float(v)

    @property
    def is_symbolic(self) -> bool:
        return isinstance(self.threshold, str)

    @property
    def reference(self) -> Optional[str]:
        return SYMBOLIC.match(self.threshold).group(1) if self.is_symbolic else None

    def resolve(self, refs: Mapping[str, Optional[float]]) -> float:
        """Numeric threshold, with the reference speed substituted when symbolic."""
        if not self.is_symbolic:
            return float(self.threshold)
        name, sign, offset = SYMBOLIC.match(self.threshold).groups()
        base = refs.get(name)
        if base is None:
            raise ConfigurationError(f"Rule {self.rule_id} needs {name}, which is not configured")
        return float(base) + float(offset) if sign == "+" else float(base) - float(offset)


def check_refs(rules: Sequence[ThresholdRule], refs: Mapping[str, Optional[float]]) -> None:
    """Raise listing every symbolic rule whose reference speed is missing."""
    unresolved = [f"{r.rule_id} ({r.threshold})" for r in rules if r.is_symbolic and refs.get(r.reference) is None]
    if unresolved:
        raise ConfigurationError(f"Symbolic thresholds without reference speeds: {', '.join(unresolved)}")


def default_rules() -> List[ThresholdRule]:
    """The computable exceedance rules, in report row order."""
    rows = [
        ("landing_pitch_high", "着陆俯仰角大", Phase.LANDING, "pitch", "≥", 8.6, "deg"),
        ("landing_pitch_low", "着陆俯仰角小", Phase.LANDING, "pitch", "≤", 1.0, "deg"),
        ("liftoff_pitch_high", "离地俯仰角大", Phase.TAKEOFF, "pitch", "≥", 10.7, "deg"),
        ("landing_speed_high", "着陆速度大", Phase.LANDING, "airspeed", "≥", "Vref+15", "kt"),
        ("descent_rate_2000_1000", "下降率大 2000-1000(含)Ft", Phase.DESCENT_2000_1000, "descent_rate", "≥", 1500.0, "ft/min"),
        ("descent_rate_1000_500", "下降率大 1000-500(含)Ft", Phase.DESCENT_1000_500, "descent_rate", "≥", 1300.0, "ft/min"),
        ("descent_rate_500_50", "下降率大 500-50(含)Ft", Phase.DESCENT_500_50, "descent_rate", "≥", 1100.0, "ft/min"),
        ("gear_retraction_late", "收起落架晚", Phase.ANY, "gear_retraction_altitude", "≥", 300.0, "ft"),
        ("climb_speed_high", "爬升速度大 35-1000Ft", Phase.CLIMB_35_1000, "climb_speed_proxy", "≥", "V2+30", ""),
        ("climb_speed_low", "爬升速度小 35-1000Ft", Phase.CLIMB_35_1000, "climb_speed_proxy", "≤", "V2+15", ""),
        ("climb_gradient_35_150", "爬升坡度大 35-150Ft", Phase.CLIMB_35_150, "climb_gradient", "≥", 10.0, "%"),
        ("climb_gradient_150_400", "爬升坡度大 150-400Ft", Phase.CLIMB_150_400, "climb_gradient", "≥", 15.0, "%"),
    ]
    return [ThresholdRule(rule_id=rid, event_name=name, phase=phase, metric=metric,
                          comparator=cmp, threshold=threshold, units=units)
            for rid, name, phase, metric, cmp, threshold, units in rows]


_RULES_ADAPTER = TypeAdapter(List[ThresholdRule])


def load_rules(path: Path) -> List[ThresholdRule]:
    """Read a JSON array of rules; rule ids must be unique."""
    try:
        with open(path, encoding="utf-8") as f:
            rules = _RULES_ADAPTER.validate_python(json.load(f))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read rules {path}: {e}") from e
    ids = [r.rule_id for r in rules]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise ConfigurationError(f"Duplicate rule ids: {duplicates}")
    logger.info(f"Loaded {len(rules)} rules from {path}")
    return rules


def dump_rules(rules: Sequence[ThresholdRule], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump([r.model_dump(mode="json") for r in rules], f, indent=2, ensure_ascii=False)
    return path


def load_refs(path: Optional[Path]) -> Dict[str, Dict[str, float]]:
    """Per-flight reference speeds: {flight_id: {"Vref": .., "V2": ..}}, optional "default" entry."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read reference speeds {path}: {e}") from e
    refs = {}
    for flight_id, values in raw.items():
        unknown = set(values) - set(REFERENCE_SPEEDS)
        if unknown:
            raise ConfigurationError(f"Reference speeds for {flight_id} have unknown keys {sorted(unknown)}")
        refs[str(flight_id)] = {k: float(v) for k, v in values.items()}
    return refs


def refs_for(flight_id: str, table: Mapping[str, Mapping[str, float]],
             vref: Optional[float] = None, v2: Optional[float] = None) -> Dict[str, Optional[float]]:
    """Flight entry over the file's "default" entry over the configured fallbacks."""
    merged: Dict[str, Optional[float]] = {"Vref": vref, "V2": v2}
    for source in (table.get("default", {}), table.get(flight_id, {})):
        merged.update({k: v for k, v in source.items() if v is not None})
    return merged
