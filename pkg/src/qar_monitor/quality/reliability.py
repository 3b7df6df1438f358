"""
Descriptive-statistics reliability screening.

All moments are population moments (divide by n), so kurtosis is
sum((x - mean)^4) / (n * s^4) - 3 with s the population standard deviation,
not the sample-corrected estimator some packages default to.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence
import logging
import numpy as np
import pandas as pd
from scipy import stats

from ..exceptions import InsufficientDataError
from ..ingest.table import FlightTable

logger = logging.getLogger(__name__)

PROFILE_COLUMNS = ["name", "n", "max", "min", "mean", "std", "median", "variance", "kurtosis", "skewness", "cv"]
TUKEY_FENCE = 1.5


@dataclass(frozen=True)
class VariableProfile:
    """One row of the reliability table. None marks an undefined statistic."""
    name: str
    n: int
    max: float
    min: float
    mean: float
    std: float
    median: float
    variance: float
    kurtosis: Optional[float]
    skewness: Optional[float]
    cv: Optional[float]

    def as_row(self) -> list:
        return [getattr(self, column) for column in PROFILE_COLUMNS]


@dataclass(frozen=True)
class BoxplotSummary:
    q1: float
    q3: float
    iqr: float
    lower_fence: float
    upper_fence: float
    outlier_indices: List[int] = field(default_factory=list)


def coefficient_of_variation(mean: float, std: float) -> Optional[float]:
    """CV = s / mean; undefined when the mean is zero."""
    if mean == 0:
        return None
    return float(std) / float(mean)


def compute_profile(values: Sequence[float], name: str = "") -> VariableProfile:
    """Descriptive statistics of one variable."""
    x = np.asarray(values, dtype=np.float64).ravel()
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"Profile of {name or 'series'} needs at least 2 values, got {n}")

    mean = float(np.mean(x))
    std = float(np.std(x))
    if std > 0:
        kurtosis = float(stats.kurtosis(x, fisher=True, bias=True))
        skewness = float(stats.skew(x, bias=True))
        cv = coefficient_of_variation(mean, std)
    else:
        logger.debug(f"{name or 'series'} is constant; kurtosis, skewness and CV undefined")
        kurtosis = skewness = cv = None

    return VariableProfile(
        name=name,
        n=int(n),
        max=float(np.max(x)),
        min=float(np.min(x)),
        mean=mean,
        std=std,
        median=float(np.median(x)),
        variance=std * std,
        kurtosis=kurtosis,
        skewness=skewness,
        cv=cv,
    )


def profile_table(table: FlightTable, columns: Optional[Iterable[str]] = None) -> List[VariableProfile]:
    """Profile every (or the named) column of a flight, in column order."""
    names = list(columns) if columns is not None else table.names
    profiles = []
    for name in names:
        try:
            profiles.append(compute_profile(table.column(name), name=name))
        except InsufficientDataError as e:
            logger.warning(f"Skipping {name}: {e}")
    return profiles


def profiles_frame(profiles: Sequence[VariableProfile]) -> pd.DataFrame:
    return pd.DataFrame([p.as_row() for p in profiles], columns=PROFILE_COLUMNS)


def boxplot_fences(values: Sequence[float]) -> BoxplotSummary:
    """Linear-interpolation quartiles and Tukey fences."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size < 4:
        raise InsufficientDataError(f"Box plot needs at least 4 values, got {x.size}")
    q1, q3 = (float(q) for q in np.percentile(x, [25.0, 75.0], method="linear"))
    iqr = q3 - q1
    lower = q1 - TUKEY_FENCE * iqr
    upper = q3 + TUKEY_FENCE * iqr
    outliers = np.flatnonzero((x < lower) | (x > upper))
    return BoxplotSummary(q1=q1, q3=q3, iqr=iqr, lower_fence=lower, upper_fence=upper,
                          outlier_indices=[int(i) for i in outliers])


def flag_unreliable(profiles: Sequence[VariableProfile], cv_threshold: float = 1.0) -> List[str]:
    """Names whose defined CV exceeds the threshold, highest CV first."""
    if cv_threshold <= 0:
        raise ValueError(f"cv_threshold must be positive, got {cv_threshold}")
    flagged = [p for p in profiles if p.cv is not None and p.cv > cv_threshold]
    flagged.sort(key=lambda p: p.cv, reverse=True)
    if flagged:
        logger.info(f"Unreliable variables (CV > {cv_threshold:g}): {[p.name for p in flagged]}")
    return [p.name for p in flagged]
