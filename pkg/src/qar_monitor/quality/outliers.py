from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import numpy as np
from scipy.spatial import cKDTree

from ..enums import PointClass
from ..exceptions import ConfigurationError, InsufficientDataError, RepairError
from ..ingest.table import FlightTable

logger = logging.getLogger(__name__)

NOISE = -1


@dataclass(frozen=True)
class DbscanParams:
    radius: float = 0.5
    min_pts: int = 5

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError(f"DBSCAN radius must be positive, got {self.radius}")
        if self.min_pts < 0:
            raise ConfigurationError(f"DBSCAN min_pts must be non-negative, got {self.min_pts}")


@dataclass(frozen=True)
class PointLabel:
    cluster_id: int
    klass: PointClass

    @property
    def is_noise(self) -> bool:
        return self.cluster_id == NOISE


@dataclass(frozen=True)
class StandardizeState:
    """Per-dimension mean and population std; constant dimensions pass through unscaled."""
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def to_dict(self) -> Dict[str, list]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, raw: Dict[str, list]) -> "StandardizeState":
        return cls(mean=np.asarray(raw["mean"], dtype=np.float64),
                   std=np.asarray(raw["std"], dtype=np.float64),
                   constant=np.asarray(raw["constant"], dtype=bool))


@dataclass(frozen=True)
class RepairSummary:
    column: str
    noise: int
    core: int
    border: int
    # value written to the first repaired row
    replacement: Optional[float]


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return x


def standardize(points) -> Tuple[np.ndarray, StandardizeState]:
    """Zero mean, unit population std per non-constant dimension."""
    x = _as_points(points)
    if x.shape[0] < 2:
        raise InsufficientDataError(f"Standardizing needs at least 2 points, got {x.shape[0]}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    constant = ~(std > 0)
    if constant.any():
        logger.debug(f"Constant dimensions passed through unscaled: {np.flatnonzero(constant).tolist()}")
    state = StandardizeState(mean=mean, std=std, constant=constant)
    return apply_standardize(state, x), state


def apply_standardize(state: StandardizeState, points) -> np.ndarray:
    x = _as_points(points)
    scaled = (x - state.mean) / np.where(state.constant, 1.0, state.std)
    return np.where(state.constant, x, scaled)


def inverse_standardize(state: StandardizeState, points) -> np.ndarray:
    z = _as_points(points)
    restored = z * np.where(state.constant, 1.0, state.std) + state.mean
    return np.where(state.constant, z, restored)


def dbscan_label(points, params: DbscanParams) -> List[PointLabel]:
    """
    Density clustering with the "more than min_pts points within R" core rule.

    The neighbor count includes the point itself and distances equal to R
    count as inside. Core points are expanded in ascending index order, so a
    border point reachable from several clusters joins the lowest cluster id.
    """
    x = _as_points(points)
    n = x.shape[0]
    if n == 0:
        return []

    neighborhoods = cKDTree(x).query_ball_point(x, r=params.radius)
    is_core = np.array([len(nb) > params.min_pts for nb in neighborhoods], dtype=bool)
    cluster = np.full(n, NOISE, dtype=np.int64)

    next_id = 0
    for start in range(n):
        if not is_core[start] or cluster[start] != NOISE:
            continue
        cluster[start] = next_id
        frontier = [start]
        while frontier:
            point = frontier.pop()
            for neighbor in neighborhoods[point]:
                if cluster[neighbor] != NOISE:
                    continue
                cluster[neighbor] = next_id
                if is_core[neighbor]:
                    frontier.append(neighbor)
        next_id += 1

    labels = []
    for i in range(n):
        if is_core[i]:
            klass = PointClass.CORE
        elif cluster[i] != NOISE:
            klass = PointClass.BORDER
        else:
            klass = PointClass.NOISE
        labels.append(PointLabel(cluster_id=int(cluster[i]), klass=klass))
    logger.debug(f"DBSCAN R={params.radius} min_pts={params.min_pts}: {next_id} clusters, "
                 f"{int((cluster == NOISE).sum())} noise of {n}")
    return labels


def scatter_points(values: Sequence[float]) -> np.ndarray:
    """(row index, value) pairs, the geometry a value-versus-record scatter plot shows."""
    v = np.asarray(values, dtype=np.float64).ravel()
    return np.column_stack([np.arange(v.size, dtype=np.float64), v])


def _repair_pass(v: np.ndarray, params: DbscanParams, name: str) -> Tuple[np.ndarray, List[PointLabel], np.ndarray]:
    scaled, state = standardize(scatter_points(v))
    labels = dbscan_label(scaled, params)
    noise = np.array([label.is_noise for label in labels], dtype=bool)
    if not noise.any():
        return v, labels, noise
    if noise.all():
        raise RepairError(f"{name}: every point labeled noise (R={params.radius}, min_pts={params.min_pts}), no clean mean")
    scaled[noise, 1] = scaled[~noise, 1].mean()
    repaired = inverse_standardize(state, scaled)[:, 1]
    # rows that were not noise keep their exact original value
    repaired[~noise] = v[~noise]
    return repaired, labels, noise


def repair_values(values: Sequence[float], params: DbscanParams, name: str = "series",
                  max_passes: int = 10) -> Tuple[np.ndarray, List[PointLabel]]:
    """
    Replace noise points with the mean of the non-noise values until none are left.

    Each pass standardizes the current values afresh. Passes repeat until one
    finds no noise, so repairing the result again changes nothing. Rows
    replaced in any pass are labeled noise; the others keep the class of the
    last pass.

    Raises:
        RepairError: a pass labels every point noise
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    replaced = np.zeros(v.size, dtype=bool)
    repaired = v.copy()
    passes = 0
    while True:
        repaired, labels, noise = _repair_pass(repaired, params, name)
        if not noise.any():
            break
        replaced |= noise
        passes += 1
        if passes == max_passes:
            logger.warning(f"{name}: stopping after {max_passes} repair passes")
            labels = dbscan_label(standardize(scatter_points(repaired))[0], params)
            break

    if not replaced.any():
        logger.debug(f"{name}: no isolated points")
        return repaired, labels
    labels = [PointLabel(cluster_id=NOISE, klass=PointClass.NOISE) if hit else label
              for hit, label in zip(replaced, labels)]
    logger.info(f"{name}: replaced {int(replaced.sum())} of {v.size} isolated points in {passes} pass(es)")
    return repaired, labels


def repair_series(table: FlightTable, column: str, params: DbscanParams, max_passes: int = 10) -> FlightTable:
    """New table with the column's isolated points replaced by the clean mean."""
    if not table.has_column(column):
        raise KeyError(f"Column {column!r} not in flight {table.flight_id}")
    repaired, labels = repair_values(table.column(column), params, name=column, max_passes=max_passes)
    if not any(label.is_noise for label in labels):
        return table
    return table.with_column(column, repaired)


def summarize_labels(column: str, labels: Sequence[PointLabel], replacement: Optional[float]) -> RepairSummary:
    counts = {klass: 0 for klass in PointClass}
    for label in labels:
        counts[label.klass] += 1
    return RepairSummary(column=column, noise=counts[PointClass.NOISE], core=counts[PointClass.CORE],
                         border=counts[PointClass.BORDER], replacement=replacement)


def repair_columns(table: FlightTable, columns: Sequence[str], params: DbscanParams,
                   max_passes: int = 10) -> Tuple[FlightTable, List[RepairSummary], Dict[str, List[PointLabel]]]:
    """Repair several columns in turn; a column whose repair fails is left unchanged."""
    summaries = []
    all_labels: Dict[str, List[PointLabel]] = {}
    for column in columns:
        before = table.column(column)
        try:
            repaired, labels = repair_values(before, params, name=column, max_passes=max_passes)
        except (RepairError, InsufficientDataError) as e:
            logger.warning(f"Skipping repair of {column}: {e}")
            continue
        noise = np.array([label.is_noise for label in labels], dtype=bool)
        replacement = float(repaired[noise][0]) if noise.any() else None
        if noise.any():
            table = table.with_column(column, repaired)
        all_labels[column] = labels
        summaries.append(summarize_labels(column, labels, replacement))
    return table, summaries, all_labels
