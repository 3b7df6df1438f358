"""
Control quantification: infer stick, wheel and throttle positions from flight state.

Inputs are the per-second means of the state columns and their per-second
growth rates; targets are the per-second means of the control columns.
Both sides are standardized before training and restored on prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import json
import logging
import numpy as np
import pandas as pd

from ..config import BpConfig, CONTROL_COLUMNS, STATE_COLUMNS
from ..exceptions import DimensionError, InsufficientDataError, SchemaError
from ..ingest.table import FlightTable
from ..quality.outliers import StandardizeState, apply_standardize, inverse_standardize, standardize
from .bpnet import BpNetwork, fit, init_network, predict

logger = logging.getLogger(__name__)

RATE_SUFFIX = " rate"


@dataclass
class ControlModel:
    net: BpNetwork
    input_state: StandardizeState
    target_state: StandardizeState
    feature_names: List[str]
    control_names: List[str]

    def to_dict(self) -> Dict:
        return {
            "net": self.net.to_dict(),
            "input_state": self.input_state.to_dict(),
            "target_state": self.target_state.to_dict(),
            "feature_names": self.feature_names,
            "control_names": self.control_names,
        }

    @classmethod
    def from_dict(cls, raw: Dict) -> "ControlModel":
        return cls(
            net=BpNetwork.from_dict(raw["net"]),
            input_state=StandardizeState.from_dict(raw["input_state"]),
            target_state=StandardizeState.from_dict(raw["target_state"]),
            feature_names=list(raw["feature_names"]),
            control_names=list(raw["control_names"]),
        )


@dataclass(frozen=True)
class ControlQuantification:
    predicted: np.ndarray
    relative_error: Optional[List[List[Optional[float]]]]
    control_names: List[str]

    def error_summary(self) -> Dict[str, Dict[str, Optional[float]]]:
        """Mean and max relative error per control, over rows where it is defined."""
        summary = {}
        for k, name in enumerate(self.control_names):
            values = [row[k] for row in (self.relative_error or []) if row[k] is not None]
            summary[name] = {
                "mean_relative_error": float(np.mean(values)) if values else None,
                "max_relative_error": float(np.max(values)) if values else None,
                "defined_rows": len(values),
            }
        return summary

    def frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.predicted, columns=[f"{name} predicted" for name in self.control_names])
        if self.relative_error is not None:
            for k, name in enumerate(self.control_names):
                frame[f"{name} relative error"] = [row[k] for row in self.relative_error]
        return frame


def build_control_layout(table: FlightTable, state_columns: Sequence[str] = STATE_COLUMNS,
                         control_columns: Sequence[str] = CONTROL_COLUMNS) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    Per-second state features and control targets of one flight.

    The first second is dropped since it has no growth rate.
    """
    missing = [c for c in [*state_columns, *control_columns] if not table.has_column(c)]
    if missing:
        raise SchemaError(f"Flight {table.flight_id} lacks control-layout columns {missing}")
    frame = table.frame[list(state_columns) + list(control_columns)].copy()
    frame["second"] = np.floor(table.seconds()).astype(np.int64)
    per_second = frame.groupby("second", sort=True).mean()
    if len(per_second) < 2:
        raise InsufficientDataError(f"Flight {table.flight_id} spans {len(per_second)} second(s), need at least 2")

    states = per_second[list(state_columns)]
    growth = states.diff().add_suffix(RATE_SUFFIX)
    features = pd.concat([states, growth], axis=1).iloc[1:]
    targets = per_second[list(control_columns)].iloc[1:]
    return features.to_numpy(dtype=np.float64), targets.to_numpy(dtype=np.float64), list(features.columns)


def train_control_model(X, Y, config: Optional[BpConfig] = None, seed: int = 0,
                        feature_names: Optional[Sequence[str]] = None,
                        control_names: Optional[Sequence[str]] = None) -> Tuple[ControlModel, List[float]]:
    """Fit a linear-head network on standardized state/control rows."""
    config = config or BpConfig()
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionError(f"Need row-aligned 2-D inputs and targets, got {X.shape} and {Y.shape}")
    Xs, input_state = standardize(X)
    Ys, target_state = standardize(Y)
    net = init_network(X.shape[1], config.hidden, Y.shape[1], seed=seed,
                       learning_rate=config.beta, init_scale=config.init_scale)
    history = fit(net, Xs, Ys, epochs=config.epochs, batch_size=config.batch_size)
    model = ControlModel(
        net=net,
        input_state=input_state,
        target_state=target_state,
        feature_names=list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])],
        control_names=list(control_names) if control_names is not None else list(config.control_columns),
    )
    return model, history


def predict_controls(model: ControlModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise DimensionError(f"Layout mismatch: model expects {len(model.feature_names)} features, got shape {X.shape}")
    scaled = predict(model.net, apply_standardize(model.input_state, X))
    return inverse_standardize(model.target_state, scaled)


def quantify_controls(model: ControlModel, X, Y=None) -> ControlQuantification:
    """Predicted controls per row and, when truth is given, |y_hat - y| / |y| (None where y is 0)."""
    predicted = predict_controls(model, X)
    relative = None
    if Y is not None:
        Y = np.asarray(Y, dtype=np.float64)
        if Y.shape != predicted.shape:
            raise DimensionError(f"Truth shape {Y.shape} does not match predictions {predicted.shape}")
        relative = [
            [None if y == 0 else float(abs(p - y) / abs(y)) for p, y in zip(p_row, y_row)]
            for p_row, y_row in zip(predicted, Y)
        ]
    return ControlQuantification(predicted=predicted, relative_error=relative, control_names=list(model.control_names))


def save_checkpoint(model: ControlModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model.to_dict(), f, indent=2, sort_keys=True)
    logger.info(f"Saved control model checkpoint to {path}")
    return path


def load_checkpoint(path: Path) -> ControlModel:
    with open(path, encoding="utf-8") as f:
        return ControlModel.from_dict(json.load(f))
