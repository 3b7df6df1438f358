"""
Pilot-skill rating from per-flight operation features.

Raw tables carry one row per flight (or per flight sample) with a rating
column in A, C, F, J, M, T and the landing main-control pilot. Feature
pruning runs in a fixed order: drop label-irrelevant columns, one-hot the
categoricals, drop empty and constant columns, drop columns dominated by a
single value, then append variance features for ranged numeric columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple
import logging
import numpy as np
import pandas as pd

from ..config import Config, SkillConfig
from ..enums import Head, Optimizer, SKILL_LABELS, SkillAlgorithm
from ..exceptions import InsufficientDataError, InvalidRecordError, SchemaError
from ..quality.outliers import apply_standardize, standardize
from .boosting import BoostParams, feature_importance, fit_boosted, predict_labels, predict_proba
from .bpnet import fit, init_network, predict
from .forest import train_test_split
from .metrics import ClassificationMetrics, classification_metrics, probability_table

logger = logging.getLogger(__name__)

VARIANCE_SUFFIX = "_var"


@dataclass
class SkillDataset:
    X: np.ndarray
    feature_names: List[str]
    y: List[str]
    pilot: List[str]

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != len(self.y) or len(self.y) != len(self.pilot):
            raise InsufficientDataError(f"Misaligned dataset: X {self.X.shape}, {len(self.y)} labels, {len(self.pilot)} pilots")
        unknown = sorted(set(self.y) - set(SKILL_LABELS))
        if unknown:
            raise InvalidRecordError(f"Unknown rating labels {unknown}, expected {SKILL_LABELS}")

    def __len__(self) -> int:
        return len(self.y)


@dataclass
class SkillReport:
    algo: SkillAlgorithm
    metrics: ClassificationMetrics
    train_accuracy: float
    probabilities: pd.DataFrame
    shares: pd.DataFrame
    importance: Optional[List[Tuple[str, float]]] = None


def load_skill_table(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    logger.info(f"Loaded skill table {path}: {len(frame)} rows, {len(frame.columns)} columns")
    return frame


def _is_numeric(column: pd.Series) -> bool:
    present = column.dropna()
    return present.empty or pd.to_numeric(present, errors="coerce").notna().all()


def prune_features(raw: pd.DataFrame, config: Optional[SkillConfig] = None) -> SkillDataset:
    """Turn a raw rating table into a feature matrix with labels and pilots split off."""
    config = config or SkillConfig()
    missing = [c for c in (config.label_column, config.pilot_column) if c not in raw.columns]
    if missing:
        raise SchemaError(f"Skill table lacks columns {missing}")

    labelled = raw[raw[config.label_column].notna()].reset_index(drop=True)
    if len(labelled) < len(raw):
        logger.warning(f"Dropped {len(raw) - len(labelled)} rows without a rating")
    y = labelled[config.label_column].astype(str).str.strip().tolist()
    pilot = labelled[config.pilot_column].astype(str).str.strip().tolist()
    flights = labelled[config.flight_column] if config.flight_column in labelled.columns else None

    reserved = {config.label_column, config.pilot_column, config.flight_column}
    patterns = [p.upper() for p in config.irrelevant_patterns]
    candidates = [c for c in labelled.columns
                  if c not in reserved and not any(p in str(c).upper() for p in patterns)]
    logger.debug(f"Irrelevant or reserved columns removed: {sorted(set(map(str, labelled.columns)) - set(map(str, candidates)))}")

    numeric, categorical = {}, []
    for name in candidates:
        if _is_numeric(labelled[name]):
            numeric[name] = pd.to_numeric(labelled[name], errors="coerce")
        else:
            categorical.append(name)
    frame = pd.DataFrame(numeric, index=labelled.index)
    if categorical:
        dummies = pd.get_dummies(labelled[categorical].astype("string"), prefix=categorical, dtype=np.float64)
        frame = pd.concat([frame, dummies], axis=1)

    kept = []
    for name in frame.columns:
        column = frame[name]
        if column.isna().all() or column.nunique(dropna=True) <= 1:
            continue
        mode_share = column.value_counts(dropna=False, normalize=True).iloc[0]
        if 1.0 - mode_share < config.minority_share:
            logger.debug(f"Dropping {name}: non-mode share {1.0 - mode_share:.3f}")
            continue
        kept.append(name)
    if not kept:
        raise InsufficientDataError("No usable feature columns remain after pruning")
    frame = frame[kept].fillna(0.0)

    ranged = [name for name in kept if name in numeric and frame[name].nunique() > 2]
    for name in ranged:
        if flights is not None:
            frame[f"{name}{VARIANCE_SUFFIX}"] = frame[name].groupby(flights.values).transform(lambda s: s.var(ddof=0))
        else:
            frame[f"{name}{VARIANCE_SUFFIX}"] = float(frame[name].var(ddof=0))
    logger.info(f"Pruned skill table to {len(kept)} columns plus {len(ranged)} variance features")
    return SkillDataset(X=frame.to_numpy(dtype=np.float64), feature_names=[str(c) for c in frame.columns],
                        y=y, pilot=pilot)


def macro_shares(data: SkillDataset) -> pd.DataFrame:
    """Percentage of each rating per pilot; rows sum to 100."""
    frame = pd.DataFrame({"pilot": data.pilot, "rating": data.y})
    shares = pd.crosstab(frame["pilot"], frame["rating"], normalize="index") * 100.0
    shares = shares.reindex(columns=SKILL_LABELS, fill_value=0.0)
    shares.columns.name = None
    return shares


def _fit_classifier(X_train: np.ndarray, y_train: List[str], X_test: np.ndarray,
                    config: Config, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    scaled, state = standardize(X_train)
    targets = np.eye(len(SKILL_LABELS))[[SKILL_LABELS.index(v) for v in y_train]]
    net = init_network(X_train.shape[1], config.bpnet.classifier_hidden, len(SKILL_LABELS), seed=seed,
                       head=Head.SOFTMAX, learning_rate=config.bpnet.classifier_lr,
                       optimizer=Optimizer.ADAM, init_scale=config.bpnet.init_scale)
    fit(net, scaled, targets, epochs=config.bpnet.classifier_epochs,
        batch_size=config.bpnet.classifier_batch_size, rng=np.random.default_rng(seed))
    return predict(net, scaled), predict(net, apply_standardize(state, X_test))


def rate_flights(data: SkillDataset, config: Optional[Config] = None, seed: int = 0,
                 algo: Optional[SkillAlgorithm] = None) -> SkillReport:
    """Train on a shuffled split, score the held-out rows, and tabulate per-pilot shares."""
    config = config or Config()
    algo = SkillAlgorithm(algo or config.skill.algo)
    train, test = train_test_split(len(data), config.skill.train_ratio, seed)
    if test.size == 0:
        raise InsufficientDataError(f"Need at least 2 rated rows to split, got {len(data)}")
    y = np.asarray(data.y)
    X_train, X_test = data.X[train], data.X[test]

    importance = None
    if algo is SkillAlgorithm.GBDT:
        b = config.boost
        params = BoostParams(rounds=b.rounds, eta=b.eta, max_depth=b.max_depth, reg_lambda=b.reg_lambda, gamma=b.gamma)
        model = fit_boosted(X_train, y[train].tolist(), params, feature_names=data.feature_names)
        train_pred = predict_labels(model, X_train)
        proba = predict_proba(model, X_test)
        test_pred = predict_labels(model, X_test)
        importance = feature_importance(model)
    else:
        train_proba, proba = _fit_classifier(X_train, y[train].tolist(), X_test, config, seed)
        train_pred = [SKILL_LABELS[k] for k in np.argmax(train_proba, axis=1)]
        test_pred = [SKILL_LABELS[k] for k in np.argmax(proba, axis=1)]

    metrics = classification_metrics(y[test].tolist(), test_pred)
    train_accuracy = float(np.mean(np.asarray(train_pred) == y[train]))
    logger.info(f"{algo.value} rating: train accuracy {train_accuracy:.4f}, test accuracy {metrics.accuracy:.4f}")
    return SkillReport(
        algo=algo,
        metrics=metrics,
        train_accuracy=train_accuracy,
        probabilities=probability_table(test_pred, y[test].tolist(), proba, SKILL_LABELS),
        shares=macro_shares(data),
        importance=importance,
    )
