from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence
import logging
import numpy as np
import pandas as pd

from ..exceptions import DimensionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassificationMetrics:
    """Multiclass scores over the labels seen in either truth or prediction (0 where undefined)."""
    accuracy: float
    recall_micro: float
    recall_macro: float
    recall_weighted: float
    precision_micro: float
    precision_macro: float
    precision_weighted: float
    f1_micro: float
    f1_macro: float
    f1_weighted: float
    labels: List[str] = field(default_factory=list)
    confusion: List[List[int]] = field(default_factory=list)

    def as_dict(self) -> Dict:
        return {k: v for k, v in self.__dict__.items() if k not in ("labels", "confusion")}

    def confusion_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.confusion, index=self.labels, columns=self.labels)
        frame.index.name = "actual"
        return frame


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den > 0)


def classification_metrics(y_true: Sequence, y_pred: Sequence,
                           labels: Optional[Sequence[str]] = None) -> ClassificationMetrics:
    """Accuracy, recall, precision and F1 (micro, macro, weighted by support) plus the confusion matrix."""
    t = [str(v) for v in y_true]
    p = [str(v) for v in y_pred]
    if len(t) != len(p):
        raise DimensionError(f"{len(t)} true labels for {len(p)} predictions")
    labels = list(labels) if labels is not None else sorted(set(t) | set(p))
    index = {label: k for k, label in enumerate(labels)}
    K = len(labels)
    confusion = np.zeros((K, K), dtype=np.int64)
    for a, b in zip(t, p):
        confusion[index[a], index[b]] += 1

    tp = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)
    recall = _ratio(tp, support)
    precision = _ratio(tp, predicted)
    f1 = _ratio(2 * precision * recall, precision + recall)
    n = float(len(t))
    weights = support / n if n else support
    accuracy = float(tp.sum() / n) if n else 0.0
    if not n:
        logger.warning("Classification metrics over an empty label set")

    micro_p = float(tp.sum() / predicted.sum()) if predicted.sum() else 0.0
    micro_r = float(tp.sum() / support.sum()) if support.sum() else 0.0
    micro_f = 2 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r else 0.0
    mean = lambda v: float(v.mean()) if K else 0.0
    return ClassificationMetrics(
        accuracy=accuracy,
        recall_micro=micro_r,
        recall_macro=mean(recall),
        recall_weighted=float((weights * recall).sum()),
        precision_micro=micro_p,
        precision_macro=mean(precision),
        precision_weighted=float((weights * precision).sum()),
        f1_micro=float(micro_f),
        f1_macro=mean(f1),
        f1_weighted=float((weights * f1).sum()),
        labels=labels,
        confusion=confusion.tolist(),
    )


def probability_table(y_pred: Sequence, y_true: Sequence, proba: np.ndarray,
                      classes: Sequence[str]) -> pd.DataFrame:
    """One row per sample: predicted, actual and the probability of each class."""
    proba = np.asarray(proba, dtype=np.float64)
    if proba.shape != (len(y_pred), len(classes)):
        raise DimensionError(f"Probability matrix shape {proba.shape} does not match "
                             f"{len(y_pred)} rows x {len(classes)} classes")
    frame = pd.DataFrame({"predicted": list(y_pred), "actual": list(y_true)})
    for k, label in enumerate(classes):
        frame[f"proba_{label}"] = proba[:, k]
    return frame
