"""
Gradient-boosted trees for multiclass skill rating.

Second-order boosting on the softmax cross-entropy: each round computes the
per-class gradients g = p - y and Hessians h = p (1 - p) once, fits one
regression tree per class to them, and adds eta times its output to that
class's logits. Leaf weights are w = -G / (H + lambda); a split is taken only
when its gain is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
import logging
import numpy as np
from scipy.special import log_softmax, softmax

from ..enums import SKILL_LABELS
from ..exceptions import DimensionError, InsufficientDataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoostParams:
    rounds: int = 50
    eta: float = 0.3
    max_depth: int = 4
    reg_lambda: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if self.reg_lambda < 0 or self.gamma < 0:
            raise ValueError(f"lambda and gamma must be non-negative, got {self.reg_lambda}, {self.gamma}")


@dataclass
class BoostNode:
    weight: float
    cover: float
    feature: Optional[int] = None
    threshold: float = 0.0
    gain: float = 0.0
    left: Optional["BoostNode"] = None
    right: Optional["BoostNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        self._fill(X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
        if self.is_leaf:
            out[rows] = self.weight
            return
        go_left = X[rows, self.feature] <= self.threshold
        self.left._fill(X, rows[go_left], out)
        self.right._fill(X, rows[~go_left], out)

    def splits(self):
        if self.is_leaf:
            return
        yield self
        yield from self.left.splits()
        yield from self.right.splits()


@dataclass
class BoostedModel:
    params: BoostParams
    classes: List[str]
    feature_names: List[str]
    rounds: List[List[BoostNode]] = field(default_factory=list)
    base_score: float = 0.0
    history: List[float] = field(default_factory=list)

    @property
    def class_count(self) -> int:
        return len(self.classes)


def softmax_grad_hess(logits, label: int) -> Tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of the cross-entropy at one sample's logits."""
    p = softmax(np.asarray(logits, dtype=np.float64))
    g = p.copy()
    g[label] -= 1.0
    return g, p * (1.0 - p)


def leaf_weight(G: float, H: float, reg_lambda: float) -> float:
    """Optimal leaf weight -G / (H + lambda)."""
    if not H + reg_lambda > 0:
        raise ValueError(f"H + lambda must be positive, got {H} + {reg_lambda}")
    return -G / (H + reg_lambda)


def split_gain(GL: float, HL: float, GR: float, HR: float, reg_lambda: float, gamma: float) -> float:
    """Loss reduction of splitting a leaf into (L, R), less the complexity cost gamma."""
    denominators = (HL + reg_lambda, HR + reg_lambda, HL + HR + reg_lambda)
    if min(denominators) <= 0:
        raise ValueError(f"Split gain denominators must be positive, got {denominators}")
    return 0.5 * (GL * GL / denominators[0] + GR * GR / denominators[1]
                  - (GL + GR) ** 2 / denominators[2]) - gamma


def best_split(X: np.ndarray, g: np.ndarray, h: np.ndarray, reg_lambda: float,
               gamma: float) -> Optional[Tuple[float, int, float]]:
    """
    Exact greedy search over every feature and every threshold between distinct values.

    Returns (gain, feature, threshold) of the best positive-gain split, or None.
    Ties keep the lowest feature index and the lowest threshold.
    """
    G, H = g.sum(), h.sum()
    if not H + reg_lambda > 0:
        return None
    parent = G * G / (H + reg_lambda)
    best = None
    for feature in range(X.shape[1]):
        order = np.argsort(X[:, feature], kind="mergesort")
        xs = X[order, feature]
        GL = np.cumsum(g[order])[:-1]
        HL = np.cumsum(h[order])[:-1]
        GR, HR = G - GL, H - HL
        valid = (xs[:-1] < xs[1:]) & (HL + reg_lambda > 0) & (HR + reg_lambda > 0)
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent) - gamma
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > 0 and (best is None or gain[k] > best[0]):
            best = (float(gain[k]), feature, float((xs[k] + xs[k + 1]) / 2.0))
    return best


def _grow(X: np.ndarray, g: np.ndarray, h: np.ndarray, params: BoostParams, depth: int) -> BoostNode:
    G, H = float(g.sum()), float(h.sum())
    weight = leaf_weight(G, H, params.reg_lambda) if H + params.reg_lambda > 0 else 0.0
    node = BoostNode(weight=weight, cover=H)
    if depth >= params.max_depth or X.shape[0] < 2:
        return node
    split = best_split(X, g, h, params.reg_lambda, params.gamma)
    if split is None:
        return node
    node.gain, node.feature, node.threshold = split
    go_left = X[:, node.feature] <= node.threshold
    node.left = _grow(X[go_left], g[go_left], h[go_left], params, depth + 1)
    node.right = _grow(X[~go_left], g[~go_left], h[~go_left], params, depth + 1)
    return node


def encode_labels(y: Sequence, classes: Sequence[str] = SKILL_LABELS) -> np.ndarray:
    index = {label: k for k, label in enumerate(classes)}
    try:
        return np.array([index[str(label)] for label in y], dtype=np.int64)
    except KeyError as e:
        raise InsufficientDataError(f"Label {e.args[0]!r} not in {list(classes)}") from e


def _cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(log_softmax(logits, axis=1)[np.arange(y.size), y]))


def fit_boosted(X, y: Sequence, params: Optional[BoostParams] = None,
                feature_names: Optional[Sequence[str]] = None,
                classes: Sequence[str] = SKILL_LABELS) -> BoostedModel:
    """
    Fit K per-class trees per round to the softmax gradients.

    Split finding is exact and greedy, so the fit is a pure function of the data.
    """
    params = params or BoostParams()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DimensionError(f"X shape {X.shape} does not match {len(y)} labels")
    codes = encode_labels(y, classes)
    if np.unique(codes).size < 2:
        raise InsufficientDataError(f"Boosting needs at least 2 classes, got {sorted(set(map(str, y)))}")

    K = len(classes)
    model = BoostedModel(params=params, classes=list(classes),
                         feature_names=list(feature_names) if feature_names is not None
                         else [f"x{i}" for i in range(X.shape[1])])
    onehot = np.eye(K)[codes]
    logits = np.full((X.shape[0], K), model.base_score)
    model.history.append(_cross_entropy(logits, codes))
    for r in range(params.rounds):
        p = softmax(logits, axis=1)
        g, h = p - onehot, p * (1.0 - p)
        trees = [_grow(X, g[:, k], h[:, k], params, depth=0) for k in range(K)]
        for k, tree in enumerate(trees):
            logits[:, k] += params.eta * tree.predict(X)
        model.rounds.append(trees)
        model.history.append(_cross_entropy(logits, codes))
    logger.info(f"Boosted {params.rounds} rounds x {K} classes on {X.shape[0]} rows, "
                f"train loss {model.history[0]:.4f} -> {model.history[-1]:.4f}")
    return model


def predict_logits(model: BoostedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != len(model.feature_names):
        raise DimensionError(f"Model expects {len(model.feature_names)} features, got {X.shape[1]}")
    logits = np.full((X.shape[0], model.class_count), model.base_score)
    for trees in model.rounds:
        for k, tree in enumerate(trees):
            logits[:, k] += model.params.eta * tree.predict(X)
    return logits


def predict_proba(model: BoostedModel, X) -> np.ndarray:
    return softmax(predict_logits(model, X), axis=1)


def predict_labels(model: BoostedModel, X) -> List[str]:
    return [model.classes[k] for k in np.argmax(predict_logits(model, X), axis=1)]


def feature_importance(model: BoostedModel) -> List[Tuple[str, float]]:
    """Share of total split gain per feature, highest first."""
    totals = np.zeros(len(model.feature_names))
    for trees in model.rounds:
        for tree in trees:
            for node in tree.splits():
                totals[node.feature] += node.gain
    total = totals.sum()
    shares = totals / total if total > 0 else totals
    order = sorted(range(totals.size), key=lambda i: (-shares[i], i))
    return [(model.feature_names[i], float(shares[i])) for i in order]
