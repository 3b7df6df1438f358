"""
Random-forest regression built from CART trees.

Splits maximize the variance reduction over a random draw of `mtry` features;
importance is the mean decrease in impurity weighted by node sample count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
import logging
import math
import numpy as np

from ..exceptions import DimensionError, InsufficientDataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_leaf: int = 2
    mtry: Optional[int] = None
    bootstrap: bool = True

    def resolved_mtry(self, n_features: int) -> int:
        if self.mtry is None:
            return max(1, math.ceil(math.sqrt(n_features)))
        return max(1, min(self.mtry, n_features))


@dataclass
class TreeNode:
    n_samples: int
    leaf_value: float
    split_feature: Optional[int] = None
    split_threshold: float = 0.0
    impurity_decrease: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.split_feature is None

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        self._fill(X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
        if self.is_leaf:
            out[rows] = self.leaf_value
            return
        go_left = X[rows, self.split_feature] <= self.split_threshold
        self.left._fill(X, rows[go_left], out)
        self.right._fill(X, rows[~go_left], out)

    def internal_nodes(self):
        if self.is_leaf:
            return
        yield self
        yield from self.left.internal_nodes()
        yield from self.right.internal_nodes()


@dataclass
class ForestModel:
    trees: List[TreeNode]
    feature_names: List[str]
    rng_seed: int
    params: ForestParams
    n_features: int = field(init=False)

    def __post_init__(self):
        self.n_features = len(self.feature_names)


@dataclass(frozen=True)
class RegressionMetrics:
    mse: float
    rmse: float
    mae: float
    mape: Optional[float]


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int) -> Tuple[float, Optional[float]]:
    """Largest reduction of summed squared error over thresholds of one feature."""
    order = np.argsort(x, kind="mergesort")
    xs, ys = x[order], y[order]
    n = ys.size
    csum = np.cumsum(ys)
    csq = np.cumsum(ys * ys)
    total, total_sq = csum[-1], csq[-1]
    parent_sse = total_sq - total * total / n

    left_n = np.arange(1, n, dtype=np.float64)
    right_n = n - left_n
    left_sse = csq[:-1] - csum[:-1] ** 2 / left_n
    right_sse = (total_sq - csq[:-1]) - (total - csum[:-1]) ** 2 / right_n
    gain = parent_sse - left_sse - right_sse

    valid = (xs[:-1] < xs[1:]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return 0.0, None
    gain = np.where(valid, gain, -np.inf)
    k = int(np.argmax(gain))
    return float(gain[k]), float((xs[k] + xs[k + 1]) / 2.0)


def _grow(X: np.ndarray, y: np.ndarray, params: ForestParams, mtry: int,
          rng: np.random.Generator, depth: int) -> TreeNode:
    n = y.size
    node = TreeNode(n_samples=n, leaf_value=float(y.mean()))
    if params.max_depth is not None and depth >= params.max_depth:
        return node
    if n < 2 * params.min_leaf or np.all(y == y[0]):
        return node

    best_gain, best_feature, best_threshold = 0.0, None, None
    order = rng.permutation(X.shape[1])
    for visited, feature in enumerate(order):
        # keep drawing past mtry only while no valid split has been found
        if visited >= mtry and best_feature is not None:
            break
        gain, threshold = _best_split(X[:, feature], y, params.min_leaf)
        if threshold is not None and gain > best_gain:
            best_gain, best_feature, best_threshold = gain, int(feature), threshold
    if best_feature is None:
        return node

    go_left = X[:, best_feature] <= best_threshold
    node.split_feature = best_feature
    node.split_threshold = best_threshold
    node.impurity_decrease = best_gain / n
    node.left = _grow(X[go_left], y[go_left], params, mtry, rng, depth + 1)
    node.right = _grow(X[~go_left], y[~go_left], params, mtry, rng, depth + 1)
    return node


def _check_xy(X, y) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise DimensionError(f"X must be a 2-D sample matrix, got shape {X.shape}")
    if X.shape[0] == 0:
        raise InsufficientDataError("Cannot fit a tree on empty data")
    if X.shape[0] != y.size:
        raise DimensionError(f"X has {X.shape[0]} rows but y has {y.size} values")
    return X, y


def fit_tree(X, y, params: Optional[ForestParams] = None, rng: Optional[np.random.Generator] = None) -> TreeNode:
    """CART regression tree; impurity is the population variance of the node targets."""
    X, y = _check_xy(X, y)
    params = params or ForestParams()
    rng = rng if rng is not None else np.random.default_rng(0)
    return _grow(X, y, params, params.resolved_mtry(X.shape[1]), rng, depth=0)


def fit_forest(X, y, params: Optional[ForestParams] = None, seed: int = 0,
               feature_names: Optional[Sequence[str]] = None) -> ForestModel:
    """Bootstrap-aggregated CART trees; deterministic given the seed."""
    X, y = _check_xy(X, y)
    params = params or ForestParams()
    if params.n_trees < 1:
        raise ValueError(f"n_trees must be at least 1, got {params.n_trees}")
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise DimensionError(f"{len(names)} feature names for {X.shape[1]} features")

    mtry = params.resolved_mtry(X.shape[1])
    trees = []
    for child in np.random.SeedSequence(seed).spawn(params.n_trees):
        rng = np.random.default_rng(child)
        if params.bootstrap:
            rows = rng.integers(0, X.shape[0], size=X.shape[0])
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        trees.append(_grow(Xb, yb, params, mtry, rng, depth=0))
    logger.info(f"Fitted forest: {params.n_trees} trees, mtry={mtry}, {X.shape[0]} samples x {X.shape[1]} features")
    return ForestModel(trees=trees, feature_names=names, rng_seed=seed, params=params)


def predict(model: ForestModel, X) -> np.ndarray:
    """Mean of the tree predictions."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise DimensionError(f"Model expects {model.n_features} features, query has {X.shape[1]}")
    return np.mean([tree.predict(X) for tree in model.trees], axis=0)


def importance_mdi(model: ForestModel) -> List[Tuple[str, float]]:
    """Sample-weighted impurity decrease per feature, normalized to sum to 1, highest first."""
    totals = np.zeros(model.n_features, dtype=np.float64)
    for tree in model.trees:
        for node in tree.internal_nodes():
            totals[node.split_feature] += node.n_samples * node.impurity_decrease
    grand = totals.sum()
    if grand > 0:
        weights = totals / grand
    else:
        logger.warning("Forest has no internal nodes; importance is all zero")
        weights = totals
    order = sorted(range(model.n_features), key=lambda i: (-weights[i], i))
    return [(model.feature_names[i], float(weights[i])) for i in order]


def regression_metrics(y_true, y_pred) -> RegressionMetrics:
    """MSE, RMSE, MAE and MAPE (percent; undefined when any true value is zero)."""
    t = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if t.size == 0 or t.size != p.size:
        raise DimensionError(f"Need equal non-empty lengths, got {t.size} and {p.size}")
    err = p - t
    mse = float(np.mean(err ** 2))
    mape = None
    if np.all(t != 0):
        mape = float(100.0 * np.mean(np.abs(err) / np.abs(t)))
    else:
        logger.debug("MAPE undefined: zero in y_true")
    return RegressionMetrics(mse=mse, rmse=math.sqrt(mse), mae=float(np.mean(np.abs(err))), mape=mape)


def train_test_split(n: int, train_ratio: float = 0.8, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Shuffled train/test index split; at least one row on each side when n >= 2."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    cut = int(round(n * train_ratio))
    if n >= 2:
        cut = min(max(cut, 1), n - 1)
    return np.sort(order[:cut]), np.sort(order[cut:])
