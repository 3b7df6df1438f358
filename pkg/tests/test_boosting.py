#!/usr/bin/env python3

from fractions import Fraction
import numpy as np
import pytest

from qar_monitor.exceptions import InsufficientDataError
from qar_monitor.learn.boosting import (
    BoostParams,
    best_split,
    feature_importance,
    fit_boosted,
    leaf_weight,
    predict_labels,
    predict_logits,
    predict_proba,
    softmax_grad_hess,
    split_gain,
)
from qar_monitor.learn.forest import train_test_split


def _blobs(seed=61, per_class=100):
    rng = np.random.default_rng(seed)
    centers = {"A": (0.0, 0.0), "F": (6.0, 0.0), "M": (0.0, 6.0)}
    X = np.vstack([rng.normal(loc=c, size=(per_class, 2)) for c in centers.values()])
    y = [label for label in centers for _ in range(per_class)]
    return X, y


def _brute_force_gain(X, g, h, reg_lambda, gamma):
    best = None
    for feature in range(X.shape[1]):
        values = np.unique(X[:, feature])
        for lo, hi in zip(values[:-1], values[1:]):
            left = X[:, feature] <= (lo + hi) / 2.0
            gain = split_gain(g[left].sum(), h[left].sum(), g[~left].sum(), h[~left].sum(), reg_lambda, gamma)
            if best is None or gain > best:
                best = gain
    return best


def test_grad_hess_uniform_two_classes():
    g, h = softmax_grad_hess([0.0, 0.0], 0)
    np.testing.assert_allclose(g, [-0.5, 0.5])
    np.testing.assert_allclose(h, [0.25, 0.25])


def test_grad_sums_to_zero_and_vanishes_when_confident():
    rng = np.random.default_rng(62)
    for _ in range(100):
        logits = rng.normal(size=6) * 3
        g, h = softmax_grad_hess(logits, int(rng.integers(6)))
        assert g.sum() == pytest.approx(0.0, abs=1e-12)
        assert (h >= 0).all()
    g, _ = softmax_grad_hess([40.0, 0.0, 0.0], 0)
    np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_leaf_weight():
    assert leaf_weight(2.0, 3.0, 1.0) == -0.5
    assert leaf_weight(0.0, 3.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        leaf_weight(1.0, -1.0, 1.0)
    rng = np.random.default_rng(63)
    for _ in range(100):
        G, H, lam = rng.normal(), rng.uniform(0.1, 5), rng.uniform(0, 2)
        exact = -Fraction(G) / (Fraction(H) + Fraction(lam))
        assert leaf_weight(G, H, lam) == pytest.approx(float(exact), rel=1e-12)


def test_split_gain_examples():
    assert split_gain(1.0, 1.0, -1.0, 1.0, 0.0, 0.0) == 1.0
    assert split_gain(0.0, 2.0, 0.0, 3.0, 1.0, 0.7) == -0.7
    rng = np.random.default_rng(64)
    for _ in range(100):
        GL, GR = rng.normal(size=2)
        HL, HR = rng.uniform(0.1, 3, size=2)
        lam, gamma = rng.uniform(0, 2), rng.uniform(0, 1)
        assert split_gain(GL, HL, GR, HR, lam, gamma) == pytest.approx(split_gain(GR, HR, GL, HL, lam, gamma), rel=1e-12)
    with pytest.raises(ValueError):
        split_gain(1.0, 0.0, 1.0, 1.0, 0.0, 0.0)


def test_best_split_matches_brute_force():
    """The chosen gain is the maximum over every (feature, threshold) candidate."""
    rng = np.random.default_rng(65)
    for _ in range(100):
        n = int(rng.integers(2, 100))
        X = np.round(rng.normal(size=(n, 3)), 1)
        g = rng.normal(size=n)
        h = rng.uniform(0.05, 0.25, size=n)
        lam, gamma = 1.0, float(rng.uniform(0, 0.2))
        found = best_split(X, g, h, lam, gamma)
        brute = _brute_force_gain(X, g, h, lam, gamma)
        if brute is None or brute <= 0:
            assert found is None
        else:
            assert found is not None
            assert found[0] == pytest.approx(brute, rel=1e-9, abs=1e-12)


def test_single_stump_separates_two_classes():
    """One round of depth-one trees classifies separable data perfectly."""
    X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
    y = ["A", "A", "A", "C", "C", "C"]
    model = fit_boosted(X, y, BoostParams(rounds=1, max_depth=1), classes=["A", "C"])
    assert predict_labels(model, X) == y


def test_zero_learning_rate_keeps_uniform():
    X, y = _blobs(per_class=10)
    model = fit_boosted(X, y, BoostParams(rounds=3, eta=0.0))
    np.testing.assert_allclose(predict_proba(model, X), 1.0 / 6.0)


def test_single_leaf_round_moves_logits_by_leaf_weight():
    X, y = _blobs(per_class=10)
    params = BoostParams(rounds=1, max_depth=0, eta=0.3, reg_lambda=1.0)
    model = fit_boosted(X, y, params)
    p = np.full(6, 1.0 / 6.0)
    onehot = np.eye(6)[[model.classes.index(v) for v in y]]
    g = p - onehot
    h = np.tile(p * (1 - p), (len(y), 1))
    expected = [params.eta * leaf_weight(g[:, k].sum(), h[:, k].sum(), params.reg_lambda) for k in range(6)]
    logits = predict_logits(model, X)
    for k in range(6):
        np.testing.assert_allclose(logits[:, k], expected[k], rtol=1e-12, atol=1e-15)


def test_training_loss_non_increasing():
    rng = np.random.default_rng(66)
    X = rng.normal(size=(120, 4))
    y = [["A", "C", "F", "J", "M", "T"][int(v)] for v in rng.integers(0, 6, size=120)]
    model = fit_boosted(X, y, BoostParams(rounds=20, eta=0.1, max_depth=3))
    assert all(b <= a + 1e-9 for a, b in zip(model.history, model.history[1:]))


def test_separable_three_class_accuracy():
    X, y = _blobs()
    train, test = train_test_split(len(y), 0.8, seed=1)
    labels = np.asarray(y)
    model = fit_boosted(X[train], labels[train].tolist(), BoostParams())
    predicted = predict_labels(model, X[test])
    assert np.mean(np.asarray(predicted) == labels[test]) >= 0.95
    proba = predict_proba(model, X[test])
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
    shares = [w for _, w in feature_importance(model)]
    assert sum(shares) == pytest.approx(1.0)


def test_fit_is_a_function_of_the_data():
    """Refitting the same rows reproduces the logits exactly."""
    X, y = _blobs(seed=67, per_class=30)
    params = BoostParams(rounds=5, max_depth=2)
    first = predict_logits(fit_boosted(X, y, params), X)
    np.testing.assert_array_equal(predict_logits(fit_boosted(X, y, params), X), first)


def test_degenerate_labels():
    X = np.zeros((4, 1))
    with pytest.raises(InsufficientDataError):
        fit_boosted(X, ["A", "A", "A", "A"])
    with pytest.raises(InsufficientDataError):
        fit_boosted(X, ["A", "B", "A", "B"])


def test_eta_range():
    with pytest.raises(ValueError):
        BoostParams(eta=1.2)
