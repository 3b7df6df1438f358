#!/usr/bin/env python3

import numpy as np
import pytest

from qar_monitor.exceptions import DimensionError
from qar_monitor.learn.metrics import classification_metrics, probability_table


def test_perfect_predictions():
    y = ["A", "C", "F", "F", "M"]
    metrics = classification_metrics(y, y)
    assert metrics.accuracy == 1.0
    assert metrics.recall_micro == metrics.recall_macro == metrics.recall_weighted == 1.0
    assert metrics.precision_macro == 1.0


def test_two_class_hand_case():
    """TP=1, FN=1, FP=0, TN=2 gives macro recall (0.5 + 1) / 2."""
    metrics = classification_metrics(["P", "P", "N", "N"], ["P", "N", "N", "N"])
    assert metrics.recall_macro == pytest.approx(0.75)
    assert metrics.accuracy == pytest.approx(0.75)
    assert metrics.confusion == [[2, 0], [1, 1]]
    assert metrics.labels == ["N", "P"]


def test_micro_recall_is_accuracy():
    rng = np.random.default_rng(71)
    labels = list("ACFJMT")
    for _ in range(50):
        t = rng.choice(labels, size=40).tolist()
        p = rng.choice(labels, size=40).tolist()
        metrics = classification_metrics(t, p)
        assert metrics.recall_micro == pytest.approx(metrics.accuracy, abs=1e-15)
        assert metrics.precision_micro == pytest.approx(metrics.accuracy, abs=1e-15)
        support = [row for row in np.asarray(metrics.confusion).sum(axis=1)]
        assert support == [t.count(label) for label in metrics.labels]


def test_agrees_with_sklearn():
    skm = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(72)
    labels = list("ACFJMT")
    for _ in range(50):
        t = rng.choice(labels, size=60).tolist()
        p = rng.choice(labels[:4], size=60).tolist()
        metrics = classification_metrics(t, p)
        for average in ("micro", "macro", "weighted"):
            assert getattr(metrics, f"recall_{average}") == pytest.approx(
                skm.recall_score(t, p, average=average, zero_division=0), abs=1e-12)
            assert getattr(metrics, f"precision_{average}") == pytest.approx(
                skm.precision_score(t, p, average=average, zero_division=0), abs=1e-12)
            assert getattr(metrics, f"f1_{average}") == pytest.approx(
                skm.f1_score(t, p, average=average, zero_division=0), abs=1e-12)
        np.testing.assert_array_equal(metrics.confusion, skm.confusion_matrix(t, p, labels=metrics.labels))


def test_length_mismatch():
    with pytest.raises(DimensionError):
        classification_metrics(["A"], ["A", "C"])


def test_probability_table_layout():
    proba = np.array([[0.7, 0.3], [0.2, 0.8]])
    frame = probability_table(["A", "C"], ["A", "A"], proba, ["A", "C"])
    assert list(frame.columns) == ["predicted", "actual", "proba_A", "proba_C"]
    assert frame.loc[1, "proba_C"] == 0.8
    with pytest.raises(DimensionError):
        probability_table(["A"], ["A"], proba, ["A", "C"])
