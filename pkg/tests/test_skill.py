#!/usr/bin/env python3

import numpy as np
import pandas as pd
import pytest

from qar_monitor.config import Config, SkillConfig
from qar_monitor.enums import SKILL_LABELS, SkillAlgorithm
from qar_monitor.exceptions import InsufficientDataError, InvalidRecordError, SchemaError
from qar_monitor.learn.skill import SkillDataset, macro_shares, prune_features, rate_flights
from qar_monitor.synth import skill_table


def _raw(n=100, seed=81):
    rng = np.random.default_rng(seed)
    return pd.DataFrame({
        "rating": rng.choice(["F", "M", "A"], size=n),
        "pilot": rng.integers(1, 5, size=n),
        "DATE": ["2015-06-01"] * n,
        "fixed": [3.0] * n,
        "empty": [np.nan] * n,
        "flaps": ["OFF"] * 95 + ["ON"] * 5,
        "gear": rng.choice(["UP", "DOWN"], size=n),
        "touchdown g": rng.normal(1.3, 0.1, size=n),
    })


def test_prune_rules():
    """Empty, constant, date and dominated columns go; ranged numerics gain a variance feature."""
    data = prune_features(_raw())
    assert "fixed" not in data.feature_names
    assert "empty" not in data.feature_names
    assert "DATE" not in data.feature_names
    assert not any(name.startswith("flaps") for name in data.feature_names)
    assert "touchdown g" in data.feature_names
    assert "touchdown g_var" in data.feature_names
    assert {"gear_UP", "gear_DOWN"} <= set(data.feature_names)
    assert "rating" not in data.feature_names and "pilot" not in data.feature_names
    assert data.X.shape == (100, len(data.feature_names))


def test_per_flight_variance():
    raw = pd.DataFrame({
        "rating": ["F", "F", "M", "M"],
        "pilot": [1, 1, 2, 2],
        "flight": ["a", "a", "b", "b"],
        "pitch": [1.0, 3.0, 5.0, 9.0],
    })
    data = prune_features(raw, SkillConfig(flight_column="flight"))
    column = data.feature_names.index("pitch_var")
    np.testing.assert_allclose(data.X[:, column], [1.0, 1.0, 4.0, 4.0])


def test_prune_errors():
    with pytest.raises(SchemaError):
        prune_features(pd.DataFrame({"rating": ["A"]}))
    with pytest.raises(InsufficientDataError):
        prune_features(pd.DataFrame({"rating": ["A", "C"], "pilot": [1, 2], "fixed": [1.0, 1.0]}))
    with pytest.raises(InvalidRecordError):
        prune_features(pd.DataFrame({"rating": ["A", "Z"], "pilot": [1, 2], "x": [1.0, 2.0]}))


def test_macro_shares():
    data = SkillDataset(X=np.zeros((4, 1)), feature_names=["x"], y=["F", "F", "M", "A"], pilot=["1", "1", "1", "2"])
    shares = macro_shares(data)
    assert list(shares.columns) == SKILL_LABELS
    assert shares.loc["1", "F"] == pytest.approx(200.0 / 3.0)
    assert shares.loc["1", "M"] == pytest.approx(100.0 / 3.0)
    assert shares.loc["2", "A"] == pytest.approx(100.0)
    np.testing.assert_allclose(shares.sum(axis=1), 100.0, atol=1e-9)


def test_rate_flights_gbdt():
    """Boosted rating on the synthetic table yields a full report."""
    data = prune_features(skill_table(200, np.random.default_rng(82)))
    config = Config.model_validate({"boost": {"rounds": 10, "max_depth": 3}})
    report = rate_flights(data, config, seed=1, algo=SkillAlgorithm.GBDT)
    assert report.algo is SkillAlgorithm.GBDT
    assert 0.0 <= report.metrics.accuracy <= 1.0
    assert report.train_accuracy >= report.metrics.accuracy - 0.5
    assert len(report.probabilities) == 40
    proba = report.probabilities[[f"proba_{label}" for label in SKILL_LABELS]].to_numpy()
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
    assert report.importance is not None


def test_rate_flights_neural():
    data = prune_features(skill_table(120, np.random.default_rng(83)))
    config = Config.model_validate({"bpnet": {"classifier_hidden": 16, "classifier_epochs": 5}})
    report = rate_flights(data, config, seed=2, algo=SkillAlgorithm.NN)
    assert report.algo is SkillAlgorithm.NN
    assert report.importance is None
    assert sum(sum(row) for row in report.metrics.confusion) == len(report.probabilities)
