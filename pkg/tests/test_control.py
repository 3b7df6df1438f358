#!/usr/bin/env python3

import numpy as np
import pandas as pd
import pytest

from qar_monitor.config import BpConfig
from qar_monitor.exceptions import DimensionError, InsufficientDataError, SchemaError
from qar_monitor.ingest import FlightTable
from qar_monitor.learn.control import (
    build_control_layout,
    load_checkpoint,
    predict_controls,
    quantify_controls,
    save_checkpoint,
    train_control_model,
)


def _table(columns, rate=1.0):
    return FlightTable(frame=pd.DataFrame(columns), sample_rate_hz=rate, flight_id="f")


def test_layout_per_second_means_and_rates():
    """Two samples per second collapse to their mean; growth rate is the per-second difference."""
    table = _table({"G": [1.0, 3.0, 5.0, 7.0, 9.0, 9.0], "P": [0.0, 0.0, 1.0, 1.0, 4.0, 4.0],
                    "C": [10.0, 10.0, 20.0, 20.0, 30.0, 30.0]}, rate=2.0)
    X, Y, names = build_control_layout(table, ["G", "P"], ["C"])
    assert names == ["G", "P", "G rate", "P rate"]
    np.testing.assert_allclose(X, [[6.0, 1.0, 4.0, 1.0], [9.0, 4.0, 3.0, 3.0]])
    np.testing.assert_allclose(Y, [[20.0], [30.0]])


def test_layout_errors():
    with pytest.raises(SchemaError):
        build_control_layout(_table({"G": [1.0, 2.0]}), ["G", "P"], ["C"])
    with pytest.raises(InsufficientDataError):
        build_control_layout(_table({"G": [1.0], "C": [2.0]}), ["G"], ["C"])


def test_linear_law_is_learned():
    """Controls that are a linear function of state come back within a few percent."""
    rng = np.random.default_rng(51)
    X = rng.normal(size=(300, 4))
    weights = np.array([[2.0, -1.0], [1.0, 0.5], [-0.5, 1.5], [0.3, 0.2]])
    Y = X @ weights + np.array([12.0, 9.0])
    config = BpConfig(hidden=8, beta=0.01, epochs=100)
    model, history = train_control_model(X, Y, config, seed=3, control_names=["stick", "wheel"])
    assert history[-1] < history[0]
    result = quantify_controls(model, X, Y)
    summary = result.error_summary()
    assert summary["stick"]["mean_relative_error"] < 0.05
    assert summary["wheel"]["mean_relative_error"] < 0.05
    assert summary["stick"]["defined_rows"] == 300


@pytest.mark.slow
def test_noisy_four_by_four_law():
    """Four controls driven linearly by four state inputs, observed with 1 % noise."""
    rng = np.random.default_rng(57)
    X = rng.normal(size=(300, 4))
    weights = rng.uniform(-2.0, 2.0, size=(4, 4))
    clean = X @ weights + np.array([40.0, 35.0, 50.0, 45.0])
    Y = clean + rng.normal(size=clean.shape) * 0.01 * clean.std(axis=0)
    names = ["CAP CLM 1 POSN", "CAP WHL 1 POSN", "TRA-L", "TRA-R"]
    model, history = train_control_model(X, Y, BpConfig(hidden=8, beta=0.01, epochs=500), seed=8,
                                         control_names=names)
    assert history[-1] < history[0]
    summary = quantify_controls(model, X, Y).error_summary()
    for name in names:
        assert summary[name]["mean_relative_error"] < 0.05, name
        assert summary[name]["defined_rows"] == 300


def test_constant_control_is_reproduced():
    """A constant control is passed through unscaled and the bias converges to it."""
    rng = np.random.default_rng(52)
    X = rng.normal(size=(200, 2))
    Y = np.full((200, 1), 5.0)
    model, _ = train_control_model(X, Y, BpConfig(hidden=4, beta=0.05, epochs=40), seed=4, control_names=["TRA-L"])
    np.testing.assert_allclose(predict_controls(model, X), 5.0, atol=0.05)


def test_relative_error_undefined_at_zero_truth():
    rng = np.random.default_rng(53)
    X = rng.normal(size=(20, 2))
    Y = np.column_stack([X[:, 0] + 3.0])
    model, _ = train_control_model(X, Y, BpConfig(hidden=3, epochs=2), seed=5, control_names=["c"])
    truth = Y.copy()
    truth[0, 0] = 0.0
    result = quantify_controls(model, X, truth)
    assert result.relative_error[0][0] is None
    assert result.error_summary()["c"]["defined_rows"] == 19
    frame = result.frame()
    assert list(frame.columns) == ["c predicted", "c relative error"]


def test_replayed_training_rows_match_residual():
    """Relative error on training rows is the training residual over the truth."""
    rng = np.random.default_rng(54)
    X = rng.normal(size=(30, 2))
    Y = np.column_stack([X[:, 0] * 2.0 + 10.0])
    model, _ = train_control_model(X, Y, BpConfig(hidden=3, epochs=3), seed=6, control_names=["c"])
    result = quantify_controls(model, X, Y)
    expected = np.abs(result.predicted[:, 0] - Y[:, 0]) / np.abs(Y[:, 0])
    np.testing.assert_allclose([row[0] for row in result.relative_error], expected)


def test_layout_mismatch():
    X = np.random.default_rng(55).normal(size=(10, 3))
    model, _ = train_control_model(X, X[:, :1] + 1.0, BpConfig(hidden=2, epochs=1), seed=0, control_names=["c"])
    with pytest.raises(DimensionError):
        predict_controls(model, np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        quantify_controls(model, X, np.zeros((10, 2)))


def test_checkpoint_restores_predictions(tmp_path):
    rng = np.random.default_rng(56)
    X = rng.normal(size=(25, 4))
    Y = X[:, :2] * 3.0 + 1.0
    model, _ = train_control_model(X, Y, BpConfig(hidden=5, epochs=2), seed=7, control_names=["a", "b"])
    restored = load_checkpoint(save_checkpoint(model, tmp_path / "model.json"))
    assert restored.control_names == ["a", "b"]
    np.testing.assert_allclose(predict_controls(restored, X), predict_controls(model, X), rtol=1e-12)
