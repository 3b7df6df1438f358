#!/usr/bin/env python3

import math
import numpy as np
import pytest

from qar_monitor.enums import Head
from qar_monitor.exceptions import DimensionError, TrainingDivergedError
from qar_monitor.learn.bpnet import (
    BpNetwork,
    fit,
    forward,
    gradient_check,
    init_network,
    loss,
    predict,
    train_epoch,
)


def _zero_net(m=3, l=4, n=1, b=0.0, head=Head.LINEAR):
    return BpNetwork(w_in=np.zeros((m, l)), a=np.zeros(l), w_out=np.zeros((l, n)), b=np.full(n, b), head=head)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def test_zero_net_outputs_bias():
    F, O = forward(_zero_net(b=0.7), [1.0, -2.0, 3.0])
    np.testing.assert_array_equal(F, [0.5, 0.5, 0.5, 0.5])
    np.testing.assert_allclose(O, [0.7])


def test_forward_matches_dense_oracle():
    """Straight-line evaluation of the two layer equations."""
    rng = np.random.default_rng(41)
    for _ in range(50):
        m, l, n = (int(v) for v in rng.integers(1, 33, size=3))
        net = init_network(m, l, n, seed=int(rng.integers(1_000_000)))
        x = rng.normal(size=m)
        F_expected = np.array([_sigmoid(sum(net.w_in[i, j] * x[i] for i in range(m)) + net.a[j]) for j in range(l)])
        O_expected = np.array([sum(F_expected[j] * net.w_out[j, k] for j in range(l)) + net.b[k] for k in range(n)])
        F, O = forward(net, x)
        np.testing.assert_allclose(F, F_expected, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(O, O_expected, rtol=1e-12, atol=1e-12)


def test_forward_dimension_mismatch():
    with pytest.raises(DimensionError):
        forward(_zero_net(), [1.0, 2.0])


def test_loss_examples():
    net = _zero_net(m=1, l=1, n=1)
    assert loss(net, [[0.0]], [[0.0]]) == 0.0
    assert loss(net, [[0.0]], [[1.0]]) == pytest.approx(0.5)
    softmax_net = _zero_net(m=2, l=3, n=6, head=Head.SOFTMAX)
    targets = np.eye(6)[[0, 3, 5]]
    assert loss(softmax_net, np.ones((3, 2)), targets) == pytest.approx(math.log(6.0))


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(42)
    net = init_network(4, 8, 6, seed=1, head=Head.SOFTMAX, init_scale=3.0)
    proba = predict(net, rng.normal(size=(50, 4)) * 5)
    assert (proba >= 0).all()
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_zero_error_leaves_net_unchanged():
    net = init_network(2, 3, 2, seed=4)
    X = np.random.default_rng(43).normal(size=(5, 2))
    T = predict(net, X)
    before = {k: v.copy() for k, v in net.params().items()}
    train_epoch(net, X, T, beta=0.5)
    for name, value in net.params().items():
        np.testing.assert_allclose(value, before[name], atol=1e-15)


def test_zero_learning_rate_is_identity():
    net = init_network(3, 5, 2, seed=5)
    rng = np.random.default_rng(44)
    before = {k: v.copy() for k, v in net.params().items()}
    train_epoch(net, rng.normal(size=(10, 3)), rng.normal(size=(10, 2)), beta=0.0)
    for name, value in net.params().items():
        np.testing.assert_array_equal(value, before[name])


def test_single_sample_update_by_hand():
    """One hidden unit: w_out += beta F e, b += beta e, w_in += beta x d, a += beta d."""
    net = BpNetwork(w_in=[[0.2]], a=[0.1], w_out=[[0.4]], b=[0.3])
    x, t, beta = 1.5, 2.0, 0.1
    F = _sigmoid(0.2 * x + 0.1)
    e = t - (F * 0.4 + 0.3)
    d = F * (1 - F) * 0.4 * e
    train_epoch(net, [[x]], [[t]], beta=beta)
    assert net.w_out[0, 0] == pytest.approx(0.4 + beta * F * e, rel=1e-12)
    assert net.b[0] == pytest.approx(0.3 + beta * e, rel=1e-12)
    assert net.w_in[0, 0] == pytest.approx(0.2 + beta * x * d, rel=1e-12)
    assert net.a[0] == pytest.approx(0.1 + beta * d, rel=1e-12)


def test_epoch_descends_on_linear_data():
    """Small-step epochs do not raise the loss on a linearly representable set."""
    rng = np.random.default_rng(45)
    X = rng.normal(size=(40, 3))
    T = (X @ np.array([[0.3], [-0.2], [0.1]])) + 0.05
    net = init_network(3, 6, 1, seed=6)
    for _ in range(5):
        before = loss(net, X, T)
        train_epoch(net, X, T, beta=1e-3)
        assert loss(net, X, T) <= before + 1e-9


def test_gradient_check_random_nets():
    """Analytic gradients agree with central differences."""
    rng = np.random.default_rng(46)
    for trial in range(100):
        m, l, n = (int(v) for v in rng.integers(1, 5, size=3))
        head = Head.SOFTMAX if trial % 2 and n > 1 else Head.LINEAR
        net = init_network(m, l, n, seed=trial, head=head)
        x = rng.normal(size=m)
        t = np.eye(n)[int(rng.integers(n))] if head is Head.SOFTMAX else rng.normal(size=n)
        assert gradient_check(net, x, t, eps=1e-5) < 1e-4


def test_gradient_check_zero_net():
    assert gradient_check(_zero_net(), [0.0, 0.0, 0.0], [0.0]) == 0.0


def test_gradient_check_permutation_symmetry():
    """Relabeling inputs together with their weights leaves the deviation unchanged."""
    net = init_network(4, 3, 2, seed=7)
    x = np.array([0.3, -1.2, 0.8, 2.0])
    t = np.array([0.5, -0.5])
    perm = np.array([2, 0, 3, 1])
    permuted = BpNetwork(w_in=net.w_in[perm], a=net.a, w_out=net.w_out, b=net.b)
    assert gradient_check(permuted, x[perm], t) == pytest.approx(gradient_check(net, x, t), abs=1e-5)


def test_gradient_check_eps_range():
    with pytest.raises(ValueError):
        gradient_check(_zero_net(), [0.0, 0.0, 0.0], [0.0], eps=0.1)
    with pytest.raises(ValueError):
        gradient_check(_zero_net(), [0.0, 0.0, 0.0], [0.0], eps=0.0)


def test_divergence_is_reported():
    """A huge step produces non-finite weights and aborts with diagnostics."""
    net = init_network(1, 2, 1, seed=8)
    with pytest.raises(TrainingDivergedError) as e:
        train_epoch(net, [[1e200]], [[1e200]], beta=1e200)
    assert "parameter" in e.value.diagnostics


def test_fit_reduces_loss():
    rng = np.random.default_rng(47)
    X = rng.normal(size=(60, 2))
    T = np.column_stack([X[:, 0] - X[:, 1], 0.5 * X[:, 0]])
    net = init_network(2, 8, 2, seed=9)
    history = fit(net, X, T, epochs=30, rng=np.random.default_rng(0), beta=0.05)
    assert len(history) == 31
    assert history[-1] < 0.5 * history[0]


def test_checkpoint_round_trip():
    net = init_network(3, 4, 2, seed=10, head=Head.SOFTMAX)
    restored = BpNetwork.from_dict(net.to_dict())
    assert restored.head is Head.SOFTMAX
    for name, value in net.params().items():
        np.testing.assert_array_equal(getattr(restored, name), value)
