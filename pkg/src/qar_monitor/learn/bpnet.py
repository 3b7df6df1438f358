"""
Single-hidden-layer back-propagation network.

    F_j = G(sum_i w_in[i, j] x_i + a_j)        G = logistic sigmoid
    O_k = sum_j F_j w_out[j, k] + b_k          (softmax head: p = softmax(O))

Training follows the plain gradient-descent rules with e_k = T_k - O_k
(softmax head: e_k = T_k - p_k):

    w_out[j, k] += beta F_j e_k                b_k += beta e_k
    w_in[i, j]  += beta x_i d_j                a_j += beta d_j
    d_j = F_j (1 - F_j) sum_k w_out[j, k] e_k

The hidden-bias rule carries no x_i factor; with it the update would not
be the gradient of E.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging
import numpy as np
from scipy.special import expit, log_softmax, softmax

from ..enums import Head, Optimizer
from ..exceptions import DimensionError, InsufficientDataError, TrainingDivergedError

logger = logging.getLogger(__name__)

PARAMETERS = ("w_in", "a", "w_out", "b")
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class BpNetwork:
    w_in: np.ndarray
    a: np.ndarray
    w_out: np.ndarray
    b: np.ndarray
    learning_rate: float = 0.01
    head: Head = Head.LINEAR
    optimizer: Optimizer = Optimizer.SGD
    adam: AdamState = field(default_factory=AdamState, repr=False)

    def __post_init__(self):
        for name in PARAMETERS:
            setattr(self, name, np.array(getattr(self, name), dtype=np.float64))
        m, l = self.w_in.shape
        if self.a.shape != (l,) or self.w_out.shape[0] != l or self.b.shape != (self.w_out.shape[1],):
            raise DimensionError(f"Inconsistent shapes: w_in {self.w_in.shape}, a {self.a.shape}, "
                                 f"w_out {self.w_out.shape}, b {self.b.shape}")
        self.head = Head(self.head)
        self.optimizer = Optimizer(self.optimizer)

    @property
    def n_inputs(self) -> int:
        return self.w_in.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.w_in.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.w_out.shape[1]

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMETERS}

    def copy(self) -> "BpNetwork":
        return BpNetwork(**{k: v.copy() for k, v in self.params().items()},
                         learning_rate=self.learning_rate, head=self.head, optimizer=self.optimizer)

    def to_dict(self) -> Dict:
        """Flat JSON-ready checkpoint of every parameter array."""
        return {
            "head": self.head.value,
            "optimizer": self.optimizer.value,
            "learning_rate": self.learning_rate,
            **{name: value.tolist() for name, value in self.params().items()},
        }

    @classmethod
    def from_dict(cls, raw: Dict) -> "BpNetwork":
        return cls(w_in=raw["w_in"], a=raw["a"], w_out=raw["w_out"], b=raw["b"],
                   learning_rate=raw.get("learning_rate", 0.01),
                   head=raw.get("head", Head.LINEAR.value),
                   optimizer=raw.get("optimizer", Optimizer.SGD.value))


def init_network(n_inputs: int, n_hidden: int, n_outputs: int, seed: int = 0,
                 head: Head = Head.LINEAR, learning_rate: float = 0.01,
                 optimizer: Optimizer = Optimizer.SGD, init_scale: float = 0.5) -> BpNetwork:
    """Weights and biases drawn uniform in (-init_scale, init_scale)."""
    if min(n_inputs, n_hidden, n_outputs) < 1:
        raise DimensionError(f"Layer sizes must be positive, got ({n_inputs}, {n_hidden}, {n_outputs})")
    rng = np.random.default_rng(seed)
    draw = lambda *shape: rng.uniform(-init_scale, init_scale, size=shape)
    return BpNetwork(w_in=draw(n_inputs, n_hidden), a=draw(n_hidden),
                     w_out=draw(n_hidden, n_outputs), b=draw(n_outputs),
                     learning_rate=learning_rate, head=head, optimizer=optimizer)


def _as_rows(values, width: int, what: str) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != width:
        raise DimensionError(f"{what} must have width {width}, got shape {np.shape(values)}")
    return x


def forward_batch(net: BpNetwork, X) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise forward pass: hidden activations and outputs (probabilities for softmax)."""
    X = _as_rows(X, net.n_inputs, "input")
    F = expit(X @ net.w_in + net.a)
    O = F @ net.w_out + net.b
    if net.head is Head.SOFTMAX:
        O = softmax(O, axis=1)
    return F, O


def forward(net: BpNetwork, x) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != net.n_inputs:
        raise DimensionError(f"Input must have length {net.n_inputs}, got shape {x.shape}")
    F, O = forward_batch(net, x)
    return F[0], O[0]


def predict(net: BpNetwork, X) -> np.ndarray:
    return forward_batch(net, X)[1]


def loss(net: BpNetwork, X, T) -> float:
    """Mean per-pair loss: half squared error (linear) or cross-entropy (softmax)."""
    X = _as_rows(X, net.n_inputs, "input")
    T = _as_rows(T, net.n_outputs, "target")
    if X.shape[0] == 0 or X.shape[0] != T.shape[0]:
        raise InsufficientDataError(f"Need matching non-empty inputs and targets, got {X.shape[0]} and {T.shape[0]}")
    F = expit(X @ net.w_in + net.a)
    O = F @ net.w_out + net.b
    if net.head is Head.SOFTMAX:
        return float(-np.mean(np.sum(T * log_softmax(O, axis=1), axis=1)))
    return float(np.mean(0.5 * np.sum((T - O) ** 2, axis=1)))


def gradients(net: BpNetwork, X, T) -> Dict[str, np.ndarray]:
    """Gradient of the mean loss over the rows of X with respect to every parameter."""
    X = _as_rows(X, net.n_inputs, "input")
    T = _as_rows(T, net.n_outputs, "target")
    F, O = forward_batch(net, X)
    e = T - O
    delta = F * (1.0 - F) * (e @ net.w_out.T)
    n = X.shape[0]
    return {
        "w_out": -(F.T @ e) / n,
        "b": -e.sum(axis=0) / n,
        "w_in": -(X.T @ delta) / n,
        "a": -delta.sum(axis=0) / n,
    }


def _steps(net: BpNetwork, grads: Dict[str, np.ndarray], rate: float) -> Dict[str, np.ndarray]:
    if net.optimizer is Optimizer.SGD:
        return {name: -rate * g for name, g in grads.items()}
    state = net.adam
    state.step += 1
    steps = {}
    for name, g in grads.items():
        m = ADAM_BETA1 * state.m.get(name, np.zeros_like(g)) + (1 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v.get(name, np.zeros_like(g)) + (1 - ADAM_BETA2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - ADAM_BETA1 ** state.step)
        v_hat = v / (1 - ADAM_BETA2 ** state.step)
        steps[name] = -rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return steps


def train_epoch(net: BpNetwork, X, T, beta: Optional[float] = None, batch_size: int = 1,
                order: Optional[np.ndarray] = None) -> BpNetwork:
    """
    One pass over the pairs, updating the network in place.

    batch_size 1 applies the per-sample rules in row order (or in `order`);
    larger batches average the per-sample gradients.
    """
    X = _as_rows(X, net.n_inputs, "input")
    T = _as_rows(T, net.n_outputs, "target")
    if X.shape[0] != T.shape[0]:
        raise DimensionError(f"{X.shape[0]} inputs for {T.shape[0]} targets")
    rate = net.learning_rate if beta is None else beta
    if rate < 0:
        raise ValueError(f"Learning rate must be non-negative, got {rate}")
    if rate == 0:
        return net
    rows = np.arange(X.shape[0]) if order is None else np.asarray(order)
    batch_size = max(1, int(batch_size))

    for start in range(0, rows.size, batch_size):
        batch = rows[start:start + batch_size]
        steps = _steps(net, gradients(net, X[batch], T[batch]), rate)
        for name, step in steps.items():
            updated = getattr(net, name) + step
            if not np.all(np.isfinite(updated)):
                raise TrainingDivergedError(
                    "Non-finite parameter update",
                    {"parameter": name, "first_row": int(batch[0]), "learning_rate": rate,
                     "max_abs_step": float(np.nanmax(np.abs(step))) if np.isfinite(step).any() else None},
                )
        for name, step in steps.items():
            setattr(net, name, getattr(net, name) + step)
    return net


def fit(net: BpNetwork, X, T, epochs: int, batch_size: int = 1,
        rng: Optional[np.random.Generator] = None, beta: Optional[float] = None) -> List[float]:
    """Run several epochs; rows are reshuffled each epoch when an rng is given. Returns the loss history."""
    X = _as_rows(X, net.n_inputs, "input")
    history = [loss(net, X, T)]
    for epoch in range(epochs):
        order = rng.permutation(X.shape[0]) if rng is not None else None
        train_epoch(net, X, T, beta=beta, batch_size=batch_size, order=order)
        history.append(loss(net, X, T))
        if epoch % 50 == 0:
            logger.debug(f"epoch {epoch}: loss {history[-1]:.6g}")
    logger.info(f"Trained {net.n_inputs}-{net.n_hidden}-{net.n_outputs} {net.head.value} network "
                f"for {epochs} epochs, loss {history[0]:.6g} -> {history[-1]:.6g}")
    return history


def gradient_check(net: BpNetwork, x, t, eps: float = 1e-5) -> float:
    """Largest relative deviation between analytic gradients and central differences of the loss."""
    if not 0 < eps <= 1e-2:
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")
    X = _as_rows(x, net.n_inputs, "input")
    T = _as_rows(t, net.n_outputs, "target")
    analytic = gradients(net, X, T)
    shifted = net.copy()
    worst = 0.0
    for name in PARAMETERS:
        values = getattr(shifted, name)
        for index in np.ndindex(values.shape):
            original = values[index]
            values[index] = original + eps
            up = loss(shifted, X, T)
            values[index] = original - eps
            down = loss(shifted, X, T)
            values[index] = original
            numeric = (up - down) / (2 * eps)
            a = analytic[name][index]
            scale = max(abs(a), abs(numeric), 1e-5)
            worst = max(worst, abs(a - numeric) / scale)
    return worst
