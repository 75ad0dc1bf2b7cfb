"""Fully connected ReLU network with a softmax output, trained with Adam."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ConvergenceWarning
from ._common import argmax_lowest, check_predict_input, check_training_data


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def he_uniform_init(sizes: Sequence[int], rng: np.random.Generator, dtype=np.float64) -> list:
    """[W0, b0, W1, b1, ...]; weights ~ U(-sqrt(6/fan_in), +), biases zero."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        params.append(np.zeros(fan_out, dtype=dtype))
    return params


def forward(params: Sequence[np.ndarray], X: np.ndarray):
    """Returns (probabilities, cache of layer inputs for backprop)."""
    acts = [X]
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        if k < n_layers - 1:
            h = np.maximum(z, 0)
            acts.append(h)
        else:
            return softmax(z), acts


def loss_and_grads(params: Sequence[np.ndarray], X: np.ndarray, Y: np.ndarray):
    """Mean cross-entropy against one-hot ``Y`` and its gradient w.r.t. every parameter."""
    probs, acts = forward(params, X)
    n = X.shape[0]
    loss = -np.sum(Y * np.log(np.maximum(probs, np.finfo(probs.dtype).tiny))) / n
    grads = [None] * len(params)
    delta = (probs - Y) / n
    for k in range(len(params) // 2 - 1, -1, -1):
        h = acts[k]
        grads[2 * k] = h.T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            delta = (delta @ params[2 * k].T) * (h > 0)
    return float(loss), grads


@dataclass
class MlpModel:
    classes: np.ndarray
    params: list
    hidden: tuple
    n_features: int
    loss_history: list = field(default_factory=list)
    initial_loss: float = float("nan")
    seed: Optional[int] = None
    kind: str = field(default="mlp", init=False)

    def predict_proba(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features).astype(self.params[0].dtype)
        return forward(self.params, X)[0].astype(np.float64)

    def predict(self, X) -> np.ndarray:
        return self.classes[argmax_lowest(self.predict_proba(X))]


class Adam:
    """Adam with the bias correction folded into the step size.

    Updates run in place through one scratch buffer per parameter, which
    keeps the per-step cost close to that of the forward/backward pass.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self._tmp = [np.empty_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        step = self.lr * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for p, g, m, v, tmp in zip(params, grads, self.m, self.v, self._tmp):
            m *= b1
            np.multiply(g, 1 - b1, out=tmp)
            m += tmp
            v *= b2
            np.multiply(g, g, out=tmp)
            tmp *= 1 - b2
            v += tmp
            np.sqrt(v, out=tmp)
            tmp += self.eps
            np.divide(m, tmp, out=tmp)
            tmp *= step
            p -= tmp


def mlp_train(X, y, epochs: int = 200, batch: int = 32, lr: float = 1e-3, seed: int = 0,
              hidden: Sequence[int] = (512, 512), dtype=np.float32) -> MlpModel:
    """Mini-batch Adam on mean cross-entropy.

    ``loss_history[e]`` is the mean batch loss of epoch ``e``;
    ``initial_loss`` is the full-data loss at initialisation. A
    :class:`ConvergenceWarning` is issued when no epoch beats the initial loss.
    """
    X, y = check_training_data(X, y)
    classes, y_idx = np.unique(y, return_inverse=True)
    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *hidden, classes.size]
    params = he_uniform_init(sizes, rng, dtype)
    Xc = X.astype(dtype)
    Y = np.eye(classes.size, dtype=dtype)[y_idx]
    n = X.shape[0]
    initial, _ = loss_and_grads(params, Xc, Y)
    opt = Adam(params, lr)
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            rows = order[start:start + batch]
            loss, grads = loss_and_grads(params, Xc[rows], Y[rows])
            opt.step(params, grads)
            total += loss * rows.size
        history.append(total / n)
    if epochs and min(history) >= initial:
        warnings.warn(f"MLP loss never fell below its initial value {initial:.4g}", ConvergenceWarning)
    return MlpModel(classes, params, tuple(hidden), X.shape[1], history, initial, seed)


def mlp_predict(model: MlpModel, X) -> np.ndarray:
    return model.predict(X)


def mlp_predict_proba(model: MlpModel, X) -> np.ndarray:
    return model.predict_proba(X)
