"""Fully connected feedforward binary classifier, trained by hand.

Forward pass, backpropagation, Adam and early stopping are all implemented
here directly on numpy arrays: hidden layers are ReLU, the single output
unit is a sigmoid, and the loss is mean binary cross-entropy. Determinism
contract: given the same config, data and seed, training produces bitwise
identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .train_common import (
    Adam,
    EarlyStopper,
    TrainHistory,
    check_two_classes,
    stratified_validation_split,
)

BCE_CLAMP = 1e-12


@dataclass(frozen=True)
class MlpTrainConfig:
    hidden_sizes: tuple[int, ...] = (100, 50)
    lr: float = 0.001
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 5
    validation_fraction: float = 0.1
    tol: float = 1e-4
    seed: int = 42

    def to_dict(self) -> dict:
        return {
            "hidden_sizes": list(self.hidden_sizes),
            "lr": self.lr,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "validation_fraction": self.validation_fraction,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass
class MlpModel:
    """Layer parameters; weights[i] has shape (fan_out, fan_in)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy_params(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.weights + self.biases])

    def set_flat_params(self, theta: np.ndarray) -> None:
        pos = 0
        for p in self.weights + self.biases:
            p[...] = theta[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != theta.size:
            raise DataError("flat parameter vector has wrong length")


def init_mlp(n_features: int, hidden_sizes: tuple[int, ...], seed: int) -> MlpModel:
    """He-style uniform init, scaled by fan-in, from a seeded generator."""
    rng = np.random.default_rng(seed)
    sizes = [n_features, *hidden_sizes, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Output probabilities for each row of X."""
    return _forward_cached(model, X)[0]


def _forward_cached(model: MlpModel, X: np.ndarray):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights[0].shape[1]:
        raise DataError(
            f"expected {model.weights[0].shape[1]} input features, got {X.shape!r}"
        )
    activations = [X]
    a = X
    n_layers = len(model.weights)
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W.T + b
        a = _sigmoid(z) if i == n_layers - 1 else np.maximum(z, 0.0)
        activations.append(a)
    return activations[-1][:, 0], activations


def bce_loss(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise DataError("bce_loss: length mismatch")
    p = np.clip(y_hat, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def loss_and_grads(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Mean BCE plus gradients for every weight and bias (backprop)."""
    p, activations = _forward_cached(model, X)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    loss = bce_loss(y, p)

    grads_w = [np.empty_like(w) for w in model.weights]
    grads_b = [np.empty_like(b) for b in model.biases]
    # Sigmoid + BCE collapse to (p - y)/n at the output pre-activation.
    delta = ((p - y) / n)[:, None]
    for i in range(len(model.weights) - 1, -1, -1):
        a_prev = activations[i]
        grads_w[i] = delta.T @ a_prev
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (activations[i] > 0)
    return loss, grads_w, grads_b


def train_mlp(
    X: np.ndarray, y: np.ndarray, cfg: MlpTrainConfig = MlpTrainConfig()
) -> tuple[MlpModel, TrainHistory]:
    """Train on standardized features with seeded shuffling and early stopping.

    Monitors validation loss on a stratified held-out slice; when no epoch
    improves it by more than cfg.tol for cfg.patience epochs in a row,
    training stops and the best-validation weights are restored.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise DataError("X and y row counts differ")
    check_two_classes(y)

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = stratified_validation_split(y, cfg.validation_fraction, rng)
    X_tr, y_tr = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    model = init_mlp(X.shape[1], cfg.hidden_sizes, cfg.seed)
    params = model.weights + model.biases
    opt = Adam(params, cfg.lr)
    stopper = EarlyStopper(cfg.patience, cfg.tol)
    history = TrainHistory()
    best = model.copy_params()

    n = X_tr.shape[0]
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, gw, gb = loss_and_grads(model, X_tr[batch], y_tr[batch])
            opt.step(gw + gb)
            total += loss * batch.size
        history.train_loss.append(total / n)
        val_loss = bce_loss(y_val, forward(model, X_val))
        history.val_loss.append(val_loss)
        improved_to_best = val_loss < stopper.best - stopper.tol
        stop = stopper.update(epoch, val_loss)
        if improved_to_best:
            best = model.copy_params()
        if stop:
            history.stop_reason = "early_stopping"
            break
    else:
        history.stop_reason = "max_epochs"

    history.best_epoch = stopper.best_epoch
    model.weights, model.biases = best
    return model, history
