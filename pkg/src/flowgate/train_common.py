"""Shared machinery for the two gradient-trained detectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Adam:
    """Adam over a list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float):
        self.params = params
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - ADAM_BETA1 ** self.t
        b2t = 1.0 - ADAM_BETA2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + ADAM_EPS)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    stop_reason: str = ""
    best_epoch: int = -1  # 0-based index into the loss lists

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


class EarlyStopper:
    """Stop when validation loss fails to improve by more than tol for
    `patience` consecutive epochs; remembers the best epoch."""

    def __init__(self, patience: int, tol: float):
        self.patience = patience
        self.tol = tol
        self.best = np.inf
        self.best_epoch = -1
        self.bad_epochs = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        if val_loss < self.best - self.tol:
            self.best = val_loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


def binarize_labels(labels, benign_label: str) -> np.ndarray:
    """Map class strings to 0 (benign) / 1 (any attack)."""
    return np.array([0 if lab == benign_label else 1 for lab in labels], dtype=np.int64)


def check_two_classes(y: np.ndarray) -> None:
    if np.unique(y).size < 2:
        raise DataError(
            "supervised training needs both classes; got a single-class label vector"
        )


def stratified_validation_split(
    y: np.ndarray, fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded stratified split: per class, the first `fraction` of a shuffled
    index list becomes validation. Guarantees at least one validation row per
    class when the class has two or more rows."""
    val: list[int] = []
    train: list[int] = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        order = rng.permutation(idx)
        n_val = int(np.floor(fraction * idx.size))
        if n_val == 0 and idx.size > 1:
            n_val = 1
        val.extend(order[:n_val].tolist())
        train.extend(order[n_val:].tolist())
    return np.sort(np.array(train, dtype=np.intp)), np.sort(np.array(val, dtype=np.intp))
