"""One-dimensional convolutional binary classifier over flow features.

The d feature values of a flow are treated as a length-d single-channel
sequence. Valid (unpadded) convolutions, ReLU, max-pooling, inverted
dropout and a sigmoid dense head are all implemented on numpy arrays,
with backpropagation written out by hand. The loss is focal loss with
per-class weights, composed multiplicatively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError
from .train_common import (
    Adam,
    EarlyStopper,
    TrainHistory,
    check_two_classes,
    stratified_validation_split,
)

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class FocalLossConfig:
    gamma: float = 2.0
    alpha: float = 0.25
    weight_benign: float = 1.0
    weight_malicious: float = 5.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError("focal gamma must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("focal alpha must lie in (0, 1)")
        if self.weight_benign <= 0 or self.weight_malicious <= 0:
            raise ConfigError("class weights must be positive")

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "weight_benign": self.weight_benign,
            "weight_malicious": self.weight_malicious,
        }


@dataclass(frozen=True)
class CnnArch:
    conv_filters: tuple[int, ...] = (32, 64)
    kernel_size: int = 3
    pool_size: int = 2
    pool_stride: int = 2
    dense_units: int = 64
    dropout: float = 0.3

    def to_dict(self) -> dict:
        return {
            "conv_filters": list(self.conv_filters),
            "kernel_size": self.kernel_size,
            "pool_size": self.pool_size,
            "pool_stride": self.pool_stride,
            "dense_units": self.dense_units,
            "dropout": self.dropout,
        }


@dataclass(frozen=True)
class CnnTrainConfig:
    arch: CnnArch = CnnArch()
    focal: FocalLossConfig = FocalLossConfig()
    lr: float = 0.001
    batch_size: int = 512
    max_epochs: int = 50
    patience: int = 3
    validation_fraction: float = 0.2
    tol: float = 1e-4
    seed: int = 42

    def to_dict(self) -> dict:
        return {
            "arch": self.arch.to_dict(),
            "focal": self.focal.to_dict(),
            "lr": self.lr,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "validation_fraction": self.validation_fraction,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass
class ConvBlock:
    kernels: np.ndarray  # (filters, in_channels, K)
    bias: np.ndarray  # (filters,)
    pool_size: int
    pool_stride: int


@dataclass
class Cnn1DModel:
    blocks: list[ConvBlock]
    dense_w: list[np.ndarray]
    dense_b: list[np.ndarray]
    dropout: float
    input_length: int

    def param_list(self) -> list[np.ndarray]:
        params = []
        for blk in self.blocks:
            params.extend([blk.kernels, blk.bias])
        for w, b in zip(self.dense_w, self.dense_b):
            params.extend([w, b])
        return params

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.param_list()]

    def restore_params(self, saved: list[np.ndarray]) -> None:
        for p, s in zip(self.param_list(), saved):
            p[...] = s

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.param_list()])

    def set_flat_params(self, theta: np.ndarray) -> None:
        pos = 0
        for p in self.param_list():
            p[...] = theta[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != theta.size:
            raise DataError("flat parameter vector has wrong length")


def conv_output_length(L: int, K: int) -> int:
    return L - K + 1


def pool_output_length(L: int, P: int, S: int) -> int:
    return (L - P) // S + 1


def conv1d(x, w, b: float = 0.0) -> np.ndarray:
    """Valid 1-D correlation of a sequence with one kernel plus bias."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] > x.shape[0]:
        raise DataError(f"kernel size {w.shape[0]} exceeds sequence length {x.shape[0]}")
    windows = sliding_window_view(x, w.shape[0])
    return windows @ w + b


def maxpool1d(z, P: int, S: int) -> np.ndarray:
    """Strided max over windows of size P."""
    z = np.asarray(z, dtype=np.float64)
    if P <= 0 or S <= 0:
        raise DataError("pool size and stride must be positive")
    if z.shape[0] < P:
        raise DataError(f"pool size {P} exceeds sequence length {z.shape[0]}")
    return sliding_window_view(z, P)[::S].max(axis=1)


def focal_loss(y, y_hat, cfg: FocalLossConfig = FocalLossConfig()) -> float:
    """Class-weighted focal loss, averaged over the batch."""
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(y_hat, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    if y.shape != p.shape:
        raise DataError("focal_loss: length mismatch")
    pt = np.where(y == 1.0, p, 1.0 - p)
    alpha_t = np.where(y == 1.0, cfg.alpha, 1.0 - cfg.alpha)
    w = np.where(y == 1.0, cfg.weight_malicious, cfg.weight_benign)
    return float(np.mean(-w * alpha_t * (1.0 - pt) ** cfg.gamma * np.log(pt)))


def _focal_grad_z(y: np.ndarray, p: np.ndarray, cfg: FocalLossConfig) -> np.ndarray:
    """d(mean focal loss)/dz for sigmoid output p = sigmoid(z), per sample."""
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    pt = np.where(y == 1.0, p, 1.0 - p)
    alpha_t = np.where(y == 1.0, cfg.alpha, 1.0 - cfg.alpha)
    w = np.where(y == 1.0, cfg.weight_malicious, cfg.weight_benign)
    sign = np.where(y == 1.0, 1.0, -1.0)
    dl_dpt = w * alpha_t * (1.0 - pt) ** (cfg.gamma - 1.0) * (
        cfg.gamma * np.log(pt) - (1.0 - pt) / pt
    )
    return dl_dpt * sign * pt * (1.0 - pt) / y.shape[0]


def init_cnn(input_length: int, arch: CnnArch, seed: int) -> Cnn1DModel:
    """Seeded He-uniform parameters for the configured block stack."""
    rng = np.random.default_rng(seed)
    blocks = []
    length, channels = input_length, 1
    for filters in arch.conv_filters:
        if length < arch.kernel_size:
            raise ConfigError(
                f"sequence length {length} shorter than kernel {arch.kernel_size}"
            )
        length = conv_output_length(length, arch.kernel_size)
        if length < arch.pool_size:
            raise ConfigError(f"sequence length {length} shorter than pool window")
        fan_in = channels * arch.kernel_size
        bound = np.sqrt(6.0 / fan_in)
        blocks.append(
            ConvBlock(
                kernels=rng.uniform(-bound, bound, (filters, channels, arch.kernel_size)),
                bias=np.zeros(filters),
                pool_size=arch.pool_size,
                pool_stride=arch.pool_stride,
            )
        )
        length = pool_output_length(length, arch.pool_size, arch.pool_stride)
        channels = filters

    flat = channels * length
    dense_w, dense_b = [], []
    for fan_in, fan_out in ((flat, arch.dense_units), (arch.dense_units, 1)):
        bound = np.sqrt(6.0 / fan_in)
        dense_w.append(rng.uniform(-bound, bound, (fan_out, fan_in)))
        dense_b.append(np.zeros(fan_out))
    return Cnn1DModel(
        blocks=blocks,
        dense_w=dense_w,
        dense_b=dense_b,
        dropout=arch.dropout,
        input_length=input_length,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _conv_forward(x: np.ndarray, blk: ConvBlock):
    windows = sliding_window_view(x, blk.kernels.shape[2], axis=2)
    z = np.einsum("bctk,fck->bft", windows, blk.kernels, optimize=True)
    z += blk.bias[None, :, None]
    return z, windows


def _pool_forward(r: np.ndarray, P: int, S: int):
    windows = sliding_window_view(r, P, axis=2)[:, :, ::S, :]
    out = windows.max(axis=3)
    argmax = windows.argmax(axis=3)  # first maximal index on ties
    return out, argmax


def forward(model: Cnn1DModel, X: np.ndarray, *, train: bool = False,
            rng: np.random.Generator | None = None):
    """Probabilities for each row; with train=True applies inverted dropout
    and returns (probs, cache) for backprop."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_length:
        raise DataError(f"expected {model.input_length} features, got {X.shape!r}")
    a = X[:, None, :]
    cache = {"block_in": [], "windows": [], "z": [], "relu": [], "argmax": []}
    for blk in model.blocks:
        cache["block_in"].append(a)
        z, windows = _conv_forward(a, blk)
        r = np.maximum(z, 0.0)
        a, am = _pool_forward(r, blk.pool_size, blk.pool_stride)
        cache["windows"].append(windows)
        cache["z"].append(z)
        cache["relu"].append(r)
        cache["argmax"].append(am)

    cache["flat_shape"] = a.shape
    h = a.reshape(a.shape[0], -1)

    masks = []
    if train and model.dropout > 0.0:
        if rng is None:
            raise ConfigError("training-mode forward needs an RNG for dropout")
        keep = 1.0 - model.dropout
        m = (rng.random(h.shape) >= model.dropout) / keep
        h = h * m
        masks.append(m)
    cache["h0"] = h

    z1 = h @ model.dense_w[0].T + model.dense_b[0]
    a1 = np.maximum(z1, 0.0)
    cache["z1"] = z1
    a1_dropped = a1
    if train and model.dropout > 0.0:
        keep = 1.0 - model.dropout
        m = (rng.random(a1.shape) >= model.dropout) / keep
        a1_dropped = a1 * m
        masks.append(m)
    cache["a1"] = a1
    cache["a1_dropped"] = a1_dropped
    cache["masks"] = masks

    z2 = a1_dropped @ model.dense_w[1].T + model.dense_b[1]
    p = _sigmoid(z2[:, 0])
    if train:
        return p, cache
    return p


def loss_and_grads(model: Cnn1DModel, X: np.ndarray, y: np.ndarray,
                   focal: FocalLossConfig, rng: np.random.Generator | None = None,
                   *, dropout: bool = True):
    """Focal loss plus gradients for every parameter, in param_list() order."""
    use_rng = rng if (dropout and model.dropout > 0.0) else None
    saved_dropout = model.dropout
    if not dropout:
        model.dropout = 0.0
    try:
        p, cache = forward(model, X, train=True, rng=use_rng)
    finally:
        model.dropout = saved_dropout

    y = np.asarray(y, dtype=np.float64)
    loss = focal_loss(y, p, focal)
    dz2 = _focal_grad_z(y, p, focal)[:, None]

    grads: dict[int, np.ndarray] = {}
    dW2 = dz2.T @ cache["a1_dropped"]
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ model.dense_w[1]
    if cache["masks"]:
        da1 = da1 * cache["masks"][1]
    dz1 = da1 * (cache["z1"] > 0)
    dW1 = dz1.T @ cache["h0"]
    db1 = dz1.sum(axis=0)
    dh = dz1 @ model.dense_w[0]
    if cache["masks"]:
        dh = dh * cache["masks"][0]

    da = dh.reshape(cache["flat_shape"])
    block_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for bi in range(len(model.blocks) - 1, -1, -1):
        blk = model.blocks[bi]
        r = cache["relu"][bi]
        am = cache["argmax"][bi]
        B, F, T = da.shape
        dr = np.zeros_like(r)
        pos = np.arange(T)[None, None, :] * blk.pool_stride + am
        np.add.at(
            dr,
            (np.arange(B)[:, None, None], np.arange(F)[None, :, None], pos),
            da,
        )
        dz = dr * (cache["z"][bi] > 0)
        dk = np.einsum("bft,bctk->fck", dz, cache["windows"][bi], optimize=True)
        db = dz.sum(axis=(0, 2))
        block_grads.append((dk, db))
        if bi > 0:
            K = blk.kernels.shape[2]
            dz_pad = np.pad(dz, ((0, 0), (0, 0), (K - 1, K - 1)))
            win = sliding_window_view(dz_pad, K, axis=2)
            da = np.einsum("bftk,fck->bct", win, blk.kernels[:, :, ::-1], optimize=True)

    ordered: list[np.ndarray] = []
    for dk, db in reversed(block_grads):
        ordered.extend([dk, db])
    ordered.extend([dW1, db1, dW2, db2])
    return loss, ordered


def score(model: Cnn1DModel, X: np.ndarray) -> np.ndarray:
    """Inference probabilities (dropout disabled)."""
    return forward(model, X, train=False)


def train_cnn(
    X: np.ndarray, y: np.ndarray, cfg: CnnTrainConfig = CnnTrainConfig()
) -> tuple[Cnn1DModel, TrainHistory]:
    """Train with seeded shuffling/dropout, focal loss, and early stopping."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise DataError("X and y row counts differ")
    check_two_classes(y)

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = stratified_validation_split(y, cfg.validation_fraction, rng)
    X_tr, y_tr = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    model = init_cnn(X.shape[1], cfg.arch, cfg.seed)
    opt = Adam(model.param_list(), cfg.lr)
    stopper = EarlyStopper(cfg.patience, cfg.tol)
    history = TrainHistory()
    best = model.copy_params()

    n = X_tr.shape[0]
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(model, X_tr[batch], y_tr[batch], cfg.focal, rng)
            opt.step(grads)
            total += loss * batch.size
        history.train_loss.append(total / n)
        val_loss = focal_loss(y_val, score(model, X_val), cfg.focal)
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
    model.restore_params(best)
    return model, history
