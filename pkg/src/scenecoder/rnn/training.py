"""Training loop (mini-batch Adam with step decay) and gradient verification."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..metrics import confusion, macro_metrics
from .model import (
    ModelConfig,
    ModelParams,
    backward_batch,
    cross_entropy_batch,
    forward_batch,
    init_params,
    param_names,
    softmax,
)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    decay_factor: float = 0.1
    decay_every: int = 10
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, epochs and batch_size must be positive")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_macro_f1: float
    val_loss: float
    val_macro_f1: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochStats]
    best_epoch: int


class Adam:
    def __init__(self, params: ModelParams, config: TrainConfig):
        self.config = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: ModelParams, grads: dict[str, np.ndarray], lr: float) -> None:
        c = self.config
        self.t += 1
        bias1 = 1.0 - c.beta1**self.t
        bias2 = 1.0 - c.beta2**self.t
        for k in params:
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g
            m_hat = self.m[k] / bias1
            v_hat = self.v[k] / bias2
            params[k] -= lr * m_hat / (np.sqrt(v_hat) + c.epsilon)


def _evaluate(params, X, y, config: ModelConfig, batch_size: int):
    total_loss = 0.0
    preds = np.empty(len(y), dtype=np.int64)
    for start in range(0, len(y), batch_size):
        sl = slice(start, start + batch_size)
        logits, _ = forward_batch(params, X[sl], config)
        batch_loss, _ = cross_entropy_batch(logits, y[sl])
        total_loss += batch_loss * (sl.indices(len(y))[1] - start)
        preds[sl] = np.argmax(logits, axis=1)
    cm = confusion(preds.tolist(), y.tolist(), config.num_classes)
    _, _, f1 = macro_metrics(cm)
    return total_loss / len(y), f1


def train_arrays(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> TrainResult:
    """Train on pre-encoded sequences; returns best-validation-F1 parameters.

    Fully deterministic per seed: fixed initialization, fixed per-epoch
    shuffles, single-threaded accumulation.
    """
    if len(y_train) == 0:
        raise ValueError("empty training set")
    params = init_params(model_config, train_config.seed)
    optimizer = Adam(params, train_config)
    rng = np.random.default_rng(train_config.seed + 1)
    history: list[EpochStats] = []
    best_f1 = -1.0
    best_epoch = -1
    best_params = copy.deepcopy(params)
    n = len(y_train)
    bs = train_config.batch_size
    for epoch in range(train_config.epochs):
        lr = train_config.learning_rate * (
            train_config.decay_factor ** (epoch // train_config.decay_every)
        )
        order = rng.permutation(n)
        epoch_loss = 0.0
        train_preds = np.empty(n, dtype=np.int64)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            logits, cache = forward_batch(params, X_train[idx], model_config)
            batch_loss, dlogits = cross_entropy_batch(logits, y_train[idx])
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(epoch)
            grads = backward_batch(params, cache, dlogits, model_config)
            optimizer.step(params, grads, lr)
            epoch_loss += batch_loss * len(idx)
            train_preds[idx] = np.argmax(logits, axis=1)
        train_cm = confusion(train_preds.tolist(), y_train.tolist(),
                             model_config.num_classes)
        _, _, train_f1 = macro_metrics(train_cm)
        if len(y_val) > 0:
            val_loss, val_f1 = _evaluate(params, X_val, y_val, model_config, bs)
        else:
            val_loss, val_f1 = epoch_loss / n, train_f1
        history.append(
            EpochStats(
                epoch=epoch,
                train_loss=epoch_loss / n,
                train_macro_f1=train_f1,
                val_loss=val_loss,
                val_macro_f1=val_f1,
            )
        )
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_params = copy.deepcopy(params)
    return TrainResult(params=best_params, history=history, best_epoch=best_epoch)


def flatten_params(params: ModelParams) -> dict[str, list]:
    return {k: v.ravel().tolist() for k, v in params.items()}


def analytic_gradients(params, X, y, config: ModelConfig):
    logits, cache = forward_batch(params, X, config)
    loss, dlogits = cross_entropy_batch(logits, y)
    return loss, backward_batch(params, cache, dlogits, config)


def numeric_loss(params, X, y, config: ModelConfig) -> float:
    logits, _ = forward_batch(params, X, config)
    loss, _ = cross_entropy_batch(logits, y)
    return float(loss)


def grad_check(
    model_config: ModelConfig,
    seed: int = 0,
    epsilon: float = 1e-5,
    batch_size: int = 2,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    rng = np.random.default_rng(seed)
    params = init_params(model_config, seed)
    X = rng.uniform(0.0, 1.0, size=(batch_size, model_config.sequence_length,
                                    model_config.input_size))
    y = rng.integers(0, model_config.num_classes, size=batch_size)
    _, grads = analytic_gradients(params, X, y, model_config)
    worst = 0.0
    for name in param_names(model_config):
        arr = params[name]
        g = grads[name]
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + epsilon
            up = numeric_loss(params, X, y, model_config)
            arr[idx] = orig - epsilon
            down = numeric_loss(params, X, y, model_config)
            arr[idx] = orig
            numeric = (up - down) / (2.0 * epsilon)
            # floor guards near-zero gradients against FD rounding noise
            denom = max(abs(numeric) + abs(g[idx]), 1e-3)
            worst = max(worst, abs(numeric - g[idx]) / denom)
            it.iternext()
    return worst


def grad_check_all(
    seed: int = 0,
    epsilon: float = 1e-5,
    sequence_length: int = 5,
    hidden_size: int = 8,
) -> dict[tuple[str, str], float]:
    """Gradient check over every cell/architecture combination."""
    results = {}
    for cell in ("simple", "gru", "lstm"):
        for arch in ("uni_last_concat", "bi_all_concat"):
            config = ModelConfig(
                cell=cell,
                architecture=arch,
                hidden_size=hidden_size,
                sequence_length=sequence_length,
            )
            results[(cell, arch)] = grad_check(config, seed=seed, epsilon=epsilon)
    return results
