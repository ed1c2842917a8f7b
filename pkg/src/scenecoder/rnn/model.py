"""Recurrent scene classifier: parameters, forward pass and backpropagation.

Two architectures over two stacked recurrent layers:

  uni_last_concat: single direction; the top layer's hidden state at every
      timestep is concatenated (l*hidden features) before the projection.
      Callers must feed sequences in reverse order so the recurrence ends
      on the leading (most salient) box.
  bi_all_concat: both directions in both layers; the final consumed hidden
      state of each direction of each layer is concatenated (4*hidden).

Everything runs in float64 for exact gradient verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import kernels

CellKind = Literal["simple", "gru", "lstm"]
Architecture = Literal["uni_last_concat", "bi_all_concat"]

GATE_BLOCKS = {"simple": 1, "gru": 3, "lstm": 4}


@dataclass(frozen=True)
class ModelConfig:
    cell: CellKind = "simple"
    architecture: Architecture = "uni_last_concat"
    input_size: int = 8
    hidden_size: int = 16
    num_layers: int = 2
    num_classes: int = 4
    sequence_length: int = 25

    def __post_init__(self) -> None:
        if self.cell not in GATE_BLOCKS:
            raise ValueError(f"unknown cell: {self.cell!r}")
        if self.architecture not in ("uni_last_concat", "bi_all_concat"):
            raise ValueError(f"unknown architecture: {self.architecture!r}")
        for name in ("input_size", "hidden_size", "num_layers", "num_classes",
                     "sequence_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def directions(self) -> tuple[str, ...]:
        return ("f",) if self.architecture == "uni_last_concat" else ("f", "b")

    @property
    def feature_size(self) -> int:
        if self.architecture == "uni_last_concat":
            return self.sequence_length * self.hidden_size
        return 2 * self.num_layers * self.hidden_size

    def layer_input_size(self, layer: int) -> int:
        if layer == 0:
            return self.input_size
        return self.hidden_size * len(self.directions)


ModelParams = dict[str, np.ndarray]


@dataclass(frozen=True)
class Prediction:
    probs: np.ndarray  # (4,)
    label: int
    logits: np.ndarray  # (4,)


def param_names(config: ModelConfig) -> list[str]:
    names = []
    for layer in range(config.num_layers):
        for d in config.directions:
            names.append(f"l{layer}_{d}_W")
            names.append(f"l{layer}_{d}_b")
    names.append("proj_W")
    names.append("proj_b")
    return names


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Uniform fan-in initialization for weights, zeros for biases."""
    rng = np.random.default_rng(seed)
    gates = GATE_BLOCKS[config.cell]
    H = config.hidden_size
    params: ModelParams = {}
    for layer in range(config.num_layers):
        I = config.layer_input_size(layer)
        bound = 1.0 / np.sqrt(H + I)
        for d in config.directions:
            params[f"l{layer}_{d}_W"] = rng.uniform(
                -bound, bound, size=(gates * H, H + I)
            )
            params[f"l{layer}_{d}_b"] = np.zeros(gates * H)
    F = config.feature_size
    bound = 1.0 / np.sqrt(F)
    params["proj_W"] = rng.uniform(-bound, bound, size=(config.num_classes, F))
    params["proj_b"] = np.zeros(config.num_classes)
    return params


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _run_layer(config, params, layer, direction, X):
    fwd = kernels.FORWARD[config.cell]
    W = params[f"l{layer}_{direction}_W"]
    b = params[f"l{layer}_{direction}_b"]
    if direction == "b":
        cache = fwd(W, b, X[:, ::-1].copy())
        Hseq = cache[0][:, ::-1].copy()
        return Hseq, cache
    cache = fwd(W, b, X)
    return cache[0], cache


def forward_batch(params: ModelParams, X: np.ndarray, config: ModelConfig):
    """Batched forward pass. X is (batch, l, input_size), already reversed
    for the unidirectional architecture. Returns (logits, cache)."""
    if X.ndim != 3 or X.shape[1] != config.sequence_length:
        raise ValueError(
            f"expected input of shape (B, {config.sequence_length}, "
            f"{config.input_size}), got {X.shape}"
        )
    if X.shape[2] != config.input_size:
        raise ValueError(f"input feature size {X.shape[2]} != {config.input_size}")
    B = X.shape[0]
    cache: dict = {"X": X, "layers": {}}
    layer_input = X
    finals = []
    for layer in range(config.num_layers):
        outs = {}
        for d in config.directions:
            Hseq, kcache = _run_layer(config, params, layer, d, layer_input)
            outs[d] = (Hseq, kcache)
        cache["layers"][layer] = {"input": layer_input, "outs": outs}
        if config.architecture == "uni_last_concat":
            layer_input = outs["f"][0]
        else:
            layer_input = np.concatenate([outs["f"][0], outs["b"][0]], axis=2)
            # final consumed state: forward = last timestep, backward = first
            finals.append(outs["f"][0][:, -1])
            finals.append(outs["b"][0][:, 0])
    if config.architecture == "uni_last_concat":
        feature = layer_input.reshape(B, -1)
    else:
        feature = np.concatenate(finals, axis=1)
    logits = feature @ params["proj_W"].T + params["proj_b"]
    cache["feature"] = feature
    return logits, cache


def backward_batch(
    params: ModelParams,
    cache: dict,
    dlogits: np.ndarray,
    config: ModelConfig,
) -> dict[str, np.ndarray]:
    """Gradients of a loss w.r.t. every parameter given d(loss)/d(logits)."""
    grads: dict[str, np.ndarray] = {}
    feature = cache["feature"]
    grads["proj_W"] = dlogits.T @ feature
    grads["proj_b"] = dlogits.sum(axis=0)
    dfeature = dlogits @ params["proj_W"]
    B = feature.shape[0]
    H = config.hidden_size
    T = config.sequence_length

    bwd = kernels.BACKWARD[config.cell]

    if config.architecture == "uni_last_concat":
        d_upper = dfeature.reshape(B, T, H)
        for layer in range(config.num_layers - 1, -1, -1):
            lc = cache["layers"][layer]
            Hseq, kcache = lc["outs"]["f"]
            W = params[f"l{layer}_f_W"]
            b = params[f"l{layer}_f_b"]
            dW, db, dX = bwd(W, b, lc["input"], kcache, d_upper)
            grads[f"l{layer}_f_W"] = dW
            grads[f"l{layer}_f_b"] = db
            d_upper = dX
        return grads

    # bi_all_concat: dfeature splits into per-layer, per-direction final states
    chunks = dfeature.reshape(B, 2 * config.num_layers, H)
    d_layer_out: dict[int, dict[str, np.ndarray]] = {
        layer: {d: np.zeros((B, T, H)) for d in ("f", "b")}
        for layer in range(config.num_layers)
    }
    for layer in range(config.num_layers):
        d_layer_out[layer]["f"][:, -1] += chunks[:, 2 * layer]
        d_layer_out[layer]["b"][:, 0] += chunks[:, 2 * layer + 1]
    for layer in range(config.num_layers - 1, -1, -1):
        lc = cache["layers"][layer]
        dX_total = np.zeros_like(lc["input"])
        for d in ("f", "b"):
            Hseq, kcache = lc["outs"][d]
            W = params[f"l{layer}_{d}_W"]
            bias = params[f"l{layer}_{d}_b"]
            dH = d_layer_out[layer][d]
            if d == "b":
                dW, db, dXr = bwd(
                    W, bias, lc["input"][:, ::-1].copy(), kcache, dH[:, ::-1].copy()
                )
                dX = dXr[:, ::-1]
            else:
                dW, db, dX = bwd(W, bias, lc["input"], kcache, dH)
            grads[f"l{layer}_{d}_W"] = dW
            grads[f"l{layer}_{d}_b"] = db
            dX_total += dX
        if layer > 0:
            d_layer_out[layer - 1]["f"] += dX_total[:, :, :H]
            d_layer_out[layer - 1]["b"] += dX_total[:, :, H:]
    return grads


def cross_entropy_batch(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over a batch plus d(loss)/d(logits)."""
    B = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    losses = logsumexp - logits[np.arange(B), labels]
    probs = softmax(logits)
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    return losses.mean(), dlogits


def forward(params: ModelParams, sequence: np.ndarray, config: ModelConfig):
    """Single-sequence forward pass; returns (Prediction, cache)."""
    logits, cache = forward_batch(params, sequence[None, :, :], config)
    logits = logits[0]
    probs = softmax(logits)
    return Prediction(probs=probs, label=int(np.argmax(probs)), logits=logits), cache


def predict(params: ModelParams, sequence: np.ndarray, config: ModelConfig) -> Prediction:
    pred, _ = forward(params, sequence, config)
    return pred


def loss(prediction: Prediction, label: int) -> float:
    """Cross-entropy of one prediction, computed from logits for stability."""
    logits = prediction.logits
    m = logits.max()
    return float(np.log(np.exp(logits - m).sum()) + m - logits[label])
