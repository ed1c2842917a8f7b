"""Glue between scenes, encoders and the classifier: array preparation,
scene-level prediction and JSON checkpoints."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .encoder import EncoderConfig, EncoderKind, encode, reverse_for_unidirectional
from .rnn.model import (
    ModelConfig,
    ModelParams,
    Prediction,
    forward_batch,
    param_names,
    predict as predict_sequence,
    softmax,
)
from .rnn.training import EpochStats, TrainConfig, TrainResult, train_arrays
from .scenes import SceneRecord


def encode_scenes(
    records: list[SceneRecord],
    kind: EncoderKind,
    encoder_config: EncoderConfig,
) -> np.ndarray:
    """Stack per-scene metadata into an (N, l, 8) array."""
    return np.stack(
        [encode(list(r.boxes), kind, encoder_config).sequence for r in records]
    )


def prepare_inputs(sequences: np.ndarray, model_config: ModelConfig) -> np.ndarray:
    """Reverse sequences for the unidirectional architecture (caller contract
    of the forward pass); bidirectional models consume the forward order."""
    if model_config.architecture == "uni_last_concat":
        return sequences[:, ::-1].copy()
    return sequences


def labels_array(records: list[SceneRecord]) -> np.ndarray:
    if any(r.landuse is None for r in records):
        raise ValueError("all records must be labeled")
    return np.array([r.landuse for r in records], dtype=np.int64)


def train_on_scenes(
    train_records: list[SceneRecord],
    val_records: list[SceneRecord],
    model_config: ModelConfig,
    train_config: TrainConfig,
    encoder_kind: EncoderKind,
    encoder_config: EncoderConfig | None = None,
) -> TrainResult:
    encoder_config = encoder_config or EncoderConfig(
        sequence_length=model_config.sequence_length
    )
    X_train = prepare_inputs(
        encode_scenes(train_records, encoder_kind, encoder_config), model_config
    )
    y_train = labels_array(train_records)
    if val_records:
        X_val = prepare_inputs(
            encode_scenes(val_records, encoder_kind, encoder_config), model_config
        )
        y_val = labels_array(val_records)
    else:
        X_val = np.zeros((0,) + X_train.shape[1:])
        y_val = np.zeros(0, dtype=np.int64)
    return train_arrays(X_train, y_train, X_val, y_val, model_config, train_config)


def predict_scene(
    params: ModelParams,
    record: SceneRecord,
    model_config: ModelConfig,
    encoder_kind: EncoderKind,
    encoder_config: EncoderConfig | None = None,
) -> Prediction:
    encoder_config = encoder_config or EncoderConfig(
        sequence_length=model_config.sequence_length
    )
    metadata = encode(list(record.boxes), encoder_kind, encoder_config)
    if model_config.architecture == "uni_last_concat":
        metadata = reverse_for_unidirectional(metadata)
    return predict_sequence(params, metadata.sequence, model_config)


def predict_scenes(
    params: ModelParams,
    records: list[SceneRecord],
    model_config: ModelConfig,
    encoder_kind: EncoderKind,
    encoder_config: EncoderConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched prediction; returns (labels (N,), probs (N, 4))."""
    encoder_config = encoder_config or EncoderConfig(
        sequence_length=model_config.sequence_length
    )
    X = prepare_inputs(
        encode_scenes(records, encoder_kind, encoder_config), model_config
    )
    probs = np.empty((len(records), model_config.num_classes))
    for start in range(0, len(records), 256):
        logits, _ = forward_batch(params, X[start : start + 256], model_config)
        probs[start : start + 256] = softmax(logits)
    return np.argmax(probs, axis=1), probs


@dataclass
class Checkpoint:
    model_config: ModelConfig
    encoder_kind: EncoderKind
    encoder_config: EncoderConfig
    params: ModelParams
    seed: int
    history: list[EpochStats]
    best_epoch: int


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    doc = {
        "model_config": asdict(ckpt.model_config),
        "encoder_kind": ckpt.encoder_kind,
        "encoder_config": asdict(ckpt.encoder_config),
        "seed": ckpt.seed,
        "best_epoch": ckpt.best_epoch,
        "history": [asdict(h) for h in ckpt.history],
        "params": {
            name: {
                "shape": list(ckpt.params[name].shape),
                "data": ckpt.params[name].ravel().tolist(),  # row-major
            }
            for name in param_names(ckpt.model_config)
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    model_config = ModelConfig(**doc["model_config"])
    params = {
        name: np.array(block["data"], dtype=np.float64).reshape(block["shape"])
        for name, block in doc["params"].items()
    }
    return Checkpoint(
        model_config=model_config,
        encoder_kind=doc["encoder_kind"],
        encoder_config=EncoderConfig(**doc["encoder_config"]),
        params=params,
        seed=doc["seed"],
        history=[EpochStats(**h) for h in doc["history"]],
        best_epoch=doc["best_epoch"],
    )
