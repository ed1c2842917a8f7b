"""Context encoders: bounding boxes -> fixed-length semantic-vector sequences.

Two encodings are provided. The co-occurrence encoding keeps only which
building categories appear together (vectors ordered by descending score).
The layout encoding additionally captures spatial arrangement: the box
maximizing w*h*score leads the sequence and the rest follow by ascending
centroid distance to it. Both pad with all-zero vectors to a fixed length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .scenes import BBox
from .taxonomy import NUM_BUILDING_CATEGORIES

EncoderKind = Literal["cooccurrence", "layout"]


@dataclass(frozen=True)
class EncoderConfig:
    sequence_length: int = 25
    include_threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.sequence_length < 1:
            raise ValueError("sequence_length must be >= 1")
        if not 0.0 <= self.include_threshold < 1.0:
            raise ValueError("include_threshold must be in [0, 1)")


@dataclass(frozen=True)
class SceneMetadata:
    """Fixed-length sequence of semantic vectors for one scene."""

    sequence: np.ndarray  # (l, 8) float64
    encoder_kind: EncoderKind

    @property
    def length(self) -> int:
        return self.sequence.shape[0]


def semantic_vector(box: BBox) -> np.ndarray:
    """One-hot-shaped vector carrying the box's confidence at its category."""
    v = np.zeros(NUM_BUILDING_CATEGORIES, dtype=np.float64)
    v[box.category] = box.score
    return v


def _pad_sequence(
    vectors: Sequence[np.ndarray], length: int, kind: EncoderKind
) -> SceneMetadata:
    seq = np.zeros((length, NUM_BUILDING_CATEGORIES), dtype=np.float64)
    for i, v in enumerate(vectors):
        seq[i] = v
    seq.flags.writeable = False
    return SceneMetadata(sequence=seq, encoder_kind=kind)


def encode_cooccurrence(
    boxes: Iterable[BBox], config: EncoderConfig = EncoderConfig()
) -> SceneMetadata:
    """Score-ordered set encoding; drops the lowest scores past the length."""
    kept = [
        (i, b) for i, b in enumerate(boxes) if b.score >= config.include_threshold
    ]
    # descending score, ties by ascending category then input order
    kept.sort(key=lambda ib: (-ib[1].score, ib[1].category, ib[0]))
    kept = kept[: config.sequence_length]
    return _pad_sequence(
        [semantic_vector(b) for _, b in kept], config.sequence_length, "cooccurrence"
    )


def area_score(box: BBox) -> float:
    return box.w * box.h * box.score


def encode_layout(
    boxes: Iterable[BBox], config: EncoderConfig = EncoderConfig()
) -> SceneMetadata:
    """Leader-plus-nearest sequence encoding of the box arrangement."""
    kept = [
        (i, b) for i, b in enumerate(boxes) if b.score >= config.include_threshold
    ]
    if not kept:
        return _pad_sequence([], config.sequence_length, "layout")
    # leader: max area score; ties by higher score then input order
    leader_idx, leader = max(kept, key=lambda ib: (area_score(ib[1]), ib[1].score, -ib[0]))
    lx, ly = leader.centroid
    rest = [(i, b) for i, b in kept if i != leader_idx]

    def distance_key(ib: tuple[int, BBox]) -> tuple[float, float, int]:
        i, b = ib
        cx, cy = b.centroid
        d = math.hypot(cx - lx, cy - ly)
        # ascending distance, ties by descending area score then input order
        return (d, -area_score(b), i)

    rest.sort(key=distance_key)
    ordered = [leader] + [b for _, b in rest[: config.sequence_length - 1]]
    return _pad_sequence(
        [semantic_vector(b) for b in ordered], config.sequence_length, "layout"
    )


def encode(
    boxes: Iterable[BBox], kind: EncoderKind, config: EncoderConfig = EncoderConfig()
) -> SceneMetadata:
    if kind == "cooccurrence":
        return encode_cooccurrence(boxes, config)
    if kind == "layout":
        return encode_layout(boxes, config)
    raise ValueError(f"unknown encoder kind: {kind!r}")


def reverse_for_unidirectional(metadata: SceneMetadata) -> SceneMetadata:
    """Reverse the sequence so padding leads and the leader is consumed last."""
    seq = metadata.sequence[::-1].copy()
    seq.flags.writeable = False
    return SceneMetadata(sequence=seq, encoder_kind=metadata.encoder_kind)
