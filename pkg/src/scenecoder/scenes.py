"""Scene records: JSONL ingestion, serialization, splitting and rebalancing.

A scene is one street-view image's metadata: a land-use label, pixel
dimensions, optional geo-tag and a list of detected (or annotated) building
bounding boxes. Box geometry is stored normalized to [0, 1]; pixel-unit
input files are divided by width/height at parse time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable

import numpy as np

from .taxonomy import (
    BUILDING_CATEGORIES,
    LANDUSE_CATEGORIES,
    NUM_LANDUSE_CATEGORIES,
    building_index,
    landuse_index,
)

# slack for x+w <= 1 checks; parse clamps overshoot up to this amount
EDGE_EPS = 1e-6


class SceneValidationError(ValueError):
    """A record violates a type invariant."""


@dataclass(frozen=True)
class BBox:
    """One detected or annotated building, normalized geometry."""

    category: int
    score: float
    x: float
    y: float
    w: float
    h: float

    def validate(self) -> None:
        if not 0 <= self.category < len(BUILDING_CATEGORIES):
            raise SceneValidationError(f"category index out of range: {self.category}")
        if not 0.0 <= self.score <= 1.0:
            raise SceneValidationError(f"score out of range: {self.score}")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise SceneValidationError(f"degenerate box size: w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0:
            raise SceneValidationError(f"negative corner: x={self.x} y={self.y}")
        if self.x + self.w > 1.0 + EDGE_EPS or self.y + self.h > 1.0 + EDGE_EPS:
            raise SceneValidationError(
                f"box exceeds image bounds: x+w={self.x + self.w} y+h={self.y + self.h}"
            )

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class SceneRecord:
    """One street-view image's metadata."""

    scene_id: str
    landuse: int | None
    width: int
    height: int
    boxes: tuple[BBox, ...]
    lat: float | None = None
    lon: float | None = None

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise SceneValidationError(
                f"non-positive image size: {self.width}x{self.height}"
            )
        if self.landuse is not None and not 0 <= self.landuse < NUM_LANDUSE_CATEGORIES:
            raise SceneValidationError(f"landuse index out of range: {self.landuse}")
        if self.lat is not None and not -90.0 <= self.lat <= 90.0:
            raise SceneValidationError(f"latitude out of range: {self.lat}")
        if self.lon is not None and not -180.0 <= self.lon <= 180.0:
            raise SceneValidationError(f"longitude out of range: {self.lon}")
        for box in self.boxes:
            box.validate()


@dataclass
class ParseResult:
    records: list[SceneRecord]
    errors: list[str] = field(default_factory=list)

    @property
    def num_rejected(self) -> int:
        return len(self.errors)


@dataclass
class DatasetSplit:
    train: list[SceneRecord]
    val: list[SceneRecord]
    test: list[SceneRecord]
    seed: int


def _box_from_json(obj: dict, width: int, height: int, units: str) -> BBox:
    cat = building_index(str(obj["category"]))
    x, y, w, h = (float(obj[k]) for k in ("x", "y", "w", "h"))
    if units == "pixel":
        x, w = x / width, w / width
        y, h = y / height, h / height
    # tolerate float-division overshoot at the far edge
    if 1.0 < x + w <= 1.0 + EDGE_EPS:
        w = 1.0 - x
    if 1.0 < y + h <= 1.0 + EDGE_EPS:
        h = 1.0 - y
    box = BBox(category=cat, score=float(obj["score"]), x=x, y=y, w=w, h=h)
    box.validate()
    return box


def scene_from_json(obj: dict) -> SceneRecord:
    units = obj.get("units", "normalized")
    if units not in ("pixel", "normalized"):
        raise SceneValidationError(f"unknown units: {units!r}")
    width = int(obj["width"])
    height = int(obj["height"])
    if width <= 0 or height <= 0:
        raise SceneValidationError(f"non-positive image size: {width}x{height}")
    landuse_name = obj.get("landuse")
    record = SceneRecord(
        scene_id=str(obj["scene_id"]),
        landuse=None if landuse_name is None else landuse_index(str(landuse_name)),
        width=width,
        height=height,
        lat=None if obj.get("lat") is None else float(obj["lat"]),
        lon=None if obj.get("lon") is None else float(obj["lon"]),
        boxes=tuple(_box_from_json(b, width, height, units) for b in obj["boxes"]),
    )
    record.validate()
    return record


def scene_to_json(record: SceneRecord) -> dict:
    return {
        "scene_id": record.scene_id,
        "landuse": None if record.landuse is None else LANDUSE_CATEGORIES[record.landuse],
        "width": record.width,
        "height": record.height,
        "lat": record.lat,
        "lon": record.lon,
        "units": "normalized",
        "boxes": [
            {
                "category": BUILDING_CATEGORIES[b.category],
                "score": b.score,
                "x": b.x,
                "y": b.y,
                "w": b.w,
                "h": b.h,
            }
            for b in record.boxes
        ],
    }


def parse_scenes(stream: IO[str] | Iterable[str]) -> ParseResult:
    """Parse line-delimited scene JSON, rejecting (and counting) bad lines."""
    result = ParseResult(records=[])
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            result.records.append(scene_from_json(obj))
        except (ValueError, KeyError, TypeError) as exc:
            result.errors.append(f"line {lineno}: {exc}")
    return result


def load_scenes(path: str) -> ParseResult:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenes(fh)


def write_scenes(records: Iterable[SceneRecord], fh: IO[str]) -> None:
    for record in records:
        fh.write(json.dumps(scene_to_json(record)) + "\n")


def save_scenes(records: Iterable[SceneRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_scenes(records, fh)


def split_dataset(
    records: list[SceneRecord],
    seed: int,
    test_frac: float = 0.25,
    val_frac_of_trainval: float = 0.1,
) -> DatasetSplit:
    """Stratified per-category train/val/test split, deterministic per seed."""
    if any(r.landuse is None for r in records):
        raise ValueError("split_dataset requires every record to be labeled")
    rng = np.random.default_rng(seed)
    by_cat: dict[int, list[SceneRecord]] = {}
    for r in records:
        by_cat.setdefault(r.landuse, []).append(r)
    for cat, group in sorted(by_cat.items()):
        if len(group) < 3:
            raise ValueError(
                f"cannot stratify: category {LANDUSE_CATEGORIES[cat]!r} has only "
                f"{len(group)} samples"
            )
    train: list[SceneRecord] = []
    val: list[SceneRecord] = []
    test: list[SceneRecord] = []
    for cat in sorted(by_cat):
        group = list(by_cat[cat])
        order = rng.permutation(len(group))
        group = [group[i] for i in order]
        n_test = int(round(len(group) * test_frac))
        test_part, trainval = group[:n_test], group[n_test:]
        n_val = int(round(len(trainval) * val_frac_of_trainval))
        val_part, train_part = trainval[:n_val], trainval[n_val:]
        test.extend(test_part)
        val.extend(val_part)
        train.extend(train_part)
    return DatasetSplit(train=train, val=val, test=test, seed=seed)


def rebalance(
    records: list[SceneRecord],
    factors: dict[int, float],
    seed: int,
) -> list[SceneRecord]:
    """Oversample minority land-use categories by the given factors.

    Integer factor parts repeat every scene; the fractional remainder is
    realized by seeded sampling without replacement within the category.
    """
    for cat, f in factors.items():
        if f < 1.0:
            raise ValueError(
                f"rebalance factor must be >= 1, got {f} for category {cat}"
            )
    rng = np.random.default_rng(seed)
    out: list[SceneRecord] = []
    by_cat: dict[int, list[SceneRecord]] = {}
    for r in records:
        by_cat.setdefault(r.landuse, []).append(r)
    for cat in sorted(by_cat):
        group = by_cat[cat]
        f = factors.get(cat, 1.0)
        whole = int(math.floor(f))
        target = int(round(len(group) * f))
        out.extend(group * whole)
        remainder = target - len(group) * whole
        if remainder > 0:
            picks = rng.choice(len(group), size=remainder, replace=False)
            out.extend(group[i] for i in sorted(picks))
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def with_boxes(record: SceneRecord, boxes: Iterable[BBox]) -> SceneRecord:
    return replace(record, boxes=tuple(boxes))
