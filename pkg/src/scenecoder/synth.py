"""Synthetic scene generation: perfect-detector ground truth, detector-noise
simulation and the tamper (sequential relabeling) probe.

Templates describe one land-use category: which building categories occur,
how many boxes a scene holds and how they are laid out. Generated boxes
carry score 1.0, so generated datasets double as perfect-detector outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .scenes import BBox, SceneRecord
from .taxonomy import (
    BUILDING_CATEGORIES,
    LANDUSE_CATEGORIES,
    NUM_BUILDING_CATEGORIES,
    building_index,
    landuse_index,
)

LayoutStyle = str  # "row" | "cluster" | "single_dominant"

DEFAULT_SIZE_RANGE = (0.1, 0.25)
DEFAULT_ASPECT_RANGE = (0.7, 1.4)
MIN_BOX_SIDE = 0.01


class PlacementError(RuntimeError):
    """Too many boxes for the requested layout."""


@dataclass(frozen=True)
class SceneTemplate:
    landuse: int
    building_mix: dict[int, float]
    count_range: tuple[int, int] = (3, 8)
    layout_style: LayoutStyle = "cluster"
    size_range: dict[int, tuple[float, float]] = field(default_factory=dict)
    aspect_range: dict[int, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        total = sum(self.building_mix.values())
        if not math.isclose(total, 1.0, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(f"building mix must sum to 1, got {total}")
        lo, hi = self.count_range
        if lo < 0 or hi < lo:
            raise ValueError(f"bad count range: {self.count_range}")
        if self.layout_style not in ("row", "cluster", "single_dominant"):
            raise ValueError(f"unknown layout style: {self.layout_style!r}")


@dataclass(frozen=True)
class NoiseModel:
    mislabel_rate: float = 0.0
    drop_rate: float = 0.0
    correct_score: tuple[float, float] | None = None  # None keeps scores
    mislabel_score: tuple[float, float] | None = None
    jitter_scale: float = 0.0

    def __post_init__(self) -> None:
        for name in ("mislabel_rate", "drop_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.jitter_scale < 0:
            raise ValueError("jitter_scale must be >= 0")


def default_templates() -> list[SceneTemplate]:
    """Four templates with disjoint building mixes (separable by counting)."""
    bi = building_index
    return [
        SceneTemplate(
            landuse=landuse_index("commercial"),
            building_mix={bi("retail"): 0.6, bi("office building"): 0.4},
            count_range=(3, 8),
            layout_style="row",
        ),
        SceneTemplate(
            landuse=landuse_index("residential"),
            building_mix={bi("house"): 0.5, bi("apartment"): 0.3, bi("garage"): 0.2},
            count_range=(3, 8),
            layout_style="cluster",
        ),
        SceneTemplate(
            landuse=landuse_index("public"),
            building_mix={bi("church"): 1.0},
            count_range=(1, 4),
            layout_style="single_dominant",
        ),
        SceneTemplate(
            landuse=landuse_index("industrial"),
            building_mix={bi("industrial"): 0.7, bi("roof"): 0.3},
            count_range=(2, 6),
            layout_style="row",
        ),
    ]


def _sample_size(template: SceneTemplate, category: int, rng) -> tuple[float, float]:
    lo, hi = template.size_range.get(category, DEFAULT_SIZE_RANGE)
    alo, ahi = template.aspect_range.get(category, DEFAULT_ASPECT_RANGE)
    side = rng.uniform(lo, hi)
    aspect = rng.uniform(alo, ahi)
    w = side * math.sqrt(aspect)
    h = side / math.sqrt(aspect)
    return min(w, 1.0), min(h, 1.0)


def _place_boxes(template: SceneTemplate, categories: list[int], rng) -> list[BBox]:
    n = len(categories)
    boxes: list[BBox] = []
    if template.layout_style == "row":
        slot = 1.0 / n
        if slot < MIN_BOX_SIDE:
            raise PlacementError(f"{n} boxes cannot fit a row layout")
        band_y = rng.uniform(0.3, 0.6)
        for i, cat in enumerate(categories):
            w, h = _sample_size(template, cat, rng)
            w = min(w, slot)
            cx = (i + 0.5) * slot + rng.uniform(-0.2, 0.2) * slot
            cy = band_y + rng.uniform(-0.05, 0.05)
            boxes.append(_box_at(cat, cx, cy, w, h))
    elif template.layout_style == "cluster":
        ccx = rng.uniform(0.3, 0.7)
        ccy = rng.uniform(0.3, 0.7)
        for cat in categories:
            w, h = _sample_size(template, cat, rng)
            cx = ccx + rng.normal(0.0, 0.15)
            cy = ccy + rng.normal(0.0, 0.1)
            boxes.append(_box_at(cat, cx, cy, w, h))
    else:  # single_dominant
        for i, cat in enumerate(categories):
            w, h = _sample_size(template, cat, rng)
            if i == 0:
                w = min(2.5 * w, 0.9)
                h = min(2.5 * h, 0.9)
                cx, cy = rng.uniform(0.4, 0.6), rng.uniform(0.4, 0.6)
            else:
                cx, cy = rng.uniform(0.1, 0.9), rng.uniform(0.2, 0.8)
            boxes.append(_box_at(cat, cx, cy, w, h))
    return boxes


def _box_at(category: int, cx: float, cy: float, w: float, h: float,
            score: float = 1.0) -> BBox:
    x = min(max(cx - w / 2.0, 0.0), 1.0 - w)
    y = min(max(cy - h / 2.0, 0.0), 1.0 - h)
    return BBox(category=category, score=score, x=x, y=y, w=w, h=h)


def generate(
    templates: list[SceneTemplate],
    n_per_category: int,
    seed: int,
    image_size: tuple[int, int] = (640, 480),
    geo_origin: tuple[float, float] = (51.03, -114.08),
) -> list[SceneRecord]:
    """Deterministic perfect-detector dataset: n scenes per template."""
    by_landuse = {t.landuse: t for t in templates}
    if set(by_landuse) != set(range(len(LANDUSE_CATEGORIES))):
        missing = [LANDUSE_CATEGORIES[i] for i in range(4) if i not in by_landuse]
        raise ValueError(f"missing templates for: {missing}")
    rng = np.random.default_rng(seed)
    records: list[SceneRecord] = []
    width, height = image_size
    for landuse in sorted(by_landuse):
        template = by_landuse[landuse]
        cats = sorted(template.building_mix)
        probs = np.array([template.building_mix[c] for c in cats])
        for i in range(n_per_category):
            lo, hi = template.count_range
            n = int(rng.integers(lo, hi + 1)) if hi > lo else lo
            picked = [int(cats[j]) for j in rng.choice(len(cats), size=n, p=probs)]
            boxes = _place_boxes(template, picked, rng)
            records.append(
                SceneRecord(
                    scene_id=f"{LANDUSE_CATEGORIES[landuse]}_{i:05d}",
                    landuse=landuse,
                    width=width,
                    height=height,
                    lat=geo_origin[0] + float(rng.uniform(-0.1, 0.1)),
                    lon=geo_origin[1] + float(rng.uniform(-0.15, 0.15)),
                    boxes=tuple(boxes),
                )
            )
    return records


def perturb(records: list[SceneRecord], noise: NoiseModel, seed: int) -> list[SceneRecord]:
    """Simulate detector imperfections on perfect-detector records."""
    rng = np.random.default_rng(seed)
    out: list[SceneRecord] = []
    for record in records:
        boxes: list[BBox] = []
        for box in record.boxes:
            if rng.random() < noise.drop_rate:
                continue
            category = box.category
            score = box.score
            mislabeled = rng.random() < noise.mislabel_rate
            if mislabeled:
                offset = int(rng.integers(1, NUM_BUILDING_CATEGORIES))
                category = (category + offset) % NUM_BUILDING_CATEGORIES
                dist = noise.mislabel_score
            else:
                dist = noise.correct_score
            if dist is not None:
                score = float(rng.uniform(dist[0], dist[1]))
            x, y, w, h = box.x, box.y, box.w, box.h
            if noise.jitter_scale > 0:
                w = w * (1.0 + float(rng.normal(0.0, noise.jitter_scale)))
                h = h * (1.0 + float(rng.normal(0.0, noise.jitter_scale)))
                w = min(max(w, 1e-3), 1.0)
                h = min(max(h, 1e-3), 1.0)
                cx = box.x + box.w / 2 + float(rng.normal(0.0, noise.jitter_scale)) * box.w
                cy = box.y + box.h / 2 + float(rng.normal(0.0, noise.jitter_scale)) * box.h
                x = min(max(cx - w / 2, 0.0), 1.0 - w)
                y = min(max(cy - h / 2, 0.0), 1.0 - h)
            boxes.append(BBox(category=category, score=score, x=x, y=y, w=w, h=h))
        out.append(
            SceneRecord(
                scene_id=record.scene_id,
                landuse=record.landuse,
                width=record.width,
                height=record.height,
                lat=record.lat,
                lon=record.lon,
                boxes=tuple(boxes),
            )
        )
    return out


def tamper(boxes: list[BBox], k: int) -> list[list[BBox]]:
    """Step j relabels the j highest-score boxes to (category+1) mod 8.

    Returns k+1 box lists; step 0 is the untouched input. The wrong-label
    rule is deterministic so flip-point experiments reproduce exactly."""
    if k > len(boxes):
        raise ValueError(f"k={k} exceeds box count {len(boxes)}")
    # descending score, ties by input order
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].score, i))
    steps: list[list[BBox]] = []
    for j in range(k + 1):
        to_flip = set(order[:j])
        step_boxes = [
            BBox(
                category=(b.category + 1) % NUM_BUILDING_CATEGORIES
                if i in to_flip
                else b.category,
                score=b.score,
                x=b.x,
                y=b.y,
                w=b.w,
                h=b.h,
            )
            for i, b in enumerate(boxes)
        ]
        steps.append(step_boxes)
    return steps


def template_to_json(template: SceneTemplate) -> dict:
    return {
        "landuse": LANDUSE_CATEGORIES[template.landuse],
        "building_mix": {
            BUILDING_CATEGORIES[c]: p for c, p in sorted(template.building_mix.items())
        },
        "count_range": list(template.count_range),
        "layout_style": template.layout_style,
        "size_range": {
            BUILDING_CATEGORIES[c]: list(v) for c, v in sorted(template.size_range.items())
        },
        "aspect_range": {
            BUILDING_CATEGORIES[c]: list(v)
            for c, v in sorted(template.aspect_range.items())
        },
    }


def template_from_json(obj: dict) -> SceneTemplate:
    return SceneTemplate(
        landuse=landuse_index(obj["landuse"]),
        building_mix={building_index(k): float(v) for k, v in obj["building_mix"].items()},
        count_range=tuple(obj.get("count_range", (3, 8))),
        layout_style=obj.get("layout_style", "cluster"),
        size_range={
            building_index(k): tuple(v) for k, v in obj.get("size_range", {}).items()
        },
        aspect_range={
            building_index(k): tuple(v) for k, v in obj.get("aspect_range", {}).items()
        },
    )


def load_templates(path: str) -> list[SceneTemplate]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return [template_from_json(obj) for obj in data["templates"]]


def save_templates(templates: list[SceneTemplate], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"templates": [template_to_json(t) for t in templates]}, fh, indent=2)
        fh.write("\n")
