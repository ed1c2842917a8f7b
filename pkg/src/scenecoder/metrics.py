"""Classification and detection metrics.

Classification: confusion matrix and macro-averaged precision/recall/F1
with a zero convention for empty denominators. Detection: IoU, average
precision at an IoU threshold (greedy score-ordered one-to-one matching,
101-point interpolated PR curve) and a class-only variant that ignores
geometry entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .scenes import BBox
from .taxonomy import NUM_BUILDING_CATEGORIES, NUM_LANDUSE_CATEGORIES

RECALL_POINTS = np.linspace(0.0, 1.0, 101)
SWEEP_THRESHOLDS = (0.0, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


def confusion(
    preds: Sequence[int],
    labels: Sequence[int],
    num_classes: int = NUM_LANDUSE_CATEGORIES,
) -> np.ndarray:
    """Counts[true][pred] over paired predictions and labels."""
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} preds vs {len(labels)} labels")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, t in zip(preds, labels):
        cm[t, p] += 1
    return cm


def macro_metrics(cm: np.ndarray) -> tuple[float, float, float]:
    """Unweighted per-class means of precision, recall and F1.

    A class with a zero denominator contributes 0 (documented convention)."""
    n = cm.shape[0]
    precisions = np.zeros(n)
    recalls = np.zeros(n)
    f1s = np.zeros(n)
    for c in range(n):
        tp = cm[c, c]
        col = cm[:, c].sum()
        row = cm[c, :].sum()
        p = tp / col if col > 0 else 0.0
        r = tp / row if row > 0 else 0.0
        precisions[c] = p
        recalls[c] = r
        f1s[c] = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return float(precisions.mean()), float(recalls.mean()), float(f1s.mean())


def iou(a: BBox, b: BBox) -> float:
    x1 = max(a.x, b.x)
    y1 = max(a.y, b.y)
    x2 = min(a.x + a.w, b.x + b.w)
    y2 = min(a.y + a.h, b.y + b.h)
    iw = max(0.0, x2 - x1)
    ih = max(0.0, y2 - y1)
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


@dataclass
class DetectionSet:
    """Per-scene detections and ground truth for detection evaluation."""

    detections: dict[str, list[BBox]] = field(default_factory=dict)
    ground_truth: dict[str, list[BBox]] = field(default_factory=dict)

    def add_scene(self, scene_id: str, detections: list[BBox], gts: list[BBox]) -> None:
        self.detections[scene_id] = list(detections)
        self.ground_truth[scene_id] = list(gts)


def _ap_from_matches(tp_flags: list[bool], n_positive: int) -> float:
    """101-point interpolated AP from score-ordered true-positive flags."""
    if n_positive == 0:
        return 0.0
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64)) if tp_flags else np.array([])
    if len(tp) == 0:
        return 0.0
    fp = np.arange(1, len(tp) + 1) - tp
    recall = tp / n_positive
    precision = tp / (tp + fp)
    # precision envelope: best precision at recall >= r
    interp = np.zeros_like(RECALL_POINTS)
    for i, r in enumerate(RECALL_POINTS):
        mask = recall >= r - 1e-12
        interp[i] = precision[mask].max() if mask.any() else 0.0
    return float(interp.mean())


def _per_category_ap(det_set: DetectionSet, category: int, threshold: float,
                     ignore_geometry: bool) -> float | None:
    """AP for one category, or None when the category has no ground truth."""
    n_positive = sum(
        1
        for gts in det_set.ground_truth.values()
        for g in gts
        if g.category == category
    )
    if n_positive == 0:
        return None
    dets: list[tuple[float, str, BBox]] = []
    for scene_id, boxes in det_set.detections.items():
        for b in boxes:
            if b.category == category:
                dets.append((b.score, scene_id, b))
    dets.sort(key=lambda t: -t[0])
    matched: dict[str, set[int]] = {sid: set() for sid in det_set.ground_truth}
    tp_flags: list[bool] = []
    for score, scene_id, det in dets:
        gts = det_set.ground_truth.get(scene_id, [])
        best_idx = -1
        if ignore_geometry:
            for gi, g in enumerate(gts):
                if g.category == category and gi not in matched.get(scene_id, set()):
                    best_idx = gi
                    break
        else:
            best_iou = -1.0
            for gi, g in enumerate(gts):
                if g.category != category or gi in matched.get(scene_id, set()):
                    continue
                ov = iou(det, g)
                if ov >= threshold and ov > best_iou:
                    best_iou = ov
                    best_idx = gi
        if best_idx >= 0:
            matched.setdefault(scene_id, set()).add(best_idx)
            tp_flags.append(True)
        else:
            tp_flags.append(False)
    return _ap_from_matches(tp_flags, n_positive)


def _ap_table(det_set: DetectionSet, threshold: float, ignore_geometry: bool):
    per_cat: dict[int, float] = {}
    for c in range(NUM_BUILDING_CATEGORIES):
        ap = _per_category_ap(det_set, c, threshold, ignore_geometry)
        if ap is not None:
            per_cat[c] = ap
    mean = float(np.mean(list(per_cat.values()))) if per_cat else 0.0
    return per_cat, mean


def ap_at_iou(det_set: DetectionSet, threshold: float):
    """Per-category AP and mean AP at a minimum-IoU matching threshold."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError(f"threshold must be in [0, 1), got {threshold}")
    if threshold == 0.0:
        return ap_iou_zero(det_set)
    return _ap_table(det_set, threshold, ignore_geometry=False)


def ap_iou_zero(det_set: DetectionSet):
    """Class-only AP: a detection matches any unmatched same-category box."""
    return _ap_table(det_set, 0.0, ignore_geometry=True)


@dataclass
class APSweep:
    thresholds: tuple[float, ...]
    mean_ap: dict[float, float]
    per_category: dict[float, dict[int, float]]
    mean_50_95: float


def ap_sweep(det_set: DetectionSet) -> APSweep:
    """AP at t in {0, .5, .55, ..., .95} plus the mean over .5:.05:.95."""
    mean_ap: dict[float, float] = {}
    per_category: dict[float, dict[int, float]] = {}
    for t in SWEEP_THRESHOLDS:
        per_cat, mean = ap_at_iou(det_set, t)
        per_category[t] = per_cat
        mean_ap[t] = mean
    strict = [mean_ap[t] for t in SWEEP_THRESHOLDS if t >= 0.5]
    return APSweep(
        thresholds=SWEEP_THRESHOLDS,
        mean_ap=mean_ap,
        per_category=per_category,
        mean_50_95=float(np.mean(strict)),
    )
