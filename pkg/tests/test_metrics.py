import itertools

import numpy as np
import pytest

from scenecoder.metrics import (
    SWEEP_THRESHOLDS,
    DetectionSet,
    ap_at_iou,
    ap_iou_zero,
    ap_sweep,
    confusion,
    iou,
    macro_metrics,
)
from scenecoder.scenes import BBox


def det(category, score, x, y, w, h):
    return BBox(category=category, score=score, x=x, y=y, w=w, h=h)


class TestConfusion:
    def test_counts_rows_true_cols_pred(self):
        cm = confusion([0, 1, 1, 2], [0, 1, 2, 2])
        assert cm[0, 0] == 1
        assert cm[1, 1] == 1
        assert cm[2, 1] == 1  # true 2 predicted 1
        assert cm[2, 2] == 1
        assert cm.sum() == 4

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            confusion([0, 1], [0])

    def test_empty(self):
        assert confusion([], []).sum() == 0


class TestMacroMetrics:
    def test_hand_worked_example(self):
        # per-class: P = (5/5, 10/15, 10/10, 10/10), R = (5/10, 1, 1, 1)
        # F1 = (2/3, 4/5, 1, 1)
        cm = np.array([
            [5, 5, 0, 0],
            [0, 10, 0, 0],
            [0, 0, 10, 0],
            [0, 0, 0, 10],
        ])
        mp, mr, mf1 = macro_metrics(cm)
        assert mp == pytest.approx((1 + 10 / 15 + 1 + 1) / 4)  # 11/12
        assert mr == pytest.approx(0.875)
        assert mf1 == pytest.approx((2 / 3 + 0.8 + 1 + 1) / 4)
        assert mf1 == pytest.approx(0.866667, abs=5e-7)

    def test_perfect(self):
        cm = np.eye(4, dtype=np.int64) * 7
        assert macro_metrics(cm) == (1.0, 1.0, 1.0)

    def test_absent_class_contributes_zero(self):
        # class 3 never true and never predicted: P=R=F1=0 by convention
        cm = np.zeros((4, 4), dtype=np.int64)
        cm[0, 0] = cm[1, 1] = cm[2, 2] = 10
        mp, mr, mf1 = macro_metrics(cm)
        assert mp == mr == mf1 == 0.75

    def test_all_wrong(self):
        cm = np.array([[0, 5], [5, 0]])
        assert macro_metrics(cm) == (0.0, 0.0, 0.0)


class TestIoU:
    def test_identical(self):
        a = det(0, 1.0, 0.1, 0.1, 0.4, 0.4)
        assert iou(a, a) == pytest.approx(1.0)

    def test_disjoint(self):
        a = det(0, 1.0, 0.0, 0.0, 0.2, 0.2)
        b = det(0, 1.0, 0.5, 0.5, 0.2, 0.2)
        assert iou(a, b) == 0.0

    def test_half_shift_gives_one_third(self):
        # unit squares offset by half a side: inter=.5, union=1.5
        a = det(0, 1.0, 0.0, 0.0, 1.0, 1.0)
        b = det(0, 1.0, 0.5, 0.0, 0.5, 1.0)
        # b is half of a: inter=.5, union=1.0 -> .5; use equal-size shift
        c = det(0, 1.0, 0.25, 0.0, 0.5, 0.5)
        d = det(0, 1.0, 0.5, 0.0, 0.5, 0.5)
        # inter = .25*.5=.125, union=.25+.25-.125=.375 -> 1/3
        assert iou(c, d) == pytest.approx(1 / 3)
        assert iou(a, b) == pytest.approx(0.5)

    def test_symmetry(self):
        a = det(0, 1.0, 0.1, 0.2, 0.3, 0.3)
        b = det(0, 1.0, 0.2, 0.1, 0.4, 0.2)
        assert iou(a, b) == iou(b, a)


def brute_force_class_ap(det_set):
    """Re-derivation of the geometry-free AP by explicit greedy matching."""
    per_cat = {}
    for c in range(8):
        n_pos = sum(
            1 for gts in det_set.ground_truth.values() for g in gts if g.category == c
        )
        if n_pos == 0:
            continue
        dets = []
        for sid, boxes in det_set.detections.items():
            for b in boxes:
                if b.category == c:
                    dets.append((b.score, sid))
        dets.sort(key=lambda t: -t[0])
        remaining = {
            sid: sum(1 for g in gts if g.category == c)
            for sid, gts in det_set.ground_truth.items()
        }
        flags = []
        for _, sid in dets:
            if remaining.get(sid, 0) > 0:
                remaining[sid] -= 1
                flags.append(True)
            else:
                flags.append(False)
        if not flags:
            per_cat[c] = 0.0
            continue
        tp = np.cumsum(flags)
        rec = tp / n_pos
        prec = tp / np.arange(1, len(flags) + 1)
        pts = np.linspace(0, 1, 101)
        interp = [
            prec[rec >= r - 1e-12].max() if (rec >= r - 1e-12).any() else 0.0
            for r in pts
        ]
        per_cat[c] = float(np.mean(interp))
    mean = float(np.mean(list(per_cat.values()))) if per_cat else 0.0
    return per_cat, mean


def random_detection_set(rng, n_scenes=4, max_boxes=6):
    ds = DetectionSet()
    for s in range(n_scenes):
        gts, dets = [], []
        for _ in range(rng.integers(0, max_boxes + 1)):
            w, h = rng.uniform(0.05, 0.4, size=2)
            x = rng.uniform(0, 1 - w)
            y = rng.uniform(0, 1 - h)
            gts.append(det(int(rng.integers(0, 8)), 1.0, x, y, w, h))
        for _ in range(rng.integers(0, max_boxes + 1)):
            w, h = rng.uniform(0.05, 0.4, size=2)
            x = rng.uniform(0, 1 - w)
            y = rng.uniform(0, 1 - h)
            dets.append(det(int(rng.integers(0, 8)), float(rng.uniform(0.1, 1.0)), x, y, w, h))
        ds.add_scene(f"s{s}", dets, gts)
    return ds


class TestAP:
    def test_perfect_single_detection(self):
        ds = DetectionSet()
        g = det(3, 1.0, 0.2, 0.2, 0.3, 0.3)
        ds.add_scene("a", [g], [g])
        per_cat, mean = ap_at_iou(ds, 0.5)
        assert per_cat == {3: 1.0}
        assert mean == 1.0

    def test_extra_low_score_false_positive_keeps_ap_one(self):
        # TP at rank 1 covers all recall points; later FP cannot lower
        # the interpolated envelope.
        ds = DetectionSet()
        g = det(3, 1.0, 0.2, 0.2, 0.3, 0.3)
        fp = det(3, 0.4, 0.7, 0.7, 0.1, 0.1)
        ds.add_scene("a", [g, fp], [g])
        per_cat, _ = ap_at_iou(ds, 0.5)
        assert per_cat[3] == pytest.approx(1.0)

    def test_high_score_false_positive_halves_precision(self):
        # FP outranks the TP: precision at full recall is 1/2, and the
        # envelope is 1/2 everywhere, so AP = 0.5.
        ds = DetectionSet()
        g = det(3, 0.6, 0.2, 0.2, 0.3, 0.3)
        fp = det(3, 0.9, 0.7, 0.7, 0.1, 0.1)
        ds.add_scene("a", [fp, g], [g])
        per_cat, _ = ap_at_iou(ds, 0.5)
        assert per_cat[3] == pytest.approx(0.5)

    def test_missed_gt_caps_recall(self):
        # one of two GT boxes detected: recall tops out at 0.5, so only
        # the 51 recall points <= 0.5 see precision 1.
        ds = DetectionSet()
        g1 = det(2, 1.0, 0.1, 0.1, 0.2, 0.2)
        g2 = det(2, 1.0, 0.6, 0.6, 0.2, 0.2)
        ds.add_scene("a", [g1], [g1, g2])
        per_cat, _ = ap_at_iou(ds, 0.5)
        assert per_cat[2] == pytest.approx(51 / 101)

    def test_one_to_one_matching(self):
        # two detections on the same GT: second is a false positive
        ds = DetectionSet()
        g = det(1, 1.0, 0.2, 0.2, 0.4, 0.4)
        d2 = det(1, 0.8, 0.21, 0.2, 0.4, 0.4)
        ds.add_scene("a", [g, d2], [g])
        per_cat, _ = ap_at_iou(ds, 0.5)
        assert per_cat[1] == pytest.approx(1.0)  # FP after full recall
        # flip scores: FP first -> AP 0.5
        ds2 = DetectionSet()
        ds2.add_scene("a", [det(1, 0.8, 0.2, 0.2, 0.4, 0.4),
                            det(1, 1.0, 0.21, 0.2, 0.4, 0.4)],
                      [det(1, 1.0, 0.21, 0.2, 0.4, 0.4)])
        # both overlap the single GT; highest-score detection matches it
        per_cat2, _ = ap_at_iou(ds2, 0.5)
        assert per_cat2[1] == pytest.approx(1.0)

    def test_category_without_gt_excluded_from_mean(self):
        ds = DetectionSet()
        g = det(0, 1.0, 0.1, 0.1, 0.3, 0.3)
        stray = det(5, 0.9, 0.5, 0.5, 0.2, 0.2)  # no GT of category 5
        ds.add_scene("a", [g, stray], [g])
        per_cat, mean = ap_at_iou(ds, 0.5)
        assert 5 not in per_cat
        assert mean == 1.0

    def test_threshold_validation(self):
        ds = DetectionSet()
        with pytest.raises(ValueError):
            ap_at_iou(ds, 1.0)
        with pytest.raises(ValueError):
            ap_at_iou(ds, -0.1)

    def test_zero_threshold_ignores_geometry(self):
        # detection nowhere near the GT still matches at t=0
        ds = DetectionSet()
        g = det(4, 1.0, 0.0, 0.0, 0.1, 0.1)
        d = det(4, 0.9, 0.8, 0.8, 0.1, 0.1)
        ds.add_scene("a", [d], [g])
        per_cat, _ = ap_at_iou(ds, 0.0)
        assert per_cat[4] == pytest.approx(1.0)
        strict, _ = ap_at_iou(ds, 0.5)
        assert strict[4] == 0.0

    def test_class_only_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            ds = random_detection_set(rng)
            got = ap_iou_zero(ds)
            want = brute_force_class_ap(ds)
            assert set(got[0]) == set(want[0])
            for c in want[0]:
                assert got[0][c] == pytest.approx(want[0][c])
            assert got[1] == pytest.approx(want[1])


class TestAPSweep:
    def test_thresholds_and_shape(self):
        rng = np.random.default_rng(1)
        sweep = ap_sweep(random_detection_set(rng))
        assert sweep.thresholds == SWEEP_THRESHOLDS
        assert set(sweep.mean_ap) == set(SWEEP_THRESHOLDS)
        strict = [sweep.mean_ap[t] for t in SWEEP_THRESHOLDS if t >= 0.5]
        assert sweep.mean_50_95 == pytest.approx(np.mean(strict))

    def test_monotone_in_threshold(self):
        # raising the IoU bar can only lose matches, never gain them
        rng = np.random.default_rng(7)
        for _ in range(20):
            sweep = ap_sweep(random_detection_set(rng))
            strict = [sweep.mean_ap[t] for t in SWEEP_THRESHOLDS if t >= 0.5]
            for a, b in itertools.pairwise(strict):
                assert b <= a + 1e-12
            assert sweep.mean_ap[0.0] >= sweep.mean_ap[0.5] - 1e-12

    def test_perfect_detector_sweep(self):
        ds = DetectionSet()
        boxes = [det(c, 1.0, 0.1 * c, 0.1, 0.08, 0.2) for c in range(8)]
        ds.add_scene("a", boxes, boxes)
        sweep = ap_sweep(ds)
        for t in SWEEP_THRESHOLDS:
            assert sweep.mean_ap[t] == pytest.approx(1.0)
        assert sweep.mean_50_95 == pytest.approx(1.0)
