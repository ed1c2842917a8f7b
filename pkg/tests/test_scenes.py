import io
import json
from collections import Counter

import pytest

from scenecoder.scenes import (
    BBox,
    SceneRecord,
    parse_scenes,
    rebalance,
    scene_to_json,
    split_dataset,
    write_scenes,
)
from scenecoder.taxonomy import LANDUSE_CATEGORIES


def make_scene(scene_id="s1", landuse=0, n_boxes=2, **kwargs):
    boxes = tuple(
        BBox(category=i % 8, score=0.9, x=0.1 * i, y=0.1, w=0.2, h=0.3)
        for i in range(n_boxes)
    )
    return SceneRecord(scene_id=scene_id, landuse=landuse, width=640,
                       height=480, boxes=boxes, **kwargs)


def scene_line(**overrides):
    obj = {
        "scene_id": "a", "landuse": "commercial", "width": 640, "height": 480,
        "lat": None, "lon": None, "units": "pixel",
        "boxes": [
            {"category": "house", "score": 0.9, "x": 64, "y": 48, "w": 320, "h": 240},
            {"category": "garage", "score": 0.5, "x": 0, "y": 0, "w": 64, "h": 96},
        ],
    }
    obj.update(overrides)
    return json.dumps(obj)


class TestParse:
    def test_pixel_units_normalized_on_load(self):
        result = parse_scenes([scene_line()])
        assert not result.errors
        (rec,) = result.records
        assert len(rec.boxes) == 2
        b = rec.boxes[0]
        assert b.x == pytest.approx(0.1)
        assert b.y == pytest.approx(0.1)
        assert b.w == pytest.approx(0.5)
        assert b.h == pytest.approx(0.5)

    def test_score_out_of_range_rejected(self):
        bad = scene_line(boxes=[{"category": "house", "score": 1.7,
                                 "x": 0, "y": 0, "w": 10, "h": 10}])
        result = parse_scenes([scene_line(), bad])
        assert len(result.records) == 1
        assert len(result.errors) == 1
        assert "score out of range" in result.errors[0]
        assert "line 2" in result.errors[0]

    def test_unknown_category_rejected(self):
        bad = scene_line(boxes=[{"category": "castle", "score": 0.5,
                                 "x": 0, "y": 0, "w": 10, "h": 10}])
        result = parse_scenes([bad])
        assert not result.records
        assert "castle" in result.errors[0]

    def test_empty_file(self):
        result = parse_scenes([])
        assert result.records == [] and result.errors == []

    def test_malformed_json_reports_line(self):
        result = parse_scenes(["{not json"])
        assert len(result.errors) == 1 and "line 1" in result.errors[0]

    def test_round_trip(self):
        result = parse_scenes([scene_line(), scene_line(scene_id="b", lat=51.0, lon=-114.1)])
        buf = io.StringIO()
        write_scenes(result.records, buf)
        buf.seek(0)
        again = parse_scenes(buf)
        assert not again.errors
        assert [scene_to_json(r) for r in again.records] == [
            scene_to_json(r) for r in result.records
        ]


class TestSplit:
    def test_exact_stratification(self):
        records = [make_scene(f"s{c}_{i}", landuse=c)
                   for c in range(4) for i in range(100)]
        split = split_dataset(records, seed=7)
        for c in range(4):
            assert sum(1 for r in split.test if r.landuse == c) == 25
        # union equals input as a multiset of ids
        all_ids = Counter(r.scene_id for r in split.train + split.val + split.test)
        assert all_ids == Counter(r.scene_id for r in records)

    def test_deterministic(self):
        records = [make_scene(f"s{c}_{i}", landuse=c)
                   for c in range(4) for i in range(40)]
        a = split_dataset(records, seed=7)
        b = split_dataset(records, seed=7)
        assert [r.scene_id for r in a.train] == [r.scene_id for r in b.train]
        assert [r.scene_id for r in a.test] == [r.scene_id for r in b.test]

    def test_tiny_category_errors(self):
        records = (
            [make_scene(f"a{i}", landuse=0) for i in range(40)]
            + [make_scene(f"b{i}", landuse=1) for i in range(40)]
            + [make_scene(f"c{i}", landuse=2) for i in range(40)]
            + [make_scene(f"d{i}", landuse=3) for i in range(2)]
        )
        with pytest.raises(ValueError, match=LANDUSE_CATEGORIES[3]):
            split_dataset(records, seed=0)

    def test_unlabeled_rejected(self):
        with pytest.raises(ValueError):
            split_dataset([make_scene(landuse=None)], seed=0)


class TestRebalance:
    def test_fractional_factor(self):
        records = [make_scene(f"s{i}", landuse=2) for i in range(100)]
        out = rebalance(records, {2: 2.5}, seed=3)
        assert len(out) == 250

    def test_identity_is_permutation(self):
        records = [make_scene(f"s{i}", landuse=i % 4) for i in range(20)]
        out = rebalance(records, {}, seed=1)
        assert Counter(r.scene_id for r in out) == Counter(r.scene_id for r in records)

    def test_integer_factor_exact_copies(self):
        records = [make_scene(f"s{i}", landuse=1) for i in range(3)]
        out = rebalance(records, {1: 2.0}, seed=0)
        counts = Counter(r.scene_id for r in out)
        assert counts == {"s0": 2, "s1": 2, "s2": 2}

    def test_preserves_id_set(self):
        records = [make_scene(f"s{i}", landuse=i % 4) for i in range(40)]
        out = rebalance(records, {0: 1.3, 3: 2.2}, seed=5)
        assert {r.scene_id for r in out} == {r.scene_id for r in records}

    def test_factor_below_one_errors(self):
        with pytest.raises(ValueError):
            rebalance([make_scene()], {0: 0.5}, seed=0)
