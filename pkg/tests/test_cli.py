import csv
import json
import os

import pytest

from scenecoder.cli import main
from scenecoder.manifest import load_manifest, run_from_manifest
from scenecoder.scenes import load_scenes
from scenecoder.taxonomy import LANDUSE_CATEGORIES


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Small end-to-end workspace: dataset, splits, trained model."""
    d = tmp_path_factory.mktemp("cli")
    data = str(d / "scenes.jsonl")
    model = str(d / "model.json")
    assert main(["synth", "--out", data, "--per-category", "30", "--seed", "0"]) == 0
    assert main([
        "train", "--in", data, "--out", model,
        "--l", "10", "--epochs", "8", "--batch-size", "16", "--seed", "0",
    ]) == 0
    return {"dir": d, "data": data, "model": model}


class TestSynth:
    def test_writes_valid_scenes_and_manifest(self, workdir):
        result = load_scenes(workdir["data"])
        assert not result.errors
        assert len(result.records) == 120
        manifest = load_manifest(workdir["data"] + ".manifest.json")
        assert manifest.command == "synth"
        assert manifest.outputs == [workdir["data"]]
        assert "--per-category" in manifest.argv

    def test_custom_manifest_path(self, tmp_path):
        out = str(tmp_path / "s.jsonl")
        mpath = str(tmp_path / "custom.manifest.json")
        main(["synth", "--out", out, "--per-category", "2",
              "--manifest-out", mpath])
        assert load_manifest(mpath).command == "synth"

    def test_rerun_from_manifest_is_byte_identical(self, workdir):
        before = open(workdir["data"], "rb").read()
        assert run_from_manifest(workdir["data"] + ".manifest.json") == 0
        assert open(workdir["data"], "rb").read() == before


class TestEncode:
    def test_jsonl_output(self, workdir, tmp_path):
        out = str(tmp_path / "enc.jsonl")
        main(["encode", "--in", workdir["data"], "--out", out, "--l", "6"])
        lines = [json.loads(l) for l in open(out)]
        assert len(lines) == 120
        first = lines[0]
        assert first["landuse"] in LANDUSE_CATEGORIES
        assert len(first["sequence"]) == 6
        assert len(first["sequence"][0]) == 8


class TestTrainEval:
    def test_checkpoint_written(self, workdir):
        doc = json.load(open(workdir["model"]))
        assert doc["model_config"]["cell"] == "simple"
        assert doc["encoder_kind"] == "layout"
        assert "l0_f_W" in doc["params"]

    def test_classification_eval(self, workdir, tmp_path):
        out = str(tmp_path / "metrics.csv")
        main(["eval", "--model", workdir["model"], "--in", workdir["data"],
              "--out", out])
        rows = {r[0]: r[1] for r in csv.reader(open(out))}
        assert 0.0 <= float(rows["macro_f1"]) <= 1.0
        assert rows["num_scenes"] == "120"
        conf = list(csv.reader(open(out.replace(".csv", "") + "_confusion.csv")))
        assert conf[0][1:] == list(LANDUSE_CATEGORIES)
        assert sum(int(v) for row in conf[1:] for v in row[1:]) == 120

    def test_detection_eval_perfect_detector(self, workdir, tmp_path):
        out = str(tmp_path / "ap.csv")
        main(["eval", "--det", workdir["data"], "--gt", workdir["data"],
              "--out", out])
        rows = list(csv.reader(open(out)))
        assert rows[0][0] == "category"
        mean_row = rows[-1]
        assert mean_row[0] == "mean"
        # detections identical to ground truth: AP 1 at every threshold
        assert all(float(v) == pytest.approx(1.0) for v in mean_row[1:])

    def test_eval_requires_a_mode(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["eval", "--out", str(tmp_path / "x.csv")])


class TestGradcheck:
    def test_json_report(self, tmp_path):
        out = str(tmp_path / "grad.json")
        main(["gradcheck", "--out", out, "--l", "3", "--hidden", "4"])
        doc = json.load(open(out))
        assert set(doc) == {
            f"{c}/{a}"
            for c in ("simple", "gru", "lstm")
            for a in ("uni_last_concat", "bi_all_concat")
        }
        assert all(v < 1e-5 for v in doc.values())


class TestExperiments:
    def test_ablation_covers_full_grid(self, workdir, tmp_path):
        out = str(tmp_path / "ablation.csv")
        main(["ablation", "--train", workdir["data"], "--test", workdir["data"],
              "--out", out, "--l", "6", "--epochs", "2", "--seed", "0"])
        text = open(out).read()
        assert text.startswith("#")  # reference header comment
        rows = list(csv.DictReader(l for l in text.splitlines()
                                   if not l.startswith("#")))
        assert len(rows) == 12
        combos = {(r["encoder"], r["cell"], r["arch"]) for r in rows}
        assert len(combos) == 12
        assert all(r["status"] == "ok" for r in rows)

    def test_mismatch_csv(self, workdir, tmp_path):
        out = str(tmp_path / "mismatch.csv")
        main(["mismatch", "--in", workdir["data"], "--out", out,
              "--l", "10", "--epochs", "3", "--repeats", "1", "--seed", "0"])
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 4
        combos = {(r["train_on"], r["test_on"]) for r in rows}
        assert combos == {("gt", "gt"), ("gt", "perturbed"),
                          ("perturbed", "gt"), ("perturbed", "perturbed")}

    def test_upper_csv(self, workdir, tmp_path):
        out = str(tmp_path / "upper.csv")
        main(["upper", "--in", workdir["data"], "--out", out,
              "--l", "10", "--epochs", "3", "--seed", "0"])
        text = open(out).read()
        assert text.startswith("#")  # reference header comment
        rows = list(csv.reader(l for l in text.splitlines() if not l.startswith("#")))
        assert [r[0] for r in rows[1:]] == ["upper", "noisy", "delta"]

    def test_tamper_jsonl(self, workdir, tmp_path):
        subset = str(tmp_path / "few.jsonl")
        with open(subset, "w") as fh:
            fh.writelines(l for i, l in enumerate(open(workdir["data"])) if i < 3)
        out = str(tmp_path / "tamper.jsonl")
        main(["tamper", "--model", workdir["model"], "--in", subset,
              "--out", out, "--k", "2"])
        lines = [json.loads(l) for l in open(out)]
        assert len(lines) == 3
        for doc in lines:
            assert len(doc["steps"]) <= 3  # k+1, clamped to box count
            assert doc["steps"][0]["step"] == 0
            for step in doc["steps"]:
                assert sum(step["probs"]) == pytest.approx(1.0, abs=1e-6)

    def test_map_geojson(self, workdir, tmp_path):
        out = str(tmp_path / "map.geojson")
        main(["map", "--model", workdir["model"], "--in", workdir["data"],
              "--out", out])
        doc = json.load(open(out))
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 120
        f = doc["features"][0]
        assert f["geometry"]["type"] == "Point"
        lon, lat = f["geometry"]["coordinates"]
        assert -180 <= lon <= 180 and -90 <= lat <= 90
        assert f["properties"]["color"] in ("red", "blue", "yellow", "purple")

    def test_heatmap_pgms(self, workdir, tmp_path):
        subset = str(tmp_path / "few.jsonl")
        with open(subset, "w") as fh:
            fh.writelines(l for i, l in enumerate(open(workdir["data"])) if i < 2)
        out_dir = str(tmp_path / "heat")
        main(["heatmap", "--in", subset, "--out-dir", out_dir])
        pgms = [f for f in os.listdir(out_dir) if f.endswith(".pgm")]
        assert len(pgms) == 2
        raw = open(os.path.join(out_dir, pgms[0]), "rb").read()
        assert raw.startswith(b"P5\n")
        manifest = load_manifest(os.path.join(out_dir, "run.manifest.json"))
        assert manifest.command == "heatmap"


class TestManifestReplay:
    def test_eval_rerun_byte_identical(self, workdir, tmp_path):
        out = str(tmp_path / "metrics.csv")
        argv = ["eval", "--model", workdir["model"], "--in", workdir["data"],
                "--out", out]
        main(argv)
        before = open(out, "rb").read()
        assert run_from_manifest(out + ".manifest.json") == 0
        assert open(out, "rb").read() == before
