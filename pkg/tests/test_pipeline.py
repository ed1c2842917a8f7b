import numpy as np
import pytest

from scenecoder.encoder import EncoderConfig, encode, reverse_for_unidirectional
from scenecoder.pipeline import (
    Checkpoint,
    encode_scenes,
    load_checkpoint,
    predict_scene,
    predict_scenes,
    prepare_inputs,
    save_checkpoint,
    train_on_scenes,
)
from scenecoder.rnn.model import ModelConfig, init_params, predict
from scenecoder.rnn.training import TrainConfig
from scenecoder.scenes import split_dataset
from scenecoder.synth import default_templates, generate


@pytest.fixture(scope="module")
def records():
    return generate(default_templates(), 20, seed=0)


def test_encode_scenes_shape(records):
    X = encode_scenes(records, "layout", EncoderConfig(sequence_length=25))
    assert X.shape == (len(records), 25, 8)


def test_prepare_inputs_reverses_only_unidirectional(records):
    X = encode_scenes(records[:4], "layout", EncoderConfig(sequence_length=25))
    uni = prepare_inputs(X, ModelConfig(architecture="uni_last_concat"))
    bi = prepare_inputs(X, ModelConfig(architecture="bi_all_concat"))
    assert np.array_equal(uni, X[:, ::-1])
    assert np.array_equal(bi, X)


def test_predict_scene_applies_reversal_contract(records):
    config = ModelConfig(architecture="uni_last_concat")
    params = init_params(config, seed=0)
    record = records[0]
    via_pipeline = predict_scene(params, record, config, "layout")
    metadata = reverse_for_unidirectional(
        encode(list(record.boxes), "layout", EncoderConfig(sequence_length=25))
    )
    direct = predict(params, metadata.sequence, config)
    np.testing.assert_allclose(via_pipeline.probs, direct.probs)
    assert via_pipeline.label == direct.label


def test_predict_scenes_matches_predict_scene(records):
    config = ModelConfig(architecture="bi_all_concat", cell="gru")
    params = init_params(config, seed=1)
    labels, probs = predict_scenes(params, records[:6], config, "layout")
    for i, record in enumerate(records[:6]):
        single = predict_scene(params, record, config, "layout")
        np.testing.assert_allclose(probs[i], single.probs, rtol=1e-12)
        assert labels[i] == single.label


def test_train_on_scenes_learns_separable_data(records):
    split = split_dataset(records, seed=0)
    config = ModelConfig(sequence_length=10)
    result = train_on_scenes(
        split.train, split.val, config,
        TrainConfig(epochs=20, batch_size=16, seed=0),
        "layout", EncoderConfig(sequence_length=10),
    )
    labels, _ = predict_scenes(result.params, split.test, config, "layout",
                               EncoderConfig(sequence_length=10))
    truth = np.array([r.landuse for r in split.test])
    assert (labels == truth).mean() >= 0.9


def test_checkpoint_round_trip(tmp_path, records):
    config = ModelConfig(sequence_length=10, cell="lstm")
    result = train_on_scenes(
        records[:8], [], config, TrainConfig(epochs=2, batch_size=4, seed=0),
        "cooccurrence", EncoderConfig(sequence_length=10),
    )
    ckpt = Checkpoint(
        model_config=config,
        encoder_kind="cooccurrence",
        encoder_config=EncoderConfig(sequence_length=10),
        params=result.params,
        seed=0,
        history=result.history,
        best_epoch=result.best_epoch,
    )
    path = str(tmp_path / "model.json")
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.model_config == config
    assert back.encoder_kind == "cooccurrence"
    assert back.best_epoch == result.best_epoch
    assert len(back.history) == len(result.history)
    for k in result.params:
        np.testing.assert_array_equal(back.params[k], result.params[k])
