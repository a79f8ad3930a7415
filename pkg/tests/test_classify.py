import dataclasses

import numpy as np
import oracles
import pytest
from conftest import random_rotation

from skelmap import classify, som
from skelmap.classify import OutputLayer, evaluate, predict, train_output, train_pipeline
from skelmap.errors import ValidationError
from skelmap.skeleton import ActionSequence, LabeledDataset


def test_second_activity_matches_oracle():
    rng = np.random.default_rng(0)
    lat = som.init_lattice(3, 4, 6, 1)
    p = rng.random(6)
    ref = oracles.activity(oracles.to_lists(lat.weights), p.tolist(), 0.25)
    got = classify.second_activity(lat, p, 0.25)
    assert got.shape == (12,) and np.max(np.abs(got - np.ravel(ref))) < 1e-12
    assert np.all((got > 0) & (got <= 1))
    assert classify.second_activity(lat, lat.weights[2, 1], 0.25)[9] == 1.0


def test_one_hot_input():
    lat = som.init_lattice(2, 2, 2, 0)
    v = classify.output_input(lat, lat.weights[1, 0], 1.0, "winner-one-hot")
    assert v.tolist() == [0, 0, 1, 0]


def test_zero_rate_leaves_weights_at_zero():
    acts = np.random.default_rng(1).random((6, 4))
    out = train_output(acts, list("aabbcc"), "abc", eta=0.0, epochs=20)
    assert not out.weights.any()


def test_delta_rule_one_step_by_hand():
    a = np.array([[1.0, 2.0]])
    out = train_output(a, ["b"], ("a", "b"), eta=0.1, epochs=1)
    # W starts at 0: W += 0.1 * (t - 0) a^T
    assert out.weights.tolist() == [[0.0, 0.0], [0.1, 0.2]]


def test_orthogonal_activities_are_learned():
    acts = np.eye(5)
    labels = list("vwxyz")
    out = train_output(acts, labels, labels, eta=0.1, epochs=50)
    assert [labels[int(np.argmax(out.scores(a)))] for a in acts] == labels


def test_single_sample_learns_its_label():
    a = np.random.default_rng(2).random((1, 8))
    a /= np.linalg.norm(a)
    out = train_output(a, ["q"], ("p", "q", "r"), eta=0.1, epochs=200)
    assert int(np.argmax(out.scores(a[0]))) == 1


def test_train_output_rejects_unknown_label():
    with pytest.raises(ValidationError):
        train_output(np.eye(2), ["a", "z"], ("a", "b"))


def test_output_layer_validation():
    with pytest.raises(ValidationError):
        OutputLayer(np.zeros((2, 3)), ("a",))
    with pytest.raises(ValidationError):
        OutputLayer(np.full((1, 3), np.inf), ("a",))


def test_softmax():
    p = classify.softmax(np.array([1.0, 1.0, 1.0]))
    assert np.allclose(p, 1 / 3)
    assert classify.softmax(np.array([1000.0, 0.0]), 10.0)[0] == 1.0


def test_single_label_model_is_certain(small_model):
    model, ds = small_model
    m = model.second_map.n_neurons
    solo = dataclasses.replace(model, output=OutputLayer(np.zeros((1, m)), ("only",)))
    pred = predict(solo, ds.sequences[0])
    assert pred.label == "only" and pred.confidence == 1.0


def test_training_sample_gets_its_label(som_model, synthetic):
    _, train, _ = synthetic
    hits = [predict(som_model, s).label == s.label for s in train.sequences[::8]]
    assert all(hits)


def test_evaluate_matches_hand_tally(small_model):
    model, ds = small_model
    five = LabeledDataset(ds.sequences[::5][:5], ds.label_set)
    assert len(five) == 5
    report = evaluate(model, five)
    labels = list(model.label_set)
    conf = [[0] * len(labels) for _ in labels]
    for s in five:
        conf[labels.index(s.label)][labels.index(predict(model, s).label)] += 1
    assert report["confusion"] == conf
    correct = sum(conf[k][k] for k in range(len(labels)))
    assert report["accuracy"] == correct / 5 and report["n_test"] == 5
    for k, lab in enumerate(labels):
        row = sum(conf[k])
        assert report["per_class"][lab] == (conf[k][k] / row if row else None)
        if row:
            assert report["confusion_normalized"][k] == [c / row for c in conf[k]]


def test_evaluate_perfect_model_is_diagonal(som_model, synthetic):
    _, _, test = synthetic
    report = evaluate(som_model, test)
    if report["accuracy"] == 1.0:
        conf = np.array(report["confusion"])
        assert np.array_equal(conf, np.diag(np.diag(conf)))


def test_evaluate_rejects_empty_and_unknown(small_model):
    model, ds = small_model
    with pytest.raises(ValidationError):
        evaluate(model, LabeledDataset((), ds.label_set))
    stranger = ActionSequence(ds.sequences[0].positions, "zzz")
    with pytest.raises(ValidationError):
        evaluate(model, LabeledDataset((stranger,), ("zzz",)))


def test_pipeline_rejects_bad_training_sets(small_model):
    _, ds = small_model
    one_label = LabeledDataset(tuple(s for s in ds if s.label == ds.label_set[0]), ds.label_set[:1])
    with pytest.raises(ValidationError):
        train_pipeline(one_label)
    short = ActionSequence(ds.sequences[0].positions[:1], ds.label_set[0])
    with pytest.raises(ValidationError):
        train_pipeline(LabeledDataset(ds.sequences + (short,), ds.label_set))


def test_model_invariants(som_model):
    assert som_model.second_map.dim == 2 * som_model.k
    assert som_model.output.weights.shape == (len(som_model.label_set), som_model.second_map.n_neurons)


def test_pipeline_is_deterministic(small_model):
    model, ds = small_model
    again = train_pipeline(ds, model.config)
    assert evaluate(again, ds) == evaluate(model, ds)
    assert again.first_map == model.first_map and np.array_equal(again.output.weights, model.output.weights)


def test_evaluate_leaves_training_statistics_alone(som_model, synthetic):
    _, _, test = synthetic
    before = som_model.preprocess.to_dict()
    first = som_model.first_map.weights.copy()
    evaluate(som_model, test)
    assert som_model.preprocess.to_dict() == before
    assert np.array_equal(som_model.first_map.weights, first)


def test_prediction_invariant_to_similarity(som_model, synthetic):
    _, _, test = synthetic
    rng = np.random.default_rng(4)
    for seq in test.sequences[:10]:
        moved = ActionSequence(rng.uniform(0.5, 2.0) * seq.positions @ random_rotation(rng).T
                               + rng.normal(size=3), seq.label)
        a, b = predict(som_model, seq), predict(som_model, moved)
        assert a.label == b.label and abs(a.confidence - b.confidence) < 1e-6
