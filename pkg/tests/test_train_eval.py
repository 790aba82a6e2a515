from fractions import Fraction

import numpy as np
import pytest

from svgseg.gat_network import init_model
from svgseg.graph_builder import EDGE_DIM, DrawingGraph
from svgseg.train_eval import (
    ConfusionAccumulator,
    EmptyReport,
    LengthMismatch,
    classification_report,
    evaluate,
    load_palette,
    predict_labels,
    recolored_svg,
    report_to_text,
    split_dataset,
    weighted_f1,
)
from svgseg.svg_ingest import NormalizedPath, canonicalize_commands


# --- classification report ---------------------------------------------------

def test_report_hand_computed_exact():
    # y_true=[0,0,1], y_pred=[0,1,1]:
    #   cat0: TP=1 FP=0 FN=1 -> P=1, R=1/2, F1=2/3, support 2
    #   cat1: TP=1 FP=1 FN=0 -> P=1/2, R=1, F1=2/3, support 1
    # Every value is the exact rational, bit-equal to its float division.
    r = classification_report([0, 0, 1], [0, 1, 1], 2)
    assert r.precision[0] == 1.0
    assert r.recall[0] == 1 / 2
    assert r.f1[0] == 2 / 3
    assert r.support[0] == 2
    assert r.precision[1] == 1 / 2
    assert r.recall[1] == 1.0
    assert r.f1[1] == 2 / 3
    assert r.support[1] == 1
    assert r.accuracy == 2 / 3
    assert r.macro_f1 == 2 / 3
    assert r.weighted_f1 == 2 / 3


def test_report_perfect():
    r = classification_report([0, 1, 2], [0, 1, 2], 3)
    assert (r.precision == 1).all() and (r.recall == 1).all() and (r.f1 == 1).all()
    assert r.accuracy == 1


def test_report_zero_support_convention():
    # A category with no truth and no predictions reports 0.00/0.00/0.00.
    r = classification_report([0, 0], [0, 0], 3)
    assert r.precision[2] == 0 and r.recall[2] == 0 and r.f1[2] == 0
    assert r.support[2] == 0


def test_report_length_mismatch():
    with pytest.raises(LengthMismatch):
        classification_report([0, 1], [0], 2)


def test_report_micro_accuracy_identity():
    rng = np.random.default_rng(0)
    y_true = rng.integers(0, 5, 200)
    y_pred = rng.integers(0, 5, 200)
    r = classification_report(y_true, y_pred, 5)
    acc = ConfusionAccumulator.empty(5).add(y_true, y_pred)
    assert r.accuracy == acc.tp.sum() / acc.total


def test_report_macro_bounds():
    rng = np.random.default_rng(1)
    y_true = rng.integers(0, 4, 300)
    y_pred = rng.integers(0, 4, 300)
    r = classification_report(y_true, y_pred, 4)
    assert r.f1.min() <= r.macro_f1 <= r.f1.max()


def test_accumulator_merge_associative():
    rng = np.random.default_rng(2)
    chunks = [(rng.integers(0, 3, 50), rng.integers(0, 3, 50)) for _ in range(4)]
    whole = ConfusionAccumulator.empty(3)
    for t, p in chunks:
        whole.add(t, p)
    merged = ConfusionAccumulator.empty(3)
    parts = [ConfusionAccumulator.empty(3).add(t, p) for t, p in chunks]
    for part in parts:
        merged = merged.merge(part)
    assert np.array_equal(whole.tp, merged.tp)
    assert np.array_equal(whole.fn, merged.fn)
    assert whole.total == merged.total


# --- weighted F1 -------------------------------------------------------------

def test_weighted_f1_single_category():
    r = classification_report([0, 0, 0], [0, 0, 0], 1)
    assert weighted_f1(r) == r.f1[0] == 1


def test_weighted_f1_hand_case():
    r = classification_report([0, 0, 1], [0, 1, 1], 2)
    assert weighted_f1(r) == pytest.approx(2 / 3, abs=0)


def test_weighted_f1_constant():
    # All-equal F1 values: the weighted mean equals that value regardless of
    # supports (two categories, each predicted as the other half the time).
    y_true = [0] * 30 + [1] * 10
    y_pred = [0] * 15 + [1] * 15 + [1] * 5 + [0] * 5
    r = classification_report(y_true, y_pred, 2)
    if np.allclose(r.f1, r.f1[0]):
        assert weighted_f1(r) == pytest.approx(r.f1[0])


def test_empty_report():
    with pytest.raises(EmptyReport):
        classification_report([], [], 3)


def test_report_text_layout():
    r = classification_report([0, 0, 1], [0, 1, 1], 2, names=["walls", "doors"])
    text = report_to_text(r)
    assert "walls" in text and "weighted avg" in text and "accuracy" in text
    assert "0.67" in text


# --- splits ------------------------------------------------------------------

def test_split_62_14():
    ids = [f"d{i:03d}" for i in range(76)]
    train, val, test = split_dataset(ids, (62 / 76, 0.0, 14 / 76), seed=5)
    assert len(train) == 62 and len(val) == 0 and len(test) == 14
    assert sorted(train + val + test) == ids


def test_split_deterministic():
    ids = [f"d{i}" for i in range(20)]
    a = split_dataset(ids, (0.5, 0.25, 0.25), seed=9)
    b = split_dataset(ids, (0.5, 0.25, 0.25), seed=9)
    assert a == b


def test_split_all_train():
    ids = ["a", "b", "c"]
    train, val, test = split_dataset(ids, (1.0, 0.0, 0.0), seed=0)
    assert sorted(train) == ids and not val and not test


def test_split_bad_ratios():
    with pytest.raises(ValueError):
        split_dataset(["a"], (0.5, 0.2, 0.2), seed=0)


# --- evaluate ----------------------------------------------------------------

def toy_graph(rng, v, levels, seed_labels=True):
    edge_index = np.array([[i, i + 1] for i in range(v - 1)])
    labels = np.column_stack([rng.integers(0, n, v) for n in levels])
    return DrawingGraph("t", rng.normal(size=(v, 6)), edge_index,
                        rng.normal(size=(v - 1, EDGE_DIM)), labels)


def test_evaluate_uniform_model_balanced():
    rng = np.random.default_rng(3)
    g = toy_graph(rng, 200, (2, 2, 2))
    model = init_model(6, 4, (2, 2, 2))
    for arr in model.arrays().values():
        arr *= 0.0
    # All-zero model predicts category 0 everywhere (uniform argmax).
    r = evaluate(model, [g], level=3)
    base_rate = (g.labels[:, 2] == 0).mean()
    assert r.accuracy == pytest.approx(base_rate)


def test_evaluate_level_shapes():
    rng = np.random.default_rng(4)
    g = toy_graph(rng, 30, (2, 3, 5))
    model = init_model(6, 4, (2, 3, 5))
    for level, n in ((1, 2), (2, 3), (3, 5)):
        r = evaluate(model, [g], level=level)
        assert len(r.precision) == n


def test_evaluate_deterministic():
    rng = np.random.default_rng(5)
    g = toy_graph(rng, 30, (2, 3, 5))
    model = init_model(6, 4, (2, 3, 5), seed=8)
    r1 = evaluate(model, [g], level=3)
    r2 = evaluate(model, [g], level=3)
    assert r1.to_dict() == r2.to_dict()


def test_predict_labels_shape():
    rng = np.random.default_rng(6)
    g = toy_graph(rng, 10, (2, 3, 5))
    model = init_model(6, 4, (2, 3, 5))
    pred = predict_labels(model, g)
    assert pred.shape == (10, 3)
    assert pred[:, 2].max() < 5


# --- export ------------------------------------------------------------------

def test_palette_distinct():
    palette = load_palette()
    assert len(palette) >= 43
    assert len(set(palette)) == len(palette)


def test_recolored_svg():
    paths = [NormalizedPath(0, canonicalize_commands("M 0,0 L 1,1")),
             NormalizedPath(1, canonicalize_commands("M 0,1 L 1,0"))]
    svg = recolored_svg(paths, [0, 1])
    assert svg.count("<path") == 2
    palette = load_palette()
    assert f"{palette[0][0] * 100:.9g}%" in svg
