import numpy as np
import pytest
from hypothesis import given, strategies as st

from firerisk.metrics import (EvalReport, brier, class_weights, confidence_curve, evaluate,
                              point_metrics, rps)


def onehot(y, K):
    return np.eye(K)[y]


def test_brier_perfect():
    y = np.array([0, 2, 1])
    assert brier(onehot(y, 3), y) == 0.0


def test_brier_uniform():
    assert brier(np.full((1, 3), 1 / 3), [0]) == pytest.approx(2 / 3, abs=1e-12)


def test_brier_max():
    assert brier([[0.0, 1.0, 0.0]], [0]) == 2.0


def test_brier_shape_mismatch():
    with pytest.raises(ValueError):
        brier(np.full((2, 3), 1 / 3), [0])


def test_rps_hand_value():
    assert rps([[0.5, 0.3, 0.2]], [0]) == pytest.approx(0.145, abs=1e-12)


def test_rps_perfect():
    y = np.array([0, 1, 2, 2])
    assert rps(onehot(y, 3), y) == 0.0


def test_rps_ordinal():
    near = rps([[0.0, 1.0, 0.0]], [0])
    far = rps([[0.0, 0.0, 1.0]], [0])
    assert near == pytest.approx(0.5) and far == pytest.approx(1.0)
    assert near < far


def test_rps_single_class():
    with pytest.raises(ValueError):
        rps([[1.0]], [0])


simplex_rows = st.lists(st.floats(0.01, 1), min_size=3, max_size=3).map(
    lambda v: [x / sum(v) for x in v])


@given(st.lists(st.tuples(simplex_rows, st.integers(0, 2)), min_size=1, max_size=30))
def test_bounds(rows):
    P = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    assert 0 <= brier(P, y) <= 2
    assert 0 <= rps(P, y) <= 1


def test_zero_iff_correct_onehot():
    y = np.array([0, 1])
    P = onehot(np.array([0, 2]), 3)
    assert brier(P, y) > 0 and rps(P, y) > 0


def test_proper_scores_prefer_truth():
    rng = np.random.default_rng(0)
    q = np.array([0.5, 0.3, 0.2])
    y = rng.choice(3, 200_000, p=q)
    truth = np.tile(q, (len(y), 1))
    for other in ([0.4, 0.4, 0.2], [0.6, 0.2, 0.2], [1 / 3] * 3):
        alt = np.tile(other, (len(y), 1))
        assert brier(truth, y) < brier(alt, y)
        assert rps(truth, y) < rps(alt, y)


def test_point_metrics_all_correct():
    y = np.array([0, 1, 2, 2])
    m = point_metrics(onehot(y, 3), y)
    assert (m["accuracy"], m["mse"], m["wmse"], m["f1"], m["precision"]) == (1.0, 0.0, 0.0, 1.0, 1.0)


def test_point_metrics_hand_case():
    y = np.array([0, 0, 1, 2])
    pred = np.array([0, 1, 1, 0])
    m = point_metrics(onehot(pred, 3), y)
    assert m["accuracy"] == 0.5
    assert m["mse"] == 1.25
    # precision: class0 1/2, class1 1/2, class2 0 -> 1/3
    assert m["precision"] == pytest.approx(1 / 3)
    # f1: class0 2*(.5*.5)/1 = .5, class1 2*(.5*1)/1.5 = 2/3, class2 0
    assert m["f1"] == pytest.approx((0.5 + 2 / 3 + 0) / 3)
    assert m["confusion"].tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 0]]


def test_wmse_equals_mse_when_balanced():
    y = np.array([0, 1, 2, 0, 1, 2])
    pred = np.array([1, 1, 0, 0, 2, 2])
    m = point_metrics(onehot(pred, 3), y)
    assert m["wmse"] == pytest.approx(m["mse"], abs=1e-15)


def test_wmse_inverse_frequency():
    y = np.array([0, 0, 0, 1])
    w = class_weights(y, 2)
    np.testing.assert_allclose(w, [4 / 6, 4 / 2])
    pred = np.array([0, 0, 0, 0])
    m = point_metrics(onehot(pred, 2), y)
    assert m["wmse"] == pytest.approx(2.0 / (3 * 4 / 6 + 2))


def test_wmse_weight_override():
    y = np.array([0, 1])
    m = point_metrics(onehot(np.array([1, 1]), 2), y, weights=[3.0, 1.0])
    assert m["wmse"] == pytest.approx(3 / 4)


def test_ties_go_to_lower_class():
    m = point_metrics([[0.4, 0.4, 0.2]], [1])
    assert m["confusion"][1].tolist() == [1, 0, 0]


def test_absent_class_excluded_from_macro():
    y = np.array([0, 1, 0, 1])
    m = point_metrics(onehot(y, 3), y)
    assert m["precision"] == 1.0 and m["f1"] == 1.0


def test_weighted_average():
    y = np.array([0, 0, 0, 1])
    P = onehot(np.array([0, 0, 0, 0]), 2)
    m = point_metrics(P, y, average="weighted")
    assert m["precision"] == pytest.approx(0.75 * 0.75)


def test_confusion_row_sums():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 3, 100)
    P = rng.dirichlet([1, 1, 1], 100)
    cm = point_metrics(P, y)["confusion"]
    np.testing.assert_array_equal(cm.sum(axis=1), np.bincount(y, minlength=3))
    assert cm.sum() == 100


def test_confidence_tau_zero_is_overall():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 3, 200)
    P = rng.dirichlet([1, 1, 1], 200)
    tau, cov, acc = confidence_curve(P, y, [0.0])[0]
    assert cov == 1.0 and acc == point_metrics(P, y)["accuracy"]


def test_confidence_above_max_undefined():
    assert confidence_curve([[0.5, 0.5]], [0], [0.9]) == [(0.9, 0.0, None)]


def test_confidence_halves():
    P = np.array([[0.95, 0.05], [0.9, 0.1], [0.6, 0.4], [0.55, 0.45]])
    y = np.array([0, 0, 1, 1])
    (_, cov, acc), = confidence_curve(P, y, [0.8])
    assert (cov, acc) == (0.5, 1.0)


@given(st.lists(simplex_rows, min_size=1, max_size=40))
def test_coverage_non_increasing(rows):
    P = np.array(rows)
    y = np.zeros(len(P), dtype=int)
    curve = confidence_curve(P, y, [i / 20 for i in range(21)])
    cov = [c for _, c, _ in curve]
    assert all(a >= b for a, b in zip(cov, cov[1:]))


def test_report_files(tmp_path):
    y = np.array([0, 1, 2, 1])
    rep = evaluate(onehot(np.array([0, 1, 1, 1]), 3), y, model="m", target="t",
                   class_names=["low", "moderate", "high"])
    rep.write(tmp_path, "eval")
    assert (tmp_path / "eval_confusion.csv").read_text().splitlines()[0] == "true,low,moderate,high"
    assert "tau,coverage,accuracy" in (tmp_path / "eval_confidence.csv").read_text()
    d = rep.to_dict()
    assert d["wmse_weights"] == [4 / 3, 2 / 3, 4 / 3]
    assert set(rep.metrics()) == {"accuracy", "precision", "f1", "mse", "wmse", "brier", "rps"}


def test_beats():
    y = np.array([0, 1])
    good = evaluate(onehot(y, 2), y)
    bad = evaluate(np.full((2, 2), 0.5), y)
    assert all(good.beats(bad).values())
    assert not any(bad.beats(good).values())
