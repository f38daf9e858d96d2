import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from firerisk.firecat import encode_categorical


def test_first_occurrence_gets_prior():
    enc, _ = encode_categorical(["a", "b", "a"], [2, 0, 1], [0, 1, 2], a=1.0, prior=1.0)
    assert enc[0] == 1.0 and enc[1] == 1.0


def test_prefix_smoothing_arithmetic():
    # third "a" sees prefix labels {2, 0}
    enc, _ = encode_categorical(["a", "a", "a"], [2, 0, 1], [0, 1, 2], a=1.0, prior=1.0)
    assert enc[2] == pytest.approx((2 + 0 + 1 * 1) / (2 + 1), abs=1e-15)


def test_permutation_order_respected():
    enc, _ = encode_categorical(["a", "a"], [2, 0], [1, 0], a=1.0, prior=1.0)
    # row 1 visited first -> prior; row 0 sees label 0
    assert enc.tolist() == [(0 + 1) / 2, 1.0]


def test_constant_labels_converge_monotonically():
    n = 200
    enc, _ = encode_categorical(["c"] * n, [2] * n, np.arange(n), a=1.0, prior=0.5)
    assert np.all(np.diff(enc) > 0)
    assert enc[-1] == pytest.approx(2.0, abs=0.01)


def test_running_prior_by_default():
    # with no fixed prior, P is the mean of labels already visited
    enc, _ = encode_categorical(["a", "b", "c"], [2, 0, 1], [0, 1, 2], a=1.0, prior_init=1.0)
    assert enc.tolist() == [1.0, 2.0, 1.0]


def test_table_uses_full_data_and_unseen_maps_to_prior():
    _, table = encode_categorical(["a", "a", "b"], [2, 0, 1], [0, 1, 2], a=1.0)
    P = 1.0
    assert table.prior == P
    assert table.stats["a"] == pytest.approx((2 + 0 + P) / 3)
    assert table.transform(["zzz"]).tolist() == [P]


def test_invalid_weight():
    with pytest.raises(ValueError):
        encode_categorical(["a"], [0], [0], a=0.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcd"), st.integers(0, 2)), min_size=2, max_size=40),
       st.integers(0, 10_000), st.data())
def test_own_label_never_leaks(rows, seed, data):
    cats = [r[0] for r in rows]
    y = np.array([r[1] for r in rows])
    perm = np.random.default_rng(seed).permutation(len(rows))
    i = data.draw(st.integers(0, len(rows) - 1))
    new = data.draw(st.integers(0, 2))
    before, _ = encode_categorical(cats, y, perm, a=1.0)
    y2 = y.copy()
    y2[i] = new
    after, _ = encode_categorical(cats, y2, perm, a=1.0)
    assert after[i] == before[i]
