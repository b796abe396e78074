import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latentqc.evaluation import (
    REPORT_FIELDS,
    ConfusionCounts,
    auroc,
    binary_metrics,
    confusion,
    f1_score,
    per_type_sensitivity,
    pool,
)

from oracles import pair_oracle

grids = st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
    lambda s: st.tuples(arrays(bool, s), arrays(bool, s)))


def test_perfect_prediction():
    gt = np.zeros((4, 4), bool)
    gt[1:3, 1:3] = True
    _, s, p, f = binary_metrics(gt, gt)
    assert s == p == f == 1


def test_published_f1_consistency():
    assert round(f1_score(0.897, 0.697), 3) == 0.784
    assert round(f1_score(0.882, 0.671), 3) == 0.762


def test_empty_conventions():
    z = np.zeros((3, 3), bool)
    _, s, p, f = binary_metrics(z, z)
    assert (s, p, f) == (1.0, 1.0, 1.0)
    gt = z.copy()
    gt[0, 0] = True
    _, s, p, f = binary_metrics(z, gt)
    assert (s, p, f) == (0.0, 1.0, 0.0)
    assert f1_score(0, 0) == 0


def test_dim_mismatch():
    with pytest.raises(ValueError):
        confusion(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        per_type_sensitivity(np.zeros((2, 2)), {"oof": np.zeros((3, 2))})


def test_per_type_examples():
    masks = {"oof": np.eye(4, dtype=bool), "fold": np.zeros((4, 4), bool)}
    assert per_type_sensitivity(np.ones((4, 4), bool), masks) == {"oof": 1.0}
    assert per_type_sensitivity(np.zeros((4, 4), bool), masks) == {"oof": 0.0}


def test_per_type_counting_oracle():
    pred = np.array([[1, 1, 0, 0], [1, 0, 0, 1], [0, 0, 1, 1], [0, 1, 1, 0]], bool)
    masks = {
        "oof": np.array([[1, 1, 1, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]], bool),
        "penmark": np.array([[0, 0, 0, 1], [0, 0, 0, 1], [0, 0, 0, 1], [0, 0, 0, 1]], bool),
        "bubble": np.array([[0, 0, 0, 0], [0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0]], bool),
    }
    expect = {}
    for k, m in masks.items():
        cells = {(i, j) for i in range(4) for j in range(4) if m[i, j]}
        hit = {(i, j) for i, j in cells if pred[i, j]}
        expect[k] = len(hit) / len(cells)
    assert per_type_sensitivity(pred, masks) == expect
    assert expect == {"oof": 2 / 3, "penmark": 0.5, "bubble": 0.25}


def test_auroc_examples():
    gt = np.array([0, 0, 0, 1, 1, 1], bool)
    assert auroc(np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), gt) == 1.0
    assert auroc(np.full(6, 0.7), gt) == 0.5
    with pytest.raises(ValueError):
        auroc(np.zeros(4), np.zeros(4, bool))


@pytest.mark.parametrize("seed", range(10))
def test_auroc_pair_enumeration(seed):
    r = np.random.default_rng(seed)
    scores = r.integers(0, 4, 6).astype(float)
    gt = np.zeros(6, bool)
    gt[r.choice(6, r.integers(1, 6), replace=False)] = True
    assert auroc(scores, gt) == pytest.approx(pair_oracle(scores, gt), abs=1e-12)


@given(arrays(np.int64, 12, elements=st.integers(-20, 20)), arrays(bool, 12))
def test_auroc_monotone_invariance(scores, gt):
    scores = scores / 4.0
    if gt.all() or not gt.any():
        return
    a = auroc(scores, gt)
    assert auroc(np.exp(scores) * 3 + 1, gt) == pytest.approx(a, abs=1e-12)
    assert 0 <= a <= 1


@given(grids)
def test_transpose_invariance(pair):
    pred, gt = pair
    c1, *r1 = binary_metrics(pred, gt)
    c2, *r2 = binary_metrics(pred.T, gt.T)
    assert c1 == c2 and r1 == r2


@given(grids)
def test_f1_matches_count_form(pair):
    pred, gt = pair
    c, s, p, f = binary_metrics(pred, gt)
    assert c.total == pred.size
    if c.tp + c.fp + c.fn:
        assert f == pytest.approx(2 * c.tp / (2 * c.tp + c.fp + c.fn), abs=1e-15)
    if c.tp == 0 and c.fp + c.fn:
        assert f == 0


def test_pool_micro_average():
    gt1 = np.array([[1, 1], [0, 0]], bool)
    gt2 = np.array([[0, 0], [0, 1]], bool)
    p1 = np.array([[1, 0], [0, 0]], bool)
    p2 = np.array([[0, 1], [0, 1]], bool)
    rep = pool([(p1, gt1, {"oof": gt1}), (p2, gt2, {"fold": gt2})])
    assert rep.counts == ConfusionCounts(tp=2, fp=1, fn=1, tn=4)
    assert rep.sensitivity == pytest.approx(2 / 3)
    assert rep.precision == pytest.approx(2 / 3)
    assert rep.per_type_sensitivity == {"oof": 0.5, "fold": 1.0}
    text = rep.to_text().splitlines()
    assert [ln.split("=")[0] for ln in text[:len(REPORT_FIELDS)]] == list(REPORT_FIELDS)
    assert "sensitivity.fold=1.0" in text
