import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adaclust.errors import EmptyInputError, LabelError, ParameterError
from adaclust.metrics import ConfusionMatrix, confusion, kfold_split, normalize_rows, report
from adaclust.numeric import Rng


def cm(counts):
    counts = np.array(counts)
    return ConfusionMatrix(counts, [str(i) for i in range(len(counts))])


def test_confusion_perfect_is_diagonal():
    m = confusion([0, 1, 2, 2], [0, 1, 2, 2], 3)
    assert np.array_equal(m.counts, np.diag([1, 1, 2]))


def test_confusion_hand_count():
    m = confusion([0, 0, 1, 1], [0, 1, 1, 1], 2)
    assert m.counts.tolist() == [[1, 1], [0, 2]]


def test_confusion_empty():
    m = confusion([], [], 3)
    assert m.counts.sum() == 0 and m.counts.shape == (3, 3)


def test_confusion_label_range():
    with pytest.raises(LabelError):
        confusion([0, 3], [0, 0], 3)


def test_normalize_rows():
    assert normalize_rows(cm([[1, 1], [0, 2]])).tolist() == [[0.5, 0.5], [0.0, 1.0]]
    assert normalize_rows(cm(np.diag([3, 4]))).tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert normalize_rows(cm([[0, 0], [1, 1]])).tolist() == [[0.0, 0.0], [0.5, 0.5]]


# (counts, accuracy, recall, precision, f, fn, fp, var_fn, var_fp), all by hand
FIXTURES = [
    ([[8, 2], [1, 9]], 0.85, 0.85, (8 / 9 + 9 / 11) / 2, (16 / 19 + 6 / 7) / 2,
     [0.2, 0.1], [0.1, 0.2], 0.0025, 0.0025),
    ([[5, 0, 0], [0, 3, 0], [0, 0, 2]], 1.0, 1.0, 1.0, 1.0, [0, 0, 0], [0, 0, 0], 0.0, 0.0),
    ([[4]], 1.0, 1.0, 1.0, 1.0, [0.0], [None], 0.0, 0.0),
    ([[0, 3], [0, 3]], 0.5, 0.5, 0.25, 1 / 3, [1.0, 0.0], [0.0, 1.0], 0.25, 0.25),
    ([[2, 0, 0], [0, 0, 0], [1, 0, 3]], 5 / 6, 0.875, 5 / 6, (0.8 + 6 / 7) / 2,
     [0.0, None, 0.25], [0.25, 0.0, 0.0], 0.015625, 1 / 72),
]


@pytest.mark.parametrize("fixture", FIXTURES, ids=[str(f[0]) for f in FIXTURES])
def test_report_hand_values(fixture):
    counts, acc, rec, prec, f, fn, fp, vfn, vfp = fixture
    r = report(cm(counts))
    assert r.accuracy == pytest.approx(acc, abs=1e-12)
    assert r.recall == pytest.approx(rec, abs=1e-12)
    assert r.precision == pytest.approx(prec, abs=1e-12)
    assert r.f_score == pytest.approx(f, abs=1e-12)
    d = r.to_dict()
    for got, want in zip(d["per_class_fn"], fn):
        assert (got is None) == (want is None)
        if want is not None:
            assert got == pytest.approx(want, abs=1e-12)
    for got, want in zip(d["per_class_fp"], fp):
        assert (got is None) == (want is None)
        if want is not None:
            assert got == pytest.approx(want, abs=1e-12)
    assert r.var_fn == pytest.approx(vfn, abs=1e-12)
    assert r.var_fp == pytest.approx(vfp, abs=1e-12)


def test_report_empty():
    with pytest.raises(EmptyInputError):
        report(cm([[0, 0], [0, 0]]))


def test_controller_fn_zero_for_absent_class():
    r = report(cm([[2, 0, 0], [0, 0, 0], [1, 0, 3]]))
    assert r.controller_fn().tolist() == [0.0, 0.0, 0.25]


def test_report_json_and_csv():
    r = report(cm([[8, 2], [1, 9]]))
    doc = json.loads(json.dumps(r.to_dict()))
    assert doc["confusion"] == [[8, 2], [1, 9]]
    assert r.confusion.to_csv().splitlines()[1] == "0,8,2"


labels = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60)


@given(labels)
def test_report_properties(pairs):
    t = [p[0] for p in pairs]
    p = [p[1] for p in pairs]
    r = report(confusion(t, p, 5))
    assert r.accuracy == pytest.approx(np.mean(np.array(t) == np.array(p)), abs=1e-12)
    for v in (r.fn, r.fp):
        defined = v[~np.isnan(v)]
        assert np.all((defined >= 0) & (defined <= 1))
    assert r.var_fn >= 0 and r.var_fp >= 0
    rows = normalize_rows(r.confusion)
    nonzero = r.confusion.counts.sum(axis=1) > 0
    assert np.allclose(rows[nonzero].sum(axis=1), 1.0, atol=1e-12)


def test_kfold_simple():
    folds = kfold_split(10, 5, Rng(0))
    assert [len(f) for f in folds] == [2] * 5
    assert sorted(np.concatenate(folds).tolist()) == list(range(10))


def test_kfold_stratified_one_per_fold():
    labels = np.array([0] * 5 + [1] * 7)
    folds = kfold_split(12, 5, Rng(1), labels)
    for f in folds:
        assert (labels[f] == 0).sum() == 1


def test_kfold_deterministic():
    a = kfold_split(30, 5, Rng(3), np.arange(30) % 4)
    b = kfold_split(30, 5, Rng(3), np.arange(30) % 4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_kfold_errors():
    with pytest.raises(ParameterError):
        kfold_split(3, 5, Rng(0))
    with pytest.raises(ParameterError):
        kfold_split(10, 1, Rng(0))


@given(st.lists(st.integers(0, 3), min_size=5, max_size=80), st.integers(2, 5), st.integers(0, 100))
def test_kfold_partition(lab, k, seed):
    n = len(lab)
    lab = np.array(lab)
    folds = kfold_split(n, k, Rng(seed), lab)
    allidx = np.concatenate(folds)
    assert len(allidx) == n and len(set(allidx.tolist())) == n
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    for c in np.unique(lab):
        per = [(lab[f] == c).sum() for f in folds]
        assert max(per) - min(per) <= 1
