import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import studentized_range

from expose._qtable import Q_ALPHA
from expose.evalstats import (
    Confusion,
    SaturatedStatisticError,
    as_anomaly_mask,
    auc,
    balanced_accuracy,
    cd_diagram_data,
    cd_groups,
    friedman,
    holdout_eval,
    nemenyi_cd,
    prequential_eval,
    rank_matrix,
)
from expose.featuremaps import rks_fit
from expose.model import ExposeModel, Label, fit

HAND = np.array([
    [0.90, 0.80, 0.70],
    [0.85, 0.88, 0.60],
    [0.70, 0.65, 0.75],
    [0.95, 0.90, 0.80],
])


def _pair_count_auc(scores, anomaly):
    normal, anom = scores[~anomaly], scores[anomaly]
    total = 0.0
    for a in normal:
        for b in anom:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (normal.size * anom.size)


# -- AUC and balanced accuracy ---------------------------------------------


def test_auc_perfect_and_ties():
    labels = ["normal"] * 3 + ["anomaly"] * 2
    assert auc([5, 4, 3, 2, 1], labels) == 1.0
    assert auc([1, 2, 3, 4, 5], labels) == 0.0
    assert auc(np.ones(5), labels) == 0.5


def test_auc_matches_pair_count(rng):
    scores = np.round(rng.normal(size=100), 1)  # rounding forces ties
    anomaly = np.r_[np.zeros(50, bool), np.ones(50, bool)]
    assert auc(scores, anomaly) == pytest.approx(_pair_count_auc(scores, anomaly), abs=1e-15)


@settings(max_examples=50)
@given(st.lists(st.integers(-100, 100), min_size=4, max_size=40), st.integers(0, 2**32 - 1))
def test_auc_invariant_under_increasing_transform(scores, seed):
    scores = np.array(scores, dtype=np.float64)
    anomaly = np.random.default_rng(seed).random(scores.size) < 0.5
    anomaly[0], anomaly[1] = True, False
    base = auc(scores, anomaly)
    assert auc(np.exp(scores / 50), anomaly) == base
    assert auc(3 * scores + 7, anomaly) == base
    assert base == pytest.approx(_pair_count_auc(scores, anomaly), abs=1e-12)


def test_auc_errors():
    with pytest.raises(ValueError):
        auc([1, 2], ["normal", "normal"])
    with pytest.raises(ValueError):
        auc([1, np.nan], ["normal", "anomaly"])
    with pytest.raises(ValueError):
        auc([1, 2], ["normal", "outlier"])


def test_label_forms():
    expected = [False, True]
    assert as_anomaly_mask([Label.NORMAL, Label.ANOMALY]).tolist() == expected
    assert as_anomaly_mask(["normal", "anomaly"]).tolist() == expected
    assert as_anomaly_mask([False, True]).tolist() == expected


def test_balanced_accuracy():
    assert balanced_accuracy(50, 50, 90, 10) == pytest.approx(0.70, abs=1e-15)
    assert balanced_accuracy(10, 0, 990, 0) == 1.0
    # Always predicting normal: no true positives, no false positives.
    assert balanced_accuracy(0, 10, 990, 0) == 0.5
    with pytest.raises(ValueError):
        balanced_accuracy(0, 0, 5, 5)


def test_confusion_single_class():
    c = Confusion()
    c.add(False, False)
    c.add(False, True)
    assert c.balanced_accuracy() == 0.5
    c.add(True, True)
    assert c.balanced_accuracy() == 0.75


# -- Friedman / Nemenyi ----------------------------------------------------


def test_friedman_hand_oracle():
    res = friedman(HAND)
    np.testing.assert_array_equal(res.average_ranks, [1.5, 2.0, 2.5])
    assert res.chi2 == pytest.approx(2.0, abs=1e-12)
    assert res.ff == pytest.approx(1.0, abs=1e-12)
    assert (res.df1, res.df2) == (2, 6)


def test_friedman_all_ties():
    res = friedman(np.full((6, 4), 0.8))
    np.testing.assert_array_equal(res.ranks, 2.5)
    assert res.chi2 == 0.0 and res.ff == 0.0


def test_friedman_scale_invariant():
    a, b = friedman(HAND), friedman(HAND * 37.5)
    assert np.array_equal(a.ranks, b.ranks)
    assert (a.chi2, a.ff) == (b.chi2, b.ff)


def test_friedman_errors():
    with pytest.raises(ValueError):
        friedman(np.ones((1, 3)))
    with pytest.raises(ValueError):
        friedman(np.ones((3, 1)))
    # Every dataset ranks the algorithms identically.
    with pytest.raises(SaturatedStatisticError):
        friedman(np.tile([3.0, 2.0, 1.0], (5, 1)))


@settings(max_examples=50)
@given(st.integers(2, 8), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_rank_rows_sum(m, k, seed):
    M = np.round(np.random.default_rng(seed).random((m, k)), 1)
    R = rank_matrix(M)
    np.testing.assert_array_equal(R.sum(axis=1), k * (k + 1) / 2)


def test_cd_reference_values():
    assert nemenyi_cd(5, 20) == pytest.approx(1.364, abs=1e-3)
    assert nemenyi_cd(2, 9) == pytest.approx(1.960 / 3, abs=1e-12)
    assert nemenyi_cd(4, 40, 0.10) == pytest.approx(nemenyi_cd(4, 10, 0.10) / 2, rel=1e-15)


def test_q_table_matches_studentized_range():
    for alpha, row in Q_ALPHA.items():
        for k, q in row.items():
            assert abs(q - studentized_range.ppf(1 - alpha, k, 1e6) / np.sqrt(2)) <= 0.0015


def test_cd_monotone():
    for k in range(2, 10):
        assert nemenyi_cd(k + 1, 10) > nemenyi_cd(k, 10)
    for m in range(2, 30):
        assert nemenyi_cd(5, m + 1) < nemenyi_cd(5, m)


def test_cd_errors():
    with pytest.raises(ValueError):
        nemenyi_cd(11, 10)
    with pytest.raises(ValueError):
        nemenyi_cd(5, 10, alpha=0.01)


def test_cd_groups():
    assert cd_groups([1.0, 1.0, 1.0], 0.5) == [[0, 1, 2]]
    assert cd_groups([1.0, 2.0, 3.0, 4.0], 1.5) == [[0, 1], [1, 2], [2, 3]]
    assert cd_groups([4.0, 1.0], 0.5) == [[1], [0]]
    assert cd_groups([1.0, 1.2, 3.0], 1.0) == [[0, 1], [2]]


def test_cd_diagram_all_ties():
    res = friedman(np.full((20, 5), 0.5))
    cd, rows = cd_diagram_data(res.ranks, names=list("abcde"))
    assert cd == pytest.approx(1.364, abs=1e-3)
    assert {r.group_id for r in rows} == {0} and [r.algorithm for r in rows] == list("abcde")
    assert rows[0].row() == "a,3.0,0"


# -- protocols -------------------------------------------------------------


def _stream(rng, n, rate=0.1):
    anomaly = rng.random(n) < rate
    X = np.where(anomaly[:, None], rng.uniform(5, 8, size=(n, 2)), rng.normal(scale=0.3, size=(n, 2)))
    return X, anomaly


def test_prequential_empty():
    m = ExposeModel(rks_fit(2, 10, 1.0), mode="online")
    assert prequential_eval([], m, 0.5) == []


def test_prequential_perfect_separation(rng):
    X, anomaly = _stream(rng, 300)
    anomaly[0] = False
    X[0] = 0.0
    m = ExposeModel(rks_fit(2, 300, 1.0), mode="decay", gamma=0.01)
    recs = prequential_eval(zip(X, anomaly), m, theta=0.1)
    assert len(recs) == 300 and m.count == 300
    assert [r.index for r in recs] == list(range(300))
    assert all(r.value == 1.0 for r in recs)
    assert recs[5].row().startswith("5,prequential,balanced_accuracy,")


def test_prequential_scores_before_update(rng):
    fmap = rks_fit(2, 200, 1.0, seed=1)
    X = rng.normal(scale=0.3, size=(50, 2))
    X[30] = [40.0, -40.0]
    labels = [Label.NORMAL] * 50
    seen = {}
    m = ExposeModel(fmap, mode="online")
    prequential_eval(zip(X, labels), m, 0.5, on_decision=lambda t, s, p: seen.setdefault(t, (s, p)))
    reference = ExposeModel(fmap, mode="online").partial_fit(X[:30]).score(X[30])
    score, predicted = seen[30]
    assert score.value == reference.value and predicted is Label.ANOMALY
    assert seen[0] == (None, Label.NORMAL)


def test_prequential_trailing_window(rng):
    fmap = rks_fit(2, 50, 1.0)
    X = rng.normal(size=(30, 2))
    labels = ["anomaly"] * 10 + ["normal"] * 20
    # theta above every possible score: all decisions say anomaly.
    recs = prequential_eval(zip(X, labels), ExposeModel(fmap, mode="online"), theta=1e9, window=5)
    assert recs[9].value == 1.0
    assert recs[12].value == pytest.approx(0.5 * (2 / 2) + 0.5 * 0.0)
    assert recs[29].value == 0.0


def test_prequential_rejects_batch_model(rng):
    m = fit(rng.normal(size=(5, 2)), rks_fit(2, 10, 1.0))
    with pytest.raises(ValueError):
        prequential_eval([(np.zeros(2), "normal")], m, 0.5)


def test_holdout_record_count(rng):
    fmap = rks_fit(2, 20, 1.0)
    X = rng.normal(size=(9000, 2))
    hold = (np.vstack([rng.normal(size=(50, 2)), rng.uniform(4, 6, size=(50, 2))]), [False] * 50 + [True] * 50)
    recs = holdout_eval(X, ExposeModel(fmap, mode="window", window=200), {0: hold}, every=25)
    assert len(recs) == 360
    assert recs[0].index == 25 and recs[-1].index == 9000
    assert all(r.metric == "auc" and r.protocol == "holdout" and r.value > 0.9 for r in recs)


def test_holdout_active_set_and_theta(rng):
    fmap = rks_fit(2, 100, 1.0)
    X = np.vstack([rng.normal(size=(100, 2)), rng.normal(loc=10, size=(100, 2))])
    concept = np.r_[np.zeros(100, int), np.ones(100, int)]
    sets = {c: (np.vstack([rng.normal(loc=10 * c, size=(30, 2)), rng.uniform(20, 30, size=(30, 2))]),
                [False] * 30 + [True] * 30) for c in (0, 1)}
    recs = holdout_eval(zip(X, concept, concept), ExposeModel(fmap, mode="window", window=50), sets,
                        every=50, theta=0.2)
    assert [(r.index, r.metric) for r in recs[:2]] == [(50, "auc"), (50, "balanced_accuracy")]
    assert len(recs) == 8 and recs[-2].value > 0.95


def test_holdout_missing_set(rng):
    fmap = rks_fit(2, 20, 1.0)
    X = rng.normal(size=(50, 2))
    with pytest.raises(KeyError):
        holdout_eval(X, ExposeModel(fmap), {1: (X, [True, False] * 25)}, every=10)
