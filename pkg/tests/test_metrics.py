import numpy as np
import pytest

from infodist.metrics import (accuracy, binary_auc, evaluate_probabilities,
                              macro_f1, macro_ovr_auc, per_class_f1,
                              per_class_ovr_auc)

from oracles import pairwise_auc


# ------------------------------------------------------------------- accuracy

def test_accuracy_all_correct():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0


def test_accuracy_half_correct():
    assert accuracy([0, 1, 0, 1], [0, 1, 1, 0]) == 0.5


def test_accuracy_against_counting_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 50))
        a = rng.integers(0, 4, size=n)
        b = rng.integers(0, 4, size=n)
        expected = sum(1 for x, y in zip(a, b) if x == y) / n
        assert accuracy(a, b) == expected


def test_accuracy_errors():
    with pytest.raises(ValueError, match="mismatch"):
        accuracy([0, 1], [0])
    with pytest.raises(ValueError, match="empty"):
        accuracy([], [])


# ------------------------------------------------------------------------- F1

def test_f1_perfect():
    assert macro_f1([0, 1, 2, 0], [0, 1, 2, 0], 3) == 1.0


def test_f1_absent_class_contributes_zero():
    # class 2 never appears in truth or predictions -> F1_2 = 0 by convention
    preds = [0, 0, 1, 1]
    truth = [0, 0, 1, 1]
    per = per_class_f1(preds, truth, 3)
    np.testing.assert_array_equal(per, [1.0, 1.0, 0.0])
    assert macro_f1(preds, truth, 3) == pytest.approx(2 / 3)


def test_f1_hand_confusion_table():
    # 6 items, 3 classes: truth (0,0,1,1,2,2), preds (0,1,1,2,2,2)
    truth = [0, 0, 1, 1, 2, 2]
    preds = [0, 1, 1, 2, 2, 2]
    # class 0: TP=1 FP=0 FN=1 -> 2/3; class 1: TP=1 FP=1 FN=1 -> 1/2
    # class 2: TP=2 FP=1 FN=0 -> 4/5
    per = per_class_f1(preds, truth, 3)
    np.testing.assert_allclose(per, [2 / 3, 0.5, 0.8])
    assert macro_f1(preds, truth, 3) == pytest.approx((2 / 3 + 0.5 + 0.8) / 3)


# ------------------------------------------------------------------------ AUC

def test_auc_perfectly_ordered():
    scores = [0.9, 0.8, 0.2, 0.1]
    labels = [True, True, False, False]
    assert binary_auc(scores, labels) == 1.0


def test_auc_constant_scores_half():
    assert binary_auc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5


def test_auc_eight_item_case_matches_pairwise_oracle():
    scores = [0.9, 0.8, 0.7, 0.6, 0.4, 0.3, 0.2, 0.1]
    labels = [1, 1, 0, 1, 0, 0, 1, 0]
    expected = pairwise_auc(scores, [bool(v) for v in labels])
    assert expected == 12 / 16  # frozen from the exhaustive concordance count
    assert binary_auc(scores, np.asarray(labels, dtype=bool)) == expected


def test_auc_matches_pairwise_oracle_fuzz():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(4, 30))
        scores = np.round(rng.random(n), 2)  # coarse grid forces ties
        labels = rng.integers(0, 2, size=n).astype(bool)
        if labels.all() or not labels.any():
            continue
        assert binary_auc(scores, labels) == pytest.approx(
            pairwise_auc(scores.tolist(), labels.tolist()), abs=1e-12)


def test_auc_invariant_under_monotone_transforms():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(5, 40))
        scores = rng.normal(size=n)
        labels = rng.integers(0, 2, size=n).astype(bool)
        if labels.all() or not labels.any():
            continue
        base = binary_auc(scores, labels)
        assert binary_auc(np.exp(scores), labels) == base
        assert binary_auc(3.0 * scores + 7.0, labels) == base
        assert binary_auc(np.tanh(scores), labels) == base


def test_macro_auc_skips_degenerate_classes():
    probs = np.array([
        [0.7, 0.2, 0.1],
        [0.6, 0.3, 0.1],
        [0.2, 0.7, 0.1],
        [0.1, 0.8, 0.1],
    ])
    truth = np.array([0, 0, 1, 1])  # class 2 has no positives
    per = per_class_ovr_auc(probs, truth, 3)
    assert np.isnan(per[2]) and not np.isnan(per[0]) and not np.isnan(per[1])
    assert macro_ovr_auc(probs, truth, 3) == pytest.approx((per[0] + per[1]) / 2)


def test_macro_auc_errors_when_nothing_defined():
    probs = np.array([[1.0], [1.0]])
    with pytest.raises(ValueError, match="positives and negatives"):
        macro_ovr_auc(probs, np.array([0, 0]), 1)


# --------------------------------------------------------------------- report

def test_report_fields_and_ranges():
    rng = np.random.default_rng(3)
    probs = rng.dirichlet(np.ones(4), size=60)
    truth = rng.integers(0, 4, size=60)
    report = evaluate_probabilities(probs, truth, 4)
    assert 0.0 <= report.accuracy <= 1.0
    assert 0.0 <= report.macro_f1 <= 1.0
    assert 0.0 <= report.macro_auc <= 1.0
    assert report.n_items == 60
    assert report.macro_f1 == pytest.approx(report.per_class_f1.mean())
    defined = ~np.isnan(report.per_class_auc)
    assert report.macro_auc == pytest.approx(report.per_class_auc[defined].mean())
    text = report.to_text()
    assert "accuracy" in text and "macro_auc" in text
    assert "accuracy" in report.to_json()


def test_report_invariant_under_item_permutation():
    rng = np.random.default_rng(4)
    probs = rng.dirichlet(np.ones(3), size=40)
    truth = rng.integers(0, 3, size=40)
    a = evaluate_probabilities(probs, truth, 3)
    perm = rng.permutation(40)
    b = evaluate_probabilities(probs[perm], truth[perm], 3)
    assert a.accuracy == b.accuracy
    np.testing.assert_allclose(a.per_class_f1, b.per_class_f1)
    np.testing.assert_allclose(a.per_class_auc, b.per_class_auc)


def test_argmax_tie_breaks_to_smaller_class():
    probs = np.array([[0.4, 0.4, 0.2]])
    report_pred = np.argmax(probs, axis=1)
    assert report_pred[0] == 0


def test_f1_averaging_variants_match_sklearn():
    from sklearn.metrics import f1_score as sk_f1

    from infodist.metrics import f1_score

    rng = np.random.default_rng(7)
    for _ in range(10):
        n, C = int(rng.integers(10, 60)), 4
        truth = rng.integers(0, C, size=n)
        preds = rng.integers(0, C, size=n)
        labels = list(range(C))
        for avg in ("macro", "weighted", "micro"):
            ours = f1_score(preds, truth, C, average=avg)
            ref = sk_f1(truth, preds, labels=labels, average=avg, zero_division=0)
            assert ours == pytest.approx(ref, abs=1e-12)


def test_auc_averaging_variants_match_sklearn():
    from sklearn.metrics import roc_auc_score

    from infodist.metrics import ovr_auc_score

    rng = np.random.default_rng(8)
    for _ in range(10):
        n, C = int(rng.integers(20, 60)), 3
        truth = rng.integers(0, C, size=n)
        if len(np.unique(truth)) < C:
            continue
        probs = rng.dirichlet(np.ones(C), size=n)
        onehot = np.zeros((n, C))
        onehot[np.arange(n), truth] = 1.0
        for avg in ("macro", "weighted", "micro"):
            ours = ovr_auc_score(probs, truth, C, average=avg)
            ref = roc_auc_score(onehot, probs, average=avg)
            assert ours == pytest.approx(ref, abs=1e-12)
