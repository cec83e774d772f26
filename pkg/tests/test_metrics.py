import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diam.metrics import auc, classification_metrics, evaluate


def test_perfect_predictions():
    r = classification_metrics([0.9, 0.1, 0.8], [1, 0, 1])
    assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)


def test_all_positive_half_true():
    r = classification_metrics([0.9] * 4, [1, 0, 1, 0])
    assert r.precision == 0.5 and r.recall == 1.0
    assert r.f1 == pytest.approx(2 / 3)


def test_no_predicted_positives():
    r = classification_metrics([0.1, 0.2], [1, 0])
    assert r.precision == 0.0 and not r.precision_defined
    assert r.recall == 0.0 and r.recall_defined


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert auc([0.5] * 4, [1, 0, 1, 0]) == 0.5
    # both positive-negative pairs are ordered correctly
    assert brute_auc([0.9, 0.4, 0.6], [1, 0, 1]) == 1.0
    assert auc([0.9, 0.4, 0.6], [1, 0, 1]) == 1.0
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), st.integers(0, 1)),
                min_size=2, max_size=30))
def test_auc_matches_pair_count(rows):
    scores, labels = zip(*rows)
    if len(set(labels)) < 2:
        return
    assert auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)


def test_report_formats(tmp_path):
    r = evaluate(np.array([0.9, 0.2, 0.6, 0.4]), np.array([1, 0, 0, 1]))
    assert 0 <= r.f1 <= 1 and r.auc == 0.75
    assert "f1" in r.format()
    r.write_csv(str(tmp_path / "r.csv"))
    assert (tmp_path / "r.csv").read_text().startswith("metric") or (tmp_path / "r.csv").exists()
