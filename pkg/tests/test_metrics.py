"""Tests for classification metrics and report summaries."""

import math

import numpy as np
import pytest

from mvfed.errors import LengthMismatch
from mvfed.metrics import (
    METRIC_NAMES,
    MetricsReport,
    MetricsRow,
    average_rows,
    compute_metrics,
)


def brute_force_metrics(pred, true, pos):
    """Independent oracle: count the confusion cells with plain loops."""
    tp = fp = fn = tn = 0
    correct = 0
    for p, t in zip(pred, true):
        correct += p == t
        if p == pos and t == pos:
            tp += 1
        elif p == pos:
            fp += 1
        elif t == pos:
            fn += 1
        else:
            tn += 1
    acc = correct / len(pred)
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return acc, prec, rec, f1, (tp, fp, fn, tn)


class TestComputeMetrics:
    def test_perfect_predictions(self):
        row = compute_metrics([1, 0, 1], [1, 0, 1])
        assert row.accuracy == 1.0
        assert row.precision == 1.0
        assert row.recall == 1.0
        assert row.f1 == 1.0
        assert (row.true_pos, row.false_pos, row.false_neg, row.true_neg) == (2, 0, 0, 1)
        assert not row.zero_division

    def test_all_wrong_flags_division(self):
        row = compute_metrics([1, 1], [0, 0])
        assert row.accuracy == 0.0
        assert row.precision == 0.0
        assert row.recall == 0.0
        assert row.f1 == 0.0
        assert row.zero_division

    def test_half_right(self):
        row = compute_metrics([1, 0, 0, 1], [1, 1, 0, 0])
        assert row.accuracy == 0.5
        assert row.precision == 0.5
        assert row.recall == 0.5
        assert row.f1 == 0.5
        assert not row.zero_division

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            n_classes = int(rng.integers(2, 5))
            pred = rng.integers(0, n_classes, size=n)
            true = rng.integers(0, n_classes, size=n)
            pos = int(rng.integers(0, n_classes))
            row = compute_metrics(pred, true, positive_class=pos)
            acc, prec, rec, f1, cells = brute_force_metrics(pred, true, pos)
            assert row.accuracy == pytest.approx(acc, abs=0)
            assert row.precision == pytest.approx(prec, abs=0)
            assert row.recall == pytest.approx(rec, abs=0)
            assert row.f1 == pytest.approx(f1, rel=1e-15)
            assert (row.true_pos, row.false_pos, row.false_neg, row.true_neg) == cells

    def test_values_stay_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(1, 25))
            pred = rng.integers(0, 3, size=n)
            true = rng.integers(0, 3, size=n)
            row = compute_metrics(pred, true, positive_class=1)
            for name in METRIC_NAMES:
                v = row.value(name)
                assert 0.0 <= v <= 1.0

    def test_f1_never_exceeds_larger_component(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(1, 30))
            pred = rng.integers(0, 2, size=n)
            true = rng.integers(0, 2, size=n)
            row = compute_metrics(pred, true)
            assert row.f1 <= max(row.precision, row.recall) + 1e-15

    def test_accuracy_invariant_under_relabeling(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            n = int(rng.integers(2, 30))
            pred = rng.integers(0, 3, size=n)
            true = rng.integers(0, 3, size=n)
            relabel = rng.permutation(3)
            row = compute_metrics(pred, true, positive_class=1)
            row2 = compute_metrics(
                relabel[pred], relabel[true], positive_class=int(relabel[1])
            )
            assert row2.accuracy == row.accuracy
            assert row2.precision == row.precision
            assert row2.recall == row.recall
            assert row2.f1 == row.f1

    def test_confusion_cells_partition_the_sample(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            n = int(rng.integers(1, 40))
            pred = rng.integers(0, 4, size=n)
            true = rng.integers(0, 4, size=n)
            row = compute_metrics(pred, true, positive_class=2)
            assert row.true_pos + row.false_pos + row.false_neg + row.true_neg == n

    def test_no_true_positives_in_truth_flags_recall(self):
        row = compute_metrics([0, 0, 0], [0, 0, 0], positive_class=1)
        assert row.accuracy == 1.0
        assert row.recall == 0.0
        assert row.zero_division

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            compute_metrics([1, 0], [1])
        with pytest.raises(LengthMismatch):
            compute_metrics([], [])
        with pytest.raises(LengthMismatch):
            compute_metrics([[1, 0]], [[1, 0]])


class TestAverageRows:
    def test_single_row_identity(self):
        row = compute_metrics([1, 0, 1], [1, 0, 0])
        assert average_rows([row]) == row

    def test_means_and_summed_counts(self):
        a = compute_metrics([1, 0, 1], [1, 0, 1])
        b = compute_metrics([1, 0, 0, 1], [1, 1, 0, 0])
        merged = average_rows([a, b])
        assert merged.accuracy == pytest.approx((1.0 + 0.5) / 2)
        assert merged.f1 == pytest.approx((1.0 + 0.5) / 2)
        assert merged.true_pos == a.true_pos + b.true_pos
        assert merged.true_neg == a.true_neg + b.true_neg
        assert not merged.zero_division

    def test_flag_propagates(self):
        clean = compute_metrics([1, 0], [1, 0])
        flagged = compute_metrics([1, 1], [0, 0])
        assert average_rows([clean, flagged]).zero_division

    def test_empty_rejected(self):
        with pytest.raises(LengthMismatch):
            average_rows([])


class TestMetricsReport:
    def make_report(self, values):
        rows = [
            MetricsRow(
                accuracy=v, precision=v, recall=v, f1=v,
                true_pos=1, false_pos=0, false_neg=0, true_neg=1,
                zero_division=False,
            )
            for v in values
        ]
        return MetricsReport(mode="mvl", rows=rows)

    def test_mean_and_population_std_match_numpy(self):
        vals = [0.9, 0.8, 0.95, 0.7]
        report = self.make_report(vals)
        assert report.mean("accuracy") == pytest.approx(np.mean(vals), rel=1e-15)
        assert report.std("accuracy") == pytest.approx(np.std(vals), rel=1e-12)

    def test_single_repeat_std_is_zero(self):
        report = self.make_report([0.83])
        assert report.std("f1") == 0.0

    def test_summary_covers_all_metrics(self):
        report = self.make_report([0.5, 0.7])
        summary = report.summary()
        assert set(summary) == set(METRIC_NAMES)
        mu, sd = summary["recall"]
        assert mu == pytest.approx(0.6)
        assert sd == pytest.approx(0.1)

    def test_empty_report_rejected(self):
        report = MetricsReport(mode="mvl", rows=[])
        with pytest.raises(LengthMismatch):
            report.mean("accuracy")

    def test_unknown_metric_rejected(self):
        report = self.make_report([0.5])
        with pytest.raises(KeyError):
            report.rows[0].value("auc")
