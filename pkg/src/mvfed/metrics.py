"""Classification metrics for experiment reports.

Accuracy is plain correct/total over the raw class indices, while
precision, recall and F1 binarize the problem against a designated
positive class. Division-by-zero cases (no predicted positives, no true
positives, or a zero precision+recall sum) yield 0.0 and raise a flag on
the row instead of propagating NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class MetricsRow:
    """Metrics for one evaluation (one repeat, or one client)."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    true_pos: int
    false_pos: int
    false_neg: int
    true_neg: int
    zero_division: bool

    def value(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)


def compute_metrics(predicted, truth, positive_class: int = 1) -> MetricsRow:
    """Score predicted class indices against the ground truth.

    Raises LengthMismatch when the two sequences differ in length or are
    empty. All four metric values land in [0, 1].
    """
    pred = np.asarray(predicted)
    true = np.asarray(truth)
    if pred.ndim != 1 or true.ndim != 1:
        raise LengthMismatch("predictions and truth must be 1-d sequences")
    if pred.shape[0] != true.shape[0]:
        raise LengthMismatch(
            f"{pred.shape[0]} predictions vs {true.shape[0]} labels"
        )
    if pred.shape[0] == 0:
        raise LengthMismatch("cannot score an empty prediction set")

    accuracy = float(np.mean(pred == true))

    pred_pos = pred == positive_class
    true_pos_mask = true == positive_class
    tp = int(np.sum(pred_pos & true_pos_mask))
    fp = int(np.sum(pred_pos & ~true_pos_mask))
    fn = int(np.sum(~pred_pos & true_pos_mask))
    tn = int(np.sum(~pred_pos & ~true_pos_mask))

    flagged = False
    if tp + fp == 0:
        precision = 0.0
        flagged = True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flagged = True
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
        if tp + fp > 0 and tp + fn > 0:
            # Both denominators were fine but the scores are zero anyway;
            # the harmonic mean itself is the degenerate division.
            flagged = True
    else:
        f1 = 2.0 * precision * recall / (precision + recall)

    return MetricsRow(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        true_pos=tp,
        false_pos=fp,
        false_neg=fn,
        true_neg=tn,
        zero_division=flagged,
    )


def average_rows(rows: list[MetricsRow]) -> MetricsRow:
    """Combine per-client rows into one row by averaging each metric.

    Metric values are arithmetic means (mean of per-client F1, not the F1
    of pooled counts), confusion counts are summed, and the flag is set
    if any constituent row was flagged.
    """
    if not rows:
        raise LengthMismatch("no rows to average")
    n = len(rows)
    return MetricsRow(
        accuracy=sum(r.accuracy for r in rows) / n,
        precision=sum(r.precision for r in rows) / n,
        recall=sum(r.recall for r in rows) / n,
        f1=sum(r.f1 for r in rows) / n,
        true_pos=sum(r.true_pos for r in rows),
        false_pos=sum(r.false_pos for r in rows),
        false_neg=sum(r.false_neg for r in rows),
        true_neg=sum(r.true_neg for r in rows),
        zero_division=any(r.zero_division for r in rows),
    )


@dataclass
class MetricsReport:
    """Per-repeat metric rows for one training mode, plus summaries."""

    mode: str
    rows: list[MetricsRow]

    def values(self, name: str) -> list[float]:
        return [row.value(name) for row in self.rows]

    def mean(self, name: str) -> float:
        vals = self.values(name)
        if not vals:
            raise LengthMismatch("report has no rows")
        return sum(vals) / len(vals)

    def std(self, name: str) -> float:
        """Population standard deviation (a single repeat gives 0)."""
        vals = self.values(name)
        if not vals:
            raise LengthMismatch("report has no rows")
        mu = sum(vals) / len(vals)
        return math.sqrt(sum((v - mu) ** 2 for v in vals) / len(vals))

    def summary(self) -> dict[str, tuple[float, float]]:
        return {name: (self.mean(name), self.std(name)) for name in METRIC_NAMES}
