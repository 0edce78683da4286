"""Binary classification metrics: confusion tallies, F1, accuracy, ROC and AUC.

Class 1 (positive / satisfied) is the positive class throughout.
"""
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .exceptions import MetricError

DEFAULT_THRESHOLD = 0.5

PrecisionRecallF1 = namedtuple('PrecisionRecallF1', ['precision', 'recall', 'f1'])


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise MetricError('confusion counts must be nonnegative')

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other):
        if not isinstance(other, ConfusionCounts):
            return NotImplemented
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    def to_dict(self):
        return {'tp': self.tp, 'tn': self.tn, 'fp': self.fp, 'fn': self.fn}


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    tpr: float


def _check_inputs(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.size != labels.size:
        raise MetricError(f'{scores.size} scores but {labels.size} labels')
    if scores.size == 0:
        raise MetricError('no predictions to score')
    if not np.isin(labels, (0, 1)).all():
        raise MetricError('labels must be 0 or 1')
    return scores, labels.astype(np.int64)


def confusion(scores, labels, threshold=DEFAULT_THRESHOLD) -> ConfusionCounts:
    """Tally predictions, predicting class 1 iff score >= threshold."""
    scores, labels = _check_inputs(scores, labels)
    pred = scores >= threshold
    pos = labels == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def accuracy(cc: ConfusionCounts) -> float:
    if cc.total == 0:
        raise MetricError('accuracy of an empty tally')
    return (cc.tp + cc.tn) / cc.total


def f1(cc: ConfusionCounts) -> PrecisionRecallF1:
    """Precision, recall and F1; any zero denominator makes that quantity 0."""
    precision = cc.tp / (cc.tp + cc.fp) if cc.tp + cc.fp else 0.0
    recall = cc.tp / (cc.tp + cc.fn) if cc.tp + cc.fn else 0.0
    score = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PrecisionRecallF1(precision, recall, score)


def sensitivity(cc: ConfusionCounts) -> float:
    if cc.tp + cc.fn == 0:
        raise MetricError('sensitivity undefined: no positive examples')
    return cc.tp / (cc.tp + cc.fn)


def fpr_eq4(cc: ConfusionCounts) -> float:
    """FP / (TN + FP), reported under its own name next to specificity."""
    if cc.tn + cc.fp == 0:
        raise MetricError('false-positive rate undefined: no negative examples')
    return cc.fp / (cc.tn + cc.fp)


def specificity(cc: ConfusionCounts) -> float:
    """Textbook specificity TN / (TN + FP)."""
    if cc.tn + cc.fp == 0:
        raise MetricError('specificity undefined: no negative examples')
    return cc.tn / (cc.tn + cc.fp)


def roc_curve(scores, labels) -> list:
    """Sweep thresholds +inf, every distinct score (descending), -inf."""
    scores, labels = _check_inputs(scores, labels)
    pos = np.sort(scores[labels == 1])
    neg = np.sort(scores[labels == 0])
    if pos.size == 0 or neg.size == 0:
        raise MetricError('ROC needs both classes present')
    thresholds = np.concatenate([[np.inf], np.unique(scores)[::-1], [-np.inf]])
    tp = pos.size - np.searchsorted(pos, thresholds, side='left')
    fp = neg.size - np.searchsorted(neg, thresholds, side='left')
    return [
        RocPoint(float(t), float(f) / neg.size, float(p) / pos.size)
        for t, f, p in zip(thresholds, fp, tp)
    ]


def auc(points) -> float:
    """Trapezoidal area under a ROC curve."""
    if len(points) < 2:
        raise MetricError('AUC needs at least two ROC points')
    fpr = np.array([p.fpr for p in points])
    tpr = np.array([p.tpr for p in points])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def rank_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties counted half."""
    scores, labels = _check_inputs(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError('AUC needs both classes present')
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    starts = np.cumsum(counts) - counts
    ranks = (starts + (counts + 1) / 2.0)[inverse]
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc(scores, labels, tolerance=1e-12):
    """ROC points and their area, cross-checked against the rank statistic."""
    points = roc_curve(scores, labels)
    area = auc(points)
    ranked = rank_auc(scores, labels)
    if abs(area - ranked) > tolerance:
        raise MetricError(f'trapezoidal AUC {area!r} disagrees with rank AUC {ranked!r}')
    return points, area


def write_roc_csv(points, path):
    frame = pd.DataFrame(
        [(p.threshold, p.fpr, p.tpr) for p in points], columns=['threshold', 'fpr', 'tpr']
    )
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


def read_roc_csv(path) -> list:
    frame = pd.read_csv(path, dtype='float64')
    return [RocPoint(float(r.threshold), float(r.fpr), float(r.tpr)) for r in frame.itertuples()]


@dataclass(frozen=True)
class Summary:
    confusion: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    f1: float
    sensitivity: float
    fpr_eq4: float
    specificity: float
    auc: float
    roc: tuple

    def to_dict(self, with_roc=True):
        data = {
            'f1': self.f1,
            'accuracy': self.accuracy,
            'auc': self.auc,
            'precision': self.precision,
            'recall': self.recall,
            'sensitivity': self.sensitivity,
            'fpr_eq4': self.fpr_eq4,
            'specificity': self.specificity,
            'confusion': self.confusion.to_dict(),
        }
        if with_roc:
            data['roc'] = [[_json_float(p.threshold), p.fpr, p.tpr] for p in self.roc]
        return data


def _json_float(value):
    # JSON has no infinities; the sentinel thresholds travel as strings.
    return value if np.isfinite(value) else ('inf' if value > 0 else '-inf')


def roc_from_json(rows) -> list:
    return [RocPoint(float(t), float(f), float(p)) for t, f, p in rows]


def summarize(scores, labels, threshold=DEFAULT_THRESHOLD) -> Summary:
    """Every reported metric for one set of held-out predictions."""
    cc = confusion(scores, labels, threshold)
    prf = f1(cc)
    points, area = roc_auc(scores, labels)
    return Summary(
        confusion=cc,
        accuracy=accuracy(cc),
        precision=prf.precision,
        recall=prf.recall,
        f1=prf.f1,
        sensitivity=sensitivity(cc),
        fpr_eq4=fpr_eq4(cc),
        specificity=specificity(cc),
        auc=area,
        roc=tuple(points),
    )
