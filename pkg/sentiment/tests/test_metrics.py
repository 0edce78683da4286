import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from sentiment import metrics
from sentiment.exceptions import MetricError
from sentiment.metrics import ConfusionCounts
from sentiment.tensor import Rng


def pair_count_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


class ConfusionTests(SimpleTestCase):
    def test_threshold_is_inclusive(self):
        cc = metrics.confusion([0.5, 0.49, 0.9, 0.1], [1, 1, 0, 0])
        self.assertEqual(cc, ConfusionCounts(tp=1, tn=1, fp=1, fn=1))

    def test_length_mismatch(self):
        with self.assertRaises(MetricError):
            metrics.confusion([0.5], [1, 0])

    def test_bad_labels(self):
        with self.assertRaises(MetricError):
            metrics.confusion([0.5, 0.2], [1, 2])

    def test_negative_counts(self):
        with self.assertRaises(MetricError):
            ConfusionCounts(tp=-1)

    def test_additivity(self):
        rng = Rng(8)
        a_scores, b_scores = rng.random(30), rng.random(40)
        a_labels, b_labels = rng.integers(0, 2, 30), rng.integers(0, 2, 40)
        joined = metrics.confusion(np.concatenate([a_scores, b_scores]), np.concatenate([a_labels, b_labels]))
        self.assertEqual(joined, metrics.confusion(a_scores, a_labels) + metrics.confusion(b_scores, b_labels))


class FormulaTests(SimpleTestCase):
    def test_accuracy_example(self):
        self.assertAlmostEqual(metrics.accuracy(ConfusionCounts(tp=8, tn=6, fp=3, fn=3)), 0.70)

    def test_perfect_accuracy(self):
        self.assertEqual(metrics.accuracy(ConfusionCounts(tp=5, tn=5)), 1.0)

    def test_empty_tally(self):
        with self.assertRaises(MetricError):
            metrics.accuracy(ConfusionCounts())

    def test_f1_example(self):
        prf = metrics.f1(ConfusionCounts(tp=93, fp=10, fn=3))
        self.assertAlmostEqual(prf.precision, 0.9029, places=4)
        self.assertAlmostEqual(prf.recall, 0.9688, places=4)
        self.assertAlmostEqual(prf.f1, 0.9347, places=4)

    def test_f1_without_true_positives(self):
        self.assertEqual(metrics.f1(ConfusionCounts(tn=4, fp=2, fn=1)).f1, 0.0)

    def test_sensitivity_and_rates(self):
        cc = ConfusionCounts(tp=8, tn=6, fp=3, fn=2)
        self.assertEqual(metrics.sensitivity(cc), 0.8)
        self.assertAlmostEqual(metrics.fpr_eq4(cc), 3 / 9)
        self.assertAlmostEqual(metrics.specificity(cc), 6 / 9)

    def test_undefined_rates(self):
        with self.assertRaises(MetricError):
            metrics.sensitivity(ConfusionCounts(tn=3, fp=1))
        with self.assertRaises(MetricError):
            metrics.fpr_eq4(ConfusionCounts(tp=3, fn=1))

    def test_random_tallies_match_direct_arithmetic(self):
        rng = Rng(1000)
        for _ in range(1000):
            tp, tn, fp, fn = (int(v) for v in rng.integers(1, 500, 4))
            cc = ConfusionCounts(tp, tn, fp, fn)
            self.assertEqual(metrics.accuracy(cc), (tp + tn) / (tp + tn + fp + fn))
            p, r = tp / (tp + fp), tp / (tp + fn)
            self.assertEqual(metrics.f1(cc).f1, 2 * p * r / (p + r))
            self.assertEqual(metrics.sensitivity(cc), tp / (tp + fn))
            self.assertEqual(metrics.fpr_eq4(cc), fp / (tn + fp))
            for value in (metrics.accuracy(cc), metrics.f1(cc).f1, metrics.fpr_eq4(cc)):
                self.assertTrue(0.0 <= value <= 1.0)


class RocTests(SimpleTestCase):
    def test_perfect_separation(self):
        points, area = metrics.roc_auc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0])
        self.assertEqual(area, 1.0)
        self.assertEqual((points[0].fpr, points[0].tpr), (0.0, 0.0))
        self.assertEqual((points[-1].fpr, points[-1].tpr), (1.0, 1.0))

    def test_reversed_ranking(self):
        _, area = metrics.roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0])
        self.assertEqual(area, 0.0)

    def test_all_tied(self):
        points, area = metrics.roc_auc([0.5] * 4, [1, 0, 1, 0])
        self.assertEqual(area, 0.5)
        self.assertEqual(len(points), 3)

    def test_single_class(self):
        with self.assertRaises(MetricError):
            metrics.roc_curve([0.2, 0.4], [1, 1])

    def test_curve_is_monotone(self):
        rng = Rng(3)
        points = metrics.roc_curve(rng.random(100), rng.integers(0, 2, 100))
        thresholds = [p.threshold for p in points]
        self.assertEqual(thresholds, sorted(thresholds, reverse=True))
        self.assertTrue(all(a.fpr <= b.fpr and a.tpr <= b.tpr for a, b in zip(points, points[1:])))

    def test_trapezoid_matches_pair_counting(self):
        rng = Rng(77)
        for _ in range(1000):
            n = int(rng.integers(2, 201))
            # coarse scores so ties are common
            scores = np.round(rng.random(n), 1)
            labels = rng.integers(0, 2, n)
            labels[0], labels[1] = 0, 1
            _, area = metrics.roc_auc(scores, labels)
            self.assertLess(abs(area - pair_count_auc(scores.tolist(), labels.tolist())), 1e-12)

    def test_swapping_labels_and_negating_scores_preserves_auc(self):
        rng = Rng(12)
        scores, labels = rng.random(60), rng.integers(0, 2, 60)
        labels[:2] = [0, 1]
        _, area = metrics.roc_auc(scores, labels)
        _, swapped = metrics.roc_auc(-scores, 1 - labels)
        self.assertAlmostEqual(area, swapped, places=12)
        _, flipped = metrics.roc_auc(scores, 1 - labels)
        self.assertAlmostEqual(area + flipped, 1.0, places=12)

    def test_csv_export(self):
        points = metrics.roc_curve([0.9, 0.1 + 0.2, 0.2], [1, 0, 1])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'roc.csv'
            metrics.write_roc_csv(points, path)
            lines = path.read_text().splitlines()
            self.assertEqual(lines[0], 'threshold,fpr,tpr')
            self.assertEqual(len(lines), len(points) + 1)
            self.assertEqual(metrics.read_roc_csv(path), points)


class SummaryTests(SimpleTestCase):
    def test_summary_fields_and_json(self):
        summary = metrics.summarize([0.9, 0.7, 0.4, 0.2], [1, 0, 1, 0])
        self.assertEqual(summary.confusion, ConfusionCounts(tp=1, tn=1, fp=1, fn=1))
        self.assertEqual(summary.accuracy, 0.5)
        self.assertEqual(summary.auc, 0.75)
        data = summary.to_dict()
        self.assertEqual(data['roc'][0][0], 'inf')
        self.assertEqual(data['roc'][-1][0], '-inf')
        self.assertEqual(metrics.roc_from_json(data['roc']), list(summary.roc))
        self.assertNotIn('roc', summary.to_dict(with_roc=False))
