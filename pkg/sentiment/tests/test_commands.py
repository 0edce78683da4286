import csv
import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from sentiment.checkpoint import load_checkpoint
from sentiment.models import Run, latest_runs

FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'
SAMPLE = FIXTURES / 'sample_reviews.csv'

MINI_CONFIG = {
    'preprocess': {'max_len': 12},
    'hyperparams': {
        'embedding_dim': 6, 'hidden_units': 3, 'filter_widths': [2, 3], 'filters_per_width': 3,
        'baseline_filter_width': 2, 'epochs': 2, 'batch_size': 4, 'learning_rate': 0.01,
    },
    'seed': 11,
}


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.config = self.root / 'config.json'
        self.config.write_text(json.dumps(MINI_CONFIG), encoding='utf-8')

    def call(self, name, *args, **options):
        out = StringIO()
        call_command(name, *args, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()

    def read_json(self, path):
        return json.loads(Path(path).read_text(encoding='utf-8'))


class PreprocessCommandTests(CommandTestCase):
    def test_outputs(self):
        out = self.root / 'prep'
        output = self.call('preprocess', config=str(self.config), data=str(SAMPLE), out=str(out))
        self.assertIn('Wrote cleaned.csv', output)

        expected = json.loads((FIXTURES / 'sample_tokens.json').read_text(encoding='utf-8'))
        with (out / 'cleaned.csv').open(encoding='utf-8', newline='') as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual([row['text'].split(' ') for row in rows], expected)
        self.assertEqual(rows[0]['label'], 'positive')

        stats = self.read_json(out / 'preprocess_stats.json')
        self.assertEqual(stats['documents'], 10)
        self.assertEqual(stats['dropped_documents'], 0)
        self.assertEqual(stats['classes']['counts'], {'1': 5, '0': 5})
        self.assertEqual(stats['embedding_coverage'], 0.0)
        self.assertEqual(stats['tokens'], sum(len(t) for t in expected))

        vocab = (out / 'vocab.txt').read_text(encoding='utf-8').splitlines()
        self.assertEqual(vocab[:2], ['<pad>', '<unk>'])
        self.assertEqual(stats['vocab_size'], len(vocab))

    def test_same_input_same_output(self):
        for name in ('a', 'b'):
            self.call('preprocess', data=str(SAMPLE), out=str(self.root / name), no_record=True)
        for artifact in ('cleaned.csv', 'vocab.txt', 'preprocess_stats.json'):
            self.assertEqual((self.root / 'a' / artifact).read_bytes(), (self.root / 'b' / artifact).read_bytes())

    def test_subsample(self):
        out = self.root / 'sub'
        self.call('preprocess', data=str(SAMPLE), out=str(out), subsample='6')
        stats = self.read_json(out / 'preprocess_stats.json')
        self.assertEqual(stats['documents'], 6)
        self.assertEqual(stats['classes']['counts'], {'1': 3, '0': 3})

    def test_missing_dataset(self):
        with self.assertRaisesMessage(CommandError, 'does not exist'):
            self.call('preprocess', data=str(self.root / 'absent.csv'), out=str(self.root / 'x'))

    def test_no_dataset(self):
        with self.assertRaisesMessage(CommandError, 'no dataset'):
            self.call('preprocess', out=str(self.root / 'x'))


class TrainCommandTests(CommandTestCase):
    def train(self, name, **options):
        out = self.root / name
        self.call('train', config=str(self.config), data=str(SAMPLE), out=str(out), **options)
        return out

    def test_artifacts_and_ledger(self):
        out = self.train('run')
        for artifact in ('checkpoint.npz', 'history.csv', 'roc.csv', 'config.json', 'metrics.json'):
            self.assertTrue((out / artifact).is_file(), artifact)
        metrics = self.read_json(out / 'metrics.json')
        self.assertEqual(metrics['evaluation'], 'holdout')
        self.assertEqual(metrics['arch'], 'bilstm-slmfcnn')
        self.assertEqual(metrics['train_size'] + metrics['test_size'], 10)
        self.assertEqual(metrics['test_size'], 2)
        for key in ('f1', 'accuracy', 'auc', 'confusion', 'roc', 'fpr_eq4', 'sensitivity'):
            self.assertIn(key, metrics)
        self.assertEqual((out / 'roc.csv').read_text().splitlines()[0], 'threshold,fpr,tpr')

        run = Run.objects.get()
        self.assertEqual(run.command, 'train')
        self.assertEqual(run.seed, 11)
        self.assertEqual(run.accuracy, metrics['accuracy'])
        self.assertNotIn('roc', run.metrics)

    def test_same_config_same_results(self):
        a, b = self.train('a'), self.train('b')
        ma, mb = self.read_json(a / 'metrics.json'), self.read_json(b / 'metrics.json')
        ma.pop('generated_at')
        mb.pop('generated_at')
        self.assertEqual(ma, mb)
        self.assertEqual((a / 'history.csv').read_bytes(), (b / 'history.csv').read_bytes())
        pa, pb = load_checkpoint(a / 'checkpoint.npz'), load_checkpoint(b / 'checkpoint.npz')
        for name, value in pa.model.parameters().items():
            np.testing.assert_array_equal(value, pb.model.parameters()[name], err_msg=name)

    def test_flags_override_the_config_file(self):
        out = self.train('cnn', arch='cnn', seed=5, epochs=1, freeze_embeddings=True)
        metrics = self.read_json(out / 'metrics.json')
        self.assertEqual(metrics['arch'], 'cnn')
        self.assertEqual(metrics['seed'], 5)
        self.assertEqual(metrics['epochs_run'], 1)
        self.assertFalse(load_checkpoint(out / 'checkpoint.npz').model.embedding.trainable)
        saved = self.read_json(out / 'config.json')
        self.assertFalse(saved['embeddings']['trainable'])
        self.assertEqual(saved['hyperparams']['hidden_units'], 3)

    def test_unknown_architecture(self):
        with self.assertRaises(CommandError):
            self.train('bad', arch='transformer')
        self.assertFalse(Run.objects.exists())

    def relabeled(self, negatives):
        """The sample reviews with only the last ``negatives`` rows kept negative."""
        with SAMPLE.open(encoding='utf-8', newline='') as fh:
            rows = list(csv.DictReader(fh))
        for i, row in enumerate(rows):
            row['label'] = 'negative' if i >= len(rows) - negatives else 'positive'
        path = self.root / f'skewed_{negatives}.csv'
        with path.open('w', encoding='utf-8', newline='') as fh:
            writer = csv.DictWriter(fh, fieldnames=['text', 'label'])
            writer.writeheader()
            writer.writerows(rows)
        return path

    def test_imbalanced_corpus_holds_out_both_classes(self):
        out = self.root / 'skewed'
        self.call('train', config=str(self.config), data=str(self.relabeled(2)), out=str(out))
        metrics = self.read_json(out / 'metrics.json')
        self.assertEqual(metrics['test_size'], 2)
        self.assertEqual(metrics['confusion']['tp'] + metrics['confusion']['fn'], 1)
        self.assertTrue((out / 'checkpoint.npz').is_file())

    def test_single_document_class_fails_before_training(self):
        out = self.root / 'lopsided'
        with self.assertRaisesMessage(CommandError, 'both classes'):
            self.call('train', config=str(self.config), data=str(self.relabeled(1)), out=str(out))
        self.assertFalse((out / 'checkpoint.npz').exists())
        self.assertFalse(Run.objects.exists())

    def test_no_record(self):
        self.train('quiet', no_record=True)
        self.assertFalse(Run.objects.exists())

    def test_evaluate_checkpoint(self):
        trained = self.train('run')
        out = self.root / 'eval'
        self.call('evaluate', data=str(SAMPLE), out=str(out), checkpoint=str(trained / 'checkpoint.npz'))
        metrics = self.read_json(out / 'metrics.json')
        self.assertEqual(metrics['test_size'], 10)
        self.assertEqual(metrics['arch'], 'bilstm-slmfcnn')
        self.assertEqual(sum(metrics['confusion'].values()), 10)
        self.assertTrue((out / 'roc.csv').is_file())
        self.assertEqual(Run.objects.filter(command='evaluate').count(), 1)

    def test_evaluate_missing_checkpoint(self):
        with self.assertRaises(CommandError):
            self.call('evaluate', data=str(SAMPLE), out=str(self.root / 'e'), checkpoint=str(self.root / 'none.npz'))


class CrossValCommandTests(CommandTestCase):
    def test_fold_table(self):
        out = self.root / 'cv'
        self.call('crossval', config=str(self.config), data=str(SAMPLE), out=str(out), arch='bilstm')
        with (out / 'crossval.csv').open(encoding='utf-8') as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual([r['fold'] for r in rows], ['1', '2', '3', 'mean'])
        mean = np.mean([float(r['accuracy']) for r in rows[:3]])
        self.assertAlmostEqual(float(rows[3]['accuracy']), mean)

        summary = self.read_json(out / 'crossval_metrics.json')
        self.assertEqual(summary['evaluation'], 'cv-mean')
        self.assertEqual(summary['k'], 3)
        self.assertEqual(len(summary['per_fold']), 3)
        self.assertEqual(sum(summary['confusion'].values()), 10)

    def test_k_flag(self):
        out = self.root / 'cv2'
        self.call('crossval', config=str(self.config), data=str(SAMPLE), out=str(out), arch='cnn', k_folds=2)
        self.assertEqual(self.read_json(out / 'crossval_metrics.json')['k'], 2)

    def test_too_many_folds(self):
        with self.assertRaises(CommandError):
            self.call('crossval', config=str(self.config), data=str(SAMPLE), out=str(self.root / 'x'), k_folds=6)


class GridSearchCommandTests(CommandTestCase):
    def test_single_combination_then_train_from_best_config(self):
        grid = self.root / 'grid.json'
        grid.write_text(json.dumps({'dropout_rate': [0.5], 'batch_size': [4], 'learning_rate': [0.01]}))
        out = self.root / 'grid'
        self.call('gridsearch', config=str(self.config), data=str(SAMPLE), out=str(out), grid=str(grid),
                  arch='cnn')

        with (out / 'grid_results.csv').open(encoding='utf-8') as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]['best'], 'True')
        summary = self.read_json(out / 'grid_summary.json')
        self.assertEqual(summary['best'], {'dropout_rate': 0.5, 'batch_size': 4, 'learning_rate': 0.01})

        best = self.read_json(out / 'best_config.json')
        self.assertEqual(best['arch'], 'cnn')
        self.assertEqual(best['hyperparams']['dropout_rate'], 0.5)
        trained = self.root / 'from-best'
        self.call('train', config=str(out / 'best_config.json'), data=str(SAMPLE), out=str(trained))
        self.assertEqual(self.read_json(trained / 'metrics.json')['arch'], 'cnn')

    def test_structural_key_in_grid(self):
        grid = self.root / 'grid.json'
        grid.write_text(json.dumps({'embedding_dim': [50, 100]}))
        with self.assertRaisesMessage(CommandError, 'cannot be searched'):
            self.call('gridsearch', config=str(self.config), data=str(SAMPLE), out=str(self.root / 'g'),
                      grid=str(grid))


class ReportCommandTests(CommandTestCase):
    def metrics_file(self, name, arch, accuracy, roc=True):
        data = {'arch': arch, 'dataset': 'reviews', 'evaluation': 'holdout', 'f1': 0.5,
                'accuracy': accuracy, 'auc': 0.75}
        if roc:
            data['roc'] = [['inf', 0.0, 0.0], [0.7, 0.5, 0.5], ['-inf', 1.0, 1.0]]
        path = self.root / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return path

    def test_table_and_roc_files(self):
        first = self.metrics_file('a.json', 'bilstm-slmfcnn', 0.9)
        second = self.metrics_file('b.json', 'cnn', 0.8, roc=False)
        out = self.root / 'report'
        output = self.call('report', str(first), str(second), out=str(out))
        self.assertIn('bilstm-slmfcnn', output)
        with (out / 'report.csv').open(encoding='utf-8') as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual([r['model'] for r in rows], ['bilstm-slmfcnn', 'cnn'])
        self.assertEqual(list(rows[0])[:6], ['model', 'dataset', 'evaluation', 'F1', 'A', 'AUC'])
        roc = out / 'roc_01_bilstm-slmfcnn_reviews.csv'
        self.assertEqual(roc.read_text().splitlines()[0], 'threshold,fpr,tpr')
        self.assertEqual(len(list(out.glob('roc_*.csv'))), 1)

    def test_malformed_metrics(self):
        path = self.root / 'bad.json'
        path.write_text(json.dumps({'arch': 'cnn', 'f1': 0.5}), encoding='utf-8')
        with self.assertRaisesMessage(CommandError, 'accuracy'):
            self.call('report', str(path), out=str(self.root / 'r'))

    def test_nothing_to_report(self):
        with self.assertRaises(CommandError):
            self.call('report', out=str(self.root / 'r'))

    def test_ledger_rows_from_train_and_crossval(self):
        self.call('train', config=str(self.config), data=str(SAMPLE), out=str(self.root / 't'), arch='cnn')
        self.call('crossval', config=str(self.config), data=str(SAMPLE), out=str(self.root / 'c'), arch='cnn')
        self.assertEqual(len(latest_runs()), 2)
        out = self.root / 'r'
        self.call('report', ledger=True, out=str(out))
        with (out / 'report.csv').open(encoding='utf-8') as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual(sorted(r['evaluation'] for r in rows), ['cv-mean', 'holdout'])
        self.assertTrue(all(r['source'].startswith('ledger:') for r in rows))
        self.assertEqual(Run.objects.filter(command='report').count(), 1)
