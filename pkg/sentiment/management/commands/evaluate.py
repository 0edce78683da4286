from dataclasses import replace
from pathlib import Path

from sentiment.checkpoint import load_checkpoint
from sentiment.metrics import write_roc_csv
from sentiment.pipeline import prepare
from sentiment.train import evaluate

from ._base import SentimentCommand, timestamp, write_json


class Command(SentimentCommand):
    help = 'Scores a saved checkpoint on every document of a corpus'

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='checkpoint.npz written by train')

    def run(self, options):
        cfg = self.load_config(options)
        ckpt = load_checkpoint(options['checkpoint'])
        model = ckpt.model
        # Text must be cleaned and encoded exactly as it was for training.
        stored = ckpt.preprocess
        stopwords = stored.get('stopwords')
        cfg.preprocess = replace(
            cfg.preprocess,
            strip_diacritics=stored.get('strip_diacritics', cfg.preprocess.strip_diacritics),
            stopwords=stopwords if stopwords and Path(stopwords).is_file() else cfg.preprocess.stopwords,
            max_len=model.hp.max_len,
            subsample=None,
        )
        cfg.arch = model.arch
        out = self.output_dir(cfg)
        prepared = prepare(cfg, vocab=ckpt.vocab, embedding=model.embedding)

        self.stdout.write(f'Evaluating {model.arch} on {len(prepared.docs)} documents...')
        summary = evaluate(model, prepared.docs)
        write_roc_csv(summary.roc, out / 'roc.csv')
        write_json(out / 'metrics.json', {
            'generated_at': timestamp(),
            'evaluation': 'holdout',
            'arch': model.arch,
            'dataset': prepared.dataset.name,
            'checkpoint': str(options['checkpoint']),
            'test_size': len(prepared.docs),
            'hyperparams': model.hp.to_dict(),
            **summary.to_dict(),
        })
        self.record(
            options, 'evaluate', cfg, dataset=prepared.dataset.name,
            metrics=summary.to_dict(with_roc=False), out=out,
        )
        self.done(f'accuracy {summary.accuracy:.4f}, F1 {summary.f1:.4f}, AUC {summary.auc:.4f}')
