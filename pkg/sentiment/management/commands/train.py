import pandas as pd

from sentiment.checkpoint import save_checkpoint
from sentiment.corpus import stratified_split
from sentiment.exceptions import SplitError
from sentiment.metrics import write_roc_csv
from sentiment.pipeline import SPLIT_STREAM, TRIAL_STREAM, prepare
from sentiment.tensor import Rng
from sentiment.train import run_trial

from ._base import SentimentCommand, timestamp, write_json


class Command(SentimentCommand):
    help = 'Trains one model on a stratified training split and scores it on the held-out rest'

    def run(self, options):
        cfg = self.load_config(options)
        out = self.output_dir(cfg)
        prepared = prepare(cfg)
        data = prepared.training_data

        train_idx, test_idx = stratified_split(data.labels, cfg.test_fraction, Rng(cfg.seed).child(SPLIT_STREAM))
        if test_idx.size == 0:
            raise SplitError('the held-out split is empty; raise test_fraction or supply more documents')
        held_classes = set(data.labels[test_idx].tolist())
        if held_classes != {0, 1}:
            raise SplitError(
                f'the held-out split only holds class {sorted(held_classes)}; '
                'both classes need at least two documents to score a model'
            )
        self.stdout.write(
            f'Training {cfg.arch} on {train_idx.size} documents, holding out {test_idx.size}...'
        )
        model, history, summary = run_trial(
            cfg.arch, cfg.hyperparams, data, train_idx, test_idx,
            Rng(cfg.seed).child(TRIAL_STREAM), cfg.validation_fraction,
        )

        save_checkpoint(out / 'checkpoint.npz', model, prepared.vocab, vars(cfg.preprocess))
        pd.DataFrame(history.to_rows()).to_csv(
            out / 'history.csv', index=False, float_format='%.17g', lineterminator='\n'
        )
        write_roc_csv(summary.roc, out / 'roc.csv')
        cfg.to_json(out / 'config.json')
        report = {
            'generated_at': timestamp(),
            'evaluation': 'holdout',
            'arch': cfg.arch,
            'dataset': data.name,
            'seed': cfg.seed,
            'hyperparams': cfg.hyperparams.to_dict(),
            'train_size': int(train_idx.size),
            'test_size': int(test_idx.size),
            'epochs_run': len(history),
            'best_epoch': history.best_epoch,
            'stopped_early': history.stopped_early,
            **summary.to_dict(),
        }
        write_json(out / 'metrics.json', report)

        self.record(options, 'train', cfg, dataset=data.name, metrics=summary.to_dict(with_roc=False), out=out)
        self.done(
            f'{cfg.arch}: accuracy {summary.accuracy:.4f}, F1 {summary.f1:.4f}, AUC {summary.auc:.4f} '
            f'({len(history)} epochs); artifacts in {out}'
        )
