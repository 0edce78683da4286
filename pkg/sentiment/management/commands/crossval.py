import pandas as pd

from sentiment.pipeline import prepare
from sentiment.train import cross_validate

from ._base import SentimentCommand, timestamp, write_json


class Command(SentimentCommand):
    help = 'Runs stratified k-fold cross-validation and writes per-fold and mean metrics'

    def add_command_arguments(self, parser):
        parser.add_argument('--k', type=int, dest='k_folds', help='Number of folds (default: 3)')

    def run(self, options):
        cfg = self.load_config(options)
        if options.get('k_folds') is not None:
            cfg.k_folds = options['k_folds']
            cfg.validate()
        out = self.output_dir(cfg)
        data = prepare(cfg).training_data

        self.stdout.write(f'Cross-validating {cfg.arch} with k={cfg.k_folds} on {len(data.docs)} documents...')
        result = cross_validate(
            cfg.arch, cfg.hyperparams, data, cfg.seed, k=cfg.k_folds, jobs=cfg.jobs,
            validation_fraction=cfg.validation_fraction,
        )
        pd.DataFrame(result.rows()).to_csv(
            out / 'crossval.csv', index=False, float_format='%.17g', lineterminator='\n'
        )
        metrics = {
            **result.mean,
            'confusion': result.confusion.to_dict(),
            'per_fold': [
                {'fold': r.fold, 'epochs_run': r.epochs_run, **r.summary.to_dict(with_roc=False)}
                for r in result.folds
            ],
        }
        write_json(out / 'crossval_metrics.json', {
            'generated_at': timestamp(),
            'evaluation': 'cv-mean',
            'arch': cfg.arch,
            'dataset': data.name,
            'seed': cfg.seed,
            'k': cfg.k_folds,
            'hyperparams': cfg.hyperparams.to_dict(),
            **metrics,
        })

        for row in result.rows():
            self.stdout.write(
                f'  fold {row["fold"]}: accuracy {row["accuracy"]:.4f}  F1 {row["f1"]:.4f}  AUC {row["auc"]:.4f}'
            )
        self.record(options, 'crossval', cfg, dataset=data.name, metrics=metrics, out=out)
        self.done(f'Wrote crossval.csv and crossval_metrics.json to {out}')
