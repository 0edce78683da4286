import math

import pandas as pd

from sentiment.config import load_grid
from sentiment.pipeline import prepare
from sentiment.train import grid_search

from ._base import SentimentCommand, write_json


class Command(SentimentCommand):
    help = 'Searches a hyperparameter grid by cross-validated accuracy and writes the best configuration'

    def add_command_arguments(self, parser):
        parser.add_argument('--grid', help='JSON object of hyperparameter candidate lists (default: settings grid)')

    def run(self, options):
        cfg = self.load_config(options)
        grid = load_grid(options.get('grid'))
        out = self.output_dir(cfg)
        data = prepare(cfg).training_data

        size = math.prod(len(v) for v in grid.values() if isinstance(v, list))
        self.stdout.write(f'Grid search over {size} combination(s) for {cfg.arch}, k={cfg.k_folds}...')
        result = grid_search(
            cfg.arch, grid, data, cfg.seed, base=cfg.hyperparams, k=cfg.k_folds, jobs=cfg.jobs,
            validation_fraction=cfg.validation_fraction,
        )
        pd.DataFrame(result.rows()).to_csv(
            out / 'grid_results.csv', index=False, float_format='%.17g', lineterminator='\n'
        )
        best_cfg = cfg.with_hyperparams(result.best)
        best_cfg.to_json(out / 'best_config.json')

        best_mean = result.trials[result.best_index][1].mean
        write_json(out / 'grid_summary.json', {
            'arch': cfg.arch,
            'dataset': data.name,
            'seed': cfg.seed,
            'grid': grid,
            'best_index': result.best_index,
            'best': {k: result.trials[result.best_index][0][k] for k in result.keys},
            **{f'mean_{k}': v for k, v in best_mean.items()},
        })
        self.record(
            options, 'gridsearch', best_cfg, dataset=data.name,
            metrics={'best_index': result.best_index, **best_mean}, out=out,
        )
        self.done(
            f'Best combination #{result.best_index}: '
            + ', '.join(f'{k}={result.trials[result.best_index][0][k]}' for k in result.keys)
            + f' (mean accuracy {best_mean["accuracy"]:.4f}); wrote best_config.json to {out}'
        )
