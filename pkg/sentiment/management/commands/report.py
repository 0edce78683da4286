import json
from pathlib import Path

import pandas as pd
from django.core.management.base import CommandError

from sentiment.exceptions import MetricError
from sentiment.metrics import roc_from_json, write_roc_csv
from sentiment.models import latest_runs

from ._base import SentimentCommand

REQUIRED_FIELDS = ('f1', 'accuracy', 'auc')


def read_metrics(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise MetricError(f'{path}: line {exc.lineno}: {exc.msg}') from exc
    if not isinstance(data, dict):
        raise MetricError(f'{path}: expected a JSON object')
    missing = [k for k in REQUIRED_FIELDS if not isinstance(data.get(k), (int, float))]
    if missing:
        raise MetricError(f'{path}: missing numeric field(s) {", ".join(missing)}')
    return data


def table_row(data, source):
    return {
        'model': data.get('arch', ''),
        'dataset': data.get('dataset', ''),
        'evaluation': data.get('evaluation', ''),
        'F1': data['f1'],
        'A': data['accuracy'],
        'AUC': data['auc'],
        'source': source,
    }


class Command(SentimentCommand):
    help = 'Builds a model-by-dataset comparison table (F1, accuracy, AUC) and per-run ROC files'

    common_arguments = False

    def add_command_arguments(self, parser):
        parser.add_argument('metrics', nargs='*', help='metrics.json / crossval_metrics.json files')
        parser.add_argument('--ledger', action='store_true', help='Also include the latest train and crossval runs')
        parser.add_argument('--out', default='report', help='Output directory (default: report)')

    def run(self, options):
        paths = options.get('metrics') or []
        if not paths and not options.get('ledger'):
            raise CommandError('give at least one metrics file or --ledger')
        out = Path(options['out'])
        out.mkdir(parents=True, exist_ok=True)

        rows, roc_written = [], 0
        for index, path in enumerate(paths, start=1):
            data = read_metrics(path)
            rows.append(table_row(data, str(path)))
            if data.get('roc'):
                name = f'roc_{index:02d}_{data.get("arch", "model")}_{data.get("dataset", "data")}.csv'
                write_roc_csv(roc_from_json(data['roc']), out / name)
                roc_written += 1
        if options.get('ledger'):
            for run in latest_runs():
                if all(k in run.metrics for k in REQUIRED_FIELDS):
                    rows.append(table_row(
                        {**run.metrics, 'arch': run.arch, 'dataset': run.dataset,
                         'evaluation': 'holdout' if run.command == 'train' else 'cv-mean'},
                        f'ledger:{run.pk}',
                    ))
        if not rows:
            raise CommandError('nothing to report: the ledger has no train or crossval runs')

        frame = pd.DataFrame(rows, columns=['model', 'dataset', 'evaluation', 'F1', 'A', 'AUC', 'source'])
        frame.to_csv(out / 'report.csv', index=False, float_format='%.17g', lineterminator='\n')
        self.stdout.write(frame.drop(columns='source').to_string(index=False, float_format=lambda v: f'{v:.4f}'))
        self.record(options, 'report', metrics={'rows': len(rows)}, out=out)
        self.done(f'Wrote report.csv and {roc_written} ROC file(s) to {out}')
