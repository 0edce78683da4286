"""Shared flags, config loading, error translation and ledger recording for the engine commands."""
import json
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from sentiment.config import RunConfig
from sentiment.exceptions import SentimentError
from sentiment.models import record_run
from sentiment.networks import ARCHITECTURES, PRESETS

logger = logging.getLogger('sentiment.commands')

# Flag name -> path inside the nested run configuration.
FLAG_KEYS = {
    'data': ('data', 'path'),
    'text_column': ('data', 'text_column'),
    'label_column': ('data', 'label_column'),
    'embeddings': ('embeddings', 'path'),
    'stopwords': ('preprocess', 'stopwords'),
    'min_freq': ('preprocess', 'min_freq'),
    'max_len': ('preprocess', 'max_len'),
    'epochs': ('hyperparams', 'epochs'),
    'arch': ('arch',),
    'preset': ('preset',),
    'seed': ('seed',),
    'out': ('out',),
    'jobs': ('jobs',),
}


def flag_overrides(options) -> dict:
    """Nested overrides for every flag actually given on the command line."""
    overrides = {}
    for flag, path in FLAG_KEYS.items():
        value = options.get(flag)
        if value is None:
            continue
        target = overrides
        for key in path[:-1]:
            target = target.setdefault(key, {})
        target[path[-1]] = value
    if options.get('strip_diacritics'):
        overrides.setdefault('preprocess', {})['strip_diacritics'] = True
    if options.get('freeze_embeddings'):
        overrides.setdefault('embeddings', {})['trainable'] = False
    return overrides


def write_json(path, data):
    Path(path).write_text(
        json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + '\n', encoding='utf-8'
    )


def timestamp():
    return timezone.now().isoformat(timespec='seconds')


class SentimentCommand(BaseCommand):
    """Base for commands that read a run configuration."""

    common_arguments = True

    def add_arguments(self, parser):
        if self.common_arguments:
            parser.add_argument('--config', help='JSON run configuration file')
            parser.add_argument('--data', help='CSV corpus with a header row')
            parser.add_argument('--text-column', help='Name of the text column (default: text)')
            parser.add_argument('--label-column', help='Name of the label column (default: label)')
            parser.add_argument('--embeddings', help='Pretrained word vectors in word2vec text format')
            parser.add_argument('--stopwords', help='Stopword file (default: the bundled Urdu list)')
            parser.add_argument('--strip-diacritics', action='store_true', help='Remove Arabic-script diacritics')
            parser.add_argument('--min-freq', type=int, help='Minimum token count for the vocabulary')
            parser.add_argument('--arch', choices=sorted(ARCHITECTURES), help='Model architecture')
            parser.add_argument('--preset', choices=list(PRESETS), help='Optimized hyperparameter preset')
            parser.add_argument('--seed', type=int, help='Seed for every random draw')
            parser.add_argument('--out', help='Output directory')
            parser.add_argument(
                '--jobs', type=int, help='Worker processes shared by all cross-validation trials (default: 1)'
            )
            parser.add_argument('--max-len', type=int, help='Tokens kept per document')
            parser.add_argument('--epochs', type=int, help='Maximum training epochs')
            parser.add_argument(
                '--freeze-embeddings', action='store_true', help='Keep embedding rows fixed during training'
            )
        parser.add_argument(
            '--no-record', action='store_true', help='Do not store this run in the ledger'
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            self.run(options)
        except (SentimentError, OSError) as exc:
            logger.debug('command failed', exc_info=True)
            raise CommandError(str(exc)) from exc

    def run(self, options):
        raise NotImplementedError

    def load_config(self, options, require_data=True) -> RunConfig:
        overrides = flag_overrides(options)
        if options.get('config'):
            cfg = RunConfig.from_file(options['config'], overrides)
        else:
            cfg = RunConfig.build(overrides=overrides)
        return cfg.check_paths(require_data=require_data)

    def output_dir(self, cfg: RunConfig) -> Path:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        return out

    def record(self, options, command, cfg: RunConfig = None, dataset='', metrics=None, out=''):
        if options.get('no_record'):
            return None
        return record_run(
            command,
            arch=cfg.arch if cfg else '',
            dataset=dataset,
            seed=cfg.seed if cfg else None,
            config=cfg.to_dict() if cfg else {},
            metrics=metrics,
            output_dir=out,
        )

    def done(self, message):
        self.stdout.write(self.style.SUCCESS(message))
