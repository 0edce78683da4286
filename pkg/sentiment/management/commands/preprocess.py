from sentiment.corpus import Dataset, SIZE_VARIANTS, write_csv
from sentiment.pipeline import prepare
from sentiment.textproc import RawDocument

from ._base import SentimentCommand, write_json


class Command(SentimentCommand):
    help = 'Cleans a corpus and writes the cleaned CSV, the vocabulary and corpus statistics'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--subsample',
            help=f'Stratified subset size before cleaning: a number or one of {", ".join(SIZE_VARIANTS)}',
        )

    def run(self, options):
        cfg = self.load_config(options)
        if options.get('subsample'):
            cfg.preprocess.subsample = options['subsample']
        out = self.output_dir(cfg)
        self.stdout.write(f'Preprocessing {cfg.data.path}...')

        prepared = prepare(cfg)
        cleaned = Dataset(
            [RawDocument(' '.join(tokens), doc.label) for tokens, doc in zip(prepared.tokens, prepared.dataset.documents)],
            prepared.dataset.name,
            prepared.dataset.label_map,
        )
        write_csv(cleaned, out / 'cleaned.csv', cfg.data.text_column, cfg.data.label_column)
        prepared.vocab.save(out / 'vocab.txt')
        stats = prepared.stats()
        write_json(out / 'preprocess_stats.json', stats)

        if prepared.dropped:
            self.stdout.write(self.style.WARNING(f'{prepared.dropped} document(s) were empty after cleaning'))
        self.stdout.write(
            f'  - {stats["documents"]} documents, {stats["tokens"]} tokens\n'
            f'  - vocabulary {stats["vocab_size"]}\n'
            f'  - embedding coverage {stats["embedding_coverage"]:.3f}\n'
            f'  - imbalance {stats["classes"]["ratio"]:.3f} ({stats["classes"]["imbalance"]})'
        )
        self.record(options, 'preprocess', cfg, dataset=prepared.dataset.name, metrics=stats, out=out)
        self.done(f'Wrote cleaned.csv, vocab.txt and preprocess_stats.json to {out}')
