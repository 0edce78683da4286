"""Corpus ingestion, class statistics, stratified sampling and synthetic corpora."""
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import CorpusError, SplitError
from .tensor import Rng
from .textproc import RawDocument

logger = logging.getLogger(__name__)

DEFAULT_LABEL_MAP = {'positive': 1, 'negative': 0}

# Named corpus sizes for carving groups out of a large source corpus.
SIZE_VARIANTS = {
    'imdb-small': 600,
    'imdb-medium': 3000,
    'imdb-large': 10000,
}

HIGH_IMBALANCE_RATIO = 1.5


def as_rng(seed) -> Rng:
    return seed if isinstance(seed, Rng) else Rng(seed)


@dataclass
class Dataset:
    documents: list
    name: str = 'corpus'
    label_map: dict = field(default_factory=lambda: dict(DEFAULT_LABEL_MAP))

    def __len__(self):
        return len(self.documents)

    @property
    def labels(self):
        return np.array([d.label for d in self.documents], dtype=np.int64)

    def select(self, indices, name=None):
        return Dataset([self.documents[i] for i in indices], name or self.name, dict(self.label_map))

    def require_both_classes(self):
        present = set(self.labels.tolist())
        if present != {0, 1}:
            raise CorpusError(f'{self.name}: both classes are required, found {sorted(present)}')
        return self


def load_csv(path, text_column='text', label_column='label', label_map=None, name=None) -> Dataset:
    """Read a UTF-8 CSV with a header row.

    Quoted fields may hold commas and newlines. Errors name the physical line
    a record starts on.
    """
    path = Path(path)
    label_map = dict(label_map or DEFAULT_LABEL_MAP)
    try:
        frame = pd.read_csv(
            path, dtype=str, keep_default_na=False, encoding='utf-8', on_bad_lines='error',
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError:
        raise CorpusError('file is empty', path=path) from None
    except pd.errors.ParserError as exc:
        raise CorpusError(f'malformed CSV: {exc}', path=path) from exc
    except UnicodeDecodeError as exc:
        raise CorpusError(f'not valid UTF-8 ({exc.reason})', path=path) from exc

    missing = [c for c in (text_column, label_column) if c not in frame.columns]
    if missing:
        raise CorpusError(
            f'missing column(s) {", ".join(missing)}; header has {", ".join(frame.columns)}', path=path
        )
    if frame.empty:
        raise CorpusError('file has a header but no rows', path=path)

    # Record i starts after the header plus every line earlier records spanned,
    # blank lines included; those are dropped only once lines are numbered.
    spans = frame.apply(
        lambda row: 1 + sum(v.count('\n') for v in row if isinstance(v, str)), axis=1
    ).to_numpy()
    starts = 2 + np.concatenate([[0], np.cumsum(spans)[:-1]]).astype(np.int64)
    blank = frame.apply(lambda row: all(not isinstance(v, str) or v == '' for v in row), axis=1).to_numpy()
    frame, starts = frame[~blank], starts[~blank]
    if frame.empty:
        raise CorpusError('file has a header but no rows', path=path)

    documents = []
    for line, text, raw_label in zip(starts, frame[text_column], frame[label_column]):
        if not isinstance(text, str) or not isinstance(raw_label, str):
            raise CorpusError('record is missing fields', line=int(line), path=path)
        label_key = raw_label.strip()
        if label_key not in label_map:
            raise CorpusError(
                f'label {raw_label!r} is not in the label map {sorted(label_map)}', line=int(line), path=path
            )
        if not text.strip():
            raise CorpusError('empty text field', line=int(line), path=path)
        documents.append(RawDocument(text, int(label_map[label_key])))

    ds = Dataset(documents, name or path.stem, label_map)
    logger.info('loaded %d documents from %s', len(ds), path)
    return ds


def write_csv(ds: Dataset, path, text_column='text', label_column='label'):
    inverse = {}
    for key, value in ds.label_map.items():
        inverse.setdefault(value, key)
    frame = pd.DataFrame({
        text_column: [d.text for d in ds.documents],
        label_column: [inverse[d.label] for d in ds.documents],
    })
    frame.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')


@dataclass(frozen=True)
class ClassReport:
    name: str
    counts: dict
    total: int
    ratio: float
    imbalance: str

    def to_dict(self):
        return {
            'name': self.name,
            'counts': {str(k): v for k, v in self.counts.items()},
            'total': self.total,
            'ratio': self.ratio,
            'imbalance': self.imbalance,
        }

    def __str__(self):
        lines = [f'{self.name}: {self.total} documents']
        for label, count in sorted(self.counts.items(), reverse=True):
            lines.append(f'  class {label}: {count}')
        lines.append(f'  imbalance ratio {self.ratio:.3f} ({self.imbalance})')
        return '\n'.join(lines)


def class_report(ds: Dataset) -> ClassReport:
    counts = Counter(d.label for d in ds.documents)
    counts = {label: counts.get(label, 0) for label in (1, 0)}
    present = [c for c in counts.values() if c]
    ratio = max(present) / min(present) if len(present) == 2 else float('inf')
    level = 'High' if ratio >= HIGH_IMBALANCE_RATIO else 'Low'
    return ClassReport(ds.name, counts, len(ds), ratio, level)


def _quotas(class_sizes: dict, take: int, every_class=False) -> dict:
    """Split ``take`` across classes proportionally, largest remainder first.

    With ``every_class`` a class of two or more members that rounded down to
    nothing takes one slot from the class holding the most, as long as that
    class keeps at least one.
    """
    total = sum(class_sizes.values())
    exact = {c: take * n / total for c, n in class_sizes.items()}
    quotas = {c: int(np.floor(v)) for c, v in exact.items()}
    leftover = take - sum(quotas.values())
    by_remainder = sorted(class_sizes, key=lambda c: (-(exact[c] - quotas[c]), c))
    for c in by_remainder[:leftover]:
        quotas[c] += 1
    if every_class:
        for c in sorted(class_sizes):
            if quotas[c] or class_sizes[c] < 2:
                continue
            donor = max(quotas, key=lambda d: (quotas[d], -d))
            if quotas[donor] < 2:
                break
            quotas[donor] -= 1
            quotas[c] += 1
    return quotas


def _by_class(labels, rng: Rng):
    labels = np.asarray(labels)
    groups = {}
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        groups[c] = members[rng.permutation(members.size)]
    return groups


def stratified_split(labels, fraction, seed):
    """``(kept, held)`` index arrays; ``held`` takes ``fraction`` of every class."""
    if not 0.0 <= fraction < 1.0:
        raise SplitError(f'split fraction must lie in [0, 1), got {fraction}')
    labels = np.asarray(labels)
    rng = as_rng(seed)
    groups = _by_class(labels, rng)
    quotas = _quotas(
        {c: g.size for c, g in groups.items()}, int(round(fraction * labels.size)), every_class=True
    )
    held = np.concatenate([g[:quotas[c]] for c, g in groups.items()]) if groups else np.array([], int)
    kept = np.concatenate([g[quotas[c]:] for c, g in groups.items()]) if groups else np.array([], int)
    return np.sort(kept), np.sort(held)


def subsample(ds: Dataset, n: int, seed) -> Dataset:
    """Stratified random subset of ``n`` documents, in shuffled order."""
    if n > len(ds):
        raise SplitError(f'cannot draw {n} documents from {len(ds)}')
    if n < 1:
        raise SplitError('subsample size must be positive')
    rng = as_rng(seed)
    groups = _by_class(ds.labels, rng)
    quotas = _quotas({c: g.size for c, g in groups.items()}, n)
    chosen = np.concatenate([g[:quotas[c]] for c, g in groups.items()])
    chosen = chosen[rng.permutation(chosen.size)]
    return ds.select(chosen.tolist(), name=f'{ds.name}-{n}')


def resolve_size(value) -> int:
    """Accept a named size variant or a plain count."""
    if isinstance(value, str) and value in SIZE_VARIANTS:
        return SIZE_VARIANTS[value]
    try:
        return int(value)
    except (TypeError, ValueError):
        raise CorpusError(
            f'unknown size {value!r}; use a number or one of {", ".join(SIZE_VARIANTS)}'
        ) from None


# ---------------------------------------------------------------------------
# Synthetic corpora
# ---------------------------------------------------------------------------

_LETTERS = 'بپتٹجچدڈرزسشفقکگلمن'


@dataclass(frozen=True)
class VocabSpec:
    """Shape of a synthetic corpus. Keyword sets must be disjoint."""

    positive_keywords: tuple = ('اچھا', 'شاندار', 'بہترین', 'پسندیدہ', 'خوشگوار')
    negative_keywords: tuple = ('برا', 'بیکار', 'ناپسند', 'مایوس', 'گھٹیا')
    filler_size: int = 200
    min_len: int = 6
    max_len: int = 14
    keywords_per_doc: tuple = (1, 3)

    def filler(self):
        # Three-letter Urdu-script nonsense words, none of them a keyword.
        reserved = set(self.positive_keywords) | set(self.negative_keywords)
        words = []
        n = len(_LETTERS)
        for i in range(n ** 3):
            word = _LETTERS[i // (n * n)] + _LETTERS[(i // n) % n] + _LETTERS[i % n]
            if word not in reserved:
                words.append(word)
            if len(words) == self.filler_size:
                break
        return words


def synth_corpus(n: int, spec: VocabSpec = None, seed=0, name='synthetic') -> Dataset:
    """``n // 2`` positive and ``n // 2`` negative documents of filler plus class keywords."""
    if n < 2 or n % 2:
        raise CorpusError(f'synthetic corpus size must be a positive even number, got {n}')
    spec = spec or VocabSpec()
    if set(spec.positive_keywords) & set(spec.negative_keywords):
        raise CorpusError('positive and negative keyword sets overlap')
    rng = as_rng(seed)
    filler = spec.filler()
    lo_kw, hi_kw = spec.keywords_per_doc

    documents = []
    for i in range(n):
        label = 1 if i % 2 == 0 else 0
        keywords = spec.positive_keywords if label else spec.negative_keywords
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        words = [rng.choice(filler) for _ in range(length)]
        for _ in range(int(rng.integers(lo_kw, hi_kw + 1))):
            words.insert(int(rng.integers(0, len(words) + 1)), rng.choice(keywords))
        documents.append(RawDocument(' '.join(words), label))
    order = rng.permutation(n)
    return Dataset([documents[i] for i in order], name, dict(DEFAULT_LABEL_MAP))
