"""Urdu text cleaning, tokenization, stopword filtering and id encoding."""
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import regex

from .exceptions import EmptyDocumentError, TextEncodingError, VocabularyError

logger = logging.getLogger(__name__)

PAD_TOKEN = '<pad>'
UNK_TOKEN = '<unk>'
PAD_ID = 0
UNK_ID = 1
RESERVED = (PAD_TOKEN, UNK_TOKEN)

ZWNJ = '\u200c'

DEFAULT_STOPWORDS_FILE = Path(__file__).resolve().parent / 'data' / 'urdu_stopwords.txt'

# Greedy \S* makes every match the longest one starting at a scheme or www prefix.
_URL_RE = regex.compile(r'(?:https?|ftp)://\S*|www\.\S*', flags=regex.IGNORECASE)

# Latin letters, ASCII and Arabic-Indic digits, ASCII and Unicode punctuation,
# control characters and invisible format marks (ZWNJ/ZWJ stay: they are intra-word).
_REMOVE_RE = regex.compile(
    r'[\p{Script=Latin}'
    r'0-9\u0660-\u0669\u06f0-\u06f9'
    r'!-/:-@\[-`{-~\p{P}'
    r'\p{Cc}'
    r'\u00ad\u200b\u200e\u200f\u202a-\u202e\u2060\u2066-\u2069\ufeff]+'
)

_DIACRITICS_RE = regex.compile(r'[\u064b-\u065f]+')
_SPACE_RE = regex.compile(r'\s+')


def normalize(text, strip_diacritics=False) -> str:
    """Clean one document.

    Order: NFC, URLs, removal classes, optional diacritics, whitespace runs.
    The result is a fixed point: normalizing it again changes nothing.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode('utf-8')
        except UnicodeDecodeError as exc:
            raise TextEncodingError(f'invalid UTF-8 at byte {exc.start}') from exc
    try:
        text.encode('utf-8')
    except UnicodeEncodeError as exc:
        raise TextEncodingError(f'unencodable code point at index {exc.start}') from exc

    text = unicodedata.normalize('NFC', text)
    text = _URL_RE.sub(' ', text)
    text = _REMOVE_RE.sub(' ', text)
    if strip_diacritics:
        text = _DIACRITICS_RE.sub('', text)
    text = _SPACE_RE.sub(' ', text).strip()
    return unicodedata.normalize('NFC', text)


def tokenize(text: str) -> list:
    tokens = []
    for raw in text.split():
        token = raw.strip(ZWNJ)
        if token:
            tokens.append(token)
    return tokens


def remove_stopwords(tokens, stoplist) -> list:
    return [t for t in tokens if t not in stoplist]


def load_stoplist(path=None, strip_diacritics=False) -> frozenset:
    """Read a stopword file: UTF-8, one token per line, '#' starts a comment line.

    Entries go through ``normalize`` so they compare equal to cleaned tokens.
    """
    path = Path(path) if path is not None else DEFAULT_STOPWORDS_FILE
    words = set()
    with path.open(encoding='utf-8') as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            words.update(tokenize(normalize(line, strip_diacritics=strip_diacritics)))
    logger.debug('loaded %d stopwords from %s', len(words), path)
    return frozenset(words)


@dataclass(frozen=True)
class RawDocument:
    text: str
    label: int


@dataclass
class Preprocessor:
    """The full cleaning pipeline bound to one set of flags."""

    stoplist: frozenset = frozenset()
    strip_diacritics: bool = False

    @classmethod
    def from_file(cls, stopwords_path=None, strip_diacritics=False):
        return cls(load_stoplist(stopwords_path, strip_diacritics), strip_diacritics)

    def __call__(self, text) -> list:
        return remove_stopwords(
            tokenize(normalize(text, strip_diacritics=self.strip_diacritics)),
            self.stoplist,
        )


@dataclass
class Vocabulary:
    token_to_id: dict
    id_to_token: list
    min_freq: int = 1

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def id_of(self, token) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def decode(self, ids) -> list:
        return [self.id_to_token[int(i)] for i in ids]

    @classmethod
    def from_tokens(cls, tokens, min_freq=1):
        """Rebuild from an id-ordered token list that starts with the reserved tokens."""
        tokens = list(tokens)
        if tuple(tokens[:2]) != RESERVED:
            raise VocabularyError(f'vocabulary must start with {RESERVED}')
        mapping = {}
        for i, token in enumerate(tokens):
            if token in mapping:
                raise VocabularyError(f'duplicate token {token!r} at id {i}')
            mapping[token] = i
        return cls(mapping, tokens, min_freq)

    def save(self, path):
        Path(path).write_text(''.join(f'{t}\n' for t in self.id_to_token), encoding='utf-8')

    @classmethod
    def load(cls, path, min_freq=1):
        lines = Path(path).read_text(encoding='utf-8').split('\n')
        if lines and lines[-1] == '':
            lines.pop()
        return cls.from_tokens(lines, min_freq)


def build_vocab(corpus, min_freq=1) -> Vocabulary:
    """Admit tokens seen at least ``min_freq`` times.

    Ids follow descending frequency; equal frequencies are ordered by code point.
    """
    if min_freq < 1:
        raise VocabularyError('min_freq must be at least 1')
    counts = Counter()
    n_docs = 0
    for tokens in corpus:
        counts.update(tokens)
        n_docs += 1
    if n_docs == 0:
        raise VocabularyError('cannot build a vocabulary from an empty corpus')

    admitted = sorted(
        (t for t, c in counts.items() if c >= min_freq and t not in RESERVED),
        key=lambda t: (-counts[t], t),
    )
    vocab = Vocabulary.from_tokens([*RESERVED, *admitted], min_freq)
    logger.info('vocabulary: %d tokens (%d distinct seen, min_freq=%d)', len(vocab), len(counts), min_freq)
    return vocab


@dataclass(frozen=True)
class TokenizedDoc:
    ids: np.ndarray = field(repr=False)
    true_len: int
    label: int


def encode(tokens, vocab: Vocabulary, max_len: int, label=0) -> TokenizedDoc:
    """Map tokens to ids, keep the first ``max_len`` and right-pad with PAD."""
    if max_len < 1:
        raise ValueError('max_len must be at least 1')
    if not tokens:
        raise EmptyDocumentError('document has no tokens after cleaning')
    kept = [vocab.id_of(t) for t in tokens[:max_len]]
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    ids[:len(kept)] = kept
    ids.setflags(write=False)
    return TokenizedDoc(ids=ids, true_len=len(kept), label=int(label))
