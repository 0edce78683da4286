"""Pretrained word vectors aligned to a vocabulary."""
import logging
import unicodedata
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import EmbeddingDimensionError, EmbeddingParseError, ShapeError
from .tensor import DTYPE, Rng, Tensor, rand_uniform
from .textproc import PAD_ID, RESERVED, TokenizedDoc, Vocabulary

logger = logging.getLogger(__name__)

DEFAULT_OOV_SCALE = 0.25


@dataclass
class EmbeddingMatrix:
    weights: Tensor
    trainable: bool = True
    coverage: float = 0.0

    @property
    def vocab_size(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]

    def copy(self):
        return EmbeddingMatrix(self.weights.copy(), self.trainable, self.coverage)


def _parse_header(parts):
    if len(parts) != 2:
        return None
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        return None


def _init_rows(rng: Rng, vocab_size, dim, scale):
    weights = rand_uniform(rng, (vocab_size, dim), -scale, scale)
    weights[PAD_ID] = 0.0
    return weights


def random_embeddings(vocab: Vocabulary, dim: int, rng: Rng, scale=DEFAULT_OOV_SCALE, trainable=True):
    """Matrix built from the OOV initializer alone, for runs without a vector file."""
    return EmbeddingMatrix(_init_rows(rng, len(vocab), dim, scale), trainable, 0.0)


def load_embeddings(path, vocab: Vocabulary, rng: Rng, dim=None, scale=DEFAULT_OOV_SCALE, trainable=True):
    """Read a word2vec-style text file and align it to ``vocab``.

    An optional first line ``<count> <dim>`` is detected automatically. Rows
    for tokens missing from the file are drawn uniform on [-scale, scale);
    the PAD row is zero. The random draw happens before the file is read, so
    the result depends only on (file, vocab, seed).
    """
    path = Path(path)
    vectors = {}
    expected = None
    with path.open(encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip()
            if not line:
                continue
            parts = line.split(' ')
            if lineno == 1:
                header = _parse_header(parts)
                if header is not None:
                    expected = header[1]
                    if dim is not None and expected != dim:
                        raise EmbeddingDimensionError(
                            f'{path} holds {expected}-d vectors, configured dimension is {dim}'
                        )
                    continue
            if expected is None:
                expected = dim if dim is not None else len(parts) - 1
                if expected < 1:
                    raise EmbeddingParseError('row has no vector components', line=lineno)
            if len(parts) - 1 != expected:
                raise EmbeddingParseError(
                    f'expected a token and {expected} floats, got {len(parts) - 1} values', line=lineno
                )
            token = unicodedata.normalize('NFC', parts[0])
            if token in vectors or token not in vocab or token in RESERVED:
                continue
            try:
                vectors[token] = np.array(parts[1:], dtype=DTYPE)
            except ValueError as exc:
                raise EmbeddingParseError(f'non-numeric component ({exc})', line=lineno) from exc
            if not np.all(np.isfinite(vectors[token])):
                raise EmbeddingParseError('vector has NaN or Inf components', line=lineno)

    if expected is None:
        if dim is None:
            raise EmbeddingParseError(f'{path} contains no vectors')
        expected = dim

    weights = _init_rows(rng, len(vocab), expected, scale)
    for token, vector in vectors.items():
        weights[vocab.token_to_id[token]] = vector

    content = len(vocab) - len(RESERVED)
    coverage = len(vectors) / content if content else 0.0
    logger.info('embeddings: %d/%d vocabulary tokens found in %s (coverage %.3f)',
                len(vectors), content, path.name, coverage)
    if content and coverage < 0.5:
        logger.warning('low embedding coverage %.3f: most rows are randomly initialized', coverage)
    return EmbeddingMatrix(weights, trainable, coverage)


def _check_ids(emb: EmbeddingMatrix, ids):
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= emb.vocab_size):
        raise ShapeError(f'token id out of range [0, {emb.vocab_size})')
    return ids


def lookup(emb: EmbeddingMatrix, doc) -> Tensor:
    """Gather embedding rows for a ``TokenizedDoc`` or an id array of any shape."""
    ids = doc.ids if isinstance(doc, TokenizedDoc) else doc
    ids = _check_ids(emb, ids)
    return emb.weights[ids]


def lookup_backward(emb: EmbeddingMatrix, ids, dout: Tensor):
    """Scatter ``dout`` back onto the looked-up rows.

    Returns ``(rows, grad_rows)``: the sorted distinct non-PAD ids and their
    accumulated gradients. Nothing else in the matrix receives a gradient.
    """
    ids = _check_ids(emb, ids).reshape(-1)
    dout = dout.reshape(ids.size, emb.dim)
    rows, inverse = np.unique(ids, return_inverse=True)
    grad_rows = np.zeros((rows.size, emb.dim), dtype=DTYPE)
    np.add.at(grad_rows, inverse, dout)
    keep = rows != PAD_ID
    return rows[keep], grad_rows[keep]
