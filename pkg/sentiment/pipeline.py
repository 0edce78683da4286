"""From a run configuration to encoded documents: the steps every command shares."""
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .corpus import Dataset, class_report, load_csv, resolve_size, subsample
from .embeddings import EmbeddingMatrix, load_embeddings, random_embeddings
from .tensor import Rng
from .textproc import UNK_ID, Vocabulary, build_vocab, encode
from .train import TrainingData

logger = logging.getLogger(__name__)

# Child streams of Rng(seed) used by the commands.
EMBEDDING_STREAM = 0
SPLIT_STREAM = 1
TRIAL_STREAM = 2


@dataclass
class Prepared:
    dataset: Dataset
    tokens: list
    vocab: Vocabulary
    embedding: EmbeddingMatrix
    docs: list
    dropped: int

    @property
    def training_data(self):
        return TrainingData(self.docs, self.embedding, self.dataset.name)

    def stats(self) -> dict:
        lengths = np.array([len(t) for t in self.tokens])
        truncated = int(np.sum(lengths > self.docs[0].ids.size)) if self.docs else 0
        unk = sum(int(np.sum(d.ids[:d.true_len] == UNK_ID)) for d in self.docs)
        return {
            'dataset': self.dataset.name,
            'documents': len(self.docs),
            'dropped_documents': self.dropped,
            'classes': class_report(self.dataset).to_dict(),
            'tokens': int(lengths.sum()),
            'distinct_tokens': len(Counter(t for doc in self.tokens for t in doc)),
            'mean_tokens_per_document': float(lengths.mean()) if lengths.size else 0.0,
            'max_tokens_per_document': int(lengths.max()) if lengths.size else 0,
            'truncated_documents': truncated,
            'unknown_token_occurrences': unk,
            'vocab_size': len(self.vocab),
            'embedding_dim': self.embedding.dim,
            'embedding_coverage': self.embedding.coverage,
        }


def load_dataset(cfg: RunConfig) -> Dataset:
    ds = load_csv(cfg.data.path, cfg.data.text_column, cfg.data.label_column, cfg.data.label_map)
    if cfg.preprocess.subsample is not None:
        ds = subsample(ds, resolve_size(cfg.preprocess.subsample), Rng(cfg.seed).child(SPLIT_STREAM))
    return ds


def clean(ds: Dataset, cfg: RunConfig):
    """Token lists per document; documents left empty are dropped with a warning."""
    preprocessor = cfg.preprocessor()
    kept, tokens = [], []
    for index, doc in enumerate(ds.documents):
        doc_tokens = preprocessor(doc.text)
        if not doc_tokens:
            logger.warning('%s: document %d is empty after cleaning and was dropped', ds.name, index + 1)
            continue
        kept.append(doc)
        tokens.append(doc_tokens)
    return Dataset(kept, ds.name, ds.label_map), tokens, len(ds) - len(kept)


def build_embedding(cfg: RunConfig, vocab: Vocabulary) -> EmbeddingMatrix:
    hp = cfg.hyperparams
    rng = Rng(cfg.seed).child(EMBEDDING_STREAM)
    if cfg.embeddings.path:
        return load_embeddings(cfg.embeddings.path, vocab, rng, dim=hp.embedding_dim,
                               scale=cfg.embeddings.oov_scale, trainable=cfg.embeddings.trainable)
    return random_embeddings(vocab, hp.embedding_dim, rng, cfg.embeddings.oov_scale, cfg.embeddings.trainable)


def prepare(cfg: RunConfig, vocab: Vocabulary = None, embedding: EmbeddingMatrix = None) -> Prepared:
    """Load, clean, index and embed the configured corpus.

    A given ``vocab`` and ``embedding`` (from a checkpoint) are reused instead
    of building new ones.
    """
    ds, tokens, dropped = clean(load_dataset(cfg), cfg)
    if vocab is None:
        ds.require_both_classes()
        vocab = build_vocab(tokens, cfg.preprocess.min_freq)
    if embedding is None:
        embedding = build_embedding(cfg, vocab)
    docs = [encode(t, vocab, cfg.preprocess.max_len, d.label) for t, d in zip(tokens, ds.documents)]
    logger.info('%s: %d documents encoded, %d dropped, vocabulary %d', ds.name, len(docs), dropped, len(vocab))
    return Prepared(ds, tokens, vocab, embedding, docs, dropped)
