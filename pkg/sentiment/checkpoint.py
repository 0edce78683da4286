"""Model checkpoints: one ``.npz`` holding every parameter plus a JSON header.

Arrays are stored as raw float64, so a save/load round-trip is bit-exact.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingMatrix
from .exceptions import CheckpointError
from .networks import HyperParams, Network, build_model
from .textproc import Vocabulary

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_META_KEY = '__meta__'


@dataclass
class Checkpoint:
    model: Network
    vocab: Vocabulary
    preprocess: dict

    @property
    def arch(self):
        return self.model.arch


def save_checkpoint(path, model: Network, vocab: Vocabulary, preprocess=None):
    path = Path(path)
    meta = {
        'format_version': FORMAT_VERSION,
        'arch': model.arch,
        'hyperparams': model.hp.to_dict(),
        'vocab': list(vocab.id_to_token),
        'min_freq': vocab.min_freq,
        'preprocess': dict(preprocess or {}),
        'embedding': {'trainable': model.embedding.trainable, 'coverage': model.embedding.coverage},
    }
    arrays = {name: np.ascontiguousarray(value) for name, value in model.parameters().items()}
    arrays[_META_KEY] = np.array(json.dumps(meta, ensure_ascii=False, sort_keys=True))
    with path.open('wb') as fh:
        np.savez(fh, **arrays)
    logger.info('saved %s checkpoint (%d parameters) to %s', model.arch, model.parameter_count(), path)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {name: archive[name] for name in archive.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f'{path}: not a readable checkpoint ({exc})') from exc
    if _META_KEY not in arrays:
        raise CheckpointError(f'{path}: checkpoint header is missing')
    meta = json.loads(str(arrays.pop(_META_KEY)))
    if meta.get('format_version') != FORMAT_VERSION:
        raise CheckpointError(
            f'{path}: unsupported checkpoint format {meta.get("format_version")!r}, expected {FORMAT_VERSION}'
        )

    hp = HyperParams.from_dict(meta['hyperparams'])
    vocab = Vocabulary.from_tokens(meta['vocab'], meta.get('min_freq', 1))
    weights = arrays.get('embedding')
    if weights is None or weights.shape != (len(vocab), hp.embedding_dim):
        raise CheckpointError(f'{path}: embedding does not match the stored vocabulary')
    emb_meta = meta.get('embedding', {})
    embedding = EmbeddingMatrix(weights.copy(), emb_meta.get('trainable', True), emb_meta.get('coverage', 0.0))
    model = build_model(meta['arch'], hp, embedding)

    params = model.parameters()
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise CheckpointError(f'{path}: parameter mismatch (missing {missing}, unexpected {extra})')
    for name, target in params.items():
        if name == 'embedding':
            continue
        if arrays[name].shape != target.shape:
            raise CheckpointError(f'{path}: {name} has shape {arrays[name].shape}, expected {target.shape}')
        target[...] = arrays[name]
    logger.debug('loaded %r from %s', model, path)
    return Checkpoint(model, vocab, meta.get('preprocess', {}))
