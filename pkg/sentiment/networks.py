"""The four document classifiers assembled from ``layers``.

``bilstm-slmfcnn`` is the hybrid: a BiLSTM reads the embedded document, one
convolutional stage with several filter widths runs over the BiLSTM states,
each feature map is pooled over time, and the concatenated pooled vector goes
through dropout into a softmax layer. ``bilstm``, ``cnn`` and ``cnn-bilstm``
are the baselines it is compared against.
"""
import logging
from collections import namedtuple
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import layers
from .embeddings import EmbeddingMatrix, lookup, lookup_backward
from .exceptions import ConfigError, ShapeError
from .tensor import DTYPE, Rng, softmax
from .textproc import TokenizedDoc

logger = logging.getLogger(__name__)

CLASSES = 2
ACTIVATIONS = ('softmax',)

SparseRows = namedtuple('SparseRows', ['rows', 'values'])


@dataclass(frozen=True)
class HyperParams:
    dropout_rate: float = 0.5
    batch_size: int = 32
    learning_rate: float = 2e-05
    activation: str = 'softmax'
    filter_widths: tuple = (3, 4, 5)
    filters_per_width: int = 100
    hidden_units: int = 150
    l2_lambda: float = 1e-4
    max_len: int = 400
    epochs: int = 20
    embedding_dim: int = 300
    # Width of the single filter bank in the cnn and cnn-bilstm baselines.
    baseline_filter_width: int = 5
    pooling: str = 'max'
    conv_activation: str = 'relu'
    patience: int = 3
    class_weights: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'filter_widths', tuple(int(k) for k in self.filter_widths))

    def validate(self):
        problems = []
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append(f'dropout_rate {self.dropout_rate} outside [0, 1)')
        if self.learning_rate <= 0:
            problems.append(f'learning_rate {self.learning_rate} must be positive')
        if self.batch_size < 1:
            problems.append('batch_size must be at least 1')
        if not self.filter_widths:
            problems.append('filter_widths is empty')
        elif list(self.filter_widths) != sorted(self.filter_widths) or min(self.filter_widths) < 1:
            problems.append(f'filter_widths {list(self.filter_widths)} must be positive and sorted')
        if self.activation not in ACTIVATIONS:
            problems.append(f'activation {self.activation!r} not in {ACTIVATIONS}')
        if self.pooling not in layers.POOLING_MODES:
            problems.append(f'pooling {self.pooling!r} not in {layers.POOLING_MODES}')
        if self.conv_activation not in layers.CONV_ACTIVATIONS:
            problems.append(f'conv_activation {self.conv_activation!r} not in {layers.CONV_ACTIVATIONS}')
        for name in ('filters_per_width', 'hidden_units', 'max_len', 'epochs', 'embedding_dim',
                     'baseline_filter_width'):
            if getattr(self, name) < 1:
                problems.append(f'{name} must be at least 1')
        if self.l2_lambda < 0:
            problems.append('l2_lambda must be nonnegative')
        if self.patience < 0:
            problems.append('patience must be nonnegative')
        if problems:
            raise ConfigError('invalid hyperparameters: ' + '; '.join(problems))
        return self

    def to_dict(self):
        data = asdict(self)
        data['filter_widths'] = list(self.filter_widths)
        return data

    @classmethod
    def from_dict(cls, data, base=None):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f'unknown hyperparameter(s): {", ".join(unknown)}')
        return replace(base or cls(), **data)


# Optimized settings reported for the hybrid on each corpus.
PRESETS = {
    'imdb-small': {'dropout_rate': 0.6, 'batch_size': 32, 'activation': 'softmax', 'learning_rate': 2e-05},
    'imdb-medium': {'dropout_rate': 0.8, 'batch_size': 32, 'activation': 'softmax', 'learning_rate': 0.001},
    'imdb-large': {'dropout_rate': 0.8, 'batch_size': 32, 'activation': 'softmax', 'learning_rate': 0.0001},
    'vtc': {'dropout_rate': 0.5, 'batch_size': 32, 'activation': 'softmax', 'learning_rate': 2e-05},
}


@dataclass
class ForwardCache:
    ids: np.ndarray
    lengths: np.ndarray
    stages: dict = field(default_factory=dict)


class Network:
    """Base class: embedding lookup in front, dropout and a softmax layer at the back."""

    arch = None

    def __init__(self, hp: HyperParams, embedding: EmbeddingMatrix, rng: Rng):
        hp.validate()
        if embedding.dim != hp.embedding_dim:
            raise ShapeError(f'embedding dimension {embedding.dim} != configured {hp.embedding_dim}')
        if hp.max_len < self.min_length(hp):
            raise ConfigError(
                f'max_len {hp.max_len} is shorter than the widest filter ({self.min_length(hp)})'
            )
        self.hp = hp
        self.embedding = embedding
        self._build(rng)

    @staticmethod
    def min_length(hp):
        return 1

    def _build(self, rng: Rng):
        raise NotImplementedError

    # parameters -----------------------------------------------------------

    def _stage_params(self):
        """``(prefix, named params)`` pairs for every stage after the embedding."""
        raise NotImplementedError

    def parameters(self) -> dict:
        params = {'embedding': self.embedding.weights}
        for prefix, named in self._stage_params():
            for name, arr in named.items():
                params[f'{prefix}.{name}'] = arr
        return params

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    @property
    def feature_width(self):
        return self.dense.W.shape[0]

    # forward / backward ---------------------------------------------------

    def _encode(self, x, lengths, cache):
        """Embedded batch -> ``B x feature_width`` document vectors."""
        raise NotImplementedError

    def _encode_backward(self, dfeat, cache):
        """Returns the gradient w.r.t. the embedded batch and stage gradients."""
        raise NotImplementedError

    def forward(self, ids, lengths, training=False, rng: Rng = None):
        ids = np.asarray(ids)
        lengths = np.asarray(lengths, dtype=np.int64)
        if ids.ndim != 2 or ids.shape[1] != self.hp.max_len:
            raise ShapeError(f'expected a B x {self.hp.max_len} id batch, got {ids.shape}')
        cache = ForwardCache(ids, lengths)
        x = lookup(self.embedding, ids)
        feat = layers.flatten(self._encode(x, lengths, cache))
        dropped, mask = layers.dropout(feat, self.hp.dropout_rate, rng, training)
        cache.stages['features'] = dropped
        cache.stages['dropout_mask'] = mask
        logits = layers.dense_forward(self.dense, dropped)
        return softmax(logits), cache

    def backward(self, cache: ForwardCache, dlogits) -> dict:
        """Parameter gradients given d(loss)/d(logits).

        The embedding gradient comes back as ``SparseRows`` over the ids in
        the batch, or is absent when the embedding is frozen.
        """
        dfeat, grads = layers.dense_backward(self.dense, cache.stages['features'], dlogits)
        grads = {f'dense.{k}': v for k, v in grads.items()}
        dfeat = layers.dropout_backward(dfeat, cache.stages['dropout_mask'])
        dx, stage_grads = self._encode_backward(dfeat, cache)
        grads.update(stage_grads)
        if self.embedding.trainable:
            grads['embedding'] = SparseRows(*lookup_backward(self.embedding, cache.ids, dx))
        return grads

    def predict_batch(self, docs) -> np.ndarray:
        ids, lengths = stack_docs(docs)
        probs, _ = self.forward(ids, lengths, training=False)
        return probs

    def stage_shapes(self, length=None):
        raise NotImplementedError

    def __repr__(self):
        return f'<{type(self).__name__} arch={self.arch} params={self.parameter_count()}>'


def stack_docs(docs):
    ids = np.stack([d.ids for d in docs])
    lengths = np.array([d.true_len for d in docs], dtype=np.int64)
    return ids, lengths


def predict(model: Network, doc: TokenizedDoc) -> np.ndarray:
    """Class probabilities for one document, dropout off."""
    return model.predict_batch([doc])[0]


def _final_states(H, lengths, hidden):
    """Last real forward state joined with the first backward state."""
    rows = np.arange(H.shape[0])
    return np.concatenate([H[rows, lengths - 1, :hidden], H[:, 0, hidden:]], axis=1)


def _final_states_backward(dfeat, shape, lengths, hidden):
    dH = np.zeros(shape, dtype=DTYPE)
    rows = np.arange(shape[0])
    dH[rows, lengths - 1, :hidden] = dfeat[:, :hidden]
    dH[:, 0, hidden:] += dfeat[:, hidden:]
    return dH


class _PooledConvMixin:
    """Shared pooling over a filter bank's feature maps."""

    def _pool(self, maps, lengths, cache):
        pooled, pool_caches = [], []
        for k, fmap in zip(self.conv.widths, maps):
            valid = layers.window_valid_lengths(lengths, k, fmap.shape[1])
            p, _, pc = layers.pool_over_time(fmap, valid, self.hp.pooling)
            pooled.append(p)
            pool_caches.append(pc)
        cache.stages['pool'] = pool_caches
        return np.concatenate(pooled, axis=1)

    def _pool_backward(self, dfeat, cache):
        F = self.conv.filters
        return [
            layers.pool_backward(dfeat[:, i * F:(i + 1) * F], pc)
            for i, pc in enumerate(cache.stages['pool'])
        ]


class BiLstmSlmfcnn(_PooledConvMixin, Network):
    arch = 'bilstm-slmfcnn'

    @staticmethod
    def min_length(hp):
        return max(hp.filter_widths)

    def _build(self, rng):
        hp = self.hp
        h = hp.hidden_units
        self.fwd = layers.LstmParams.init(hp.embedding_dim, h, rng.child(1))
        self.bwd = layers.LstmParams.init(hp.embedding_dim, h, rng.child(2))
        self.conv = layers.ConvFilterBank.init(
            hp.filter_widths, 2 * h, hp.filters_per_width, rng.child(3), hp.conv_activation
        )
        self.dense = layers.DenseParams.init(
            len(hp.filter_widths) * hp.filters_per_width, CLASSES, rng.child(4), hp.l2_lambda
        )

    def _stage_params(self):
        return [('bilstm.fwd', self.fwd.named()), ('bilstm.bwd', self.bwd.named()),
                ('conv', self.conv.named()), ('dense', self.dense.named())]

    def _encode(self, x, lengths, cache):
        H, cache.stages['bilstm'] = layers.bilstm_forward(self.fwd, self.bwd, x, lengths)
        maps, cache.stages['conv'] = layers.conv_over_time(self.conv, H)
        return self._pool(maps, lengths, cache)

    def _encode_backward(self, dfeat, cache):
        dmaps = self._pool_backward(dfeat, cache)
        dH, g_conv = layers.conv_backward(self.conv, dmaps, cache.stages['conv'])
        dx, g_fwd, g_bwd = layers.bilstm_backward(self.fwd, self.bwd, dH, cache.stages['bilstm'])
        grads = {f'conv.{k}': v for k, v in g_conv.items()}
        grads.update({f'bilstm.fwd.{k}': v for k, v in g_fwd.items()})
        grads.update({f'bilstm.bwd.{k}': v for k, v in g_bwd.items()})
        return dx, grads

    def stage_shapes(self, length=None):
        T = length or self.hp.max_len
        h2 = 2 * self.hp.hidden_units
        F = self.hp.filters_per_width
        shapes = [('embedding', (T, self.hp.embedding_dim)), ('bilstm', (T, h2))]
        shapes += [(f'conv{k}', (T - k + 1, F)) for k in self.hp.filter_widths]
        shapes += [(f'pool{k}', (F,)) for k in self.hp.filter_widths]
        width = len(self.hp.filter_widths) * F
        shapes += [('concat', (width,)), ('flatten', (width,)), ('dense', (CLASSES,))]
        return shapes


class BiLstm(Network):
    arch = 'bilstm'

    def _build(self, rng):
        hp = self.hp
        h = hp.hidden_units
        self.fwd = layers.LstmParams.init(hp.embedding_dim, h, rng.child(1))
        self.bwd = layers.LstmParams.init(hp.embedding_dim, h, rng.child(2))
        self.dense = layers.DenseParams.init(2 * h, CLASSES, rng.child(4), hp.l2_lambda)

    def _stage_params(self):
        return [('bilstm.fwd', self.fwd.named()), ('bilstm.bwd', self.bwd.named()),
                ('dense', self.dense.named())]

    def _encode(self, x, lengths, cache):
        H, cache.stages['bilstm'] = layers.bilstm_forward(self.fwd, self.bwd, x, lengths)
        cache.stages['bilstm_shape'] = H.shape
        return _final_states(H, lengths, self.hp.hidden_units)

    def _encode_backward(self, dfeat, cache):
        dH = _final_states_backward(dfeat, cache.stages['bilstm_shape'], cache.lengths, self.hp.hidden_units)
        dx, g_fwd, g_bwd = layers.bilstm_backward(self.fwd, self.bwd, dH, cache.stages['bilstm'])
        grads = {f'bilstm.fwd.{k}': v for k, v in g_fwd.items()}
        grads.update({f'bilstm.bwd.{k}': v for k, v in g_bwd.items()})
        return dx, grads

    def stage_shapes(self, length=None):
        T = length or self.hp.max_len
        h2 = 2 * self.hp.hidden_units
        return [('embedding', (T, self.hp.embedding_dim)), ('bilstm', (T, h2)),
                ('final_states', (h2,)), ('dense', (CLASSES,))]


class Cnn(_PooledConvMixin, Network):
    arch = 'cnn'

    @staticmethod
    def min_length(hp):
        return hp.baseline_filter_width

    def _build(self, rng):
        hp = self.hp
        self.conv = layers.ConvFilterBank.init(
            [hp.baseline_filter_width], hp.embedding_dim, hp.filters_per_width, rng.child(3),
            hp.conv_activation,
        )
        self.dense = layers.DenseParams.init(hp.filters_per_width, CLASSES, rng.child(4), hp.l2_lambda)

    def _stage_params(self):
        return [('conv', self.conv.named()), ('dense', self.dense.named())]

    def _encode(self, x, lengths, cache):
        maps, cache.stages['conv'] = layers.conv_over_time(self.conv, x)
        return self._pool(maps, lengths, cache)

    def _encode_backward(self, dfeat, cache):
        dmaps = self._pool_backward(dfeat, cache)
        dx, g_conv = layers.conv_backward(self.conv, dmaps, cache.stages['conv'])
        return dx, {f'conv.{k}': v for k, v in g_conv.items()}

    def stage_shapes(self, length=None):
        T = length or self.hp.max_len
        k = self.hp.baseline_filter_width
        F = self.hp.filters_per_width
        return [('embedding', (T, self.hp.embedding_dim)), (f'conv{k}', (T - k + 1, F)),
                (f'pool{k}', (F,)), ('dense', (CLASSES,))]


class CnnBiLstm(Network):
    arch = 'cnn-bilstm'

    @staticmethod
    def min_length(hp):
        return hp.baseline_filter_width

    def _build(self, rng):
        hp = self.hp
        h = hp.hidden_units
        F = hp.filters_per_width
        self.conv = layers.ConvFilterBank.init(
            [hp.baseline_filter_width], hp.embedding_dim, F, rng.child(3), hp.conv_activation
        )
        self.fwd = layers.LstmParams.init(F, h, rng.child(1))
        self.bwd = layers.LstmParams.init(F, h, rng.child(2))
        self.dense = layers.DenseParams.init(2 * h, CLASSES, rng.child(4), hp.l2_lambda)

    def _stage_params(self):
        return [('conv', self.conv.named()), ('bilstm.fwd', self.fwd.named()),
                ('bilstm.bwd', self.bwd.named()), ('dense', self.dense.named())]

    def _encode(self, x, lengths, cache):
        k = self.hp.baseline_filter_width
        (fmap,), cache.stages['conv'] = layers.conv_over_time(self.conv, x)
        map_lengths = layers.window_valid_lengths(lengths, k, fmap.shape[1])
        cache.stages['map_lengths'] = map_lengths
        H, cache.stages['bilstm'] = layers.bilstm_forward(self.fwd, self.bwd, fmap, map_lengths)
        cache.stages['bilstm_shape'] = H.shape
        return _final_states(H, map_lengths, self.hp.hidden_units)

    def _encode_backward(self, dfeat, cache):
        dH = _final_states_backward(
            dfeat, cache.stages['bilstm_shape'], cache.stages['map_lengths'], self.hp.hidden_units
        )
        dmap, g_fwd, g_bwd = layers.bilstm_backward(self.fwd, self.bwd, dH, cache.stages['bilstm'])
        dx, g_conv = layers.conv_backward(self.conv, [dmap], cache.stages['conv'])
        grads = {f'conv.{k}': v for k, v in g_conv.items()}
        grads.update({f'bilstm.fwd.{k}': v for k, v in g_fwd.items()})
        grads.update({f'bilstm.bwd.{k}': v for k, v in g_bwd.items()})
        return dx, grads

    def stage_shapes(self, length=None):
        T = length or self.hp.max_len
        k = self.hp.baseline_filter_width
        F = self.hp.filters_per_width
        h2 = 2 * self.hp.hidden_units
        return [('embedding', (T, self.hp.embedding_dim)), (f'conv{k}', (T - k + 1, F)),
                ('bilstm', (T - k + 1, h2)), ('final_states', (h2,)), ('dense', (CLASSES,))]


ARCHITECTURES = {
    cls.arch: cls for cls in (BiLstm, Cnn, CnnBiLstm, BiLstmSlmfcnn)
}


def build_bilstm_slmfcnn(hp: HyperParams, emb: EmbeddingMatrix, rng: Rng = None) -> Network:
    return BiLstmSlmfcnn(hp, emb, rng or Rng(0))


def build_bilstm(hp: HyperParams, emb: EmbeddingMatrix, rng: Rng = None) -> Network:
    return BiLstm(hp, emb, rng or Rng(0))


def build_cnn(hp: HyperParams, emb: EmbeddingMatrix, rng: Rng = None) -> Network:
    return Cnn(hp, emb, rng or Rng(0))


def build_cnn_bilstm(hp: HyperParams, emb: EmbeddingMatrix, rng: Rng = None) -> Network:
    return CnnBiLstm(hp, emb, rng or Rng(0))


def build_model(arch: str, hp: HyperParams, emb: EmbeddingMatrix, rng: Rng = None) -> Network:
    try:
        cls = ARCHITECTURES[arch]
    except KeyError:
        raise ConfigError(
            f'unknown architecture {arch!r}; choose one of {", ".join(sorted(ARCHITECTURES))}'
        ) from None
    model = cls(hp, emb, rng or Rng(0))
    logger.debug('built %r', model)
    return model
