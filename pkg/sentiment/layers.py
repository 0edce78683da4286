"""Forward and backward passes for the network stages.

Every function works on a batch: sequences are ``B x T x D`` tensors with a
``lengths`` vector of true (pre-padding) lengths. Forward functions return
``(output, cache)``; the matching ``*_backward`` takes the upstream gradient
and that cache and returns the input gradient plus a dict of parameter
gradients keyed like the parameter dataclass's ``named()``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ConfigError, ShapeError
from .tensor import DTYPE, Rng, Tensor, glorot_uniform, sigmoid, softmax

logger = logging.getLogger(__name__)

CONV_ACTIVATIONS = ('relu', 'identity')
POOLING_MODES = ('max', 'mean')


def _batched(x):
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise ShapeError(f'expected a T x D or B x T x D tensor, got shape {x.shape}')
    return x, False


def _lengths(lengths, batch, steps):
    if lengths is None:
        return np.full(batch, steps, dtype=np.int64)
    lengths = np.atleast_1d(np.asarray(lengths, dtype=np.int64))
    if lengths.shape != (batch,):
        raise ShapeError(f'expected {batch} lengths, got {lengths.shape}')
    if lengths.min() < 1 or lengths.max() > steps:
        raise ShapeError(f'lengths must lie in [1, {steps}]')
    return lengths


def time_mask(lengths, steps) -> Tensor:
    """``B x T`` float mask, 1.0 where the position holds a real token."""
    return (np.arange(steps)[None, :] < np.asarray(lengths)[:, None]).astype(DTYPE)


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

@dataclass
class LstmParams:
    """Gate weights stacked column-wise in the order input, forget, output, candidate."""

    W: Tensor
    U: Tensor
    b: Tensor

    @property
    def input_dim(self):
        return self.W.shape[0]

    @property
    def hidden(self):
        return self.U.shape[0]

    def _gate(self, arr, k):
        h = self.hidden
        return arr[..., k * h:(k + 1) * h]

    W_i = property(lambda self: self._gate(self.W, 0))
    W_f = property(lambda self: self._gate(self.W, 1))
    W_o = property(lambda self: self._gate(self.W, 2))
    W_c = property(lambda self: self._gate(self.W, 3))
    U_i = property(lambda self: self._gate(self.U, 0))
    U_f = property(lambda self: self._gate(self.U, 1))
    U_o = property(lambda self: self._gate(self.U, 2))
    U_c = property(lambda self: self._gate(self.U, 3))
    b_i = property(lambda self: self._gate(self.b, 0))
    b_f = property(lambda self: self._gate(self.b, 1))
    b_o = property(lambda self: self._gate(self.b, 2))
    b_c = property(lambda self: self._gate(self.b, 3))

    def __post_init__(self):
        d, h4 = self.W.shape
        h = self.U.shape[0]
        if h4 != 4 * h or self.U.shape != (h, 4 * h) or self.b.shape != (4 * h,):
            raise ShapeError(
                f'inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}'
            )

    @classmethod
    def init(cls, input_dim, hidden, rng: Rng):
        W = np.concatenate(
            [glorot_uniform(rng, (input_dim, hidden)) for _ in range(4)], axis=1
        )
        U = np.concatenate(
            [glorot_uniform(rng, (hidden, hidden)) for _ in range(4)], axis=1
        )
        b = np.zeros(4 * hidden, dtype=DTYPE)
        b[hidden:2 * hidden] = 1.0
        return cls(W, U, b)

    @classmethod
    def zeros(cls, input_dim, hidden):
        return cls(
            np.zeros((input_dim, 4 * hidden), dtype=DTYPE),
            np.zeros((hidden, 4 * hidden), dtype=DTYPE),
            np.zeros(4 * hidden, dtype=DTYPE),
        )

    def named(self):
        return {'W': self.W, 'U': self.U, 'b': self.b}


@dataclass
class LstmCache:
    x: Tensor
    mask: Tensor
    gates: Tensor
    tanh_c: Tensor
    c_prev: Tensor
    h_prev: Tensor
    squeeze: bool


def lstm_forward(params: LstmParams, x, lengths=None):
    """Run the recurrence over ``x``.

    Past a sequence's true length the cell stops updating, so every later
    state is a copy of the last real one.
    """
    x, squeeze = _batched(x)
    B, T, d = x.shape
    if d != params.input_dim:
        raise ShapeError(f'LSTM expects {params.input_dim}-d input, got {d}')
    lengths = _lengths(lengths, B, T)
    h = params.hidden
    mask = time_mask(lengths, T)

    xw = x @ params.W + params.b
    gates = np.empty((B, T, 4 * h), dtype=DTYPE)
    tanh_c = np.empty((B, T, h), dtype=DTYPE)
    c_prev_seq = np.empty((B, T, h), dtype=DTYPE)
    h_prev_seq = np.empty((B, T, h), dtype=DTYPE)
    states = np.empty((B, T, h), dtype=DTYPE)

    h_prev = np.zeros((B, h), dtype=DTYPE)
    c_prev = np.zeros((B, h), dtype=DTYPE)
    for t in range(T):
        z = xw[:, t] + h_prev @ params.U
        act = np.empty_like(z)
        act[:, :3 * h] = sigmoid(z[:, :3 * h])
        act[:, 3 * h:] = np.tanh(z[:, 3 * h:])
        i, f, o, g = act[:, :h], act[:, h:2 * h], act[:, 2 * h:3 * h], act[:, 3 * h:]
        c_new = f * c_prev + i * g
        tc = np.tanh(c_new)
        h_new = o * tc

        m = mask[:, t, None]
        gates[:, t] = act
        tanh_c[:, t] = tc
        c_prev_seq[:, t] = c_prev
        h_prev_seq[:, t] = h_prev
        c_prev = m * c_new + (1.0 - m) * c_prev
        h_prev = m * h_new + (1.0 - m) * h_prev
        states[:, t] = h_prev

    cache = LstmCache(x, mask, gates, tanh_c, c_prev_seq, h_prev_seq, squeeze)
    return (states[0] if squeeze else states), cache


def lstm_backward(params: LstmParams, dstates, cache: LstmCache):
    """Backpropagation through time."""
    dstates = np.asarray(dstates, dtype=DTYPE)
    if cache.squeeze:
        dstates = dstates[None]
    B, T, h = dstates.shape
    dxw = np.empty((B, T, 4 * h), dtype=DTYPE)
    dU = np.zeros_like(params.U)

    dh_next = np.zeros((B, h), dtype=DTYPE)
    dc_next = np.zeros((B, h), dtype=DTYPE)
    for t in reversed(range(T)):
        m = cache.mask[:, t, None]
        act = cache.gates[:, t]
        i, f, o, g = act[:, :h], act[:, h:2 * h], act[:, 2 * h:3 * h], act[:, 3 * h:]
        tc = cache.tanh_c[:, t]

        dh = dstates[:, t] + dh_next
        dh_new = m * dh
        dc_new = m * dc_next + dh_new * o * (1.0 - tc * tc)

        dz = np.empty((B, 4 * h), dtype=DTYPE)
        dz[:, :h] = dc_new * g * i * (1.0 - i)
        dz[:, h:2 * h] = dc_new * cache.c_prev[:, t] * f * (1.0 - f)
        dz[:, 2 * h:3 * h] = dh_new * tc * o * (1.0 - o)
        dz[:, 3 * h:] = dc_new * i * (1.0 - g * g)

        dxw[:, t] = dz
        dU += cache.h_prev[:, t].T @ dz
        dh_next = dz @ params.U.T + (1.0 - m) * dh
        dc_next = dc_new * f + (1.0 - m) * dc_next

    x = cache.x
    dW = x.reshape(-1, x.shape[-1]).T @ dxw.reshape(-1, 4 * h)
    db = dxw.sum(axis=(0, 1))
    dx = dxw @ params.W.T
    return (dx[0] if cache.squeeze else dx), {'W': dW, 'U': dU, 'b': db}


# ---------------------------------------------------------------------------
# Bidirectional LSTM
# ---------------------------------------------------------------------------

@dataclass
class BiLstmCache:
    fwd: LstmCache
    bwd: LstmCache
    source: np.ndarray
    target: np.ndarray
    hidden: int
    squeeze: bool


def _reverse_indices(lengths, steps):
    """Index maps for reversing each sequence's real prefix in place.

    ``source[b, t]`` is the original position read at reversed step t;
    ``target[b, t]`` is the reversed step whose state lands at original
    position t. Padded positions read the state of the last real token.
    """
    t = np.arange(steps)[None, :]
    last = np.asarray(lengths)[:, None] - 1
    real = t <= last
    source = np.where(real, last - t, t)
    target = np.where(real, last - t, 0)
    return source, target


def bilstm_forward(fwd: LstmParams, bwd: LstmParams, x, lengths=None):
    """Concatenate forward states with states of a pass over the reversed sequence."""
    if fwd.hidden != bwd.hidden:
        raise ShapeError(f'hidden sizes differ: {fwd.hidden} vs {bwd.hidden}')
    x, squeeze = _batched(x)
    B, T, _ = x.shape
    lengths = _lengths(lengths, B, T)
    source, target = _reverse_indices(lengths, T)
    rows = np.arange(B)[:, None]

    h_fwd, c_fwd = lstm_forward(fwd, x, lengths)
    h_rev, c_bwd = lstm_forward(bwd, x[rows, source], lengths)
    out = np.concatenate([h_fwd, h_rev[rows, target]], axis=-1)
    cache = BiLstmCache(c_fwd, c_bwd, source, target, fwd.hidden, squeeze)
    return (out[0] if squeeze else out), cache


def bilstm_backward(fwd: LstmParams, bwd: LstmParams, dout, cache: BiLstmCache):
    dout = np.asarray(dout, dtype=DTYPE)
    if cache.squeeze:
        dout = dout[None]
    h = cache.hidden
    B = dout.shape[0]
    rows = np.broadcast_to(np.arange(B)[:, None], cache.target.shape)

    dx_fwd, g_fwd = lstm_backward(fwd, dout[..., :h], cache.fwd)
    d_rev = np.zeros_like(dout[..., h:])
    np.add.at(d_rev, (rows, cache.target), dout[..., h:])
    dx_rev, g_bwd = lstm_backward(bwd, d_rev, cache.bwd)
    dx = dx_fwd
    np.add.at(dx, (rows, cache.source), dx_rev)
    return (dx[0] if cache.squeeze else dx), g_fwd, g_bwd


# ---------------------------------------------------------------------------
# Convolution over time
# ---------------------------------------------------------------------------

@dataclass
class ConvFilterBank:
    """Parallel filter banks, one per width, each spanning the full feature dimension."""

    widths: list
    kernels: dict
    biases: dict
    activation: str = 'relu'

    def __post_init__(self):
        if not self.widths or any(k < 1 for k in self.widths):
            raise ConfigError(f'filter widths must be positive, got {self.widths}')
        if self.activation not in CONV_ACTIVATIONS:
            raise ConfigError(f'unknown conv activation {self.activation!r}')
        counts = {self.kernels[k].shape[2] for k in self.widths}
        if len(counts) != 1:
            raise ShapeError('every width must have the same number of filters')
        for k in self.widths:
            if self.kernels[k].shape[0] != k or self.biases[k].shape != (self.filters,):
                raise ShapeError(f'width {k}: kernel {self.kernels[k].shape}, bias {self.biases[k].shape}')

    @property
    def filters(self):
        return self.kernels[self.widths[0]].shape[2]

    @property
    def input_dim(self):
        return self.kernels[self.widths[0]].shape[1]

    @classmethod
    def init(cls, widths, input_dim, filters, rng: Rng, activation='relu'):
        kernels = {
            k: glorot_uniform(rng, (k, input_dim, filters), fan_in=k * input_dim, fan_out=filters)
            for k in widths
        }
        biases = {k: np.zeros(filters, dtype=DTYPE) for k in widths}
        return cls(list(widths), kernels, biases, activation)

    def named(self):
        params = {}
        for k in self.widths:
            params[f'K{k}'] = self.kernels[k]
            params[f'b{k}'] = self.biases[k]
        return params


@dataclass
class ConvCache:
    x: Tensor
    pre: dict = field(default_factory=dict)
    squeeze: bool = False


def conv_over_time(bank: ConvFilterBank, x):
    """One feature map per width, ``B x (T - k + 1) x F``."""
    x, squeeze = _batched(x)
    B, T, D = x.shape
    if D != bank.input_dim:
        raise ShapeError(f'filters span {bank.input_dim} features, input has {D}')
    cache = ConvCache(x, squeeze=squeeze)
    maps = []
    for k in bank.widths:
        if T < k:
            raise ShapeError(f'sequence of length {T} is shorter than filter width {k}')
        windows = sliding_window_view(x, k, axis=1)
        z = np.einsum('bldk,kdf->blf', windows, bank.kernels[k], optimize=True) + bank.biases[k]
        cache.pre[k] = z
        out = np.maximum(z, 0.0) if bank.activation == 'relu' else z
        maps.append(out[0] if squeeze else out)
    return maps, cache


def conv_backward(bank: ConvFilterBank, dmaps, cache: ConvCache):
    x = cache.x
    dx = np.zeros_like(x)
    grads = {}
    for k, dmap in zip(bank.widths, dmaps):
        dz = np.asarray(dmap, dtype=DTYPE)
        if cache.squeeze:
            dz = dz[None]
        if bank.activation == 'relu':
            dz = dz * (cache.pre[k] > 0.0)
        L = dz.shape[1]
        windows = sliding_window_view(x, k, axis=1)
        grads[f'K{k}'] = np.einsum('bldk,blf->kdf', windows, dz, optimize=True)
        grads[f'b{k}'] = dz.sum(axis=(0, 1))
        kernel = bank.kernels[k]
        for j in range(k):
            dx[:, j:j + L] += dz @ kernel[j].T
    return (dx[0] if cache.squeeze else dx), grads


def window_valid_lengths(lengths, width, map_len):
    """Pooling positions whose window lies on real tokens.

    A document shorter than ``width`` keeps its first window, which covers
    the whole document plus padding.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    return np.clip(lengths - width + 1, 1, map_len)


# ---------------------------------------------------------------------------
# Pooling over time
# ---------------------------------------------------------------------------

@dataclass
class PoolCache:
    shape: tuple
    mode: str
    argmax: np.ndarray = None
    mask: Tensor = None
    valid: np.ndarray = None
    squeeze: bool = False


def pool_over_time(fmap, valid_len, mode='max'):
    """Reduce each filter's map over its valid positions.

    ``max`` records the argmax (first index on ties) for routing gradients;
    ``mean`` averages the valid positions.
    """
    if mode not in POOLING_MODES:
        raise ConfigError(f'unknown pooling mode {mode!r}')
    fmap, squeeze = _batched(fmap)
    B, L, F = fmap.shape
    valid = np.atleast_1d(np.asarray(valid_len, dtype=np.int64))
    if valid.shape != (B,):
        raise ShapeError(f'expected {B} valid lengths, got {valid.shape}')
    if valid.min() < 1:
        raise ShapeError('valid length must be at least 1')
    if valid.max() > L:
        raise ShapeError(f'valid length exceeds feature map length {L}')
    mask = time_mask(valid, L)[..., None]

    if mode == 'max':
        masked = np.where(mask > 0.0, fmap, -np.inf)
        argmax = np.argmax(masked, axis=1)
        pooled = np.take_along_axis(fmap, argmax[:, None, :], axis=1)[:, 0, :]
        cache = PoolCache(fmap.shape, mode, argmax=argmax, squeeze=squeeze)
    else:
        pooled = (fmap * mask).sum(axis=1) / valid[:, None]
        cache = PoolCache(fmap.shape, mode, mask=mask, valid=valid, squeeze=squeeze)
    if squeeze:
        return pooled[0], (cache.argmax[0] if mode == 'max' else None), cache
    return pooled, cache.argmax, cache


def max_pool_over_time(fmap, valid_len):
    pooled, argmax, _ = pool_over_time(fmap, valid_len, 'max')
    return pooled, argmax


def pool_backward(dpooled, cache: PoolCache):
    dpooled = np.asarray(dpooled, dtype=DTYPE)
    if cache.squeeze:
        dpooled = dpooled[None]
    if cache.mode == 'max':
        dmap = np.zeros(cache.shape, dtype=DTYPE)
        np.put_along_axis(dmap, cache.argmax[:, None, :], dpooled[:, None, :], axis=1)
    else:
        dmap = cache.mask * (dpooled / cache.valid[:, None])[:, None, :]
    return dmap[0] if cache.squeeze else dmap


def flatten(x):
    """Pooled features are already one vector per document; kept as an explicit stage."""
    x = np.asarray(x, dtype=DTYPE)
    return x.reshape(x.shape[0], -1)


# ---------------------------------------------------------------------------
# Dropout, dense head, L2
# ---------------------------------------------------------------------------

def dropout(x, rate: float, rng: Rng = None, training: bool = True):
    """Inverted dropout. Returns ``(output, mask)``; the mask is None when inactive."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f'dropout rate must lie in [0, 1), got {rate}')
    x = np.asarray(x, dtype=DTYPE)
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError('training-mode dropout needs an Rng')
    mask = (rng.random(x.shape) >= rate).astype(DTYPE) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


@dataclass
class DenseParams:
    W: Tensor
    b: Tensor
    l2_lambda: float = 0.0

    def __post_init__(self):
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[1],):
            raise ShapeError(f'dense W{self.W.shape} does not match b{self.b.shape}')
        if self.l2_lambda < 0:
            raise ConfigError('l2_lambda must be nonnegative')

    @property
    def classes(self):
        return self.W.shape[1]

    @classmethod
    def init(cls, in_features, classes, rng: Rng, l2_lambda=0.0):
        return cls(glorot_uniform(rng, (in_features, classes)), np.zeros(classes, dtype=DTYPE), l2_lambda)

    def named(self):
        return {'W': self.W, 'b': self.b}


def dense_forward(params: DenseParams, x):
    x = np.asarray(x, dtype=DTYPE)
    if x.shape[-1] != params.W.shape[0]:
        raise ShapeError(f'dense layer expects {params.W.shape[0]} inputs, got {x.shape[-1]}')
    return x @ params.W + params.b


def dense_softmax(params: DenseParams, x):
    return softmax(dense_forward(params, x))


def dense_backward(params: DenseParams, x, dlogits):
    """Gradients of the affine map given d(loss)/d(logits)."""
    x = np.asarray(x, dtype=DTYPE)
    dlogits = np.asarray(dlogits, dtype=DTYPE)
    if x.ndim == 1:
        return params.W @ dlogits, {'W': np.outer(x, dlogits), 'b': dlogits.copy()}
    return dlogits @ params.W.T, {'W': x.T @ dlogits, 'b': dlogits.sum(axis=0)}


def l2_penalty(params: dict, lam: float):
    """``(lam / 2) * sum ||W||^2`` over weight tensors.

    One-dimensional arrays are biases and are skipped. Returns the loss term
    and a gradient dict covering the penalized names only.
    """
    if lam < 0:
        raise ConfigError(f'L2 lambda must be nonnegative, got {lam}')
    loss = 0.0
    grads = {}
    for name, w in params.items():
        if np.ndim(w) < 2:
            continue
        loss += 0.5 * lam * float(np.sum(w * w))
        grads[name] = lam * w
    return loss, grads
