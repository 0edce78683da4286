"""Dense float64 numerics shared by every layer.

A ``Tensor`` is a C-ordered ``numpy.ndarray`` of ``float64``. The helpers here
add the shape checks and error messages the layers rely on; everything else
is plain numpy.
"""
import logging

import numpy as np
import numpy.typing as npt

from .exceptions import ShapeError

logger = logging.getLogger(__name__)

Tensor = npt.NDArray[np.float64]

DTYPE = np.float64


class Rng:
    """Seeded generator built on numpy's PCG64.

    PCG64 is a documented, portable algorithm, so a given seed reproduces the
    same stream on every platform. Parallel consumers take ``child(i)``
    streams instead of sharing one generator.
    """

    def __init__(self, seed: int, stream=()):
        self.seed = int(seed)
        self.stream = tuple(stream)
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF, *self.stream]
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def child(self, index: int) -> 'Rng':
        """Independent stream derived from (seed, stream path, index)."""
        return Rng(self.seed, (*self.stream, int(index)))

    def uniform(self, shape, lo=0.0, hi=1.0) -> Tensor:
        return self._generator.uniform(lo, hi, size=shape).astype(DTYPE, copy=False)

    def random(self, shape) -> Tensor:
        return self._generator.random(size=shape, dtype=DTYPE)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def integers(self, low, high, size=None):
        return self._generator.integers(low, high, size=size)

    def choice(self, seq):
        return seq[int(self._generator.integers(0, len(seq)))]

    def __repr__(self):
        return f'Rng(seed={self.seed}, stream={self.stream})'


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f'cannot multiply {a.shape} by {b.shape}')
    return a @ b


def sigmoid(x: Tensor) -> Tensor:
    # tanh form never overflows for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


_UNARY = {
    'sigmoid': sigmoid,
    'tanh': np.tanh,
    'relu': relu,
}

_BINARY = {
    'add': np.add,
    'sub': np.subtract,
    'hadamard': np.multiply,
}


def elementwise(kind: str, *args, factor=None) -> Tensor:
    """Apply one of add, sub, hadamard, sigmoid, tanh, relu or scale per element."""
    if kind in _UNARY:
        (x,) = args
        return _UNARY[kind](np.asarray(x, dtype=DTYPE))
    if kind in _BINARY:
        a, b = (np.asarray(arg, dtype=DTYPE) for arg in args)
        if a.shape != b.shape:
            raise ShapeError(f'{kind}: shapes {a.shape} and {b.shape} differ')
        return _BINARY[kind](a, b)
    if kind == 'scale':
        (x,) = args
        if factor is None:
            raise ValueError('scale needs a factor')
        return np.asarray(x, dtype=DTYPE) * float(factor)
    raise ValueError(f'unknown elementwise op {kind!r}')


def softmax(logits: Tensor, axis=-1) -> Tensor:
    """Numerically stable softmax along ``axis``."""
    logits = np.asarray(logits, dtype=DTYPE)
    if logits.size == 0:
        raise ShapeError('softmax of an empty tensor')
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=axis, keepdims=True)


def concat(tensors, axis=0) -> Tensor:
    tensors = [np.asarray(t, dtype=DTYPE) for t in tensors]
    if not tensors:
        raise ShapeError('nothing to concatenate')
    if len(tensors) == 1:
        return tensors[0].copy()
    first = tensors[0]
    axis = axis % first.ndim
    for t in tensors[1:]:
        if t.ndim != first.ndim or any(
            t.shape[d] != first.shape[d] for d in range(first.ndim) if d != axis
        ):
            raise ShapeError(f'cannot concatenate {first.shape} with {t.shape} on axis {axis}')
    return np.concatenate(tensors, axis=axis)


def rand_uniform(rng: Rng, shape, lo: float, hi: float) -> Tensor:
    if not lo < hi:
        raise ValueError(f'empty range [{lo}, {hi})')
    return rng.uniform(shape, lo, hi)


def glorot_uniform(rng: Rng, shape, fan_in=None, fan_out=None) -> Tensor:
    """Uniform on [-s, s) with s = sqrt(6 / (fan_in + fan_out))."""
    if fan_in is None:
        fan_in = int(np.prod(shape[:-1]))
    if fan_out is None:
        fan_out = shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rand_uniform(rng, shape, -limit, limit)


def numeric_gradient(f, x: Tensor, eps=1e-4) -> Tensor:
    """Central-difference gradient of scalar ``f`` at ``x``.

    ``x`` is perturbed in place and restored, so ``f`` may close over it.
    """
    if eps <= 0:
        raise ValueError('eps must be positive')
    grad = np.zeros_like(x, dtype=DTYPE)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + eps
        plus = f(x)
        flat[i] = saved - eps
        minus = f(x)
        flat[i] = saved
        out[i] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(a: Tensor, b: Tensor, floor=1e-12) -> float:
    """Norm-wise relative error ||a - b|| / max(||a||, ||b||).

    Falls back to the absolute error norm when both tensors are below ``floor``.
    """
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.shape != b.shape:
        raise ShapeError(f'cannot compare {a.shape} with {b.shape}')
    diff = float(np.linalg.norm(a - b))
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)))
    if scale < floor:
        return diff
    return diff / scale
