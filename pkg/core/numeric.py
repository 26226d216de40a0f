"""
Dense layer operations with hand-written backward passes.

Matrices are 2-D float64 numpy arrays, vectors are 1-D float64 arrays. Every
forward op has a matching ``*_backward`` that takes the upstream gradient and
returns gradients for each input.

These single-document ops make up core.model.encode_item, the unbatched
reference that the batched encoders in core.encoders are tested against.
"""
from typing import Sequence, Tuple

import numpy as np

from utils.errors import InputError

DTYPE = np.float64


def _as_indices(indices: Sequence[int], vocab_size: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise InputError("embed_lookup needs a non-empty 1-D index sequence")
    if idx.min() < 0 or idx.max() >= vocab_size:
        raise InputError(f"index out of range for vocabulary of size {vocab_size}")
    return idx


def embed_lookup(indices: Sequence[int], E: np.ndarray) -> np.ndarray:
    """
    Stack embedding columns for a token sequence

    Args:
        indices: Vocabulary indices, length n >= 1
        E: Embedding matrix, e x |V|

    Returns:
        e x n matrix whose column t is E[:, indices[t]]
    """
    idx = _as_indices(indices, E.shape[1])
    return E[:, idx].astype(DTYPE, copy=True)


def embed_lookup_backward(indices: Sequence[int], d_out: np.ndarray, vocab_size: int) -> np.ndarray:
    """Scatter-add column gradients back onto an e x |V| embedding gradient"""
    idx = _as_indices(indices, vocab_size)
    dE = np.zeros((d_out.shape[0], vocab_size), dtype=DTYPE)
    np.add.at(dE.T, idx, d_out.T)
    return dE


def _windows(Pi: np.ndarray, c: int) -> np.ndarray:
    # (e, n-c+1, c) view: windows[:, t, :] == Pi[:, t:t+c]
    return np.lib.stride_tricks.sliding_window_view(Pi, c, axis=1)


def _conv_pre(Pi: np.ndarray, kernel: np.ndarray, bias: float) -> np.ndarray:
    if Pi.ndim != 2 or kernel.ndim != 2 or Pi.shape[0] != kernel.shape[0]:
        raise InputError(f"conv1d_valid shape mismatch: input {Pi.shape}, kernel {kernel.shape}")
    n, c = Pi.shape[1], kernel.shape[1]
    if c < 1 or n < c:
        raise InputError(f"conv1d_valid needs n >= c >= 1 (n={n}, c={c}); pad the document first")
    return np.einsum('atb,ab->t', _windows(Pi, c), kernel) + bias


def conv1d_valid(Pi: np.ndarray, kernel: np.ndarray, bias: float) -> np.ndarray:
    """
    ReLU of a valid 1-D convolution (cross-correlation) over the columns of Pi

    Args:
        Pi: e x n input
        kernel: e x c filter
        bias: Scalar filter bias

    Returns:
        Vector of length n - c + 1
    """
    return np.maximum(_conv_pre(Pi, kernel, bias), 0.0)


def conv1d_valid_backward(Pi: np.ndarray, kernel: np.ndarray, bias: float,
                          d_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Gradients of conv1d_valid

    Returns:
        (dPi, dkernel, dbias)
    """
    pre = _conv_pre(Pi, kernel, bias)
    d_pre = d_out * (pre > 0)
    c = kernel.shape[1]
    dkernel = np.einsum('atb,t->ab', _windows(Pi, c), d_pre)
    dPi = np.zeros_like(Pi, dtype=DTYPE)
    for b in range(c):
        dPi[:, b:b + d_pre.size] += np.outer(kernel[:, b], d_pre)
    return dPi, dkernel, float(d_pre.sum())


def maxpool(z: np.ndarray) -> float:
    """Maximum entry of a non-empty vector"""
    if z.size == 0:
        raise InputError("maxpool of an empty vector")
    return float(z[np.argmax(z)])


def maxpool_backward(z: np.ndarray, d_out: float) -> np.ndarray:
    """Route the gradient to the first maximum (lowest index on ties)"""
    if z.size == 0:
        raise InputError("maxpool of an empty vector")
    grad = np.zeros_like(z, dtype=DTYPE)
    grad[np.argmax(z)] = d_out
    return grad


def _check_dense(s: np.ndarray, W: np.ndarray):
    if s.ndim != 1 or W.ndim != 2 or W.shape[1] != s.shape[0]:
        raise InputError(f"dense_tanh shape mismatch: W {W.shape}, s {s.shape}")


def dense_tanh(s: np.ndarray, W: np.ndarray, b: float) -> np.ndarray:
    """tanh(W s + b) with one scalar bias shared by all outputs"""
    _check_dense(s, W)
    return np.tanh(W @ s + b)


def dense_tanh_backward(s: np.ndarray, W: np.ndarray, b: float,
                        d_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Gradients of dense_tanh

    Returns:
        (ds, dW, db)
    """
    out = dense_tanh(s, W, b)
    d_pre = d_out * (1.0 - out * out)
    return W.T @ d_pre, np.outer(d_pre, s), float(d_pre.sum())


def softmax(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtracted)"""
    if x.size == 0:
        raise InputError("softmax of an empty vector")
    shifted = np.exp(x - np.max(x))
    return shifted / shifted.sum()


def softmax_backward(y: np.ndarray, d_out: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the logits given the softmax output y"""
    return y * (d_out - np.dot(y, d_out))


def log_sigmoid(x):
    """ln sigma(x), finite for very negative x"""
    return -np.logaddexp(0.0, -x)


def sigmoid(x):
    """Logistic function evaluated without overflow"""
    return np.exp(log_sigmoid(x))
