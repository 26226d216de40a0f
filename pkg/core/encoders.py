"""
Batched text encoders f_user / f_item.

Each encoder maps a batch of padded documents (B x n token indices) to a
B x K matrix of item representations:

    full / no_att:  embed -> conv (g filters, window c, ReLU) -> max-pool -> tanh(W s + b)
    embed_avg:      embed -> mean over true tokens -> tanh(W s + b)
    no_text:        free K-vector per item
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import VARIANT_EMBED_AVG, VARIANT_NO_TEXT
from core.optimizer import GradTape
from core.params import ModelParams
from utils.errors import InputError


@dataclass
class EncoderCache:
    side: str
    indices: Optional[np.ndarray] = None  # B x n
    lengths: Optional[np.ndarray] = None  # B
    rows: Optional[np.ndarray] = None  # B catalog rows (no_text)
    Pi: Optional[np.ndarray] = None  # B x n x e
    pre_at: Optional[np.ndarray] = None  # B x g pre-activation at the pooled position
    argmax: Optional[np.ndarray] = None  # B x g
    pooled: Optional[np.ndarray] = None  # B x g (or B x e for embed_avg)
    out: Optional[np.ndarray] = None  # B x K


def encode_batch(params: ModelParams, side: str, indices: np.ndarray, lengths: np.ndarray,
                 rows: Optional[np.ndarray] = None):
    """
    Encode a batch of documents with one side's encoder

    Args:
        params: Model parameters
        side: 'user' (Psi) or 'item' (Omega)
        indices: B x n padded token indices
        lengths: True (unpadded) lengths, shape (B,)
        rows: Catalog rows of the documents (needed by the no_text variant)

    Returns:
        (B x K representations, EncoderCache for the backward pass)
    """
    variant = params.variant
    if variant == VARIANT_NO_TEXT:
        if rows is None:
            raise InputError("no_text encoder needs catalog rows")
        rows = np.asarray(rows, dtype=np.int64)
        table = params[params.name(side, "item_vectors")]
        return table[rows].copy(), EncoderCache(side=side, rows=rows)

    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 2:
        raise InputError(f"encoder expects a B x n index matrix, got shape {indices.shape}")
    E = params[params.name(side, "embedding")]
    if indices.size and (indices.min() < 0 or indices.max() >= E.shape[1]):
        raise InputError(f"token index out of range for vocabulary of size {E.shape[1]}")
    Pi = np.transpose(E[:, indices], (1, 2, 0))  # B x n x e

    W = params[params.name(side, "dense_weight")]
    b = params[params.name(side, "dense_bias")][0]

    if variant == VARIANT_EMBED_AVG:
        lengths = np.asarray(lengths, dtype=np.float64)
        mask = np.arange(indices.shape[1])[None, :] < lengths[:, None]
        pooled = (Pi * mask[:, :, None]).sum(axis=1) / lengths[:, None]
        out = np.tanh(pooled @ W.T + b)
        return out, EncoderCache(side=side, indices=indices, lengths=lengths, pooled=pooled, out=out)

    kernels = params[params.name(side, "kernels")]
    conv_bias = params[params.name(side, "conv_bias")]
    g, e, c = kernels.shape
    n = indices.shape[1]
    if n < c:
        raise InputError(f"documents of length {n} are shorter than the window size {c}")
    T = n - c + 1
    Pi_cols = np.transpose(Pi, (0, 2, 1))  # B x e x n
    pre = np.zeros((indices.shape[0], g, T))
    for k in range(c):
        pre += np.matmul(kernels[:, :, k], Pi_cols[:, :, k:k + T])
    pre += conv_bias[None, :, None]
    z = np.maximum(pre, 0.0)
    argmax = np.argmax(z, axis=2)  # first maximum on ties
    pooled = np.take_along_axis(z, argmax[:, :, None], axis=2)[:, :, 0]
    pre_at = np.take_along_axis(pre, argmax[:, :, None], axis=2)[:, :, 0]
    out = np.tanh(pooled @ W.T + b)
    return out, EncoderCache(side=side, indices=indices, lengths=np.asarray(lengths), Pi=Pi,
                             pre_at=pre_at, argmax=argmax, pooled=pooled, out=out)


def encode_batch_backward(params: ModelParams, cache: EncoderCache, d_out: np.ndarray, tape: GradTape):
    """
    Accumulate encoder parameter gradients for upstream gradient d_out (B x K)

    Args:
        params: Model parameters used in the forward pass
        cache: EncoderCache from encode_batch
        d_out: Gradient of the loss w.r.t. the encoder outputs
        tape: Gradient tape receiving the parameter gradients
    """
    side = cache.side
    if params.variant == VARIANT_NO_TEXT:
        name = params.name(side, "item_vectors")
        grad = np.zeros_like(params[name])
        np.add.at(grad, cache.rows, d_out)
        tape.add(name, grad)
        return

    W = params[params.name(side, "dense_weight")]
    d_pre = d_out * (1.0 - cache.out * cache.out)  # B x K
    tape.add(params.name(side, "dense_weight"), d_pre.T @ cache.pooled)
    tape.add(params.name(side, "dense_bias"), np.array([d_pre.sum()]))
    d_pooled = d_pre @ W

    emb_name = params.name(side, "embedding")
    B, n = cache.indices.shape

    if params.variant == VARIANT_EMBED_AVG:
        mask = np.arange(n)[None, :] < cache.lengths[:, None]
        d_Pi = mask[:, :, None] * (d_pooled / cache.lengths[:, None])[:, None, :]
    else:
        kernels = params[params.name(side, "kernels")]
        g, e, c = kernels.shape
        d_at = d_pooled * (cache.pre_at > 0)  # B x g
        tape.add(params.name(side, "conv_bias"), d_at.sum(axis=0))
        batch_idx = np.broadcast_to(np.arange(B)[:, None], cache.argmax.shape)
        d_kernels = np.zeros_like(kernels)
        d_Pi = np.zeros((B, n, e))
        for k in range(c):
            pos = cache.argmax + k
            window_cols = cache.Pi[batch_idx, pos]  # B x g x e
            d_kernels[:, :, k] = np.einsum('bf,bfe->fe', d_at, window_cols)
            np.add.at(d_Pi, (batch_idx, pos), d_at[:, :, None] * kernels[None, :, :, k])
        tape.add(params.name(side, "kernels"), d_kernels)

    E = params[emb_name]
    d_E_T = np.zeros((E.shape[1], E.shape[0]))
    np.add.at(d_E_T, cache.indices, d_Pi)
    tape.add(emb_name, d_E_T.T)
