"""
MARS forward computation: memory component, item-level attention, adaptive
user representation, preference score and pairwise loss, plus ranking.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.settings import VARIANT_EMBED_AVG, VARIANT_NO_ATT, VARIANT_NO_TEXT
from core.encoders import EncoderCache, encode_batch, encode_batch_backward
from core.numeric import conv1d_valid, dense_tanh, embed_lookup, log_sigmoid, maxpool, sigmoid, softmax
from core.optimizer import GradTape
from core.params import ModelParams
from processors.text_pipeline import DocumentTable, EncodedDocument
from utils.errors import ColdUserError, InputError, UnknownItemError
from utils.helpers import derived_rng


@dataclass
class MemoryBank:
    """Encoded liked items of one user (K x M), excluding the candidate"""
    user_id: str
    C: np.ndarray
    source_ids: List[str]
    mask: np.ndarray


@dataclass
class AttentionVector:
    weights: np.ndarray
    candidate_id: str


@dataclass(frozen=True)
class Quadruple:
    """Training example (user, memory subset of liked items, liked item, sampled non-liked item)"""
    user_id: str
    memory_ids: Tuple[str, ...]
    positive_id: str
    negative_id: str


@dataclass
class RankedList:
    user_id: str
    item_ids: List[str]
    scores: np.ndarray

    def top(self, n: int) -> "RankedList":
        return RankedList(self.user_id, self.item_ids[:n], self.scores[:n])


# ---------------------------------------------------------------------------
# Single-instance operations
# ---------------------------------------------------------------------------

def encode_item(doc: EncodedDocument, params: ModelParams, side: str = "item",
                item_row: Optional[int] = None) -> np.ndarray:
    """
    Representation of one item document, composed from the per-layer ops.

    Serves as the unbatched reference for encode_batch.

    Args:
        doc: Encoded document
        params: Model parameters
        side: 'item' for f_item (Omega), 'user' for f_user (Psi)
        item_row: Catalog row of the item (required by the no_text variant)

    Returns:
        Vector of length K
    """
    if params.variant == VARIANT_NO_TEXT:
        if item_row is None:
            raise InputError("no_text encoder needs the item's catalog row")
        return params[params.name(side, "item_vectors")][item_row].copy()

    Pi = embed_lookup(doc.indices, params[params.name(side, "embedding")])
    W = params[params.name(side, "dense_weight")]
    b = float(params[params.name(side, "dense_bias")][0])
    if params.variant == VARIANT_EMBED_AVG:
        return dense_tanh(Pi[:, :doc.true_length].mean(axis=1), W, b)

    kernels = params[params.name(side, "kernels")]
    conv_bias = params[params.name(side, "conv_bias")]
    pooled = np.array([maxpool(conv1d_valid(Pi, kernels[f], float(conv_bias[f]))) for f in range(kernels.shape[0])])
    return dense_tanh(pooled, W, b)


def build_memory(params: ModelParams, documents: DocumentTable, user_id: str, liked_ids: Sequence[str],
                 candidate_id: Optional[str], memory_size: int,
                 rng: Optional[np.random.Generator] = None) -> MemoryBank:
    """
    Encode up to memory_size liked items (candidate excluded) with f_user

    Args:
        params: Model parameters
        documents: Encoded catalog documents
        user_id: User the memory belongs to
        liked_ids: Items liked by the user, in source order
        candidate_id: Item being scored; never part of its own memory
        memory_size: Maximum number of memory slots
        rng: Sampler used when more than memory_size items are eligible

    Returns:
        MemoryBank with one column per source item
    """
    pool = [item for item in liked_ids if item != candidate_id]
    if not pool:
        raise ColdUserError(user_id)
    if len(pool) > memory_size:
        rng = rng if rng is not None else derived_rng(0)
        chosen = rng.choice(len(pool), size=memory_size, replace=False)
        pool = [pool[k] for k in chosen]
    rows = documents.rows(pool)
    C, _ = encode_batch(params, "user", documents.indices[rows], documents.lengths[rows], rows)
    return MemoryBank(user_id=user_id, C=C.T.copy(), source_ids=list(pool), mask=np.ones(len(pool), dtype=bool))


def attention(bank: MemoryBank, v: np.ndarray, candidate_id: str = "", variant: str = "full") -> AttentionVector:
    """
    Softmax of C^T v over unmasked slots; masked slots get weight 0.

    The no_att variant fixes every unmasked weight to one.
    """
    if bank.C.shape[0] != v.shape[0]:
        raise InputError(f"memory has K={bank.C.shape[0]} but candidate vector has length {v.shape[0]}")
    mask = np.asarray(bank.mask, dtype=bool)
    if not mask.any():
        raise InputError("attention over a memory with every slot masked")
    weights = np.zeros(mask.shape[0])
    if variant == VARIANT_NO_ATT:
        weights[mask] = 1.0
    else:
        weights[mask] = softmax(bank.C[:, mask].T @ v)
    return AttentionVector(weights=weights, candidate_id=candidate_id)


def adaptive_user_rep(C: np.ndarray, alpha: AttentionVector, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """u = C alpha over unmasked columns"""
    weights = alpha.weights if isinstance(alpha, AttentionVector) else np.asarray(alpha)
    if C.shape[1] != weights.shape[0]:
        raise InputError(f"memory has {C.shape[1]} slots but attention has {weights.shape[0]}")
    if mask is not None:
        weights = np.where(mask, weights, 0.0)
    return C @ weights


def score(u: np.ndarray, v: np.ndarray) -> float:
    """Preference score r_ij = u . v"""
    if u.shape != v.shape:
        raise InputError(f"score needs equal lengths, got {u.shape} and {v.shape}")
    return float(np.dot(u, v))


def pair_loss(u_pos: np.ndarray, v_pos: np.ndarray, u_neg: np.ndarray, v_neg: np.ndarray,
              lambda_u: float, lambda_v: float) -> float:
    """
    -ln sigma(r_ij - r_ij') + lambda_u (|u_j|^2 + |u_j'|^2) + lambda_v (|v_j|^2 + |v_j'|^2)
    """
    if lambda_u < 0 or lambda_v < 0:
        raise InputError("regularization weights must be non-negative")
    margin = score(u_pos, v_pos) - score(u_neg, v_neg)
    return float(-log_sigmoid(margin)
                 + lambda_u * (np.dot(u_pos, u_pos) + np.dot(u_neg, u_neg))
                 + lambda_v * (np.dot(v_pos, v_pos) + np.dot(v_neg, v_neg)))


# ---------------------------------------------------------------------------
# Batched training forward/backward
# ---------------------------------------------------------------------------

@dataclass
class BatchCache:
    user_cache: EncoderCache
    item_cache: EncoderCache
    memory_slots: np.ndarray  # B x M indices into the user-side encodings
    mask: np.ndarray  # B x M
    pos_slots: np.ndarray  # B
    neg_slots: np.ndarray  # B
    C: np.ndarray  # B x M x K
    v_pos: np.ndarray
    v_neg: np.ndarray
    alpha_pos: np.ndarray
    alpha_neg: np.ndarray
    u_pos: np.ndarray
    u_neg: np.ndarray
    margin: np.ndarray
    num_user_docs: int = 0
    num_item_docs: int = 0
    losses: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    masked = np.where(mask, logits, -np.inf)
    shifted = np.exp(masked - masked.max(axis=1, keepdims=True))
    shifted = np.where(mask, shifted, 0.0)
    return shifted / shifted.sum(axis=1, keepdims=True)


def _attend(C: np.ndarray, v: np.ndarray, mask: np.ndarray, variant: str):
    if variant == VARIANT_NO_ATT:
        alpha = mask.astype(np.float64)
    else:
        alpha = _masked_softmax(np.einsum('bmk,bk->bm', C, v), mask)
    return alpha, np.einsum('bm,bmk->bk', alpha, C)


def forward_batch(params: ModelParams, documents: DocumentTable,
                  quadruples: Sequence[Quadruple]) -> Tuple[np.ndarray, BatchCache]:
    """
    Per-quadruple losses for a batch, with caches for exact backprop.

    Every document is encoded once per batch even when it appears in several
    quadruples; memories are padded to the longest one and masked.

    Returns:
        (losses of shape (B,), BatchCache)
    """
    if not quadruples:
        raise InputError("empty batch")
    hyper = params.hyper
    B = len(quadruples)
    M = max(len(q.memory_ids) for q in quadruples)
    if M == 0:
        raise InputError("quadruple with an empty memory")

    user_items = sorted({item for q in quadruples for item in q.memory_ids})
    item_items = sorted({item for q in quadruples for item in (q.positive_id, q.negative_id)})
    user_slot = {item: k for k, item in enumerate(user_items)}
    item_slot = {item: k for k, item in enumerate(item_items)}

    memory_slots = np.zeros((B, M), dtype=np.int64)
    mask = np.zeros((B, M), dtype=bool)
    for b, q in enumerate(quadruples):
        if not q.memory_ids:
            raise InputError(f"quadruple for user '{q.user_id}' has an empty memory")
        for m, item in enumerate(q.memory_ids):
            memory_slots[b, m] = user_slot[item]
            mask[b, m] = True
    pos_slots = np.array([item_slot[q.positive_id] for q in quadruples])
    neg_slots = np.array([item_slot[q.negative_id] for q in quadruples])

    user_rows = documents.rows(user_items)
    item_rows = documents.rows(item_items)
    user_enc, user_cache = encode_batch(params, "user", documents.indices[user_rows],
                                        documents.lengths[user_rows], user_rows)
    item_enc, item_cache = encode_batch(params, "item", documents.indices[item_rows],
                                        documents.lengths[item_rows], item_rows)

    C = np.where(mask[:, :, None], user_enc[memory_slots], 0.0)
    v_pos = item_enc[pos_slots]
    v_neg = item_enc[neg_slots]
    alpha_pos, u_pos = _attend(C, v_pos, mask, hyper.variant)
    alpha_neg, u_neg = _attend(C, v_neg, mask, hyper.variant)

    margin = np.einsum('bk,bk->b', u_pos, v_pos) - np.einsum('bk,bk->b', u_neg, v_neg)
    losses = (-log_sigmoid(margin)
              + hyper.lambda_u * (np.einsum('bk,bk->b', u_pos, u_pos) + np.einsum('bk,bk->b', u_neg, u_neg))
              + hyper.lambda_v * (np.einsum('bk,bk->b', v_pos, v_pos) + np.einsum('bk,bk->b', v_neg, v_neg)))

    cache = BatchCache(user_cache=user_cache, item_cache=item_cache, memory_slots=memory_slots, mask=mask,
                       pos_slots=pos_slots, neg_slots=neg_slots, C=C, v_pos=v_pos, v_neg=v_neg,
                       alpha_pos=alpha_pos, alpha_neg=alpha_neg, u_pos=u_pos, u_neg=u_neg, margin=margin,
                       num_user_docs=len(user_items), num_item_docs=len(item_items), losses=losses)
    return losses, cache


def _attend_backward(C, v, alpha, du, variant):
    d_C = np.einsum('bm,bk->bmk', alpha, du)
    d_v = np.zeros_like(v)
    if variant != VARIANT_NO_ATT:
        d_alpha = np.einsum('bmk,bk->bm', C, du)
        d_logits = alpha * (d_alpha - np.sum(alpha * d_alpha, axis=1, keepdims=True))
        d_C += np.einsum('bm,bk->bmk', d_logits, v)
        d_v += np.einsum('bm,bmk->bk', d_logits, C)
    return d_C, d_v


def backward_batch(params: ModelParams, cache: BatchCache, tape: GradTape, weight: float = 1.0):
    """
    Accumulate gradients of weight * sum(losses) into the tape

    Args:
        params: Model parameters used in the forward pass
        cache: BatchCache from forward_batch
        tape: Gradient tape
        weight: Scale applied to every quadruple (1/|batch| for a batch mean)
    """
    hyper = params.hyper
    lam_u, lam_v = hyper.lambda_u, hyper.lambda_v
    # d(-ln sigma(r))/dr = -sigma(-r)
    d_margin = -sigmoid(-cache.margin)[:, None] * weight

    du_pos = d_margin * cache.v_pos + 2.0 * lam_u * weight * cache.u_pos
    dv_pos = d_margin * cache.u_pos + 2.0 * lam_v * weight * cache.v_pos
    du_neg = -d_margin * cache.v_neg + 2.0 * lam_u * weight * cache.u_neg
    dv_neg = -d_margin * cache.u_neg + 2.0 * lam_v * weight * cache.v_neg

    d_C_pos, dv_att_pos = _attend_backward(cache.C, cache.v_pos, cache.alpha_pos, du_pos, hyper.variant)
    d_C_neg, dv_att_neg = _attend_backward(cache.C, cache.v_neg, cache.alpha_neg, du_neg, hyper.variant)
    d_C = d_C_pos + d_C_neg
    dv_pos = dv_pos + dv_att_pos
    dv_neg = dv_neg + dv_att_neg

    d_user = np.zeros((cache.num_user_docs, hyper.latent_dim))
    np.add.at(d_user, cache.memory_slots[cache.mask], d_C[cache.mask])
    d_item = np.zeros((cache.num_item_docs, hyper.latent_dim))
    np.add.at(d_item, cache.pos_slots, dv_pos)
    np.add.at(d_item, cache.neg_slots, dv_neg)

    encode_batch_backward(params, cache.user_cache, d_user, tape)
    encode_batch_backward(params, cache.item_cache, d_item, tape)


def batch_loss_and_grads(params: ModelParams, documents: DocumentTable,
                         quadruples: Sequence[Quadruple]) -> Tuple[float, GradTape]:
    """Mean loss over the batch and its gradient"""
    losses, cache = forward_batch(params, documents, quadruples)
    tape = GradTape(params.tensors, params.frozen_masks())
    backward_batch(params, cache, tape, weight=1.0 / len(quadruples))
    tape.finalize()
    return float(np.mean(losses)), tape


def forward_quadruple(params: ModelParams, documents: DocumentTable, quadruple: Quadruple):
    """
    Loss of one quadruple: memory -> encode j, j' -> attention for each -> u_j, u_j' -> pair loss

    Returns:
        (loss, BatchCache usable with backward_batch)
    """
    losses, cache = forward_batch(params, documents, [quadruple])
    return float(losses[0]), cache


# ---------------------------------------------------------------------------
# Ranking (inference)
# ---------------------------------------------------------------------------

@dataclass
class CatalogEncoding:
    """Both encoders applied to every catalog document"""
    user_side: np.ndarray  # N x K
    item_side: np.ndarray  # N x K


def encode_catalog(params: ModelParams, documents: DocumentTable, chunk: int = 256) -> CatalogEncoding:
    """Encode every document once with f_user and once with f_item"""
    n = len(documents)
    sides = {}
    for side in ("user", "item"):
        parts = []
        for start in range(0, n, chunk):
            rows = np.arange(start, min(n, start + chunk))
            out, _ = encode_batch(params, side, documents.indices[rows], documents.lengths[rows], rows)
            parts.append(out)
        sides[side] = np.vstack(parts) if parts else np.zeros((0, params.hyper.latent_dim))
    return CatalogEncoding(user_side=sides["user"], item_side=sides["item"])


def inference_memory(user_index: int, liked_ids: Sequence[str], candidate_id: Optional[str],
                     memory_size: int, seed: int) -> List[str]:
    """
    Memory source ids used at inference: every liked item except the candidate,
    truncated to memory_size with a sampler seeded by (seed, user)
    """
    pool = [item for item in liked_ids if item != candidate_id]
    if len(pool) <= memory_size:
        return pool
    chosen = np.sort(derived_rng(seed, user_index).choice(len(pool), size=memory_size, replace=False))
    return [pool[k] for k in chosen]


def attention_scores(params: ModelParams, encoding: CatalogEncoding, memory_rows: np.ndarray,
                     candidate_rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Attention weights and scores of many candidates against one memory

    Returns:
        (weights of shape (num_candidates, M), scores of shape (num_candidates,))
    """
    C = encoding.user_side[memory_rows]  # M x K
    V = encoding.item_side[candidate_rows]  # N x K
    if params.variant == VARIANT_NO_ATT:
        weights = np.ones((V.shape[0], C.shape[0]))
    else:
        weights = np.vstack([softmax(row) for row in V @ C.T]) if V.shape[0] else np.zeros((0, C.shape[0]))
    U = weights @ C
    return weights, np.einsum('nk,nk->n', U, V)


def rank_items(params: ModelParams, dataset, documents: DocumentTable, user_id: str,
               candidates: Optional[Sequence[str]] = None, memory_size: int = 64, seed: int = 0,
               exclude_validation: bool = True, encoding: Optional[CatalogEncoding] = None) -> RankedList:
    """
    Score and sort candidates for one user

    Args:
        params: Model parameters
        dataset: InteractionDataset with splits
        documents: Encoded catalog documents
        user_id: User to rank for
        candidates: Item ids to rank (default: catalog minus train, and optionally validation, positives)
        memory_size: Inference memory cap M_max
        seed: Seed of the truncation sampler
        exclude_validation: Drop validation positives from the default candidate set
        encoding: Precomputed catalog encoding (computed on demand otherwise)

    Returns:
        RankedList sorted by descending score, ties by ascending item id
    """
    split = dataset.split_of(user_id)
    train = list(split.train)
    if not train:
        raise ColdUserError(user_id)
    if candidates is None:
        excluded = set(train)
        if exclude_validation:
            excluded.update(split.validation)
        candidates = [item for item in dataset.items if item not in excluded]
    for item in candidates:
        if item not in documents:
            raise UnknownItemError(item)
    encoding = encoding or encode_catalog(params, documents)
    user_index = dataset.user_index[user_id]

    train_set = set(train)
    scores = np.zeros(len(candidates))
    shared = [k for k, item in enumerate(candidates) if item not in train_set]
    if shared:
        memory = inference_memory(user_index, train, None, memory_size, seed)
        cand_rows = documents.rows([candidates[k] for k in shared])
        _, shared_scores = attention_scores(params, encoding, documents.rows(memory), cand_rows)
        scores[shared] = shared_scores
    for k, item in enumerate(candidates):
        if item in train_set:
            memory = inference_memory(user_index, train, item, memory_size, seed)
            if not memory:
                raise ColdUserError(user_id)
            _, s = attention_scores(params, encoding, documents.rows(memory), documents.rows([item]))
            scores[k] = s[0]

    order = sort_by_score(scores, list(candidates))
    logging.debug(f"Ranked {len(candidates)} candidates for user {user_id}")
    return RankedList(user_id=user_id, item_ids=[candidates[k] for k in order], scores=scores[order])


def sort_by_score(scores: np.ndarray, item_ids: Sequence[str]) -> np.ndarray:
    """Indices sorting by descending score, ties broken by ascending item id"""
    id_rank = np.empty(len(item_ids), dtype=np.int64)
    id_rank[sorted(range(len(item_ids)), key=lambda k: item_ids[k])] = np.arange(len(item_ids))
    return np.lexsort((id_rank, -np.asarray(scores)))
