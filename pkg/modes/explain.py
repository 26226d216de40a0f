"""
Recommendations and attention-based explanations ("because you liked ...")
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import colorama

from config.settings import DEFAULT_EXPLAIN_TOP_K, DEFAULT_MEMORY_EVAL, WEIGHT_DECIMALS
from core.model import CatalogEncoding, RankedList, attention_scores, encode_catalog, inference_memory, rank_items
from core.params import ModelParams
from modes.evaluation import load_for_inference
from processors.artifacts import Artifacts
from processors.text_pipeline import decode_document
from utils.errors import ColdUserError, InputError, UnknownItemError
from utils.helpers import paint


@dataclass
class Explanation:
    user_id: str
    item_id: str
    score: float
    contributors: List[Tuple[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "item_id": self.item_id,
            "score": self.score,
            "contributors": [{"item_id": item, "weight": weight} for item, weight in self.contributors],
        }


def explain(params: ModelParams, artifacts: Artifacts, user_id: str, item_id: str,
            top_k: int = DEFAULT_EXPLAIN_TOP_K, memory_size: int = DEFAULT_MEMORY_EVAL, seed: int = 0,
            encoding: Optional[CatalogEncoding] = None) -> Explanation:
    """
    Liked items with the highest attention for one candidate

    The memory and attention are recomputed with the same policy rank_items uses,
    so the weights are exactly those behind the candidate's score.

    Args:
        params: Model parameters
        artifacts: Dataset, documents and titles
        user_id: User
        item_id: Candidate item
        top_k: Number of contributors (fewer when the memory is smaller)
        memory_size: Inference memory cap
        seed: Truncation sampler seed
        encoding: Precomputed catalog encoding

    Returns:
        Explanation with contributors by descending weight, ties by ascending id
    """
    if top_k < 1:
        raise InputError("top_k must be >= 1")
    dataset = artifacts.dataset
    split = dataset.split_of(user_id)
    if item_id not in artifacts.documents:
        raise UnknownItemError(item_id)
    memory = inference_memory(dataset.user_index[user_id], list(split.train), item_id, memory_size, seed)
    if not memory:
        raise ColdUserError(user_id)

    encoding = encoding or encode_catalog(params, artifacts.documents)
    weights, scores = attention_scores(params, encoding, artifacts.documents.rows(memory),
                                       artifacts.documents.rows([item_id]))
    pairs = sorted(zip(memory, weights[0].tolist()), key=lambda pair: (-pair[1], pair[0]))
    logging.debug(f"Explained {item_id} for {user_id} over a memory of {len(memory)} items")
    return Explanation(user_id=user_id, item_id=item_id, score=float(scores[0]), contributors=pairs[:top_k])


def recommend(params: ModelParams, artifacts: Artifacts, user_id: str, top: int = 10,
              memory_size: int = DEFAULT_MEMORY_EVAL, seed: int = 0, exclude_validation: bool = True,
              with_explanations: bool = False, top_k: int = DEFAULT_EXPLAIN_TOP_K):
    """
    Top-N recommendations among the items the user has not liked in training

    Returns:
        (RankedList of the top items, list of Explanations or None)
    """
    if top < 1:
        raise InputError("top must be >= 1")
    encoding = encode_catalog(params, artifacts.documents)
    ranked = rank_items(params, artifacts.dataset, artifacts.documents, user_id, memory_size=memory_size, seed=seed,
                        exclude_validation=exclude_validation, encoding=encoding).top(top)
    explanations = None
    if with_explanations:
        explanations = [explain(params, artifacts, user_id, item, top_k, memory_size, seed, encoding)
                        for item in ranked.item_ids]
    return ranked, explanations


def _label(artifacts: Artifacts, item_id: str) -> str:
    if item_id in artifacts.titles:
        return artifacts.titles[item_id]
    tokens = decode_document(artifacts.documents.document(item_id), artifacts.vocab)
    preview = " ".join(tokens[:6])
    return f"{item_id} [{preview}{' ...' if len(tokens) > 6 else ''}]"


def format_explanation(explanation: Explanation, artifacts: Artifacts) -> str:
    lines = [f"Recommended: {paint(_label(artifacts, explanation.item_id), colorama.Fore.GREEN)} "
             f"(score {explanation.score:.4f})",
             "  Because you liked:"]
    for item, weight in explanation.contributors:
        lines.append(f"    {_label(artifacts, item)} ({weight:.{WEIGHT_DECIMALS}f})")
    return "\n".join(lines)


def format_recommendations(ranked: RankedList, artifacts: Artifacts,
                           explanations: Optional[List[Explanation]] = None) -> str:
    lines = [f"Top {len(ranked.item_ids)} for user {ranked.user_id}:"]
    for rank, (item, value) in enumerate(zip(ranked.item_ids, ranked.scores), start=1):
        lines.append(f"{rank:>3}. {_label(artifacts, item)} (score {value:.4f})")
        if explanations:
            contributors = ", ".join(f"{_label(artifacts, i)} ({w:.{WEIGHT_DECIMALS}f})"
                                     for i, w in explanations[rank - 1].contributors)
            lines.append(f"     because you liked {contributors}")
    return "\n".join(lines)


def run_recommend(data_dir: str, checkpoint_path: str, user_id: str, top: int = 10, seed: Optional[int] = None,
                  with_explanations: bool = False, top_k: int = DEFAULT_EXPLAIN_TOP_K):
    """Load a compatible checkpoint and recommend for one user"""
    artifacts, checkpoint = load_for_inference(data_dir, checkpoint_path)
    config = checkpoint.config
    seed = config.get("seed", 0) if seed is None else seed
    ranked, explanations = recommend(checkpoint.params, artifacts, user_id, top,
                                     memory_size=config.get("memory_size_eval", DEFAULT_MEMORY_EVAL), seed=seed,
                                     with_explanations=with_explanations, top_k=top_k)
    return artifacts, ranked, explanations


def run_explain(data_dir: str, checkpoint_path: str, user_id: str, item_id: str,
                top_k: int = DEFAULT_EXPLAIN_TOP_K, seed: Optional[int] = None):
    """Load a compatible checkpoint and explain one recommendation"""
    artifacts, checkpoint = load_for_inference(data_dir, checkpoint_path)
    config = checkpoint.config
    seed = config.get("seed", 0) if seed is None else seed
    explanation = explain(checkpoint.params, artifacts, user_id, item_id, top_k,
                          memory_size=config.get("memory_size_eval", DEFAULT_MEMORY_EVAL), seed=seed)
    return artifacts, explanation
