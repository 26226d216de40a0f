"""
Ranking metrics: recall@N and average precision with a K' cut-off
"""
from typing import Iterable, Optional, Sequence

from config.settings import AP_MODE_LITERAL, AP_MODE_STANDARD, DEFAULT_MAP_CUTOFF
from utils.errors import InputError


def recall_at_n(ranked_ids: Sequence[str], test_positives: Iterable[str], n: int) -> Optional[float]:
    """
    Fraction of held-out positives found in the top n

    Args:
        ranked_ids: Item ids, best first
        test_positives: Held-out liked items
        n: Cut-off (>= 1)

    Returns:
        Recall in [0, 1], or None when there are no held-out positives
    """
    if n < 1:
        raise InputError(f"recall cut-off must be >= 1, got {n}")
    relevant = set(test_positives)
    if not relevant:
        return None
    hits = sum(1 for item in ranked_ids[:n] if item in relevant)
    return hits / len(relevant)


def average_precision(ranked_ids: Sequence[str], test_positives: Iterable[str],
                      cutoff: int = DEFAULT_MAP_CUTOFF, mode: str = AP_MODE_LITERAL) -> Optional[float]:
    """
    Average precision over the first `cutoff` ranks

    'paper-literal' divides the sum of precisions at relevant ranks by the
    cut-off itself; 'standard' divides by min(|test|, cutoff).

    Returns:
        AveP in [0, 1], or None when there are no held-out positives
    """
    if cutoff < 1:
        raise InputError(f"MAP cut-off must be >= 1, got {cutoff}")
    if mode not in (AP_MODE_LITERAL, AP_MODE_STANDARD):
        raise InputError(f"Unknown AveP mode '{mode}'")
    relevant = set(test_positives)
    if not relevant:
        return None

    hits = 0
    total = 0.0
    for k, item in enumerate(ranked_ids[:cutoff], start=1):
        if item in relevant:
            hits += 1
            total += hits / k
    normalizer = cutoff if mode == AP_MODE_LITERAL else min(len(relevant), cutoff)
    return total / normalizer
