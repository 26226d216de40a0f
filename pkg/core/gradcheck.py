"""
Finite-difference verification of the hand-written backward passes
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import GRADCHECK_H, GRADCHECK_PROBES, GRADCHECK_THRESHOLD, VARIANT_FULL
from core.model import Quadruple, batch_loss_and_grads
from core.optimizer import GradTape
from core.params import Hyper, ModelParams, init_params
from processors.text_pipeline import DocumentTable
from utils.errors import InputError
from utils.helpers import derived_rng

# Below this combined magnitude both gradients are treated as zero
ERROR_FLOOR = 1e-8

LossFn = Callable[[ModelParams], Tuple[float, GradTape]]


@dataclass
class GradcheckReport:
    """Worst relative error per parameter tensor"""
    errors: Dict[str, float] = field(default_factory=dict)
    probes: Dict[str, int] = field(default_factory=dict)
    threshold: float = GRADCHECK_THRESHOLD

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < self.threshold

    def failures(self) -> List[str]:
        return [name for name, err in self.errors.items() if err >= self.threshold]

    def to_dict(self) -> dict:
        return {"errors": dict(self.errors), "probes": dict(self.probes), "max_error": self.max_error,
                "threshold": self.threshold, "passed": self.passed}


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(ERROR_FLOOR, abs(analytic) + abs(numeric))


def _probe_indices(grad: np.ndarray, frozen: Optional[np.ndarray], count: int,
                   rng: np.random.Generator) -> np.ndarray:
    # uniform over trainable entries; the frozen PAD column is never probed
    pool = np.arange(grad.size) if frozen is None else np.flatnonzero(~frozen.ravel())
    if pool.size <= count:
        return pool
    return np.sort(rng.choice(pool, size=count, replace=False))


def finite_diff_check(loss_fn: LossFn, params: ModelParams, probe_count: int = GRADCHECK_PROBES,
                      h: float = GRADCHECK_H, rng: Optional[np.random.Generator] = None,
                      names: Optional[Sequence[str]] = None,
                      threshold: float = GRADCHECK_THRESHOLD) -> GradcheckReport:
    """
    Compare analytic gradients with central differences

    Args:
        loss_fn: params -> (loss, finalized GradTape)
        params: Parameters to probe (perturbed in place and restored)
        probe_count: Entries probed per tensor
        h: Step size
        rng: Probe sampler
        names: Tensors to probe (default: all)
        threshold: Pass threshold recorded in the report

    Returns:
        GradcheckReport with the worst |a - n| / max(floor, |a| + |n|) per tensor
    """
    if h <= 0:
        raise InputError("finite-difference step must be positive")
    rng = rng if rng is not None else derived_rng(0)
    _, tape = loss_fn(params)
    frozen = params.frozen_masks()
    report = GradcheckReport(threshold=threshold)

    for name in names or params.order():
        tensor = params[name]
        analytic = tape[name]
        flat = tensor.reshape(-1)
        worst = 0.0
        probes = _probe_indices(analytic, frozen.get(name), probe_count, rng)
        for index in probes:
            original = flat[index]
            flat[index] = original + h
            plus, _ = loss_fn(params)
            flat[index] = original - h
            minus, _ = loss_fn(params)
            flat[index] = original
            numeric = (plus - minus) / (2.0 * h)
            worst = max(worst, relative_error(float(analytic.reshape(-1)[index]), numeric))
        report.errors[name] = worst
        report.probes[name] = int(len(probes))
        logging.debug(f"gradcheck {name}: {len(probes)} probes, max relative error {worst:.3e}")
    return report


@dataclass
class ToyInstance:
    params: ModelParams
    documents: DocumentTable
    quadruples: List[Quadruple]


def toy_instance(variant: str = VARIANT_FULL, seed: int = 0, share_embeddings: bool = False,
                 init_std: float = 0.5) -> ToyInstance:
    """
    3 users, 8 items, fully filled documents over a 16-token vocabulary

    Every user has a two-item memory, one positive and one negative.
    """
    rng = derived_rng(seed, 1)
    num_items, vocab_size, max_len = 8, 16, 6
    hyper = Hyper(embedding_dim=4, num_filters=3, window_size=3, latent_dim=5, vocab_size=vocab_size,
                  num_items=num_items, lambda_u=0.01, lambda_v=0.01, variant=variant,
                  share_embeddings=share_embeddings)
    params = init_params(hyper, seed, init_std=init_std)
    items = [f"i{k}" for k in range(num_items)]
    indices = rng.integers(1, vocab_size, size=(num_items, max_len))
    documents = DocumentTable(items, indices, np.full(num_items, max_len))
    quadruples = [
        Quadruple("u0", ("i0", "i1"), "i2", "i5"),
        Quadruple("u1", ("i3", "i4"), "i5", "i0"),
        Quadruple("u2", ("i6", "i2", "i7"), "i1", "i4"),
    ]
    return ToyInstance(params=params, documents=documents, quadruples=quadruples)


def run_gradcheck_suite(variant: str = VARIANT_FULL, seed: int = 0, probe_count: int = GRADCHECK_PROBES,
                        h: float = GRADCHECK_H, threshold: float = GRADCHECK_THRESHOLD,
                        share_embeddings: bool = False) -> GradcheckReport:
    """
    Finite-difference check of every parameter group on the toy instance

    Args:
        variant: Model variant
        seed: Seed for the toy instance and the probe sampler
        probe_count: Entries probed per tensor
        h: Step size
        threshold: Maximum accepted relative error
        share_embeddings: Tie the user and item word embeddings

    Returns:
        GradcheckReport
    """
    toy = toy_instance(variant=variant, seed=seed, share_embeddings=share_embeddings)

    def loss_fn(p: ModelParams):
        return batch_loss_and_grads(p, toy.documents, toy.quadruples)

    report = finite_diff_check(loss_fn, toy.params, probe_count=probe_count, h=h,
                               rng=derived_rng(seed, 2), threshold=threshold)
    logging.info(f"gradcheck ({variant}): max relative error {report.max_error:.3e} "
                 f"over {sum(report.probes.values())} probes")
    return report
