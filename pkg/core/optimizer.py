"""
Gradient buffers and the RMSprop update
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

import numpy as np

from config.settings import DEFAULT_LEARNING_RATE, RMS_DECAY, RMS_EPSILON
from utils.errors import InputError, TrainingError


class GradTape:
    """One zero-initialized gradient buffer per parameter, same shape as the parameter"""

    def __init__(self, params: Dict[str, np.ndarray], frozen: Optional[Dict[str, np.ndarray]] = None):
        """
        Args:
            params: Parameter tensors keyed by parameter id
            frozen: Optional boolean masks of entries that never receive gradient (e.g. the PAD column)
        """
        self.buffers = {name: np.zeros_like(value, dtype=np.float64) for name, value in params.items()}
        self.frozen = frozen or {}

    def add(self, name: str, grad: np.ndarray):
        if name not in self.buffers:
            raise InputError(f"No gradient buffer for parameter '{name}'")
        buf = self.buffers[name]
        if np.shape(grad) != buf.shape:
            raise InputError(f"Gradient for '{name}' has shape {np.shape(grad)}, expected {buf.shape}")
        buf += grad

    def merge(self, others: Iterable["GradTape"]):
        """Sum other tapes into this one, in the order given"""
        for other in others:
            for name, buf in other.buffers.items():
                self.buffers[name] += buf

    def finalize(self):
        """Clear gradient on frozen entries"""
        for name, mask in self.frozen.items():
            if name in self.buffers:
                self.buffers[name][mask] = 0.0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.buffers[name]

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(b * b)) for b in self.buffers.values())))


@dataclass
class RmspropState:
    """Running average of squared gradients per parameter"""
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)
    decay: float = RMS_DECAY
    epsilon: float = RMS_EPSILON
    learning_rate: float = DEFAULT_LEARNING_RATE

    @classmethod
    def for_params(cls, params: Dict[str, np.ndarray], learning_rate: float = DEFAULT_LEARNING_RATE,
                   decay: float = RMS_DECAY, epsilon: float = RMS_EPSILON) -> "RmspropState":
        return cls(
            accumulators={name: np.zeros_like(value, dtype=np.float64) for name, value in params.items()},
            decay=decay, epsilon=epsilon, learning_rate=learning_rate,
        )


def rmsprop_step(params: Dict[str, np.ndarray], grads: GradTape, state: RmspropState):
    """
    Apply one RMSprop update in place.

    acc <- decay * acc + (1 - decay) * g^2
    theta <- theta - lr * g / (sqrt(acc) + eps)

    Args:
        params: Parameter tensors (updated in place)
        grads: Gradient tape with one buffer per parameter
        state: Optimizer state (updated in place)
    """
    for name, grad in grads.buffers.items():
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"Non-finite gradient for parameter '{name}'")

    for name, grad in grads.buffers.items():
        if name not in params:
            raise InputError(f"Gradient for unknown parameter '{name}'")
        acc = state.accumulators.get(name)
        if acc is None:
            acc = np.zeros_like(grad)
            state.accumulators[name] = acc
        if acc.shape != params[name].shape:
            raise InputError(f"Optimizer state for '{name}' has shape {acc.shape}, parameter {params[name].shape}")
        acc *= state.decay
        acc += (1.0 - state.decay) * grad * grad
        params[name] -= state.learning_rate * grad / (np.sqrt(acc) + state.epsilon)

    logging.debug(f"RMSprop step applied to {len(grads.buffers)} parameters")
