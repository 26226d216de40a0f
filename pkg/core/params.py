"""
Trainable tensors of the user encoder (Psi) and item encoder (Omega)
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np

from config.settings import (
    DEFAULT_INIT_STD, PAD_INDEX, VARIANT_EMBED_AVG, VARIANT_NO_TEXT, VARIANTS,
)
from utils.errors import InputError
from utils.helpers import derived_rng

SIDES = ("user", "item")
GROUPS = ("embedding", "kernels", "conv_bias", "dense_weight", "dense_bias", "item_vectors")


@dataclass(frozen=True)
class Hyper:
    """Shape and regularization metadata shared by both encoders"""
    embedding_dim: int  # e
    num_filters: int  # g
    window_size: int  # c
    latent_dim: int  # K
    vocab_size: int  # |V| including PAD
    num_items: int
    lambda_u: float = 0.0
    lambda_v: float = 0.0
    variant: str = "full"
    share_embeddings: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InputError(f"Unknown model variant '{self.variant}'")
        for name in ("embedding_dim", "num_filters", "window_size", "latent_dim", "vocab_size", "num_items"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.lambda_u < 0 or self.lambda_v < 0:
            raise InputError("regularization weights must be non-negative")


class ModelParams:
    """
    Named parameter tensors for both encoders.

    Names are ``<side>.<group>``, e.g. ``user.kernels`` (g x e x c) or
    ``item.dense_bias`` (a single shared scalar stored with shape (1,)).
    """

    def __init__(self, hyper: Hyper, tensors: Dict[str, np.ndarray]):
        self.hyper = hyper
        self.tensors = tensors
        expected = expected_shapes(hyper)
        if list(tensors) != list(expected):
            raise InputError(f"Parameter names {list(tensors)} do not match {list(expected)}")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise InputError(f"Parameter '{name}' has shape {tensors[name].shape}, expected {shape}")

    @property
    def variant(self) -> str:
        return self.hyper.variant

    def name(self, side: str, group: str) -> str:
        """Resolve the tensor used by one side (shared embeddings resolve to the user table)"""
        if group == "embedding" and self.hyper.share_embeddings:
            return "user.embedding"
        return f"{side}.{group}"

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def order(self) -> List[str]:
        return list(self.tensors)

    def shapes(self) -> Dict[str, List[int]]:
        return {name: list(value.shape) for name, value in self.tensors.items()}

    def frozen_masks(self) -> Dict[str, np.ndarray]:
        """PAD embedding column stays pinned at zero"""
        masks = {}
        for name, value in self.tensors.items():
            if name.endswith(".embedding"):
                mask = np.zeros(value.shape, dtype=bool)
                mask[:, PAD_INDEX] = True
                masks[name] = mask
        return masks

    def copy(self) -> "ModelParams":
        return ModelParams(self.hyper, {name: value.copy() for name, value in self.tensors.items()})

    def stats(self) -> Dict[str, Dict[str, float]]:
        """Per-tensor summary used in training diagnostics"""
        return {
            name: {
                "max_abs": float(np.max(np.abs(value))) if np.all(np.isfinite(value)) else float('nan'),
                "finite": bool(np.all(np.isfinite(value))),
            }
            for name, value in self.tensors.items()
        }

    def hyper_dict(self) -> dict:
        return asdict(self.hyper)


def expected_shapes(hyper: Hyper) -> Dict[str, tuple]:
    """Ordered parameter names and shapes for a variant"""
    e, g, c, K = hyper.embedding_dim, hyper.num_filters, hyper.window_size, hyper.latent_dim
    shapes = {}
    for side in SIDES:
        if hyper.variant == VARIANT_NO_TEXT:
            shapes[f"{side}.item_vectors"] = (hyper.num_items, K)
            continue
        if side == "user" or not hyper.share_embeddings:
            shapes[f"{side}.embedding"] = (e, hyper.vocab_size)
        if hyper.variant == VARIANT_EMBED_AVG:
            shapes[f"{side}.dense_weight"] = (K, e)
        else:
            shapes[f"{side}.kernels"] = (g, e, c)
            shapes[f"{side}.conv_bias"] = (g,)
            shapes[f"{side}.dense_weight"] = (K, g)
        shapes[f"{side}.dense_bias"] = (1,)
    return shapes


def init_params(hyper: Hyper, seed: int, init_std: float = DEFAULT_INIT_STD) -> ModelParams:
    """
    Gaussian-initialized parameters; biases start at zero and the PAD column at zero

    Args:
        hyper: Shapes and variant
        seed: Initialization seed
        init_std: Standard deviation of the Gaussian

    Returns:
        Fresh ModelParams
    """
    rng = derived_rng(seed, 0)
    tensors = {}
    for name, shape in expected_shapes(hyper).items():
        group = name.split(".", 1)[1]
        if group in ("conv_bias", "dense_bias"):
            tensors[name] = np.zeros(shape, dtype=np.float64)
        else:
            tensors[name] = rng.normal(0.0, init_std, size=shape)
        if group == "embedding":
            tensors[name][:, PAD_INDEX] = 0.0
    params = ModelParams(hyper, tensors)
    total = sum(value.size for value in tensors.values())
    logging.info(f"Initialized {hyper.variant} model with {total} parameters in {len(tensors)} tensors")
    return params


def hyper_from_config(config, vocab_size: int, num_items: int) -> Hyper:
    """Build Hyper from a TrainConfig and the data dimensions"""
    return Hyper(
        embedding_dim=config.embedding_dim,
        num_filters=config.num_filters,
        window_size=config.window_size,
        latent_dim=config.latent_dim,
        vocab_size=vocab_size,
        num_items=num_items,
        lambda_u=config.lambda_u,
        lambda_v=config.lambda_v,
        variant=config.variant,
        share_embeddings=config.share_embeddings,
    )


def params_from_arrays(hyper_values: dict, arrays: Dict[str, np.ndarray],
                       order: Optional[List[str]] = None) -> ModelParams:
    """Rebuild ModelParams from plain values (checkpoint loading)"""
    hyper = Hyper(**hyper_values)
    names = order or list(expected_shapes(hyper))
    return ModelParams(hyper, {name: np.asarray(arrays[name], dtype=np.float64) for name in names})
