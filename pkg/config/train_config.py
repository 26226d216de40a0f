"""
Training configuration model
"""
import json
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config.settings import (
    AP_MODE_LITERAL, AP_MODE_STANDARD, DEFAULT_AP_MODE, DEFAULT_BATCH_SIZE, DEFAULT_CHUNK_SIZE,
    DEFAULT_EMBEDDING_DIM, DEFAULT_EPOCHS, DEFAULT_INIT_STD, DEFAULT_LAMBDA_U, DEFAULT_LAMBDA_V,
    DEFAULT_LATENT_DIM, DEFAULT_LEARNING_RATE, DEFAULT_MAP_CUTOFF, DEFAULT_MEMORY_EVAL,
    DEFAULT_MEMORY_TRAIN, DEFAULT_NUM_FILTERS, DEFAULT_PATIENCE, DEFAULT_RECALL_AT, DEFAULT_SEED,
    DEFAULT_WINDOW_SIZE, NEGATIVES_ALL_POSITIVES, NEGATIVES_TRAIN_POSITIVES, RMS_DECAY, RMS_EPSILON,
    VARIANTS, VARIANT_FULL,
)
from utils.errors import ConfigError


class TrainConfig(BaseModel):
    """
    Everything that determines a training run.

    JSON config files use the field names below; the single-letter names
    e, g, c and K are accepted as aliases.
    """
    model_config = ConfigDict(extra='forbid', populate_by_name=True, frozen=True)

    epochs: int = Field(DEFAULT_EPOCHS, ge=1)
    batch_size: int = Field(DEFAULT_BATCH_SIZE, ge=1)
    # 0 is accepted so a run can be checked for parameter stability
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, ge=0.0)
    lambda_u: float = Field(DEFAULT_LAMBDA_U, ge=0.0)
    lambda_v: float = Field(DEFAULT_LAMBDA_V, ge=0.0)
    embedding_dim: int = Field(DEFAULT_EMBEDDING_DIM, ge=1, alias='e')
    num_filters: int = Field(DEFAULT_NUM_FILTERS, ge=1, alias='g')
    window_size: int = Field(DEFAULT_WINDOW_SIZE, ge=1, alias='c')
    latent_dim: int = Field(DEFAULT_LATENT_DIM, ge=1, alias='K')
    memory_size_train: int = Field(DEFAULT_MEMORY_TRAIN, ge=1)
    memory_size_eval: int = Field(DEFAULT_MEMORY_EVAL, ge=1)
    seed: int = DEFAULT_SEED
    variant: str = VARIANT_FULL
    patience: int = Field(DEFAULT_PATIENCE, ge=1)

    share_embeddings: bool = False
    init_std: float = Field(DEFAULT_INIT_STD, gt=0.0)
    rms_decay: float = Field(RMS_DECAY, gt=0.0, lt=1.0)
    rms_epsilon: float = Field(RMS_EPSILON, gt=0.0)
    validate_every: int = Field(1, ge=0)
    negative_pool: str = NEGATIVES_ALL_POSITIVES
    chunk_size: int = Field(DEFAULT_CHUNK_SIZE, ge=1)
    workers: int = Field(1, ge=1)
    exclude_validation: bool = True
    recall_at: List[int] = Field(default_factory=lambda: list(DEFAULT_RECALL_AT))
    map_cutoff: int = Field(DEFAULT_MAP_CUTOFF, ge=1)
    ap_mode: str = DEFAULT_AP_MODE

    @field_validator('variant')
    @classmethod
    def _check_variant(cls, v):
        if v not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        return v

    @field_validator('negative_pool')
    @classmethod
    def _check_negative_pool(cls, v):
        if v not in (NEGATIVES_ALL_POSITIVES, NEGATIVES_TRAIN_POSITIVES):
            raise ValueError(f"negative_pool must be '{NEGATIVES_ALL_POSITIVES}' or '{NEGATIVES_TRAIN_POSITIVES}'")
        return v

    @field_validator('ap_mode')
    @classmethod
    def _check_ap_mode(cls, v):
        if v not in (AP_MODE_LITERAL, AP_MODE_STANDARD):
            raise ValueError(f"ap_mode must be '{AP_MODE_LITERAL}' or '{AP_MODE_STANDARD}'")
        return v

    @field_validator('recall_at')
    @classmethod
    def _check_recall_at(cls, v):
        if not v or any(n < 1 for n in v):
            raise ValueError('recall_at needs at least one cut-off, each >= 1')
        return v

    def echo(self) -> dict:
        """Plain dict of field values (field names, not aliases)"""
        return self.model_dump(mode='json')


def make_config(**values) -> TrainConfig:
    """
    Build a TrainConfig, converting validation failures to ConfigError

    Args:
        **values: Field values (names or aliases)

    Returns:
        Validated TrainConfig
    """
    try:
        return TrainConfig(**values)
    except ValidationError as e:
        first = e.errors()[0]
        location = '.'.join(str(part) for part in first.get('loc', ()))
        raise ConfigError(f"Invalid config field '{location}': {first.get('msg')}") from e


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> TrainConfig:
    """
    Load a TrainConfig from a JSON file and apply overrides

    Args:
        path: JSON config file (None for defaults)
        overrides: Values that replace file values (None entries are ignored)

    Returns:
        Validated TrainConfig
    """
    values = {}
    if path:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                values = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
        if not isinstance(values, dict):
            raise ConfigError(f"Config file {path} must contain a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            values.pop(_ALIASES.get(key, key), None)
            values[key] = value
    return make_config(**values)


_ALIASES = {'embedding_dim': 'e', 'num_filters': 'g', 'window_size': 'c', 'latent_dim': 'K'}
