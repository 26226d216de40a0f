"""
Training mode: quadruple sampling, batched RMSprop updates, validation and checkpointing
"""
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil
from typing import Dict, List, Optional, Sequence

import colorama
import numpy as np
from tqdm import tqdm

from config.settings import NEGATIVES_ALL_POSITIVES, SPLIT_VALIDATION
from config.train_config import TrainConfig
from core.model import Quadruple, backward_batch, forward_batch
from core.optimizer import GradTape, RmspropState, rmsprop_step
from core.params import ModelParams, hyper_from_config, init_params
from modes.evaluation import evaluate_params
from processors.artifacts import Artifacts, load_artifacts
from processors.checkpoint import save_checkpoint
from utils.errors import TrainingError
from utils.helpers import canonical_json, derived_rng, print_banner

VALIDATION_RECALL_AT = 50


class QuadrupleSampler:
    """
    Draws (user, memory, liked item, non-liked item) training examples

    Users are drawn uniformly among those that can produce a quadruple: at least two
    training positives (so the memory is never empty) and at least one negative.
    """

    def __init__(self, dataset, memory_size: int, negative_pool: str = NEGATIVES_ALL_POSITIVES,
                 rng: Optional[np.random.Generator] = None):
        """
        Initialize sampler

        Args:
            dataset: InteractionDataset with splits
            memory_size: Maximum memory slots per quadruple
            negative_pool: 'all_positives' excludes every known positive from the negatives,
                'train_positives' only the training ones
            rng: Random generator (owned by the sampler)
        """
        self.dataset = dataset
        self.memory_size = memory_size
        self.negative_pool = negative_pool
        self.rng = rng if rng is not None else derived_rng(0)
        self.items = list(dataset.items)
        self.train = {u: list(dataset.split_of(u).train) for u in dataset.users}
        if negative_pool == NEGATIVES_ALL_POSITIVES:
            self.excluded = {u: set(dataset.positives[u]) for u in dataset.users}
        else:
            self.excluded = {u: set(self.train[u]) for u in dataset.users}
        self.users = [u for u in dataset.users
                      if len(self.train[u]) >= 2 and len(self.excluded[u]) < len(self.items)]
        skipped = len(dataset.users) - len(self.users)
        if skipped:
            logging.info(f"{skipped} users cannot produce training quadruples and are never sampled")
        if not self.users:
            raise TrainingError("No user has the two training positives and one negative a quadruple needs")

    def sample(self) -> Quadruple:
        user = self.users[self.rng.integers(len(self.users))]
        liked = self.train[user]
        j = int(self.rng.integers(len(liked)))
        rest = liked[:j] + liked[j + 1:]
        size = min(self.memory_size, len(rest))
        memory = tuple(rest[k] for k in self.rng.choice(len(rest), size=size, replace=False))
        excluded = self.excluded[user]
        while True:
            negative = self.items[self.rng.integers(len(self.items))]
            if negative not in excluded:
                break
        return Quadruple(user_id=user, memory_ids=memory, positive_id=liked[j], negative_id=negative)

    def sample_batch(self, size: int) -> List[Quadruple]:
        return [self.sample() for _ in range(size)]

    def state(self) -> dict:
        return self.rng.bit_generator.state


@dataclass
class TrainResult:
    params: ModelParams
    history: List[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_map: Optional[float] = None
    stopped_early: bool = False
    steps: int = 0
    checkpoint_digest: Optional[str] = None
    sampler_state: dict = field(default_factory=dict)

    def info(self) -> dict:
        return {"epochs_run": len(self.history), "best_epoch": self.best_epoch, "best_val_map": self.best_val_map,
                "stopped_early": self.stopped_early, "steps": self.steps}


class Trainer:
    def __init__(self, artifacts: Artifacts, config: TrainConfig, progress: bool = False):
        """
        Initialize trainer

        Args:
            artifacts: Split dataset, vocabulary and encoded documents
            config: Training configuration
            progress: Show a progress bar over the batches of each epoch
        """
        self.progress = progress
        self.artifacts = artifacts
        self.config = config
        self.dataset = artifacts.dataset
        self.documents = artifacts.documents
        hyper = hyper_from_config(config, artifacts.vocab.size, len(self.dataset.items))
        self.params = init_params(hyper, config.seed, init_std=config.init_std)
        self.optimizer = RmspropState.for_params(self.params.tensors, learning_rate=config.learning_rate,
                                                 decay=config.rms_decay, epsilon=config.rms_epsilon)
        self.sampler = QuadrupleSampler(self.dataset, config.memory_size_train, config.negative_pool,
                                        rng=derived_rng(config.seed, 1))
        self.steps_per_epoch = max(1, ceil(self.dataset.num_train_positives / config.batch_size))
        self.steps = 0

    def _chunk_grads(self, chunk: Sequence[Quadruple], weight: float):
        losses, cache = forward_batch(self.params, self.documents, chunk)
        tape = GradTape(self.params.tensors)
        backward_batch(self.params, cache, tape, weight=weight)
        return losses, tape

    def _diagnose(self, batch: Sequence[Quadruple], losses: np.ndarray) -> str:
        bad = int(np.flatnonzero(~np.isfinite(losses))[0])
        stats = self.params.stats()
        worst = max(stats, key=lambda name: (not stats[name]["finite"], stats[name]["max_abs"]))
        return (f"Non-finite loss at step {self.steps} for quadruple {batch[bad]}; "
                f"largest parameter '{worst}' max |value| {stats[worst]['max_abs']}")

    def train_step(self, batch: Sequence[Quadruple]) -> float:
        """
        One RMSprop update on the batch-mean loss

        Chunks are processed independently (optionally on worker threads) and their
        gradients are summed in chunk order.

        Returns:
            Mean loss of the batch before the update
        """
        size = self.config.chunk_size
        chunks = [batch[start:start + size] for start in range(0, len(batch), size)]
        weight = 1.0 / len(batch)
        if self.config.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                results = list(pool.map(lambda chunk: self._chunk_grads(chunk, weight), chunks))
        else:
            results = [self._chunk_grads(chunk, weight) for chunk in chunks]

        losses = np.concatenate([r[0] for r in results])
        if not np.all(np.isfinite(losses)):
            raise TrainingError(self._diagnose(batch, losses))
        tape = GradTape(self.params.tensors, self.params.frozen_masks())
        tape.merge(r[1] for r in results)
        tape.finalize()
        rmsprop_step(self.params.tensors, tape, self.optimizer)
        self.steps += 1
        loss = float(np.mean(losses))
        logging.debug(f"step {self.steps}: batch loss {loss:.6f}, grad norm {tape.global_norm():.4e}")
        return loss

    def run_epoch(self, epoch: int = 0) -> float:
        batches = tqdm(range(self.steps_per_epoch), desc=f"epoch {epoch}", leave=False, disable=not self.progress)
        losses = [self.train_step(self.sampler.sample_batch(self.config.batch_size)) for _ in batches]
        return float(np.mean(losses))

    def validate(self) -> Dict[str, float]:
        report = evaluate_params(self.params, self.artifacts, split=SPLIT_VALIDATION,
                                 recall_at=[VALIDATION_RECALL_AT], map_cutoff=self.config.map_cutoff,
                                 ap_mode=self.config.ap_mode, memory_size=self.config.memory_size_eval,
                                 seed=self.config.seed)
        return {"recall": report.mean_recall[VALIDATION_RECALL_AT], "map": report.map}

    def fit(self, metrics_path: Optional[str] = None) -> TrainResult:
        """
        Train for up to config.epochs epochs with early stopping on validation MAP

        Args:
            metrics_path: JSON-lines file receiving one record per epoch

        Returns:
            TrainResult holding the best-validation parameters
        """
        config = self.config
        result = TrainResult(params=self.params)
        best = None
        since_best = 0
        log_file = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
        try:
            for epoch in range(1, config.epochs + 1):
                started = time.monotonic()
                mean_loss = self.run_epoch(epoch)
                record = {"epoch": epoch, "mean_loss": mean_loss, "val_recall50": None, "val_map": None}

                if config.validate_every and epoch % config.validate_every == 0:
                    val = self.validate()
                    record["val_recall50"], record["val_map"] = val["recall"], val["map"]
                    if result.best_val_map is None or val["map"] > result.best_val_map:
                        result.best_val_map = val["map"]
                        result.best_epoch = epoch
                        best = self.params.copy()
                        since_best = 0
                    else:
                        since_best += 1
                record["seconds"] = round(time.monotonic() - started, 3)
                result.history.append(record)
                if log_file:
                    log_file.write(canonical_json(record) + "\n")
                    log_file.flush()
                logging.info(f"epoch {epoch}: loss {mean_loss:.5f} val recall@{VALIDATION_RECALL_AT} "
                             f"{record['val_recall50']} val MAP {record['val_map']}")

                if config.validate_every and since_best >= config.patience:
                    logging.info(f"Early stop after {epoch} epochs (best epoch {result.best_epoch})")
                    result.stopped_early = True
                    break
        finally:
            if log_file:
                log_file.close()

        result.params = best if best is not None else self.params
        if best is None:
            result.best_epoch = len(result.history)
        result.steps = self.steps
        result.sampler_state = self.sampler.state()
        return result


def train_model(artifacts: Artifacts, config: TrainConfig, checkpoint_path: Optional[str] = None,
                metrics_path: Optional[str] = None, progress: bool = False) -> TrainResult:
    """
    Train a model and optionally write its checkpoint

    Args:
        artifacts: Ingest artifacts
        config: Training configuration
        checkpoint_path: Where to save the best parameters (skipped when None)
        metrics_path: Per-epoch metrics log
        progress: Show per-epoch progress bars

    Returns:
        TrainResult
    """
    trainer = Trainer(artifacts, config, progress=progress)
    logging.info(f"Training {config.variant} for up to {config.epochs} epochs, "
                 f"{trainer.steps_per_epoch} batches of {config.batch_size} per epoch")
    result = trainer.fit(metrics_path)
    if checkpoint_path:
        result.checkpoint_digest = save_checkpoint(
            result.params, config.echo(), checkpoint_path,
            vocab_digest=artifacts.vocab_digest,
            catalog_digest=artifacts.catalog_digest,
            stopwords_id=artifacts.vocab.stopword_set_id,
            rng_state=result.sampler_state,
            training_info=result.info(),
        )
    return result


def run_training(data_dir: str, config: TrainConfig, checkpoint_path: str,
                 metrics_path: Optional[str] = None, quiet: bool = False) -> TrainResult:
    """
    Train from an ingest directory

    Args:
        data_dir: Ingest artifact directory
        config: Training configuration
        checkpoint_path: Output checkpoint
        metrics_path: Metrics log (defaults to <checkpoint>.metrics.jsonl)
        quiet: Skip the summary banner

    Returns:
        TrainResult
    """
    artifacts = load_artifacts(data_dir)
    metrics_path = metrics_path or f"{os.path.splitext(checkpoint_path)[0]}.metrics.jsonl"
    result = train_model(artifacts, config, checkpoint_path, metrics_path, progress=not quiet)
    if not quiet:
        last = result.history[-1] if result.history else {}
        print_banner("TRAINING SUMMARY", [
            f"Variant:       {config.variant}",
            f"Epochs run:    {len(result.history)}",
            f"Best epoch:    {result.best_epoch}",
            f"Final loss:    {last.get('mean_loss', float('nan')):.5f}",
            f"Best val MAP:  {result.best_val_map}",
            f"Checkpoint:    {checkpoint_path}",
        ], color=colorama.Fore.GREEN)
    return result
