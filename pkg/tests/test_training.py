"""
Quadruple sampling, training loop, metrics log and checkpoints
"""
import json

import numpy as np
import pytest

from config.settings import NEGATIVES_TRAIN_POSITIVES
from config.train_config import make_config
from modes.ingest import build_artifacts
from modes.training import QuadrupleSampler, Trainer, train_model
from processors.checkpoint import load_checkpoint
from processors.ingest import InteractionDataset, UserSplit
from processors.synthetic import generate_synthetic
from utils.errors import TrainingError
from utils.helpers import derived_rng


class TestSampler:
    def test_negatives_are_never_liked(self, toy_artifacts):
        dataset = toy_artifacts.dataset
        sampler = QuadrupleSampler(dataset, memory_size=3, rng=derived_rng(0, 1))
        for q in sampler.sample_batch(500):
            train = set(dataset.split_of(q.user_id).train)
            assert q.negative_id not in dataset.positives[q.user_id]
            assert q.positive_id in train
            assert q.positive_id not in q.memory_ids
            assert set(q.memory_ids) <= train
            assert 1 <= len(q.memory_ids) <= 3
            assert len(set(q.memory_ids)) == len(q.memory_ids)

    def test_train_positive_pool_may_draw_held_out_items(self, toy_artifacts):
        dataset = toy_artifacts.dataset
        sampler = QuadrupleSampler(dataset, memory_size=3, negative_pool=NEGATIVES_TRAIN_POSITIVES,
                                   rng=derived_rng(0, 1))
        for q in sampler.sample_batch(200):
            assert q.negative_id not in dataset.split_of(q.user_id).train

    def test_same_seed_same_quadruples(self, toy_artifacts):
        first = QuadrupleSampler(toy_artifacts.dataset, 3, rng=derived_rng(9, 1)).sample_batch(50)
        second = QuadrupleSampler(toy_artifacts.dataset, 3, rng=derived_rng(9, 1)).sample_batch(50)
        assert first == second

    def test_users_with_one_train_positive_are_not_sampled(self):
        dataset = InteractionDataset.from_pairs([("a", "i1"), ("a", "i2"), ("a", "i3"), ("b", "i1"), ("b", "i4"),
                                                 ("b", "i5"), ("b", "i2")])
        splits = {"a": UserSplit(("i1",), ("i2",), ("i3",)), "b": UserSplit(("i1", "i4"), ("i5",), ("i2",))}
        dataset = dataset.with_splits(splits, seed=0, train_frac=0.3)
        sampler = QuadrupleSampler(dataset, memory_size=2)
        assert sampler.users == ["b"]
        assert all(q.user_id == "b" for q in sampler.sample_batch(20))

    def test_nothing_to_sample(self):
        dataset = InteractionDataset.from_pairs([("a", "i1"), ("a", "i2"), ("a", "i3")])
        dataset = dataset.with_splits({"a": UserSplit(("i1",), ("i2",), ("i3",))}, seed=0, train_frac=0.3)
        with pytest.raises(TrainingError):
            QuadrupleSampler(dataset, memory_size=2)


class TestTrainer:
    def test_zero_learning_rate_keeps_initial_parameters(self, toy_artifacts, small_config):
        config = small_config.model_copy(update={"learning_rate": 0.0})
        trainer = Trainer(toy_artifacts, config)
        before = {name: value.copy() for name, value in trainer.params.tensors.items()}
        trainer.run_epoch()
        for name, value in trainer.params.tensors.items():
            assert np.array_equal(value, before[name]), name

    def test_pad_column_stays_zero(self, toy_artifacts, small_config):
        trainer = Trainer(toy_artifacts, small_config)
        trainer.run_epoch()
        assert np.all(trainer.params["user.embedding"][:, 0] == 0.0)
        assert np.all(trainer.params["item.embedding"][:, 0] == 0.0)

    def test_chunked_and_threaded_steps_match_single_chunk(self, toy_artifacts, small_config):
        whole = Trainer(toy_artifacts, small_config.model_copy(update={"chunk_size": 64}))
        split = Trainer(toy_artifacts, small_config.model_copy(update={"chunk_size": 3, "workers": 2}))
        batch = whole.sampler.sample_batch(8)
        whole.train_step(batch)
        split.train_step(batch)
        for name in whole.params.order():
            np.testing.assert_allclose(split.params[name], whole.params[name], atol=1e-12)

    def test_metrics_log_has_one_record_per_epoch(self, toy_artifacts, small_config, tmp_path):
        path = tmp_path / "metrics.jsonl"
        result = train_model(toy_artifacts, small_config, metrics_path=str(path))
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["epoch"] for r in records] == [1, 2]
        assert {"epoch", "mean_loss", "val_recall50", "val_map", "seconds"} <= set(records[0])
        assert all(np.isfinite(r["mean_loss"]) for r in records)
        assert result.best_epoch in (1, 2)

    def test_same_seed_gives_identical_checkpoints(self, toy_artifacts, small_config, tmp_path):
        first = train_model(toy_artifacts, small_config, checkpoint_path=str(tmp_path / "a.ckpt"))
        second = train_model(toy_artifacts, small_config, checkpoint_path=str(tmp_path / "b.ckpt"))
        assert first.checkpoint_digest == second.checkpoint_digest
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

        checkpoint = load_checkpoint(str(tmp_path / "a.ckpt"))
        assert checkpoint.vocab_digest == toy_artifacts.vocab_digest
        assert checkpoint.config["seed"] == small_config.seed

    def test_early_stopping(self, toy_artifacts, small_config):
        config = small_config.model_copy(update={"epochs": 6, "patience": 1, "learning_rate": 0.0})
        result = train_model(toy_artifacts, config)
        assert result.stopped_early
        assert len(result.history) == 2
        assert result.best_epoch == 1


@pytest.mark.slow
def test_loss_falls_on_single_topic_users(toy_artifacts):
    config = make_config(epochs=30, batch_size=16, e=8, g=6, c=3, K=8, memory_size_train=4, memory_size_eval=8,
                         learning_rate=0.005, lambda_u=0.0, lambda_v=0.0, seed=2, validate_every=0)
    result = train_model(toy_artifacts, config)
    losses = [r["mean_loss"] for r in result.history]
    assert losses[-1] < 0.5 * losses[0]


@pytest.mark.slow
def test_overfits_a_small_two_topic_corpus():
    data = generate_synthetic(num_users=20, num_items=50, num_topics=2, vocab_size=200, seed=42)
    artifacts = build_artifacts(data.interactions, data.documents, min_freq=1, max_len=40, window_size=3, seed=42)
    config = make_config(epochs=200, batch_size=512, learning_rate=0.01, e=32, g=8, c=3, K=16,
                         lambda_u=0.0, lambda_v=0.0, seed=42, validate_every=0)
    losses = [r["mean_loss"] for r in train_model(artifacts, config).history]
    assert len(losses) == 200
    assert min(losses) < 0.1
    rises = [later - earlier for earlier, later in zip(losses[19:], losses[20:])]
    assert max(rises) <= 0.05
