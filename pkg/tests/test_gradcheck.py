"""
Finite-difference gradient suite over every parameter group
"""
import numpy as np
import pytest

from config.settings import VARIANTS
from core.gradcheck import ERROR_FLOOR, finite_diff_check, relative_error, run_gradcheck_suite, toy_instance
from core.model import batch_loss_and_grads


def test_full_variant_passes_on_every_group():
    report = run_gradcheck_suite(probe_count=40)
    groups = {name.split(".", 1)[1] for name in report.errors}
    assert {"embedding", "kernels", "conv_bias", "dense_weight", "dense_bias"} <= groups
    assert {name.split(".", 1)[0] for name in report.errors} == {"user", "item"}
    assert report.passed, report.errors


@pytest.mark.parametrize("variant", VARIANTS)
def test_every_variant_passes(variant):
    report = run_gradcheck_suite(variant=variant, probe_count=20)
    assert report.passed, report.errors


def test_shared_embeddings_pass():
    report = run_gradcheck_suite(probe_count=20, share_embeddings=True)
    assert "item.embedding" not in report.errors
    assert report.passed, report.errors


def test_detects_a_wrong_gradient():
    toy = toy_instance()

    def broken(params):
        loss, tape = batch_loss_and_grads(params, toy.documents, toy.quadruples)
        tape.buffers["item.dense_weight"] *= 1.5
        return loss, tape

    report = finite_diff_check(broken, toy.params, probe_count=10)
    assert not report.passed
    assert report.failures() == ["item.dense_weight"]


def test_parameters_restored_after_probing():
    toy = toy_instance()
    before = {name: value.copy() for name, value in toy.params.tensors.items()}
    finite_diff_check(lambda p: batch_loss_and_grads(p, toy.documents, toy.quadruples), toy.params, probe_count=5)
    for name, value in toy.params.tensors.items():
        assert np.array_equal(value, before[name])


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(1.0, -1.0) == pytest.approx(1.0)


def test_small_gradients_are_not_hidden_by_the_floor():
    assert ERROR_FLOOR == 1e-8
    assert relative_error(5e-7, 0.0) == pytest.approx(1.0)
    assert relative_error(2e-9, 0.0) == pytest.approx(0.2)


def test_every_trainable_entry_is_checked():
    toy = toy_instance()

    def loss_fn(params):
        return batch_loss_and_grads(params, toy.documents, toy.quadruples)

    report = finite_diff_check(loss_fn, toy.params, probe_count=10_000, names=["user.embedding", "item.dense_bias"])
    embedding = toy.params["user.embedding"]
    assert report.probes["user.embedding"] == embedding.size - embedding.shape[0]
    assert report.probes["item.dense_bias"] == toy.params["item.dense_bias"].size
    assert report.passed, report.errors
