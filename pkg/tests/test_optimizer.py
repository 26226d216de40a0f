"""
Gradient tapes and RMSprop
"""
import numpy as np
import pytest

from core.optimizer import GradTape, RmspropState, rmsprop_step
from utils.errors import InputError, TrainingError


def test_tape_buffers_match_parameter_shapes():
    params = {"a": np.ones((2, 3)), "b": np.ones(4)}
    tape = GradTape(params)
    assert tape["a"].shape == (2, 3) and tape["b"].shape == (4,)
    assert tape.global_norm() == 0.0


def test_tape_rejects_wrong_shape():
    tape = GradTape({"a": np.ones((2, 3))})
    with pytest.raises(InputError):
        tape.add("a", np.ones((3, 2)))
    with pytest.raises(InputError):
        tape.add("missing", np.ones(1))


def test_merge_and_frozen_entries():
    params = {"a": np.zeros((2, 2))}
    frozen = np.array([[True, False], [True, False]])
    left, right = GradTape(params, {"a": frozen}), GradTape(params)
    left.add("a", np.ones((2, 2)))
    right.add("a", 2 * np.ones((2, 2)))
    left.merge([right])
    left.finalize()
    np.testing.assert_array_equal(left["a"], [[0.0, 3.0], [0.0, 3.0]])


def test_rmsprop_first_step_by_hand():
    theta = {"w": np.array([1.0, -2.0])}
    tape = GradTape(theta)
    tape.add("w", np.array([0.5, -1.0]))
    state = RmspropState.for_params(theta, learning_rate=0.1, decay=0.9, epsilon=1e-8)
    rmsprop_step(theta, tape, state)
    acc = 0.1 * np.array([0.25, 1.0])
    np.testing.assert_allclose(state.accumulators["w"], acc)
    expected = np.array([1.0, -2.0]) - 0.1 * np.array([0.5, -1.0]) / (np.sqrt(acc) + 1e-8)
    np.testing.assert_allclose(theta["w"], expected, atol=1e-15)


def test_zero_learning_rate_leaves_parameters_bit_identical():
    theta = {"w": np.random.default_rng(0).normal(size=(3, 3))}
    before = theta["w"].copy()
    tape = GradTape(theta)
    tape.add("w", np.random.default_rng(1).normal(size=(3, 3)))
    rmsprop_step(theta, tape, RmspropState.for_params(theta, learning_rate=0.0))
    assert np.array_equal(theta["w"], before)


def test_non_finite_gradient_names_the_parameter():
    theta = {"user.kernels": np.ones(2)}
    tape = GradTape(theta)
    tape.add("user.kernels", np.array([np.nan, 0.0]))
    with pytest.raises(TrainingError, match="user.kernels"):
        rmsprop_step(theta, tape, RmspropState.for_params(theta))
    np.testing.assert_array_equal(theta["user.kernels"], [1.0, 1.0])
