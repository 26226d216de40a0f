"""
Numeric primitives and their backward passes
"""
import numpy as np
import pytest

from core.encoders import encode_batch
from core.numeric import (
    conv1d_valid, conv1d_valid_backward, dense_tanh, dense_tanh_backward, embed_lookup, embed_lookup_backward,
    log_sigmoid, maxpool, maxpool_backward, sigmoid, softmax, softmax_backward,
)
from core.params import Hyper, init_params
from utils.errors import InputError


def numeric_grad(f, x, h=1e-6):
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        plus = f()
        flat[k] = orig - h
        minus = f()
        flat[k] = orig
        gflat[k] = (plus - minus) / (2 * h)
    return grad


class TestSoftmax:
    def test_sums_to_one_and_is_stable(self):
        y = softmax(np.array([1000.0, 1000.0, 999.0]))
        assert np.all(np.isfinite(y))
        np.testing.assert_allclose(y.sum(), 1.0, atol=1e-12)
        assert y[0] == y[1] > y[2]

    def test_single_element_is_one(self):
        assert softmax(np.array([-3.7]))[0] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            softmax(np.array([]))

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=5)
        w = rng.normal(size=5)
        analytic = softmax_backward(softmax(x), w)
        numeric = numeric_grad(lambda: float(np.dot(softmax(x), w)), x)
        np.testing.assert_allclose(analytic, numeric, atol=1e-8)


class TestSigmoid:
    def test_log_sigmoid_at_zero(self):
        assert log_sigmoid(0.0) == pytest.approx(-np.log(2.0), abs=1e-15)

    def test_log_sigmoid_finite_for_large_negative(self):
        assert log_sigmoid(-1000.0) == pytest.approx(-1000.0)
        assert np.isfinite(log_sigmoid(-1e6))

    def test_symmetry(self):
        x = np.linspace(-30, 30, 101)
        np.testing.assert_allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-12)


class TestEmbedding:
    def test_lookup_columns(self):
        E = np.arange(12, dtype=float).reshape(3, 4)
        np.testing.assert_array_equal(embed_lookup([2, 0, 2], E), E[:, [2, 0, 2]])

    def test_out_of_range(self):
        with pytest.raises(InputError):
            embed_lookup([4], np.zeros((3, 4)))

    def test_empty_sequence(self):
        with pytest.raises(InputError):
            embed_lookup([], np.zeros((3, 4)))

    def test_backward_accumulates_repeats(self):
        d_out = np.ones((2, 3))
        dE = embed_lookup_backward([1, 1, 3], d_out, vocab_size=4)
        np.testing.assert_array_equal(dE[:, 1], [2.0, 2.0])
        np.testing.assert_array_equal(dE[:, 3], [1.0, 1.0])
        np.testing.assert_array_equal(dE[:, [0, 2]], 0.0)


class TestConvolution:
    def test_known_value(self):
        Pi = np.array([[1.0, 2.0, 3.0, 4.0]])
        kernel = np.array([[1.0, -1.0]])
        # windows: 1-2, 2-3, 3-4 = -1 each, plus bias 2 -> 1
        np.testing.assert_array_equal(conv1d_valid(Pi, kernel, 2.0), [1.0, 1.0, 1.0])

    def test_relu_clamps(self):
        Pi = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_array_equal(conv1d_valid(Pi, np.array([[-1.0]]), 0.0), [0.0, 0.0, 0.0])

    def test_document_shorter_than_window(self):
        with pytest.raises(InputError):
            conv1d_valid(np.ones((2, 2)), np.ones((2, 3)), 0.0)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        Pi, kernel, bias = rng.normal(size=(3, 7)), rng.normal(size=(3, 3)), 0.1
        w = rng.normal(size=5)
        dPi, dk, db = conv1d_valid_backward(Pi, kernel, bias, w)
        np.testing.assert_allclose(dPi, numeric_grad(lambda: float(conv1d_valid(Pi, kernel, bias) @ w), Pi),
                                   atol=1e-7)
        np.testing.assert_allclose(dk, numeric_grad(lambda: float(conv1d_valid(Pi, kernel, bias) @ w), kernel),
                                   atol=1e-7)
        h = 1e-6
        numeric_db = (conv1d_valid(Pi, kernel, bias + h) @ w - conv1d_valid(Pi, kernel, bias - h) @ w) / (2 * h)
        assert db == pytest.approx(numeric_db, abs=1e-7)


class TestMaxPool:
    def test_tie_goes_to_first(self):
        z = np.array([0.5, 2.0, 2.0, 1.0])
        assert maxpool(z) == 2.0
        np.testing.assert_array_equal(maxpool_backward(z, 3.0), [0.0, 3.0, 0.0, 0.0])

    def test_empty(self):
        with pytest.raises(InputError):
            maxpool(np.array([]))


class TestDense:
    def test_zero_weights_give_tanh_of_bias(self):
        out = dense_tanh(np.ones(3), np.zeros((2, 3)), 0.5)
        np.testing.assert_allclose(out, np.tanh(0.5))

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            dense_tanh(np.ones(3), np.zeros((2, 4)), 0.0)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        s, W, b = rng.normal(size=4), rng.normal(size=(3, 4)), 0.2
        w = rng.normal(size=3)
        ds, dW, db = dense_tanh_backward(s, W, b, w)
        np.testing.assert_allclose(ds, numeric_grad(lambda: float(dense_tanh(s, W, b) @ w), s), atol=1e-8)
        np.testing.assert_allclose(dW, numeric_grad(lambda: float(dense_tanh(s, W, b) @ w), W), atol=1e-8)


class TestBatchedEncoderAgreesWithPrimitives:
    def test_cnn_encoder_composes_primitives(self):
        hyper = Hyper(embedding_dim=4, num_filters=3, window_size=3, latent_dim=5, vocab_size=10, num_items=2)
        params = init_params(hyper, seed=11, init_std=0.5)
        params["user.conv_bias"][:] = [0.1, -0.2, 0.05]
        docs = np.array([[1, 4, 2, 9, 3, 0], [5, 5, 6, 7, 8, 1]])
        out, _ = encode_batch(params, "user", docs, np.array([5, 6]))

        E = params["user.embedding"]
        K = params["user.kernels"]
        for row in range(2):
            Pi = embed_lookup(docs[row], E)
            pooled = np.array([maxpool(conv1d_valid(Pi, K[f], params["user.conv_bias"][f])) for f in range(3)])
            expected = dense_tanh(pooled, params["user.dense_weight"], params["user.dense_bias"][0])
            np.testing.assert_allclose(out[row], expected, atol=1e-12)


class TestScalarLoopOracles:
    """Vectorized primitives against plain nested loops on random shapes"""

    def test_conv_dense_and_lookup(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            e, c = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            n = int(rng.integers(c, c + 8))
            V = int(rng.integers(2, 12))
            E = rng.normal(size=(e, V))
            idx = rng.integers(0, V, size=n)
            Pi = embed_lookup(idx, E)
            for row in range(e):
                for col in range(n):
                    assert Pi[row, col] == E[row, idx[col]]

            kernel, bias = rng.normal(size=(e, c)), float(rng.normal())
            z = conv1d_valid(Pi, kernel, bias)
            assert z.shape == (n - c + 1,)
            for k in range(n - c + 1):
                total = bias
                for row in range(e):
                    for off in range(c):
                        total += kernel[row, off] * Pi[row, k + off]
                assert z[k] == pytest.approx(max(0.0, total), abs=1e-12)

            K = int(rng.integers(1, 6))
            W, b = rng.normal(size=(K, e)), float(rng.normal())
            s = rng.normal(size=e)
            out = dense_tanh(s, W, b)
            for k in range(K):
                assert out[k] == pytest.approx(np.tanh(sum(W[k, j] * s[j] for j in range(e)) + b), abs=1e-12)

    def test_softmax_shift_invariance(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            x = rng.normal(size=int(rng.integers(1, 20))) * 10
            y = softmax(x)
            assert np.all(y > 0)
            assert abs(y.sum() - 1.0) <= 1e-9
            np.testing.assert_allclose(softmax(x + rng.normal() * 100), y, atol=1e-12)

    def test_maxpool_backward_mass_at_one_index(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            z = rng.integers(0, 4, size=int(rng.integers(1, 10))).astype(float)
            grad = maxpool_backward(z, 1.0)
            assert grad.sum() == 1.0
            assert np.count_nonzero(grad) == 1
            assert int(np.argmax(grad)) == int(np.argmax(z))
