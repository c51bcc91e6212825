"""Tests for the feed-forward classifier, its gradients, Adam/EMA and checkpoints"""

import math
from dataclasses import replace

import numpy as np
import pytest

from mixconf.errors import CheckpointFormatError, ConfigError, DimensionMismatchError, NonFiniteGradientError
from mixconf.tiny_net import (
    Activation,
    NetConfig,
    backward_and_step,
    compute_gradients,
    cross_entropy,
    ema_forward,
    forward,
    init_state,
    load_checkpoint,
    per_sample_loss,
    save_checkpoint,
)


def zeroed(state):
    return replace(
        state,
        weights=[np.zeros_like(w) for w in state.weights],
        biases=[np.zeros_like(b) for b in state.biases],
    )


def batch(seed=0, n=5, c=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    target = rng.dirichlet(np.ones(c), size=n)
    weights = rng.random(n)
    return x, target, weights


class TestNetConfig:
    def test_needs_two_layers(self):
        with pytest.raises(ConfigError):
            NetConfig((2,))

    def test_needs_two_classes(self):
        with pytest.raises(ConfigError):
            NetConfig((2, 4, 1))

    def test_ema_decay_range(self):
        with pytest.raises(ConfigError):
            NetConfig((2, 2), ema_decay=1.0)


class TestForward:
    def test_rows_sum_to_one(self, small_state, rng):
        probs = forward(small_state, rng.normal(size=(7, 2)))
        assert probs.shape == (7, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_zero_weights_give_uniform_rows(self, small_state, rng):
        probs = forward(zeroed(small_state), rng.normal(size=(4, 2)))
        np.testing.assert_allclose(probs, 1.0 / 3.0, atol=1e-15)

    def test_dimension_mismatch(self, small_state):
        with pytest.raises(DimensionMismatchError):
            forward(small_state, np.zeros((3, 5)))

    def test_ema_equals_live_after_init(self, small_state, rng):
        x = rng.normal(size=(6, 2))
        np.testing.assert_array_equal(ema_forward(small_state, x), forward(small_state, x))


class TestCrossEntropy:
    def test_perfect_prediction(self):
        one_hot = np.eye(4)[[1, 3]]
        np.testing.assert_allclose(cross_entropy(one_hot, one_hot), 0.0, atol=1e-15)

    def test_uniform_prediction_ten_classes(self):
        loss = cross_entropy(np.full((1, 10), 0.1), np.eye(10)[[4]])
        assert loss[0] == pytest.approx(math.log(10), abs=1e-12)

    def test_soft_target(self):
        loss = cross_entropy(np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]]))
        assert loss[0] == pytest.approx(math.log(2), abs=1e-12)

    def test_clamps_zero_probabilities(self):
        loss = cross_entropy(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        assert np.isfinite(loss[0])

    def test_per_sample_loss_matches_cross_entropy(self, small_state):
        x, target, _ = batch(1)
        np.testing.assert_allclose(per_sample_loss(small_state, x, target), cross_entropy(forward(small_state, x), target), rtol=1e-12)


class TestGradients:
    @staticmethod
    def numeric_gradient(state, x, target, w, param, eps=1e-5):
        grad = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            original = param[idx]
            param[idx] = original + eps
            plus = float(np.dot(w, per_sample_loss(state, x, target)))
            param[idx] = original - eps
            minus = float(np.dot(w, per_sample_loss(state, x, target)))
            param[idx] = original
            grad[idx] = (plus - minus) / (2 * eps)
        return grad

    @staticmethod
    def relative_error(analytic, numeric):
        # per element, floored where both sides vanish
        return np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_backprop_matches_finite_differences(self, seed):
        state = init_state(NetConfig((2, 8, 8, 3), Activation.TANH, seed=seed))
        x, target, w = batch(seed)
        _, weight_grads, bias_grads = compute_gradients(state, x, target, w)
        analytic = weight_grads + bias_grads
        for param, grad in zip(state.weights + state.biases, analytic):
            numeric = self.numeric_gradient(state, x, target, w, param)
            assert self.relative_error(grad, numeric).max() < 1e-4

    @pytest.mark.parametrize("seed", range(3))
    def test_relu_backprop_matches_finite_differences(self, seed):
        state = init_state(NetConfig((2, 8, 8, 3), Activation.RELU, seed=seed))
        x, target, w = batch(100 + seed)
        _, weight_grads, bias_grads = compute_gradients(state, x, target, w)
        for param, grad in zip(state.weights + state.biases, weight_grads + bias_grads):
            numeric = self.numeric_gradient(state, x, target, w, param)
            assert self.relative_error(grad, numeric).max() < 1e-4

    def test_weighted_loss_is_weighted_sum(self, small_state):
        x, target, w = batch(2)
        loss, _, _ = compute_gradients(small_state, x, target, w)
        assert loss == pytest.approx(float(np.dot(w, cross_entropy(forward(small_state, x), target))), abs=1e-12)

    def test_negative_weights_rejected(self, small_state):
        x, target, w = batch(3)
        with pytest.raises(DimensionMismatchError):
            compute_gradients(small_state, x, target, -w)


class TestBackwardAndStep:
    def test_zero_weights_leave_parameters(self, small_state):
        x, target, _ = batch(4)
        new_state, _ = backward_and_step(small_state, x, target, np.zeros(len(x)), 0.01)
        assert new_state.step == 1
        for before, after in zip(small_state.params, new_state.params):
            np.testing.assert_array_equal(before, after)
        for before, after in zip(small_state.ema_params, new_state.ema_params):
            np.testing.assert_allclose(before, after, rtol=1e-15, atol=1e-15)

    def test_step_decreases_loss_on_separable_pair(self):
        state = init_state(NetConfig((2, 8, 2), seed=0))
        x = np.array([[-1.0, 0.0], [1.0, 0.0]])
        target = np.eye(2)
        w = np.full(2, 0.5)
        before = float(np.dot(w, per_sample_loss(state, x, target)))
        state, reported = backward_and_step(state, x, target, w, 0.01)
        after = float(np.dot(w, per_sample_loss(state, x, target)))
        assert reported == pytest.approx(before)
        assert after < before

    def test_ema_decay_zero_tracks_live_parameters(self, rng):
        state = init_state(NetConfig((2, 8, 3), seed=1, ema_decay=0.0))
        x, target, w = batch(5)
        for _ in range(3):
            state, _ = backward_and_step(state, x, target, w, 0.05)
        probe = rng.normal(size=(4, 2))
        np.testing.assert_array_equal(ema_forward(state, probe), forward(state, probe))

    def test_ema_update_rule(self, small_state):
        x, target, w = batch(6)
        decay = small_state.config.ema_decay
        new_state, _ = backward_and_step(small_state, x, target, w, 0.01)
        for ema_old, live_new, ema_new in zip(small_state.ema_params, new_state.params, new_state.ema_params):
            np.testing.assert_allclose(ema_new, decay * ema_old + (1 - decay) * live_new, rtol=1e-14)

    def test_bit_identical_trajectories(self):
        x, target, w = batch(7)

        def run():
            state = init_state(NetConfig((2, 8, 8, 3), seed=9))
            for _ in range(5):
                state, _ = backward_and_step(state, x, target, w, 0.01)
            return state

        a, b = run(), run()
        for left, right in zip(a.params + a.ema_params, b.params + b.ema_params):
            np.testing.assert_array_equal(left, right)

    def test_non_finite_gradient_aborts(self, small_state):
        x, target, w = batch(8)
        x[0, 0] = np.nan
        with pytest.raises(NonFiniteGradientError):
            backward_and_step(small_state, x, target, w, 0.01)


class TestCheckpoint:
    def test_round_trip(self, small_state, tmp_path):
        x, target, w = batch(9)
        state, _ = backward_and_step(small_state, x, target, w, 0.01)
        path = save_checkpoint(state, tmp_path / "net.bin")
        restored = load_checkpoint(path)

        assert restored.config.layer_sizes == state.config.layer_sizes
        assert restored.config.activation is Activation.TANH
        assert restored.config.ema_decay == state.config.ema_decay
        for left, right in zip(state.params + state.ema_params, restored.params + restored.ema_params):
            np.testing.assert_array_equal(left, right)
        assert all(not m.any() for m in restored.adam_m)

    def test_header_layout(self, small_state, tmp_path):
        data = save_checkpoint(small_state, tmp_path / "net.bin").read_bytes()
        assert data[:4] == b"MXCF"
        n_params = sum(p.size for p in small_state.params)
        header = 4 + 4 * 3 + 4 * 4 + 8
        assert len(data) == header + 2 * 8 * n_params

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_truncated_payload(self, small_state, tmp_path):
        path = save_checkpoint(small_state, tmp_path / "net.bin")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)
