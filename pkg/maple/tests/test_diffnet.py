import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from maple.diffnet import (
    Adam, AdamState, Network, adam_step, categorical_entropy, load_arrays, log_softmax, polyak_update,
    sample_categorical, save_arrays, softmax, split_gaussian, tanh_gaussian_logprob, tanh_gaussian_sample,
)
from maple.gradcheck import network_suite
from maple.pamdp import ContractViolation


class NetworkTests(SimpleTestCase):

    def test_zero_weights_give_zero_output(self):
        net = Network([3, 4, 2])
        for p in net.params:
            p[...] = 0.0
        np.testing.assert_array_equal(net(np.ones((5, 3))), np.zeros((5, 2)))

    def test_single_identity_layer(self):
        net = Network.from_params([np.eye(3)], [np.zeros(3)])
        x = np.array([0.5, -2.0, 3.0])
        np.testing.assert_array_equal(net(x), x)

    def test_matches_manual_forward(self):
        rng = np.random.default_rng(1)
        net = Network([4, 8, 2], rng)
        x = rng.standard_normal((6, 4))
        hidden = np.maximum(x @ net.weights[0] + net.biases[0], 0.0)
        expected = hidden @ net.weights[1] + net.biases[1]
        np.testing.assert_allclose(net(x), expected, atol=1e-12)

    def test_input_width_is_checked(self):
        with self.assertRaises(ContractViolation):
            Network([4, 8, 2])(np.zeros((2, 3)))

    def test_single_linear_neuron_gradient(self):
        w, b, x, y = 0.7, -0.2, 1.5, 0.4
        net = Network.from_params([np.array([[w]])], [np.array([b])])
        out, tape = net.forward(np.array([[x]]))
        grads, dx = net.backward(tape, 2.0 * (out - y))
        residual = w * x + b - y
        self.assertAlmostEqual(grads[0][0, 0], 2.0 * residual * x, places=12)
        self.assertAlmostEqual(grads[1][0], 2.0 * residual, places=12)
        self.assertAlmostEqual(dx[0, 0], 2.0 * residual * w, places=12)

    def test_constant_loss_has_zero_gradient(self):
        net = Network([3, 5, 2], np.random.default_rng(2))
        _, tape = net.forward(np.ones((4, 3)))
        grads, _ = net.backward(tape, np.zeros((4, 2)))
        for g in grads:
            self.assertFalse(np.any(g))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        for _ in range(3):
            result = network_suite(rng)
            self.assertTrue(result.passed, str(result))

    def test_copy_is_independent(self):
        net = Network([2, 3, 1], np.random.default_rng(4))
        clone = net.copy()
        clone.weights[0][0, 0] += 1.0
        self.assertNotEqual(net.weights[0][0, 0], clone.weights[0][0, 0])


class AdamTests(SimpleTestCase):

    def test_first_step_moves_by_learning_rate(self):
        lr = 3e-4
        p = np.array([0.5, -1.0])
        state = AdamState.zeros_like([p])
        (updated,) = adam_step([p], [np.array([2.0, -0.1])], state, lr)
        np.testing.assert_allclose(updated - p, [-lr, lr], rtol=1e-6)

    def test_zero_gradient_leaves_parameters(self):
        p = np.array([0.5, -1.0])
        state = AdamState.zeros_like([p])
        (updated,) = adam_step([p], [np.zeros(2)], state, 1e-3)
        np.testing.assert_array_equal(updated, p)

    def test_repeated_unit_gradient(self):
        lr = 1e-3
        p = np.zeros(1)
        state = AdamState.zeros_like([p])
        (first,) = adam_step([p], [np.ones(1)], state, lr)
        (second,) = adam_step([first], [np.ones(1)], state, lr)
        self.assertAlmostEqual((second - first)[0], -lr, delta=1e-6 * lr)

    def test_in_place_optimizer(self):
        p = np.ones(3)
        optimizer = Adam([p], 0.1)
        optimizer.step([np.ones(3)])
        np.testing.assert_allclose(p, 0.9 * np.ones(3), rtol=1e-6)
        self.assertEqual(optimizer.state.t, 1)

    def test_mismatched_gradients(self):
        state = AdamState.zeros_like([np.zeros(2)])
        with self.assertRaises(ContractViolation):
            adam_step([np.zeros(2)], [np.zeros(3)], state, 0.1)


class PolyakTests(SimpleTestCase):

    def test_exact_average(self):
        rng = np.random.default_rng(5)
        target, online = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
        tau = 1e-3
        expected = (1.0 - tau) * target + tau * online
        polyak_update([target], [online], tau)
        np.testing.assert_array_equal(target, expected)

    def test_tau_one_copies(self):
        target, online = np.zeros(3), np.arange(3.0)
        polyak_update([target], [online], 1.0)
        np.testing.assert_array_equal(target, online)


class TanhGaussianTests(SimpleTestCase):

    def test_density_at_origin(self):
        logp = tanh_gaussian_logprob(np.zeros(1), np.zeros(1), np.zeros(1))
        self.assertAlmostEqual(float(logp), -0.5 * math.log(2.0 * math.pi), places=12)
        self.assertAlmostEqual(float(logp), -0.91894, places=5)

    def test_symmetry(self):
        a = tanh_gaussian_logprob(np.array([0.3]), np.array([-0.2]), np.array([0.4]))
        b = tanh_gaussian_logprob(np.array([-0.3]), np.array([-0.2]), np.array([-0.4]))
        self.assertAlmostEqual(float(a), float(b), places=12)

    def test_density_integrates_to_one(self):
        n = 200_000
        edges = np.linspace(-1.0, 1.0, n + 1)
        x = 0.5 * (edges[:-1] + edges[1:])
        logp = tanh_gaussian_logprob(np.full((n, 1), 0.3), np.full((n, 1), -0.5), x[:, None])
        self.assertAlmostEqual(float(np.sum(np.exp(logp)) * (2.0 / n)), 1.0, delta=1e-3)

    def test_outside_support(self):
        with self.assertRaises(ContractViolation):
            tanh_gaussian_logprob(np.zeros(1), np.zeros(1), np.ones(1))

    def test_sample_agrees_with_density(self):
        rng = np.random.default_rng(6)
        mean, log_std = rng.standard_normal((5, 3)), rng.uniform(-1.0, 0.5, (5, 3))
        x, logp = tanh_gaussian_sample(mean, log_std, rng.standard_normal((5, 3)))
        np.testing.assert_allclose(logp, tanh_gaussian_logprob(mean, log_std, x), atol=1e-8)

    def test_log_std_is_clamped(self):
        raw = np.array([[0.1, 0.2, -30.0, 5.0]])
        mean, log_std, mask = split_gaussian(raw, 2)
        np.testing.assert_array_equal(mean, [[0.1, 0.2]])
        np.testing.assert_array_equal(log_std, [[-20.0, 2.0]])
        np.testing.assert_array_equal(mask, [[0.0, 0.0]])


class CategoricalTests(SimpleTestCase):

    def test_probabilities(self):
        logits = np.array([[1.0, 2.0, -3.0], [1000.0, 0.0, 0.0]])
        probs = softmax(logits)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        self.assertTrue(np.all(np.isfinite(log_softmax(logits))))

    def test_uniform_entropy(self):
        self.assertAlmostEqual(float(categorical_entropy(np.zeros(5))), math.log(5), places=12)

    def test_sampling_frequencies(self):
        rng = np.random.default_rng(8)
        probs = np.full((10_000, 5), 0.2)
        counts = np.bincount(sample_categorical(probs, rng.random(10_000)), minlength=5) / 10_000
        np.testing.assert_allclose(counts, 0.2, atol=0.02)


class CheckpointTests(SimpleTestCase):

    def test_arrays_survive_bit_for_bit(self):
        rng = np.random.default_rng(9)
        arrays = {'W0': rng.standard_normal((3, 4)), 'b0': rng.standard_normal(4), 'alpha': np.array([np.pi])}
        with tempfile.TemporaryDirectory() as tmp:
            path = save_arrays(Path(tmp) / 'net.ckpt', arrays, {'env_steps': 12})
            loaded, meta = load_arrays(path)
        self.assertEqual(meta, {'env_steps': 12})
        self.assertEqual(list(loaded), list(arrays))
        for name, array in arrays.items():
            self.assertTrue(np.array_equal(loaded[name], array), name)

    def test_foreign_file_is_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'notes.txt'
            path.write_text('{"format": "other"}\n')
            with self.assertRaises(ContractViolation):
                load_arrays(path)
