import unittest

import numpy as np

from rfbpnet.grad_check import check_layer_gradients, nudge_off_kinks
from rfbpnet.layers import (ACTIVATIONS, Activation, ActivationLayer, BatchNorm2d, Conv, Conv2d,
                            Flatten, LayerSpec, Linear, Sequential, SpatialBatchNorm)
from rfbpnet.utils import (ConfigurationError, DimensionError, NumericError, ParameterError,
                           StateError)

TOLERANCE = 1e-4


class LayerGradientTestCase(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(7)

    def assert_gradients(self, layer, x, train=True):
        report = check_layer_gradients(layer, x, self.rng, train=train)
        self.assertLess(report.max_rel_error, TOLERANCE, report.per_array)

    def test_conv2d_gradients(self):
        for stride, padding in ((1, 0), (2, 1), (1, 1)):
            layer = Conv2d('conv', 2, 3, 3, stride, padding, self.rng, np.float64)
            layer.bias.value[:] = self.rng.standard_normal(3)
            self.assert_gradients(layer, self.rng.standard_normal((2, 2, 6, 5)))

    def test_linear_gradients(self):
        layer = Linear('fc', 5, 4, self.rng, np.float64)
        self.assert_gradients(layer, self.rng.standard_normal((3, 5)))

    def test_batchnorm_gradients_train_and_eval(self):
        layer = BatchNorm2d('bn', 3, dtype=np.float64)
        layer.gamma.value[:] = self.rng.uniform(0.5, 1.5, 3)
        layer.beta.value[:] = self.rng.standard_normal(3)
        x = self.rng.standard_normal((4, 3, 3, 3))
        self.assert_gradients(layer, x, train=True)
        layer.running_var[:] = self.rng.uniform(0.5, 2.0, 3)
        self.assert_gradients(layer, x, train=False)

    def test_activation_gradients(self):
        for name in ACTIVATIONS:
            layer = ActivationLayer('act', name, dtype=np.float64)
            x = nudge_off_kinks(self.rng.standard_normal((3, 7)))
            self.assert_gradients(layer, x)

    def test_sequential_gradients(self):
        specs = [LayerSpec('conv2d', 2, 3, 3, 2, 1), LayerSpec('batchnorm2d', 3),
                 LayerSpec('activation', activation='tanh'), LayerSpec('flatten'),
                 LayerSpec('linear', 3 * 3 * 3, 4), LayerSpec('activation', activation='sigmoid')]
        stack, shape = Sequential.from_specs(specs, (2, 6, 6), 'seq', self.rng, np.float64)
        self.assertEqual(shape, (4,))
        self.assert_gradients(stack, self.rng.standard_normal((3, 2, 6, 6)))


class ConvTestCase(unittest.TestCase):
    def test_output_size(self):
        self.assertEqual(Conv.output_size(30, 3, 2, 1), 15)
        self.assertEqual(Conv.output_size(49, 3, 2, 1), 25)
        self.assertEqual(Conv.output_size(5, 3, 1, 0), 3)

    def test_single_channel_matches_direct_correlation(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1, 1, 4, 4))
        w = rng.standard_normal((1, 1, 3, 3))
        out, _ = Conv.forward(x, w, np.array([0.5]), 1, 0)
        expected = np.array([[(x[0, 0, i:i + 3, j:j + 3] * w[0, 0]).sum() + 0.5
                              for j in range(2)] for i in range(2)])
        np.testing.assert_allclose(out[0, 0], expected)

    def test_shared_weights_accumulate_gradients(self):
        rng = np.random.default_rng(2)
        layer = Linear('fc', 3, 2, rng, np.float64)
        x_a, x_b = rng.standard_normal((2, 3)), rng.standard_normal((2, 3))
        dout = np.ones((2, 2))
        _, cache_a = layer.forward(x_a)
        _, cache_b = layer.forward(x_b)
        layer.backward(dout, cache_a)
        layer.backward(dout, cache_b)
        np.testing.assert_allclose(layer.weight.grad, dout.T @ x_a + dout.T @ x_b)


class BatchNormTestCase(unittest.TestCase):
    def test_train_normalises_per_channel(self):
        rng = np.random.default_rng(3)
        x = rng.normal(5.0, 3.0, (8, 2, 4, 4))
        out, _ = SpatialBatchNorm.forward(x, np.ones(2), np.zeros(2), np.zeros(2), np.ones(2))
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0, atol=1e-7)
        np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1, atol=1e-3)

    def test_running_statistics_follow_momentum(self):
        x = np.arange(2 * 1 * 2 * 2, dtype=np.float64).reshape(2, 1, 2, 2)
        running_mean, running_var = np.zeros(1), np.ones(1)
        SpatialBatchNorm.forward(x, np.ones(1), np.zeros(1), running_mean, running_var,
                                 momentum=0.1)
        self.assertAlmostEqual(running_mean[0], 0.1 * x.mean())
        self.assertAlmostEqual(running_var[0], 0.9 + 0.1 * x.var())

    def test_train_mode_needs_two_samples(self):
        with self.assertRaises(ParameterError):
            SpatialBatchNorm.forward(np.ones((1, 1, 2, 2)), np.ones(1), np.zeros(1),
                                     np.zeros(1), np.ones(1))

    def test_eval_mode_accepts_single_sample(self):
        out, _ = SpatialBatchNorm.forward(np.full((1, 1, 2, 2), 3.0), np.ones(1), np.zeros(1),
                                          np.full(1, 3.0), np.ones(1), mode='eval')
        np.testing.assert_allclose(out, 0, atol=1e-6)

    def test_unknown_mode(self):
        with self.assertRaises(ConfigurationError):
            SpatialBatchNorm.forward(np.ones((2, 1, 2, 2)), np.ones(1), np.zeros(1),
                                     np.zeros(1), np.ones(1), mode='test')


class ActivationTestCase(unittest.TestCase):
    def test_values(self):
        x = np.array([-2.0, 0.0, 3.0])
        np.testing.assert_allclose(Activation.forward('relu', x)[0], [0, 0, 3])
        np.testing.assert_allclose(Activation.forward('sigmoid', x)[0][1], 0.5)
        np.testing.assert_allclose(Activation.forward('leaky_relu', x)[0], [-0.02, 0, 3])
        np.testing.assert_allclose(Activation.forward('elu', x)[0][0], np.expm1(-2.0))
        np.testing.assert_allclose(Activation.forward('softplus', x)[0][1], np.log(2.0))
        np.testing.assert_allclose(Activation.forward('prelu', x, np.array([0.25]))[0],
                                   [-0.5, 0, 3])
        np.testing.assert_allclose(Activation.forward('none', x)[0], x)

    def test_unknown_activation(self):
        with self.assertRaises(ConfigurationError):
            Activation.forward('swish', np.zeros(2))
        with self.assertRaises(ConfigurationError):
            ActivationLayer('act', 'swish')

    def test_prelu_needs_slope(self):
        with self.assertRaises(StateError):
            Activation.forward('prelu', np.zeros(2))


class LayerSpecTestCase(unittest.TestCase):
    def test_shapes(self):
        self.assertEqual(LayerSpec('conv2d', 2, 16, 3, 2, 1).output_shape((2, 30, 49)),
                         (16, 15, 25))
        self.assertEqual(LayerSpec('flatten').output_shape((4, 2, 2)), (16,))
        self.assertEqual(LayerSpec('linear', 16, 8).output_shape((16,)), (8,))

    def test_bad_geometry(self):
        with self.assertRaises(DimensionError):
            LayerSpec('conv2d', 3, 16).output_shape((2, 30, 49))
        with self.assertRaises(DimensionError):
            LayerSpec('conv2d', 1, 1, 5).output_shape((1, 2, 2))
        with self.assertRaises(DimensionError):
            LayerSpec('linear', 4, 2).output_shape((5,))
        with self.assertRaises(ConfigurationError):
            LayerSpec('pool').output_shape((1, 2, 2))


class SequentialTestCase(unittest.TestCase):
    def test_backward_without_cache(self):
        stack, _ = Sequential.from_specs([LayerSpec('linear', 2, 2)], (2,), 'seq',
                                         np.random.default_rng(0))
        with self.assertRaises(StateError):
            stack.backward(np.ones((1, 2)), None)
        with self.assertRaises(StateError):
            Flatten('flat').backward(np.ones((1, 2)), None)

    def test_non_finite_forward(self):
        stack, _ = Sequential.from_specs([LayerSpec('linear', 2, 2)], (2,), 'seq',
                                         np.random.default_rng(0))
        with self.assertRaises(NumericError):
            stack.forward(np.array([[np.nan, 1.0]]))

    def test_cast(self):
        stack, _ = Sequential.from_specs([LayerSpec('linear', 2, 2)], (2,), 'seq',
                                         np.random.default_rng(0))
        stack.cast_(np.float64)
        for param in stack.parameters():
            self.assertEqual(param.value.dtype, np.float64)
            self.assertEqual(param.grad.dtype, np.float64)
