import unittest

import numpy as np

from rfbpnet.grad_check import (nudge_off_kinks, numeric_grad_check, numerical_gradient,
                                relative_error)


class GradCheckTestCase(unittest.TestCase):
    def test_numerical_gradient_of_cubic(self):
        x = np.array([1.0, -2.0, 0.5])
        grad = numerical_gradient(lambda: float((x ** 3).sum()), x)
        np.testing.assert_allclose(grad, 3 * x ** 2, rtol=1e-8)
        np.testing.assert_array_equal(x, [1.0, -2.0, 0.5])

    def test_wrong_gradient_is_reported(self):
        x = np.array([1.0, 2.0])
        report = numeric_grad_check(lambda: float((x ** 2).sum()), {'x': x}, {'x': 3 * x})
        self.assertGreater(report.max_rel_error, 0.1)
        self.assertIn('x', report.per_array)

    def test_relative_error(self):
        self.assertEqual(relative_error(np.zeros(3), np.zeros(3)), 0.0)
        self.assertAlmostEqual(relative_error(np.array([1.0]), np.array([1.1])), 0.1 / 1.1)
        self.assertEqual(relative_error(np.zeros(0), np.zeros(0)), 0.0)

    def test_nudge_off_kinks(self):
        x = np.array([0.0, 1e-5, -1e-4, 0.5])
        nudge_off_kinks(x)
        np.testing.assert_array_equal(x, [1e-3, 1e-3, -1e-3, 0.5])
