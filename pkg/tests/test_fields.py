import unittest
import sys
import os

import numpy as np

# Add path
sys.path.append(os.getcwd())

from solenoid.core.errors import DimensionMismatchError, InvalidParameterError
from solenoid.core.fields import (SAFETY_FACTOR, Box, GradientField, TestField, TestFunction, eval_function,
                                  eval_gradient, make_panel, panel_from_spec)


def _grid(center, reach, n=401):
    axis_x = np.linspace(center[0] - reach, center[0] + reach, n)
    axis_y = np.linspace(center[1] - reach, center[1] + reach, n)
    return np.stack(np.meshgrid(axis_x, axis_y, indexing="ij"), axis=-1).reshape(-1, 2)


class TestTestFunction(unittest.TestCase):

    def setUp(self):
        self.psi = TestFunction([0.2, -0.1], 0.8, [0.7, -1.2, 0.4])

    def test_bump_peak(self):
        bump = TestFunction.bump([1.0, 2.0], 0.5)
        self.assertEqual(float(eval_function(bump, [1.0, 2.0])), 1.0)
        self.assertEqual(bump.supremum(), 1.0)
        np.testing.assert_array_equal(eval_gradient(bump, [1.0, 2.0]), [0.0, 0.0])

    def test_linear_slope(self):
        lin = TestFunction.linear([0.0, 0.0], 2.0, [0.3, -0.4])
        np.testing.assert_allclose(lin.gradient([0.0, 0.0]), [0.3, -0.4], rtol=1e-14)

    def test_gradient_matches_finite_differences(self):
        x = np.array([0.5, 0.3])
        h = 1e-6
        fd = [(float(self.psi.value(x + h * e)) - float(self.psi.value(x - h * e))) / (2 * h)
              for e in np.eye(2)]
        np.testing.assert_allclose(self.psi.gradient(x), fd, atol=1e-7)

    def test_supremum_is_tight(self):
        sampled = float(np.abs(self.psi.value(_grid(self.psi.center, 5.0))).max())
        sup = self.psi.supremum()
        self.assertGreaterEqual(sup, sampled - 1e-12)
        self.assertLess(sup - sampled, 5e-3)

    def test_gradient_bound_dominates(self):
        sampled = float(np.linalg.norm(self.psi.gradient(_grid(self.psi.center, 5.0)), axis=1).max())
        self.assertGreaterEqual(self.psi.gradient_bound(), sampled)

    def test_normalized(self):
        self.assertAlmostEqual(self.psi.normalized().supremum(), 1.0 / SAFETY_FACTOR, places=12)

    def test_invalid(self):
        with self.assertRaises(DimensionMismatchError):
            TestFunction([0.0, 0.0], 1.0, [1.0, 0.0])
        with self.assertRaises(InvalidParameterError):
            TestFunction([0.0, 0.0], 0.0, [1.0, 0.0, 0.0])
        with self.assertRaises(DimensionMismatchError):
            self.psi.value([0.0, 0.0, 0.0])


class TestVectorFields(unittest.TestCase):

    def test_windowed_constant(self):
        phi = TestField.windowed_constant([0.6, 0.8], [1.0, 1.0], 0.5)
        np.testing.assert_allclose(phi.value([1.0, 1.0]), [0.6, 0.8], rtol=1e-15)
        self.assertEqual(phi.value(np.zeros((7, 2))).shape, (7, 2))

    def test_normalized_field_bounded(self):
        rng = np.random.default_rng(1)
        comps = [TestFunction([0.0, 0.0], 0.7, rng.standard_normal(3)) for _ in range(2)]
        phi = TestField(comps).normalized()
        norms = np.linalg.norm(phi.value(_grid([0.0, 0.0], 4.0)), axis=1)
        self.assertLessEqual(float(norms.max()), 1.0)

    def test_component_count(self):
        with self.assertRaises(DimensionMismatchError):
            TestField([TestFunction.bump([0.0, 0.0], 1.0)])

    def test_gradient_field(self):
        psi = TestFunction.bump([0.0, 0.0], 1.0)
        field = GradientField(psi)
        self.assertEqual(field.dim, 2)
        np.testing.assert_array_equal(field.value([0.5, 0.5]), psi.gradient([0.5, 0.5]))


class TestPanel(unittest.TestCase):

    def setUp(self):
        self.box = Box([-1.0, -1.0], [1.0, 2.0])

    def test_reproducible(self):
        a = make_panel(7, 3, 4, self.box)
        b = make_panel(7, 3, 4, self.box)
        for fa, fb in zip(a.functions, b.functions):
            np.testing.assert_array_equal(fa.coeffs, fb.coeffs)
            self.assertEqual(fa.scale, fb.scale)
        c = make_panel(8, 3, 4, self.box)
        self.assertFalse(np.array_equal(a.functions[0].center, c.functions[0].center))

    def test_spec_round_trip(self):
        panel = make_panel(11, 2, 2, self.box)
        again = panel_from_spec(panel.spec())
        x = np.array([[0.1, 0.2], [0.5, -0.3]])
        for fa, fb in zip(panel.fields, again.fields):
            np.testing.assert_array_equal(fa.value(x), fb.value(x))

    def test_panel_functions_normalized(self):
        panel = make_panel(3, 1, 5, self.box)
        for psi in panel.functions:
            self.assertLessEqual(psi.supremum(), 1.0)

    def test_invalid_counts_and_box(self):
        with self.assertRaises(InvalidParameterError):
            make_panel(0, 0, 1, self.box)
        with self.assertRaises(InvalidParameterError):
            Box([0.0, 0.0], [1.0, 0.0])


if __name__ == '__main__':
    unittest.main()
