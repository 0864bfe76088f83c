import unittest
import math
import sys
import os

import numpy as np

# Add path
sys.path.append(os.getcwd())

from solenoid.core.charge import ScalarAtomicMeasure, pair_with_field, total_variation
from solenoid.core.curves import Curve, CurveEnsemble, curve_action, curve_actions, ensemble_action
from solenoid.core.decompose import DecomposeParams, weighted_standard_error
from solenoid.core.errors import InvalidParameterError, UncertifiedPairError
from solenoid.core.fields import TestField, make_panel
from solenoid.core.flow import FlowConfig
from solenoid.core.lift import (DivergencePair, LiftParams, build_lift, classify_clip_project,
                                decompose_with_divergence, lifted_panel, project_ensemble,
                                slab_restricted_action, verify_lift_divergence)
from solenoid.harness.scenarios import Scenario, bounding_box, generate


def _lift_params(n_curves=400, slab=0.1):
    inner = DecomposeParams(0.05, n_curves, FlowConfig(1.0, 0.005, 101), seed=2)
    return LiftParams(1.0, 32, slab, inner)


class TestDivergencePair(unittest.TestCase):

    def setUp(self):
        self.mu, self.sigma = generate(Scenario("segment", atoms=64))
        self.panel = make_panel(7, 4, 6, bounding_box(self.mu, self.sigma))

    def test_segment_certifies(self):
        pair = DivergencePair.certify(self.mu, self.sigma, self.panel)
        self.assertTrue(pair.certified)
        self.assertLess(pair.certification, 1e-3)

    def test_wrong_divergence_rejected(self):
        flipped = ScalarAtomicMeasure(self.sigma.positions, -self.sigma.masses)
        pair = DivergencePair.certify(self.mu, flipped, self.panel, threshold=1e-3)
        self.assertFalse(pair.certified)
        with self.assertRaises(UncertifiedPairError):
            build_lift(pair, _lift_params())

    def test_lift_structure(self):
        pair = DivergencePair.certify(self.mu, self.sigma, self.panel)
        lifted = build_lift(pair, _lift_params())
        self.assertEqual(lifted.dim, 3)
        self.assertEqual(len(lifted), 2 * 64 + 2 * 32)
        expected = 2.0 * total_variation(self.mu) + 1.0 * self.sigma.total_variation()
        self.assertAlmostEqual(total_variation(lifted), expected, places=12)

    def test_lift_is_divergence_free(self):
        pair = DivergencePair.certify(self.mu, self.sigma, self.panel)
        p = _lift_params()
        panel = lifted_panel(self.panel, p.ell)
        self.assertEqual(panel.dim, 3)
        self.assertEqual(panel.box.hi[-1], 1.0)
        self.assertLessEqual(verify_lift_divergence(build_lift(pair, p), panel), pair.certification + 1e-3)


class TestLiftParams(unittest.TestCase):

    def test_invalid(self):
        inner = DecomposeParams(0.05, 10, FlowConfig(1.0, 0.01))
        with self.assertRaises(InvalidParameterError):
            LiftParams(1.0, 3, 0.1, inner)
        with self.assertRaises(InvalidParameterError):
            LiftParams(1.0, 16, 0.25, inner)
        with self.assertRaises(InvalidParameterError):
            LiftParams(2.0, 16, 0.1, inner)


class TestClipProject(unittest.TestCase):

    def setUp(self):
        self.p = LiftParams(4.0, 16, 0.1, DecomposeParams(0.05, 10, FlowConfig(4.0, 0.5)))
        heights = [0.5, 0.05, 0.3, -0.02, 0.6]
        xs = [0.0, 0.1, 0.2, 0.3, 0.4]
        self.visiting = Curve(4.0, np.column_stack([xs, np.zeros(5), heights]))
        self.floating = Curve(4.0, np.column_stack([xs, np.zeros(5), np.full(5, 0.5)]))

    def test_clip_to_first_and_last_visit(self):
        projected = classify_clip_project(self.visiting, self.p)
        self.assertEqual(projected.dim, 2)
        np.testing.assert_array_equal(projected.points[:, 0], [0.1, 0.1, 0.2, 0.3, 0.3])
        self.assertEqual(projected.ell, 4.0)

    def test_never_visits(self):
        self.assertIsNone(classify_clip_project(self.floating, self.p))

    def test_curve_below_plane_is_kept(self):
        sunk = Curve(4.0, np.column_stack([[0.0, 0.1, 0.2, 0.3, 0.4], np.zeros(5), np.full(5, -0.2)]))
        projected = classify_clip_project(sunk, self.p)
        self.assertIsNotNone(projected)
        np.testing.assert_array_equal(projected.points, sunk.points[:, :2])
        phi = TestField.windowed_constant([1.0, 0.0], [0.0, 0.0], 1.0)
        nu_plus = CurveEnsemble.from_curves([sunk], [1.0], dim=3)
        self.assertAlmostEqual(slab_restricted_action(nu_plus, phi, 0.1),
                               curve_action(Curve(4.0, sunk.points[:, :2]), phi), places=14)

    def test_project_ensemble_weights(self):
        nu_plus = CurveEnsemble.from_curves([self.visiting, self.floating], [0.75, 0.5], dim=3)
        nu, discarded = project_ensemble(nu_plus, self.p)
        self.assertEqual(len(nu), 1)
        self.assertEqual(discarded, 0.5)
        self.assertEqual(float(nu.weights[0]), 0.75)

    def test_slab_restricted_action(self):
        phi = TestField.windowed_constant([1.0, 0.0], [0.0, 0.0], 1.0)
        flat = Curve(4.0, np.column_stack([[0.0, 0.1, 0.2, 0.3, 0.4], np.zeros(5), np.zeros(5)]))
        nu_plus = CurveEnsemble.from_curves([flat, self.floating], [2.0, 1.0], dim=3)
        base = Curve(4.0, flat.points[:, :2])
        self.assertAlmostEqual(slab_restricted_action(nu_plus, phi, 0.1), 2.0 * curve_action(base, phi),
                               places=14)


class TestDecomposeWithDivergence(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mu, cls.sigma = generate(Scenario("segment", atoms=64))
        cls.panel = make_panel(7, 4, 4, bounding_box(cls.mu, cls.sigma))
        cls.pair = DivergencePair.certify(cls.mu, cls.sigma, cls.panel)
        cls.nu, cls.report = decompose_with_divergence(cls.pair, _lift_params(), cls.panel)

    def test_mass_accounting(self):
        self.assertLessEqual(self.report.mass_accounting_error, 1e-12)
        self.assertEqual(self.report.kept_curves, len(self.nu))
        self.assertGreater(len(self.nu), 0)

    def test_projected_curves_are_lipschitz(self):
        self.assertEqual(self.nu.dim, 2)
        steps = np.linalg.norm(np.diff(self.nu.paths, axis=1), axis=2)
        self.assertLessEqual(float(steps.max()), self.nu.ell / self.nu.m * (1 + 1e-9))

    def test_aligned_field_reconstruction(self):
        start, end = np.array([0.0, 0.0]), np.array([1.0, 0.0])
        aligned = TestField.windowed_constant(end - start, 0.5 * (start + end), 0.5).normalized()
        target = pair_with_field(self.mu, aligned)
        gap = abs(ensemble_action(self.nu, aligned) - target)
        se = weighted_standard_error(self.nu.weights, curve_actions(self.nu, aligned))
        self.assertLessEqual(gap, 0.1 * abs(target) + 4 * se)

    def test_vertical_speed(self):
        """Lifted curves climb over the sink of the segment and descend over its source."""
        v = self.report.vertical
        self.assertGreater(v.plus_count, 0)
        self.assertGreater(v.minus_count, 0)
        self.assertGreater(v.plus_mean, 0.5)
        self.assertLess(v.minus_mean, -0.5)

    def test_report_fields(self):
        data = self.report.to_dict()
        self.assertEqual(len(data["reconstruction"]), 4)
        self.assertEqual(len(data["divergence"]), 4)
        self.assertEqual(data["params"]["column_atoms"], 32)
        self.assertLessEqual(data["lift_divergence"], self.pair.certification + 1e-3)

    def test_zero_charge_limit(self):
        """mu = 0 with a dipole divergence: lifted curves are vertical, the projection carries nothing."""
        null = DivergencePair.certify(self.mu.scaled(0.0), self.sigma, self.panel, threshold=math.inf)
        nu, report = decompose_with_divergence(null, _lift_params(n_curves=100), self.panel)
        self.assertLessEqual(report.mass_accounting_error, 1e-12)
        for err in report.reconstruction:
            self.assertEqual(err.ensemble, 0.0)
            self.assertEqual(err.gap, 0.0)


if __name__ == '__main__':
    unittest.main()
