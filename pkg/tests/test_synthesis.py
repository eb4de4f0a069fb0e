import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.behavioral import ExtendedStateLayout
from src.consistency import EXACT_VERTICES, SystemMatrixSet, build_consistency_model, system_matrix_vertices
from src.errors import DimensionError, SynthesisError
from src.geometry import contains, equal_sets
from src.synthesis import (CERTIFIED, DATA_DRIVEN, FALLBACK, NOT_CERTIFIED, VIOLATED, IossCertificate,
                           TerminalIngredients, VertexDynamics, data_driven_gain, ioss_constants,
                           lower_cost_bound, rasie_check, shift_template, stability_matrix,
                           state_constraint_set, synthesize_ingredients, terminal_decrease, terminal_set,
                           terminal_weight, upper_cost_bound, vertex_dynamics)
from tests.support import (DCDC_GAIN, DCDC_PHI, DCDC_PSI, EXAMPLE_PHI, EXAMPLE_PSI, box, random_arx,
                           simulate_trajectory)

# y_k = 0.5 y_{k-1} + d_k, the input enters only through the extended state
DECAY_SYSTEM = np.array([[0.0, 0.5, 0.0]])


def single_vertex(V) -> SystemMatrixSet:
    return SystemMatrixSet([np.atleast_2d(V)], EXACT_VERTICES, np.atleast_2d(V))


def scalar_dynamics(a: float) -> VertexDynamics:
    return VertexDynamics([np.array([[a]])], [np.array([[1.0]])], np.array([[1.0]]))


class TestExtendedStateDynamics(unittest.TestCase):

    def test_shift_template_shapes(self):
        A_bar, B_bar, E = shift_template(ExtendedStateLayout(m=1, p=2, t_ini=1))
        self.assertEqual((A_bar.shape, B_bar.shape), ((1, 3), (1, 1)))
        assert_allclose(B_bar, [[1.0]])
        assert_allclose(E, [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def test_vertex_dynamics_reproduce_the_window_shift(self):
        rng = np.random.default_rng(0)
        for m, p, t_ini in ((1, 1, 2), (2, 1, 3), (1, 2, 2)):
            layout = ExtendedStateLayout(m, p, t_ini)
            phi, psi = random_arx(rng, m, p, t_ini)
            dyn = vertex_dynamics(single_vertex(np.hstack([phi, psi])), layout)
            xi, u, d = rng.normal(size=layout.n_xi), rng.normal(size=m), rng.normal(size=p)
            y = phi @ xi + psi @ u + d
            assert_allclose(dyn.A_tilde[0] @ xi + dyn.B_tilde[0] @ u + dyn.E_tilde @ d,
                            layout.shift(xi, u, y), atol=1e-12)

    def test_converter_gain_stabilizes_the_true_plant(self):
        dyn = vertex_dynamics(single_vertex(np.hstack([DCDC_PHI, DCDC_PSI])), ExtendedStateLayout(1, 2, 1))
        self.assertLess(max(dyn.spectral_radii(DCDC_GAIN)), 1.0)
        self.assertGreater(max(dyn.spectral_radii(np.zeros((1, 3)))), 1.0)

    def test_vertex_shape_check(self):
        with self.assertRaises(DimensionError):
            vertex_dynamics(single_vertex(np.zeros((1, 2))), ExtendedStateLayout(1, 1, 1))


class TestGainSynthesis(unittest.TestCase):

    def test_noise_free_data_gives_stabilizing_gain(self):
        traj = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 55, 0.2, 0.0, seed=1)
        cm = build_consistency_model(traj, box(0.1, 0.05), prune=False)
        sysset = single_vertex(np.hstack([DCDC_PHI, DCDC_PSI]))
        result = data_driven_gain(traj, cm, sysset)
        self.assertEqual(result.provenance, DATA_DRIVEN)
        self.assertTrue(result.stabilizing)

    def test_uncontrollable_unstable_mode(self):
        traj = simulate_trajectory(EXAMPLE_PHI, EXAMPLE_PSI, 1, 30, 0.3, 0.1, seed=2)
        cm = build_consistency_model(traj, box(0.1), prune=False)
        sysset = single_vertex([[0.0, 2.0, 0.0]])
        with self.assertRaises(SynthesisError):
            data_driven_gain(traj, cm, sysset)
        result = data_driven_gain(traj, cm, sysset, fallback=np.zeros((1, 2)))
        self.assertEqual(result.provenance, FALLBACK)
        self.assertFalse(result.stabilizing)


class TestTerminalWeight(unittest.TestCase):

    def test_scalar_terminal_weight(self):
        dyn = scalar_dynamics(0.5)
        P = terminal_weight(np.zeros((1, 1)), np.eye(1), np.eye(1), dyn)
        self.assertAlmostEqual(float(P[0, 0]), 1.0 / 3.0, delta=1e-3)
        self.assertLess(max(terminal_decrease(np.zeros((1, 1)), P, np.eye(1), np.eye(1), dyn)), 1e-6)

    def test_decrease_condition_rejects_small_weight(self):
        dyn = scalar_dynamics(0.5)
        self.assertGreater(max(terminal_decrease(np.zeros((1, 1)), np.array([[0.1]]), np.eye(1), np.eye(1), dyn)), 0.0)

    def test_unstable_closed_loop_has_no_weight(self):
        with self.assertRaises(SynthesisError):
            terminal_weight(np.zeros((1, 1)), np.eye(1), np.eye(1), scalar_dynamics(1.5))


class TestTerminalSet(unittest.TestCase):

    def test_state_constraint_set(self):
        X = state_constraint_set(box(0.3), box(1.0, 2.0), 2)
        self.assertTrue(equal_sets(X, box(0.3, 0.3, 1.0, 2.0, 1.0, 2.0)))

    def test_decaying_output_keeps_the_full_box(self):
        layout = ExtendedStateLayout(1, 1, 1)
        dyn = vertex_dynamics(single_vertex(DECAY_SYSTEM), layout)
        result = terminal_set(np.zeros((1, 2)), dyn, box(0.1), box(0.3), box(1.0), 1)
        self.assertTrue(result.converged)
        self.assertTrue(equal_sets(result.polytope, box(0.3, 1.0)))


class TestCertificates(unittest.TestCase):

    def setUp(self):
        self.layout = ExtendedStateLayout(1, 1, 1)
        self.sysset = single_vertex(DECAY_SYSTEM)
        self.dyn = vertex_dynamics(self.sysset, self.layout)

    def test_ioss_constants(self):
        certificate = ioss_constants(self.dyn, self.sysset, np.eye(1), np.eye(1))
        self.assertTrue(certificate.certified)
        self.assertGreater(certificate.c_u, 0.0)
        self.assertGreater(np.linalg.eigvalsh(certificate.P_W).min(), 0.0)

    def test_lower_cost_bound_is_positive_semidefinite(self):
        P_l = lower_cost_bound(single_vertex(np.hstack([DCDC_PHI, DCDC_PSI])), ExtendedStateLayout(1, 2, 1),
                               np.diag([1.0, 100.0]), np.eye(1))
        assert_allclose(P_l, P_l.T)
        self.assertGreaterEqual(np.linalg.eigvalsh(P_l).min(), -1e-8)

    def test_upper_cost_bound_envelope(self):
        rng = np.random.default_rng(3)
        points = rng.uniform(-1.0, 1.0, size=(20, 2))
        P_u, c = upper_cost_bound(lambda x: 2.0 * x @ x + 1.0, points)
        self.assertAlmostEqual(c, 1.0)
        for x in points:
            self.assertGreaterEqual(x @ P_u @ x, 2.0 * x @ x - 1e-6)

    def test_upper_cost_bound_failures(self):
        with self.assertRaises(SynthesisError):
            upper_cost_bound(lambda x: None, np.ones((3, 2)))
        with self.assertRaises(SynthesisError):
            upper_cost_bound(lambda x: 0.0 if not np.any(x) else None, np.ones((3, 2)))

    def test_stability_check(self):
        certificate = IossCertificate(np.eye(2), c_u=1.0, c_y=10.0, c_d=1.0)
        Q, R = np.eye(1), np.eye(1)
        P_l, P_u = np.zeros((2, 2)), 100.0 * np.eye(2)
        report = rasie_check(0.0, np.zeros((1, 2)), np.eye(2), Q, R, P_l, P_u, certificate, self.dyn)
        self.assertEqual(report.status, CERTIFIED)
        self.assertTrue(report.vertex_only)
        base = stability_matrix(0.0, self.dyn.A_tilde[0], self.dyn.B_tilde[0], Q, R, P_l, P_u, certificate)
        assert_allclose(np.diag(base), [0.05, 0.05, 0.9])
        report = rasie_check(0.999, np.zeros((1, 2)), np.eye(2), Q, R, P_l, P_u, certificate, self.dyn)
        self.assertEqual(report.status, VIOLATED)
        self.assertEqual(rasie_check(0.0, np.zeros((1, 2)), np.eye(2), Q, R, P_l, P_u, None, self.dyn).status,
                         NOT_CERTIFIED)
        with self.assertRaises(DimensionError):
            rasie_check(1.0, np.zeros((1, 2)), np.eye(2), Q, R, P_l, P_u, certificate, self.dyn)


class TestIngredients(unittest.TestCase):

    def test_data_driven_ingredients(self):
        traj = simulate_trajectory(DECAY_SYSTEM[:, :2], DECAY_SYSTEM[:, 2:], 1, 40, 0.3, 0.05, seed=4)
        cm = build_consistency_model(traj, box(0.05))
        sysset = system_matrix_vertices(cm)
        ingredients = synthesize_ingredients(traj, cm, sysset, np.eye(1), np.eye(1), box(0.05), box(0.3), box(1.0))
        self.assertEqual(ingredients.provenance, {"K": DATA_DRIVEN, "P": DATA_DRIVEN})
        self.assertLess(max(ingredients.certificates["terminal_decrease"]), 0.0)
        self.assertTrue(ingredients.certificates["terminal_set_converged"])
        self.assertTrue(contains(ingredients.X_N, np.zeros(2)))
        restored = TerminalIngredients.from_dict(ingredients.to_dict())
        assert_allclose(restored.K, ingredients.K)
        self.assertTrue(equal_sets(restored.X_N, ingredients.X_N))

    def test_supplied_gain_must_stabilize(self):
        traj = simulate_trajectory(DECAY_SYSTEM[:, :2], DECAY_SYSTEM[:, 2:], 1, 40, 0.3, 0.05, seed=4)
        cm = build_consistency_model(traj, box(0.05))
        sysset = system_matrix_vertices(cm)
        with self.assertRaises(SynthesisError):
            synthesize_ingredients(traj, cm, sysset, np.eye(1), np.eye(1), box(0.05), box(0.3), box(1.0),
                                   gain=np.array([[2.0, 0.0]]), inject_supplied=True)


if __name__ == '__main__':
    unittest.main()
