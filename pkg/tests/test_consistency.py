import unittest
from types import SimpleNamespace

import numpy as np
from numpy.testing import assert_allclose

from src.consistency import (BOX_HULL, EXACT_VERTICES, ConsistencyModel, add_prior_knowledge,
                             apply_prior_knowledge, build_consistency_model, check_consistency,
                             data_matrices, equality_knowledge, implied_system,
                             implied_system_from_data, is_consistent, reconstruct_disturbance,
                             system_matrix_vertices)
from src.errors import DimensionError, PriorKnowledgeError, RankDeficiencyError
from src.geometry import bounding_box, contains, contains_points, solve_lp
from src.geometry.lp import OPTIMAL
from tests.support import (DCDC_PHI, DCDC_PSI, EXAMPLE_PHI, EXAMPLE_PSI, box, random_arx,
                           simulate_trajectory)


def true_free_block(traj, cm):
    return traj.data_disturbances().T[:, :cm.free_dim]


def in_convex_hull(points, target):
    """LP feasibility of target as a convex combination of the rows of points."""
    n = points.shape[0]
    A_eq = np.vstack([points.T, np.ones((1, n))])
    b_eq = np.concatenate([target, [1.0]])
    return solve_lp(np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * n).status == OPTIMAL


class TestParameterization(unittest.TestCase):

    def test_true_disturbances_are_recovered(self):
        rng = np.random.default_rng(21)
        for trial in range(20):
            m, p, t_ini = (int(v) for v in rng.integers(1, 3, size=3))
            phi, psi = random_arx(rng, m, p, t_ini)
            traj = simulate_trajectory(phi, psi, t_ini, 60, 1.0, 0.1, seed=trial)
            cm = build_consistency_model(traj, box(*np.full(p, 0.1)), prune=False)
            F = true_free_block(traj, cm)
            D_true = traj.data_disturbances().T
            assert_allclose(reconstruct_disturbance(cm, F), D_true, atol=1e-8)
            assert_allclose(implied_system(cm, F), np.hstack([phi, psi]), atol=1e-8)
            assert_allclose(implied_system_from_data(cm, F), np.hstack([phi, psi]), atol=1e-8)
            self.assertTrue(contains(cm.Dc, cm.vectorize(F)))
            self.assertLessEqual(check_consistency(cm, D_true), 1e-8)

    def test_membership_matches_reconstructed_columns(self):
        traj = simulate_trajectory(EXAMPLE_PHI, EXAMPLE_PSI, 1, 40, 0.3, 0.1, seed=8)
        D = box(0.1)
        cm = build_consistency_model(traj, D, prune=False)
        lower, upper = bounding_box(cm.Dc)
        margin = 0.2 * (upper - lower)
        points = np.random.default_rng(9).uniform(lower - margin, upper + margin, size=(1000, lower.size))
        inside = contains_points(cm.Dc, points)
        for z, member in zip(points, inside):
            columns = reconstruct_disturbance(cm, cm.unvectorize(z)).T
            self.assertEqual(bool(contains_points(D, columns).all()), bool(member))
        self.assertGreater(int(inside.sum()), 0)
        self.assertLess(int(inside.sum()), len(points))

    def test_noise_free_data_has_zero_offset(self):
        traj = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 30, 0.2, 0.0, seed=3)
        cm = build_consistency_model(traj, box(0.1, 0.05))
        assert_allclose(cm.Gamma1, 0.0, atol=1e-8)
        assert_allclose(implied_system(cm, np.zeros((2, 4))), np.hstack([DCDC_PHI, DCDC_PSI]), atol=1e-8)

    def test_random_disturbances_are_inconsistent(self):
        traj = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 40, 0.2, (0.1, 0.05), seed=5)
        cm = build_consistency_model(traj, box(0.1, 0.05))
        noise = np.random.default_rng(0).uniform(-0.1, 0.1, size=cm.outputs.shape)
        self.assertGreater(check_consistency(cm, noise), 1e-3)
        self.assertFalse(is_consistent(cm, noise))
        self.assertTrue(is_consistent(cm, traj.data_disturbances().T))

    def test_data_matrix_shapes(self):
        traj = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 25, 0.2, (0.1, 0.05), seed=6)
        S, Y = data_matrices(traj)
        self.assertEqual(S.shape, (4, 25))
        self.assertEqual(Y.shape, (2, 25))

    def test_vectorization_is_column_major(self):
        traj = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 25, 0.2, (0.1, 0.05), seed=6)
        cm = build_consistency_model(traj, box(0.1, 0.05), prune=False)
        F = np.arange(8.0).reshape(2, 4)
        assert_allclose(cm.vectorize(F)[:4], [0.0, 4.0, 1.0, 5.0])
        assert_allclose(cm.unvectorize(cm.vectorize(F)), F)
        with self.assertRaises(DimensionError):
            cm.vectorize(np.zeros((4, 2)))

    def test_dictionary_round_trip(self):
        traj = simulate_trajectory(EXAMPLE_PHI, EXAMPLE_PSI, 1, 20, 0.3, 0.1, seed=2)
        cm = build_consistency_model(traj, box(0.1))
        restored = ConsistencyModel.from_dict(cm.to_dict())
        assert_allclose(restored.Gamma1, cm.Gamma1)
        assert_allclose(restored.Dc.G, cm.Dc.G)
        self.assertEqual(restored.free_dim, cm.free_dim)

    def test_failures(self):
        traj = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 25, 0.2, (0.1, 0.05), seed=6)
        with self.assertRaises(DimensionError):
            build_consistency_model(traj, box(0.1))
        short = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 3, 0.2, (0.1, 0.05), seed=6)
        with self.assertRaises(RankDeficiencyError):
            build_consistency_model(short, box(0.1, 0.05))
        constant = simulate_trajectory(EXAMPLE_PHI, EXAMPLE_PSI, 1, 20, 0.0, 0.0, seed=1)
        with self.assertRaises(RankDeficiencyError):
            build_consistency_model(constant, box(0.1))


class TestPriorKnowledge(unittest.TestCase):

    def setUp(self):
        self.traj = simulate_trajectory(EXAMPLE_PHI, EXAMPLE_PSI, 1, 40, 0.3, 0.1, seed=1)
        self.cm = build_consistency_model(self.traj, box(0.1))
        self.knowledge = [
            SimpleNamespace(G1=[[1.0]], G2=[[0.0], [1.0], [0.0]], G3=[[1.0]], equality=True),
            SimpleNamespace(G1=[[1.0]], G2=[[0.0], [0.0], [1.0]], G3=[[0.0]], equality=True),
        ]

    def test_knowledge_shrinks_the_consistent_set(self):
        restricted = apply_prior_knowledge(self.cm, self.knowledge)
        lower0, upper0 = bounding_box(self.cm.Dc)
        lower1, upper1 = bounding_box(restricted.Dc)
        self.assertTrue(np.all(upper1 - lower1 <= upper0 - lower0 + 1e-9))
        self.assertTrue(np.any(upper1 - lower1 < upper0 - lower0 - 1e-6))
        F = true_free_block(self.traj, self.cm)
        self.assertTrue(contains(restricted.Dc, restricted.vectorize(F), tol=1e-7))

    def test_restricted_vertices_respect_knowledge(self):
        restricted = apply_prior_knowledge(self.cm, self.knowledge)
        sysset = system_matrix_vertices(restricted)
        self.assertEqual(sysset.provenance, EXACT_VERTICES)
        for V in sysset.vertices:
            self.assertAlmostEqual(V[0, 1], 1.0, places=6)
            self.assertAlmostEqual(V[0, 2], 0.0, places=6)

    def test_contradicting_knowledge(self):
        contradiction = self.knowledge[1:] + [
            SimpleNamespace(G1=[[1.0]], G2=[[0.0], [0.0], [1.0]], G3=[[1.0]], equality=True)]
        with self.assertRaises(PriorKnowledgeError):
            apply_prior_knowledge(self.cm, contradiction)

    def test_vacuous_knowledge_is_a_no_op(self):
        self.assertIs(add_prior_knowledge(self.cm, [[1.0]], [[1.0], [0.0], [0.0]], [[np.inf]]), self.cm)

    def test_equality_is_two_inequalities(self):
        triples = equality_knowledge([[1.0]], [[1.0]], [[2.0]])
        self.assertEqual(len(triples), 2)
        assert_allclose(triples[1][0], [[-1.0]])
        assert_allclose(triples[1][2], [[-2.0]])

    def test_knowledge_dimension_check(self):
        with self.assertRaises(DimensionError):
            add_prior_knowledge(self.cm, [[1.0]], [[1.0]], [[1.0]])


class TestSystemMatrixSet(unittest.TestCase):

    def test_true_system_lies_in_exact_vertex_hull(self):
        traj = simulate_trajectory(EXAMPLE_PHI, EXAMPLE_PSI, 1, 40, 0.3, 0.1, seed=4)
        cm = build_consistency_model(traj, box(0.1))
        sysset = system_matrix_vertices(cm)
        self.assertEqual(sysset.provenance, EXACT_VERTICES)
        points = np.array([V.reshape(-1) for V in sysset.vertices])
        self.assertTrue(in_convex_hull(points, np.hstack([EXAMPLE_PHI, EXAMPLE_PSI]).reshape(-1)))
        phis, psis = sysset.split(2)
        self.assertEqual((phis[0].shape, psis[0].shape), ((1, 2), (1, 1)))

    def test_box_hull_above_vertex_cap(self):
        traj = simulate_trajectory(EXAMPLE_PHI, EXAMPLE_PSI, 1, 40, 0.3, 0.1, seed=4)
        cm = build_consistency_model(traj, box(0.1))
        sysset = system_matrix_vertices(cm, vertex_cap=2)
        self.assertEqual(sysset.provenance, BOX_HULL)
        self.assertEqual(len(sysset), 8)


if __name__ == '__main__':
    unittest.main()
