import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.consistency import build_consistency_model
from src.controller import (CostModel, OcpProblem, average_cost, build_cost, build_first_step_constraint,
                            candidate_solution, check_candidate_feasible, control_step, evaluate_cost,
                            feasible_first_inputs, solve_ocp)
from src.errors import DimensionError, EmptySetError, InfeasibleDesignError
from src.geometry import Polytope, contains, equal_sets, intersect
from src.predictor import UncertaintySample, build_basis, build_predictors
from src.synthesis import VertexDynamics
from tests.support import EXAMPLE_PHI, EXAMPLE_PSI, box, simulate_trajectory


def pull_cost() -> CostModel:
    """xi^2 + v_0^2 + v_1^2 - 2 v_0 - 2 v_1, minimized at v = (1, 1)."""
    return CostModel(np.eye(3), np.array([0.0, -2.0, -2.0]), 0.0)


class TestCandidateSolution(unittest.TestCase):

    K = np.array([[0.5]])
    A_CL = np.array([[0.5]])
    E = np.array([[1.0]])

    def test_pure_shift_without_disturbance(self):
        candidate = candidate_solution([1.0, 2.0, 3.0], self.K, self.A_CL, self.E, [0.0])
        assert_allclose(candidate, [2.0, 3.0, 0.0])

    def test_single_step_horizon(self):
        assert_allclose(candidate_solution([7.0], self.K, self.A_CL, self.E, [0.2]), [0.1])

    def test_disturbance_propagates_through_closed_loop(self):
        candidate = candidate_solution([1.0, 2.0, 3.0], self.K, self.A_CL, self.E, [0.2])
        assert_allclose(candidate, [2.1, 3.05, 0.025])


class TestCostModel(unittest.TestCase):

    def test_symmetrization_and_checks(self):
        cost = CostModel(np.array([[1.0, 2.0], [0.0, 5.0]]), np.zeros(2), 0.0)
        assert_allclose(cost.Q_ocp, [[1.0, 1.0], [1.0, 5.0]])
        with self.assertRaises(DimensionError):
            CostModel(-np.eye(2), np.zeros(2), 0.0)
        with self.assertRaises(DimensionError):
            CostModel(np.eye(2), np.zeros(3), 0.0)

    def test_evaluation(self):
        self.assertAlmostEqual(evaluate_cost(pull_cost(), [1.0], [1.0, 1.0]), -1.0)
        restored = CostModel.from_dict(pull_cost().to_dict())
        assert_allclose(restored.q_ocp, pull_cost().q_ocp)

    def test_sample_average_cost(self):
        traj = simulate_trajectory(EXAMPLE_PHI, EXAMPLE_PSI, 1, 30, 0.3, 0.1, seed=3)
        cm = build_consistency_model(traj, box(0.1), prune=False)
        basis = build_basis(traj, np.zeros((1, 2)), 2)
        free = traj.data_disturbances().T[:, :3]
        predictors = build_predictors(basis, cm, [UncertaintySample(free, np.zeros(2))] * 3)
        cost = average_cost(predictors, np.eye(1), np.eye(1), np.eye(2), 2)
        assert_allclose(cost.q_ocp, 0.0, atol=1e-12)
        self.assertAlmostEqual(cost.c, 0.0)
        doubled = average_cost(predictors, 2.0 * np.eye(1), 2.0 * np.eye(1), 2.0 * np.eye(2), 2)
        assert_allclose(doubled.Q_ocp, 2.0 * cost.Q_ocp, atol=1e-10)
        self.assertEqual(cost.n_samples, 3)
        d_f = np.array([0.05, -0.05])
        noisy = build_cost(traj, np.zeros((1, 2)), cm, [UncertaintySample(free, d_f)], np.eye(1), np.eye(1),
                           np.eye(2), 2, basis=basis)
        self.assertGreater(noisy.c, 0.0)
        with self.assertRaises(DimensionError):
            average_cost([], np.eye(1), np.eye(1), np.eye(2), 2)


class TestOcpProblem(unittest.TestCase):

    def test_unconstrained_minimizer(self):
        prob = OcpProblem(pull_cost(), box(10.0, 10.0, 10.0), Polytope.whole_space(3), 1, 1, 2)
        result = solve_ocp(prob, [0.0])
        assert_allclose(result.v_f_opt, [1.0, 1.0], atol=1e-10)
        self.assertAlmostEqual(result.objective, -2.0)

    def test_active_constraints_and_control_law(self):
        prob = OcpProblem(pull_cost(), box(10.0, 0.5, 0.5), Polytope.whole_space(3), 1, 1, 2)
        u, result = control_step(prob, np.array([[0.2]]), [1.0])
        assert_allclose(result.v_f_opt, [0.5, 0.5], atol=1e-10)
        assert_allclose(u, [0.7], atol=1e-10)
        self.assertAlmostEqual(result.objective, 1.0 + 0.5 - 2.0)
        self.assertTrue(check_candidate_feasible(prob, [1.0], result.v_f_opt))
        self.assertFalse(check_candidate_feasible(prob, [1.0], 100.0 * result.v_f_opt))

    def test_infeasible_state(self):
        C = intersect(box(10.0, 10.0, 10.0), Polytope(np.array([[1.0, 0.0, 0.0]]), np.array([1.0])))
        prob = OcpProblem(pull_cost(), C, Polytope.whole_space(3), 1, 1, 2)
        with self.assertRaises(InfeasibleDesignError):
            control_step(prob, np.zeros((1, 1)), [2.0])

    def test_construction_checks(self):
        with self.assertRaises(DimensionError):
            OcpProblem(pull_cost(), box(1.0, 1.0), Polytope.whole_space(3), 1, 1, 2)
        disjoint = Polytope(np.array([[-1.0, 0.0, 0.0]]), np.array([-20.0]))
        with self.assertRaises(EmptySetError):
            OcpProblem(pull_cost(), box(10.0, 10.0, 10.0), disjoint, 1, 1, 2)
        prob = OcpProblem(pull_cost(), box(10.0, 10.0, 10.0), Polytope.whole_space(3), 1, 1, 2)
        with self.assertRaises(DimensionError):
            prob.folded([np.nan])

    def test_dictionary_round_trip(self):
        prob = OcpProblem(pull_cost(), box(10.0, 0.5, 0.5), Polytope.whole_space(3), 1, 1, 2)
        restored = OcpProblem.from_dict(prob.to_dict())
        assert_allclose(solve_ocp(restored, [0.3]).v_f_opt, solve_ocp(prob, [0.3]).v_f_opt)


class TestFirstStepConstraint(unittest.TestCase):

    def setUp(self):
        self.dyn = VertexDynamics([np.array([[0.5]]), np.array([[0.7]])],
                                  [np.array([[1.0]]), np.array([[1.0]])], np.array([[1.0]]))

    def test_matches_vertex_enumeration(self):
        C_R = build_first_step_constraint(self.dyn, np.zeros((1, 1)), box(0.1), box(1.0), 2)
        assert_allclose(C_R.G[:, 2], 0.0)
        rng = np.random.default_rng(0)
        for xi, v0 in rng.uniform(-2.0, 2.0, size=(300, 2)):
            successors = [a * xi + v0 + d for a in (0.5, 0.7) for d in (-0.1, 0.1)]
            margin = 1.0 - max(abs(s) for s in successors)
            if abs(margin) < 1e-6:
                continue
            self.assertEqual(margin > 0, contains(C_R, [xi, v0, rng.normal()]))

    def test_large_disturbance(self):
        with self.assertRaises(EmptySetError):
            build_first_step_constraint(self.dyn, np.zeros((1, 1)), box(2.0), box(1.0), 2)
        with self.assertRaises(DimensionError):
            build_first_step_constraint(self.dyn, np.zeros((1, 1)), box(0.1), box(1.0, 1.0), 2)

    def test_projection_onto_first_input(self):
        self.assertTrue(equal_sets(feasible_first_inputs(box(1.0, 2.0, 3.0), 1, 1), box(1.0, 2.0)))


if __name__ == '__main__':
    unittest.main()
