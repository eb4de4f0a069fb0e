import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.errors import (DimensionError, EmptySetError, GeometryError, ProjectionLimitError,
                        UnboundedSetError)
from src.geometry import (Polytope, VertexSet, box_hull_vertices, chebyshev_center, contains,
                          contains_points, equal_sets, erode_by_image, exact_vertices,
                          extreme_points, intersect, intersect_all, is_empty, is_subset,
                          max_robust_control_invariant, project, remove_redundant,
                          rpi_terminal_set, scale_about_center, solve_lp, support)
from src.geometry.lp import INFEASIBLE, OPTIMAL, UNBOUNDED
from tests.support import box


def diamond(radius: float) -> Polytope:
    G = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    return Polytope(G, np.full(4, radius))


class TestPolytope(unittest.TestCase):

    def test_construction_checks(self):
        with self.assertRaises(DimensionError):
            Polytope(np.eye(2), np.ones(3))
        with self.assertRaises(DimensionError):
            Polytope(np.eye(2), np.array([1.0, np.inf]))
        with self.assertRaises(DimensionError):
            Polytope.from_box([0.0], [1.0, 2.0])

    def test_membership(self):
        D = box(0.1, 0.05)
        self.assertTrue(contains(D, [0.1, -0.05]))
        self.assertFalse(contains(D, [0.1001, 0.0]))
        self.assertIn(np.zeros(2), D)
        assert_allclose(contains_points(D, [[0.0, 0.0], [0.2, 0.0]]), [True, False])
        self.assertTrue(contains(Polytope.whole_space(3), [1e9, -1e9, 0.0]))
        with self.assertRaises(DimensionError):
            contains(D, [0.0])

    def test_dict_round_trip_keeps_dimension(self):
        P = Polytope.from_dict(Polytope.whole_space(4).to_dict())
        self.assertEqual((P.dim, P.n_rows), (4, 0))

    def test_intersections(self):
        P = intersect(box(1.0, 1.0), Polytope(np.array([[1.0, 0.0]]), np.array([0.5])))
        self.assertTrue(equal_sets(P, Polytope.from_box([-1.0, -1.0], [0.5, 1.0])))
        self.assertEqual(intersect_all([], dim=3).dim, 3)
        with self.assertRaises(DimensionError):
            intersect_all([])
        with self.assertRaises(DimensionError):
            intersect(box(1.0), box(1.0, 1.0))


class TestSetOperations(unittest.TestCase):

    def test_chebyshev_center_of_simplex(self):
        simplex = Polytope(np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]), np.array([0.0, 0.0, 1.0]))
        c, r = chebyshev_center(simplex)
        expected = 1.0 - 1.0 / np.sqrt(2.0)
        self.assertAlmostEqual(r, expected, places=7)
        assert_allclose(c, [expected, expected], atol=1e-7)

    def test_chebyshev_center_failures(self):
        with self.assertRaises(EmptySetError):
            chebyshev_center(Polytope(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0])))
        with self.assertRaises(UnboundedSetError):
            chebyshev_center(Polytope(np.array([[1.0, 0.0]]), np.array([1.0])))

    def test_erosion_of_box(self):
        eroded = erode_by_image(box(1.0, 1.0), np.eye(2), box_hull_vertices(box(0.25, 0.25)))
        self.assertTrue(equal_sets(eroded, box(0.75, 0.75)))

    def test_erosion_matches_translated_vertices(self):
        rng = np.random.default_rng(17)
        for dim, d_dim in ((2, 1), (2, 2), (3, 2)):
            G = rng.normal(size=(6, dim))
            G /= np.linalg.norm(G, axis=1, keepdims=True)
            P = intersect(box(*np.ones(dim)), Polytope(G, rng.uniform(0.6, 1.0, size=6)))
            E = rng.normal(size=(dim, d_dim)) * 0.2
            V = rng.uniform(-0.5, 0.5, size=(5, d_dim))
            eroded = erode_by_image(P, E, V)
            X = rng.uniform(-1.2, 1.2, size=(2000, dim))
            robust = np.all([contains_points(P, X + E @ v) for v in V], axis=0)
            np.testing.assert_array_equal(contains_points(eroded, X), robust)
            self.assertGreater(int(robust.sum()), 0)
            self.assertLess(int(robust.sum()), len(X))

    def test_scaling_about_center(self):
        self.assertTrue(equal_sets(scale_about_center(box(1.0, 1.0), np.zeros(2), 2.0), box(2.0, 2.0)))
        shrunk = scale_about_center(box(1.0, 1.0), [0.5, 0.0], 0.0)
        self.assertTrue(contains(shrunk, [0.5, 0.0]))
        self.assertFalse(contains(shrunk, [0.6, 0.0]))
        with self.assertRaises(GeometryError):
            scale_about_center(box(1.0, 1.0), [1.0, 0.0], 0.5)
        with self.assertRaises(GeometryError):
            scale_about_center(box(1.0, 1.0), np.zeros(2), -0.1)

    def test_emptiness_and_inclusion(self):
        self.assertTrue(is_empty(Polytope(np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))))
        self.assertFalse(is_empty(box(1.0)))
        self.assertTrue(is_subset(box(0.5, 0.5), box(1.0, 1.0)))
        self.assertFalse(is_subset(box(1.0, 1.0), diamond(1.0)))
        self.assertTrue(is_subset(diamond(1.0), box(1.0, 1.0)))

    def test_redundancy_removal(self):
        base = box(1.0, 1.0)
        rng = np.random.default_rng(0)
        extra_G = rng.normal(size=(20, 2))
        # rows whose offsets exceed the support of the box are implied by it
        extra_g = np.abs(extra_G).sum(axis=1) + rng.uniform(0.1, 1.0, size=20)
        duplicated = Polytope(np.vstack([base.G, 2.0 * base.G[:1], extra_G]),
                              np.concatenate([base.g, [2.0], extra_g]))
        reduced = remove_redundant(duplicated)
        self.assertEqual(reduced.n_rows, 4)
        self.assertTrue(equal_sets(reduced, base))
        assert_allclose(np.linalg.norm(reduced.G, axis=1), 1.0)

    def test_projection_of_diamond(self):
        interval = project(diamond(np.sqrt(2.0)), [0])
        self.assertTrue(equal_sets(interval, box(np.sqrt(2.0))))

    def test_projection_matches_lifting_lp(self):
        rng = np.random.default_rng(7)
        G = np.vstack([rng.normal(size=(12, 3)), box(2.0, 2.0, 2.0).G])
        g = np.concatenate([1.0 + rng.uniform(size=12), box(2.0, 2.0, 2.0).g])
        P = Polytope(G, g)
        shadow = project(P, [0, 1])
        for point in rng.uniform(-2.0, 2.0, size=(200, 2)):
            lifted = solve_lp(np.zeros(1), G[:, 2:], g - G[:, :2] @ point)
            margin = np.min((shadow.g - shadow.G @ point) / np.linalg.norm(shadow.G, axis=1))
            if abs(margin) < 1e-6:
                continue
            self.assertEqual(lifted.status == OPTIMAL, contains(shadow, point))

    def test_projection_to_whole_space(self):
        slab = Polytope(np.array([[0.0, 1.0], [0.0, -1.0]]), np.array([1.0, 1.0]))
        self.assertEqual(project(slab, [0]).n_rows, 0)

    def test_projection_row_cap(self):
        rng = np.random.default_rng(1)
        G = np.vstack([rng.normal(size=(30, 4)), box(1.0, 1.0, 1.0, 1.0).G])
        g = np.concatenate([np.ones(30), box(1.0, 1.0, 1.0, 1.0).g])
        with self.assertRaises(ProjectionLimitError):
            project(Polytope(G, g), [0], row_cap=5)

    def test_box_hull(self):
        corners = box_hull_vertices(diamond(1.0))
        self.assertEqual(len(corners), 4)
        assert_allclose(np.sort(np.abs(corners.vertices), axis=0), np.ones((4, 2)), atol=1e-9)
        with self.assertRaises(UnboundedSetError):
            box_hull_vertices(Polytope(np.array([[1.0, 0.0]]), np.array([1.0])))

    def test_exact_vertices(self):
        self.assertEqual(len(exact_vertices(box(1.0, 1.0))), 4)
        simplex = Polytope(np.vstack([-np.eye(3), np.ones((1, 3))]), np.array([0.0, 0.0, 0.0, 1.0]))
        self.assertEqual(len(exact_vertices(simplex)), 4)
        angles = np.arange(6) * np.pi / 3.0
        hexagon = Polytope(np.column_stack([np.cos(angles), np.sin(angles)]), np.ones(6))
        self.assertEqual(len(exact_vertices(hexagon)), 6)
        with self.assertRaises(GeometryError):
            exact_vertices(box(*np.ones(7)))

    def test_exact_vertices_of_flat_set(self):
        segment = intersect(box(1.0, 1.0), Polytope(np.array([[0.0, 1.0], [0.0, -1.0]]), np.zeros(2)))
        vertices = exact_vertices(segment)
        self.assertEqual(len(vertices), 2)
        assert_allclose(np.sort(vertices.vertices[:, 0]), [-1.0, 1.0], atol=1e-7)

    def test_extreme_points(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5], [0.2, 0.7]])
        assert_allclose(extreme_points(points), [0, 1, 2, 3])
        self.assertIsInstance(VertexSet(points[:2]).dim, int)


class TestLinearPrograms(unittest.TestCase):

    def test_statuses(self):
        self.assertEqual(solve_lp(np.array([1.0]), np.array([[-1.0]]), np.array([0.0])).status, OPTIMAL)
        self.assertEqual(solve_lp(np.array([-1.0]), np.array([[-1.0]]), np.array([0.0])).status, UNBOUNDED)
        infeasible = solve_lp(np.array([1.0]), np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
        self.assertEqual(infeasible.status, INFEASIBLE)

    def test_support_function(self):
        P = box(1.0, 2.0)
        self.assertAlmostEqual(support(P.G, P.g, np.array([1.0, 1.0])), 3.0, places=8)


class TestInvariantSets(unittest.TestCase):

    A_CL = [np.array([[0.5]])]
    B = [np.array([[1.0]])]
    E = np.array([[1.0]])

    def test_scalar_robust_control_invariant_set(self):
        C_N = box(1.0, 0.2)
        result = max_robust_control_invariant(self.A_CL, self.B, self.E, np.array([[-0.1], [0.1]]), C_N)
        self.assertTrue(result.converged)
        self.assertTrue(equal_sets(result.polytope, box(1.0)))

    def test_disturbance_too_large_empties_the_set(self):
        with self.assertRaises(EmptySetError):
            max_robust_control_invariant(self.A_CL, self.B, self.E, np.array([[-2.0], [2.0]]), box(1.0, 0.2))

    def test_robust_positively_invariant_set(self):
        result = rpi_terminal_set(self.A_CL, self.E, np.array([[-0.1], [0.1]]), box(1.0), box(1.0),
                                  np.zeros((1, 1)))
        self.assertTrue(result.converged)
        self.assertTrue(equal_sets(result.polytope, box(1.0)))

    def test_positively_invariant_set_shrinks_under_feedback_bound(self):
        # u = 2 xi with |u| <= 1 restricts xi to [-0.5, 0.5]
        result = rpi_terminal_set([np.array([[0.5]])], self.E, np.array([[-0.1], [0.1]]), box(1.0),
                                  box(1.0), np.array([[2.0]]))
        self.assertTrue(equal_sets(result.polytope, box(0.5)))


if __name__ == '__main__':
    unittest.main()
