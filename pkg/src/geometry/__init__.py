"""Polytope computations: set kernel, LP utility and invariant-set recursions."""

from .invariant import (InvariantSetResult, max_robust_control_invariant,
                        robust_preimage_rows, rpi_terminal_set)
from .lp import LpResult, solve_lp, support
from .polytope import (Polytope, VertexSet, affine_hull, bounding_box, box_hull_vertices,
                       chebyshev_center, contains, contains_points, equal_sets, erode_by_image,
                       exact_vertices, extreme_points, interior_point, intersect, intersect_all,
                       is_empty, is_subset, normalize, project, remove_redundant,
                       restrict_to_hull, scale_about_center)

__all__ = [
    'Polytope', 'VertexSet', 'LpResult', 'InvariantSetResult',
    'solve_lp', 'support',
    'affine_hull', 'bounding_box', 'box_hull_vertices', 'chebyshev_center', 'contains',
    'contains_points', 'equal_sets', 'erode_by_image', 'exact_vertices', 'extreme_points',
    'interior_point', 'intersect', 'intersect_all', 'is_empty', 'is_subset', 'normalize',
    'project', 'remove_redundant', 'restrict_to_hull', 'scale_about_center',
    'max_robust_control_invariant', 'robust_preimage_rows', 'rpi_terminal_set',
]
