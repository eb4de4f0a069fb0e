"""
Invariant Sets
Fixed-point iterations for robust control invariant and robust positively
invariant sets of polytopic uncertain systems.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DimensionError, EmptySetError
from .polytope import (MAX_ITER, TOL_SET, Polytope, erode_by_image, extreme_points,
                       intersect, is_subset, project, remove_redundant)

logger = logging.getLogger(__name__)


@dataclass
class InvariantSetResult:
    """
    Outcome of an invariant-set recursion.

    Attributes:
        polytope: Last iterate (the fixed point when converged).
        iterations: Number of recursion steps performed.
        converged: Whether two consecutive iterates coincided.
    """

    polytope: Polytope
    iterations: int
    converged: bool


def robust_preimage_rows(target: Polytope, maps: Sequence[np.ndarray], E: np.ndarray,
                         D_vertices) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rows of {z | M_j z + E d in target for all j and all disturbance vertices}.

    For each facet only the extreme points of {G_r M_j}_j are kept; every other
    vertex map yields a row implied by them.

    Args:
        target: Polytope the successor must lie in
        maps: Vertex maps M_j of shape (target.dim, n_z)
        E: Disturbance input matrix
        D_vertices: Disturbance vertices

    Returns:
        Tuple (G, g) over z
    """
    if not maps:
        raise DimensionError("at least one vertex map is required")
    stacked = np.stack([np.atleast_2d(M) for M in maps])
    if stacked.shape[1] != target.dim:
        raise DimensionError(f"vertex maps produce {stacked.shape[1]}-vectors, target has dimension {target.dim}")
    eroded = erode_by_image(target, E, D_vertices)
    clouds = np.einsum("rd,vdz->rvz", eroded.G, stacked)
    rows: List[np.ndarray] = []
    offsets: List[np.ndarray] = []
    for r in range(eroded.n_rows):
        idx = extreme_points(clouds[r])
        rows.append(clouds[r][idx])
        offsets.append(np.full(idx.size, eroded.g[r]))
    if not rows:
        return np.zeros((0, stacked.shape[2])), np.zeros(0)
    return np.vstack(rows), np.concatenate(offsets)


def max_robust_control_invariant(A_cl_vertices: Sequence[np.ndarray], B_vertices: Sequence[np.ndarray],
                                 E: np.ndarray, D_vertices, C_N: Polytope, max_iter: int = MAX_ITER,
                                 tol: float = TOL_SET) -> InvariantSetResult:
    """
    Largest set of extended states that can be kept inside itself robustly.

    Iterates Omega+ = {xi in Omega | exists v: (xi, v) in C_N and
    A_j xi + B_j v + E d in Omega for all j, d} starting from the projection
    of C_N, until two iterates coincide.

    Args:
        A_cl_vertices: Closed-loop vertex matrices
        B_vertices: Input vertex matrices
        E: Disturbance input matrix
        D_vertices: Disturbance vertices
        C_N: Polytope over (xi, v_0)
        max_iter: Iteration cap
        tol: Mutual-inclusion tolerance

    Returns:
        InvariantSetResult; converged is False when the cap was hit
    """
    if len(A_cl_vertices) != len(B_vertices):
        raise DimensionError("A_cl and B vertex lists differ in length")
    n = np.atleast_2d(A_cl_vertices[0]).shape[0]
    maps = [np.hstack([np.atleast_2d(A), np.atleast_2d(B)]) for A, B in zip(A_cl_vertices, B_vertices)]
    if C_N.dim != maps[0].shape[1]:
        raise DimensionError(f"C_N has dimension {C_N.dim}, expected {maps[0].shape[1]}")
    state_dims = list(range(n))
    try:
        omega = project(C_N, state_dims)
    except EmptySetError as exc:
        raise EmptySetError("feasible set of the first input is empty") from exc
    for iteration in range(1, max_iter + 1):
        G_succ, g_succ = robust_preimage_rows(omega, maps, E, D_vertices)
        G_lift = np.vstack([C_N.G, np.hstack([omega.G, np.zeros((omega.n_rows, C_N.dim - n))]), G_succ])
        g_lift = np.concatenate([C_N.g, omega.g, g_succ])
        try:
            successor = project(Polytope(G_lift, g_lift), state_dims)
        except EmptySetError as exc:
            raise EmptySetError(f"robust control invariant set became empty at iteration {iteration}") from exc
        logger.debug(f"RCI iteration {iteration}: {successor.n_rows} rows")
        if is_subset(omega, successor, tol):
            logger.info(f"RCI recursion converged after {iteration} iterations ({successor.n_rows} rows)")
            return InvariantSetResult(successor, iteration, True)
        omega = successor
    logger.warning(f"RCI recursion did not converge within {max_iter} iterations; the set is not certified")
    return InvariantSetResult(omega, max_iter, False)


def rpi_terminal_set(A_cl_vertices: Sequence[np.ndarray], E: np.ndarray, D_vertices, X: Polytope,
                     U: Polytope, K: np.ndarray, max_iter: int = MAX_ITER,
                     tol: float = TOL_SET) -> InvariantSetResult:
    """
    Maximal robust positively invariant subset of X under u = K xi.

    Args:
        A_cl_vertices: Closed-loop vertex matrices
        E: Disturbance input matrix
        D_vertices: Disturbance vertices
        X: State constraint set
        U: Input constraint set
        K: Feedback gain
        max_iter: Iteration cap
        tol: Mutual-inclusion tolerance

    Returns:
        InvariantSetResult
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    radii = [max(abs(np.linalg.eigvals(np.atleast_2d(A)))) for A in A_cl_vertices]
    if max(radii) >= 1.0:
        logger.warning(f"closed-loop spectral radius {max(radii):.4f} >= 1; the recursion may not terminate")
    input_rows = Polytope(U.G @ K, U.g)
    try:
        current = remove_redundant(intersect(X, input_rows))
    except EmptySetError as exc:
        raise EmptySetError("state and input constraints have no common point under u = K xi") from exc
    maps = [np.atleast_2d(A) for A in A_cl_vertices]
    for iteration in range(1, max_iter + 1):
        G_succ, g_succ = robust_preimage_rows(current, maps, E, D_vertices)
        try:
            successor = remove_redundant(Polytope(np.vstack([current.G, G_succ]),
                                                  np.concatenate([current.g, g_succ])))
        except EmptySetError as exc:
            raise EmptySetError(f"terminal set became empty at iteration {iteration}") from exc
        if is_subset(current, successor, tol):
            logger.info(f"Terminal set recursion converged after {iteration} iterations ({successor.n_rows} rows)")
            return InvariantSetResult(successor, iteration, True)
        current = successor
    logger.warning(f"Terminal set recursion did not converge within {max_iter} iterations")
    return InvariantSetResult(current, max_iter, False)
