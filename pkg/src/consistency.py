"""
Consistent Disturbances
Parameterization of every disturbance trajectory that explains the recorded
input-output data, the polytope of consistent free parameters and the set of
system matrices it implies.

With S = [H_1(xi^d); H_1(u^d)] of full row rank, any disturbance data D with
(H_1(y^d) - D) Pi_S = 0 can be written as D = Gamma1 + F Gamma2, where the
free block F holds the first n_xi + m disturbance columns. The free block is
vectorized column-major (data index varies slowest, output index fastest).
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.linalg

from .behavioral import IoTrajectory, extended_state_data, numerical_rank, pseudo_inverse
from .errors import DimensionError, PriorKnowledgeError, RankDeficiencyError, UnboundedSetError
from .geometry import (Polytope, VertexSet, bounding_box, box_hull_vertices, chebyshev_center,
                       exact_vertices, is_empty, remove_redundant, restrict_to_hull)
from .geometry.polytope import VERTEX_CAP

logger = logging.getLogger(__name__)

EXACT_VERTICES = "exact-vertices"
BOX_HULL = "box-hull"

# Condition numbers of S above which a warning is issued, and of its leading block above which we abort
_COND_WARN = 1e8
_COND_ABORT = 1e12


def _as_matrix(value) -> np.ndarray:
    return np.atleast_2d(np.asarray(value, dtype=float))


@dataclass(frozen=True)
class ConsistencyModel:
    """
    Gamma-parameterization of the disturbance data consistent with recorded I/O.

    Attributes:
        S: Stacked data matrix [H_1(xi^d); H_1(u^d)], shape (n_xi + m, T).
        Pi_S: Projector onto the kernel of S, shape (T, T).
        Gamma1: Offset of the parameterization, shape (p, T).
        Gamma2: Free-block coefficient matrix, shape (n_xi + m, T).
        GammaA1: Offset of the implied system matrices, shape (p, n_xi + m).
        GammaA2: Free-block coefficient of the implied system matrices.
        free_dim: Number of free disturbance columns, n_xi + m.
        Dc: Consistent free blocks, a polytope over R^{p (n_xi + m)}.
        outputs: H_1(y^d), shape (p, T).
        S_pinv: Pseudo-inverse of S.
        disturbance_set: Disturbance support D.
    """

    S: np.ndarray
    Pi_S: np.ndarray
    Gamma1: np.ndarray
    Gamma2: np.ndarray
    GammaA1: np.ndarray
    GammaA2: np.ndarray
    free_dim: int
    Dc: Polytope
    outputs: np.ndarray
    S_pinv: np.ndarray
    disturbance_set: Polytope

    @property
    def p(self) -> int:
        return self.Gamma1.shape[0]

    @property
    def data_len(self) -> int:
        return self.Gamma1.shape[1]

    @property
    def free_size(self) -> int:
        """Length of a vectorized free block."""
        return self.p * self.free_dim

    def vectorize(self, free_block) -> np.ndarray:
        """Column-major vectorization of a free block."""
        F = _as_matrix(free_block)
        if F.shape != (self.p, self.free_dim):
            raise DimensionError(f"free block must be {self.p}x{self.free_dim}, got {F.shape}")
        return F.reshape(-1, order="F")

    def unvectorize(self, vec) -> np.ndarray:
        """Inverse of vectorize."""
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.size != self.free_size:
            raise DimensionError(f"vectorized free block must have {self.free_size} entries")
        return vec.reshape(self.p, self.free_dim, order="F")

    def to_dict(self) -> Dict:
        """JSON-serializable representation."""
        return {
            "S": self.S.tolist(),
            "Pi_S": self.Pi_S.tolist(),
            "Gamma1": self.Gamma1.tolist(),
            "Gamma2": self.Gamma2.tolist(),
            "GammaA1": self.GammaA1.tolist(),
            "GammaA2": self.GammaA2.tolist(),
            "free_dim": self.free_dim,
            "Dc": self.Dc.to_dict(),
            "outputs": self.outputs.tolist(),
            "S_pinv": self.S_pinv.tolist(),
            "disturbance_set": self.disturbance_set.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ConsistencyModel":
        arrays = {key: _as_matrix(data[key]) for key in
                  ("S", "Pi_S", "Gamma1", "Gamma2", "GammaA1", "GammaA2", "outputs", "S_pinv")}
        return cls(free_dim=int(data["free_dim"]), Dc=Polytope.from_dict(data["Dc"]),
                   disturbance_set=Polytope.from_dict(data["disturbance_set"]), **arrays)


@dataclass
class SystemMatrixSet:
    """
    System matrices [Phi_j Psi_j] consistent with the data.

    Attributes:
        vertices: Matrices of shape (p, n_xi + m), one per vertex of Dc (or of its box hull).
        provenance: "exact-vertices" or "box-hull".
        nominal: Matrix implied by the Chebyshev center of Dc.
        free_vertices: Vectorized free blocks the vertices were computed from.
    """

    vertices: List[np.ndarray]
    provenance: str
    nominal: np.ndarray
    free_vertices: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __len__(self) -> int:
        return len(self.vertices)

    def split(self, n_xi: int) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Separate every vertex into its (Phi_j, Psi_j) parts."""
        return [V[:, :n_xi] for V in self.vertices], [V[:, n_xi:] for V in self.vertices]

    def to_dict(self) -> Dict:
        return {
            "vertices": [V.tolist() for V in self.vertices],
            "provenance": self.provenance,
            "nominal": self.nominal.tolist(),
            "free_vertices": self.free_vertices.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SystemMatrixSet":
        return cls(
            vertices=[_as_matrix(V) for V in data["vertices"]],
            provenance=data["provenance"],
            nominal=_as_matrix(data["nominal"]),
            free_vertices=np.asarray(data.get("free_vertices", []), dtype=float),
        )


def data_matrices(traj: IoTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    """
    Return S = [H_1(xi^d); H_1(u^d)] and H_1(y^d) for the data indices 1 ... T.
    """
    xi = extended_state_data(traj).T
    S = np.vstack([xi, traj.data_inputs().T])
    return S, traj.data_outputs().T.copy()


def consistency_rows(Gamma1: np.ndarray, Gamma2: np.ndarray, D: Polytope) -> Tuple[np.ndarray, np.ndarray]:
    """
    Half-spaces over vec(F) requiring every column of Gamma1 + F Gamma2 to lie in D.

    Returns:
        Tuple (G, g) with D.n_rows rows per data index
    """
    rows = [np.kron(Gamma2[:, t][None, :], D.G) for t in range(Gamma1.shape[1])]
    offsets = [D.g - D.G @ Gamma1[:, t] for t in range(Gamma1.shape[1])]
    return np.vstack(rows), np.concatenate(offsets)


def build_consistency_model(traj: IoTrajectory, D: Polytope, prune: bool = True) -> ConsistencyModel:
    """
    Build the Gamma-parameterization and the consistent free-parameter set.

    Args:
        traj: Recorded trajectory
        D: Disturbance support
        prune: Remove redundant rows of Dc

    Returns:
        ConsistencyModel
    """
    if D.dim != traj.p:
        raise DimensionError(f"disturbance set has dimension {D.dim}, outputs have {traj.p}")
    S, Y = data_matrices(traj)
    k, T = S.shape
    if T < k:
        raise RankDeficiencyError(f"data matrix S is {k}x{T} and cannot have full row rank; collect more data")
    sigma = scipy.linalg.svdvals(S)
    if numerical_rank(S) < k:
        raise RankDeficiencyError(
            f"data matrix S lacks full row rank: rank {numerical_rank(S)} < {k} "
            f"(smallest singular value {sigma[-1]:.3e})"
        )
    cond = sigma[0] / sigma[-1]
    if cond > _COND_WARN:
        logger.warning(f"S is badly conditioned (condition number {cond:.2e}); consistency sets may be inaccurate")
    S_pinv = pseudo_inverse(S)
    Pi_S = np.eye(T) - S_pinv @ S
    lead = S[:, :k]
    lead_cond = np.linalg.cond(lead)
    if not np.isfinite(lead_cond) or lead_cond > _COND_ABORT:
        raise RankDeficiencyError(
            f"leading {k}x{k} block of S is singular (condition number {lead_cond:.2e})"
        )
    Gamma2 = scipy.linalg.lu_solve(scipy.linalg.lu_factor(lead), S)
    Y_proj = Y @ Pi_S
    Gamma1 = Y_proj - Y_proj[:, :k] @ Gamma2
    GammaA1 = (Y - Gamma1) @ S_pinv
    GammaA2 = -Gamma2 @ S_pinv
    G, g = consistency_rows(Gamma1, Gamma2, D)
    Dc = Polytope(G, g)
    if prune:
        before = Dc.n_rows
        Dc = remove_redundant(Dc)
        logger.info(f"Consistent free-parameter set: {before} rows, {Dc.n_rows} after redundancy removal")
    logger.info(f"Consistency model built: T={T}, free block {traj.p}x{k}, cond(S)={cond:.2e}")
    return ConsistencyModel(S=S, Pi_S=Pi_S, Gamma1=Gamma1, Gamma2=Gamma2, GammaA1=GammaA1, GammaA2=GammaA2,
                            free_dim=k, Dc=Dc, outputs=Y, S_pinv=S_pinv, disturbance_set=D)


def reconstruct_disturbance(cm: ConsistencyModel, free_block) -> np.ndarray:
    """
    Full consistent disturbance data Gamma1 + F Gamma2.

    Args:
        cm: Consistency model
        free_block: Free block F of shape (p, n_xi + m)

    Returns:
        Disturbance data of shape (p, T)
    """
    F = _as_matrix(free_block)
    if F.shape != (cm.p, cm.free_dim):
        raise DimensionError(f"free block must be {cm.p}x{cm.free_dim}, got {F.shape}")
    return cm.Gamma1 + F @ cm.Gamma2


def check_consistency(cm: ConsistencyModel, D_full) -> float:
    """
    Residual ||(H_1(y^d) - D) Pi_S||_F of candidate disturbance data.

    Args:
        cm: Consistency model
        D_full: Disturbance data of shape (p, T)

    Returns:
        Frobenius-norm residual
    """
    D_full = _as_matrix(D_full)
    if D_full.shape != cm.outputs.shape:
        raise DimensionError(f"disturbance data must be {cm.outputs.shape}, got {D_full.shape}")
    return float(np.linalg.norm((cm.outputs - D_full) @ cm.Pi_S))


def is_consistent(cm: ConsistencyModel, D_full, rel_tol: float = 1e-6) -> bool:
    """Consistency test relative to the size of the output data."""
    return check_consistency(cm, D_full) <= rel_tol * max(np.linalg.norm(cm.outputs), 1.0)


def implied_system(cm: ConsistencyModel, free_block) -> np.ndarray:
    """
    System matrices [Phi Psi] = GammaA1 + F GammaA2 implied by a free block.

    Returns:
        Matrix of shape (p, n_xi + m)
    """
    F = _as_matrix(free_block)
    if F.shape != (cm.p, cm.free_dim):
        raise DimensionError(f"free block must be {cm.p}x{cm.free_dim}, got {F.shape}")
    return cm.GammaA1 + F @ cm.GammaA2


def implied_system_from_data(cm: ConsistencyModel, free_block) -> np.ndarray:
    """Least-squares form (H_1(y^d) - D) S^+ of implied_system."""
    return (cm.outputs - reconstruct_disturbance(cm, free_block)) @ cm.S_pinv


def prior_knowledge_rows(cm: ConsistencyModel, G1, G2, G3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Half-spaces over vec(F) encoding G1 [Phi Psi] G2 <= G3.

    Entries of G3 equal to +inf are vacuous and produce no row.

    Returns:
        Tuple (G, g)
    """
    G1, G2, G3 = _as_matrix(G1), _as_matrix(G2), _as_matrix(G3)
    if G1.shape[1] != cm.p or G2.shape[0] != cm.free_dim or G3.shape != (G1.shape[0], G2.shape[1]):
        raise DimensionError(
            f"prior knowledge factors must be (r x {cm.p}), ({cm.free_dim} x s) and (r x s); "
            f"got {G1.shape}, {G2.shape}, {G3.shape}"
        )
    rows = np.kron((cm.GammaA2 @ G2).T, G1)
    rhs = (G3 - G1 @ cm.GammaA1 @ G2).reshape(-1, order="F")
    active = np.isfinite(rhs)
    if np.any(np.isneginf(G3)):
        raise PriorKnowledgeError("prior knowledge bound -inf can never be satisfied")
    return rows[active], rhs[active]


def equality_knowledge(G1, G2, value) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """
    Encode G1 [Phi Psi] G2 = value as two opposing inequalities.

    Returns:
        List of (G1, G2, G3) triples accepted by add_prior_knowledge
    """
    G1, G2, value = _as_matrix(G1), _as_matrix(G2), _as_matrix(value)
    return [(G1, G2, value), (-G1, G2, -value)]


def add_prior_knowledge(cm: ConsistencyModel, G1, G2, G3) -> ConsistencyModel:
    """
    Restrict Dc by prior model knowledge G1 [Phi Psi] G2 <= G3.

    Args:
        cm: Consistency model
        G1: Left factor (r x p)
        G2: Right factor (n_xi + m x s)
        G3: Bound (r x s)

    Returns:
        New ConsistencyModel with the extra rows appended to Dc
    """
    G, g = prior_knowledge_rows(cm, G1, G2, G3)
    if G.shape[0] == 0:
        return cm
    Dc = Polytope(np.vstack([cm.Dc.G, G]), np.concatenate([cm.Dc.g, g]))
    if is_empty(Dc):
        raise PriorKnowledgeError("prior knowledge inconsistent with data: the consistent set is empty")
    logger.info(f"Prior knowledge added {G.shape[0]} rows to the consistent set")
    return replace(cm, Dc=Dc)


def apply_prior_knowledge(cm: ConsistencyModel, knowledge: Sequence) -> ConsistencyModel:
    """
    Apply a sequence of prior-knowledge entries.

    Args:
        cm: Consistency model
        knowledge: Objects with G1, G2, G3 and equality attributes (see PriorKnowledgeConfig)

    Returns:
        Restricted ConsistencyModel
    """
    for entry in knowledge:
        triples = (equality_knowledge(entry.G1, entry.G2, entry.G3) if entry.equality
                   else [(entry.G1, entry.G2, entry.G3)])
        for G1, G2, G3 in triples:
            cm = add_prior_knowledge(cm, G1, G2, G3)
    return cm


def system_matrix_vertices(cm: ConsistencyModel, vertex_cap: int = VERTEX_CAP) -> SystemMatrixSet:
    """
    Vertices of the consistent system-matrix set.

    Exact vertices of Dc are used up to vertex_cap dimensions; above it the
    corners of the box hull of Dc over-approximate the set.

    Args:
        cm: Consistency model
        vertex_cap: Largest dimension of Dc handled exactly

    Returns:
        SystemMatrixSet
    """
    lower, upper = bounding_box(cm.Dc)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise UnboundedSetError(
            "consistent free-parameter set is unbounded; the disturbance set D must be bounded"
        )
    if cm.free_size <= vertex_cap:
        vertex_set: VertexSet = exact_vertices(cm.Dc, vertex_cap)
        provenance = EXACT_VERTICES
    else:
        vertex_set = box_hull_vertices(cm.Dc)
        provenance = BOX_HULL
    center = relative_center(cm.Dc)
    vertices = [implied_system(cm, cm.unvectorize(v)) for v in vertex_set]
    nominal = implied_system(cm, cm.unvectorize(center))
    logger.info(f"System matrix set: {len(vertices)} vertices ({provenance})")
    return SystemMatrixSet(vertices=vertices, provenance=provenance, nominal=nominal,
                           free_vertices=vertex_set.vertices)


def relative_center(P: Polytope) -> np.ndarray:
    """Chebyshev center of P within its affine hull (works for flat sets)."""
    reduced, x0, N = restrict_to_hull(P)
    if N.shape[1] == 0 or reduced.n_rows == 0:
        return x0
    z, _ = chebyshev_center(reduced)
    return x0 + N @ z
