"""
Polytope Kernel
Half-space polytopes and the set operations the controller design needs:
membership, intersection, scaling, erosion, Chebyshev centers, redundancy
removal, Fourier-Motzkin projection and vertex enumeration.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from ..errors import (DimensionError, EmptySetError, GeometryError,
                      ProjectionLimitError, UnboundedSetError)
from .lp import INFEASIBLE, UNBOUNDED, solve_lp, support

logger = logging.getLogger(__name__)

TOL_FEAS = 1e-8
TOL_RED = 1e-9
TOL_SET = 1e-7
VERTEX_CAP = 6
FM_ROW_CAP = 200_000
MAX_ITER = 500

# Rounding used to detect parallel rows after normalization
_DEDUPE_DECIMALS = 10


class Polytope:
    """Convex polyhedron {x | G x <= g}; zero rows describe the whole space."""

    def __init__(self, G, g, normalized: bool = False):
        """
        Initialize a polytope from half-spaces.

        Args:
            G: Matrix of shape (n_c, d)
            g: Vector of length n_c
            normalized: Whether every nonzero row of G has unit norm
        """
        G = np.asarray(G, dtype=float)
        g = np.asarray(g, dtype=float).reshape(-1)
        if G.ndim == 1:
            G = G.reshape(1, -1) if g.size == 1 else G.reshape(0, -1)
        if G.ndim != 2 or G.shape[0] != g.shape[0]:
            raise DimensionError(f"G with shape {G.shape} does not match g with {g.shape[0]} entries")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(g))):
            raise DimensionError("polytope data must be finite")
        self.G = G
        self.g = g
        self.normalized = normalized

    @classmethod
    def from_box(cls, lower, upper) -> "Polytope":
        """Axis-aligned box lower <= x <= upper."""
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionError("box bounds differ in length")
        d = lower.size
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]), normalized=True)

    @classmethod
    def whole_space(cls, d: int) -> "Polytope":
        return cls(np.zeros((0, d)), np.zeros(0), normalized=True)

    @property
    def dim(self) -> int:
        return self.G.shape[1]

    @property
    def n_rows(self) -> int:
        return self.G.shape[0]

    def __contains__(self, x) -> bool:
        return contains(self, x)

    def __repr__(self) -> str:
        return f"Polytope(rows={self.n_rows}, dim={self.dim})"

    def to_dict(self) -> Dict:
        """JSON-serializable representation."""
        return {"G": self.G.tolist(), "g": self.g.tolist(), "dim": self.dim, "normalized": self.normalized}

    @classmethod
    def from_dict(cls, data: Dict) -> "Polytope":
        G = np.asarray(data["G"], dtype=float)
        g = np.asarray(data["g"], dtype=float)
        if G.size == 0:
            G = G.reshape(0, int(data.get("dim", 0)))
        return cls(G, g, normalized=bool(data.get("normalized", False)))


@dataclass
class VertexSet:
    """
    Finite point set describing a polytope by its (over-approximating) corners.

    Attributes:
        vertices: Array of shape (n_v, d).
    """

    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def __iter__(self):
        return iter(self.vertices)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]


def _as_vertices(D_vertices: Union[VertexSet, np.ndarray, Sequence]) -> np.ndarray:
    if isinstance(D_vertices, VertexSet):
        return D_vertices.vertices
    return np.atleast_2d(np.asarray(D_vertices, dtype=float))


def _row_norms(G: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(G, axis=1)
    return np.where(norms > 0.0, norms, 1.0)


def normalize(P: Polytope) -> Polytope:
    """
    Scale rows to unit norm and drop trivially satisfied zero rows.

    Raises EmptySetError when a zero row reads 0 <= g with g < 0.
    """
    norms = np.linalg.norm(P.G, axis=1)
    zero = norms <= 1e-14
    if np.any(P.g[zero] < -TOL_FEAS):
        raise EmptySetError("polytope contains an infeasible constant row")
    keep = ~zero
    return Polytope(P.G[keep] / norms[keep, None], P.g[keep] / norms[keep], normalized=True)


def contains(P: Polytope, x, tol: float = TOL_FEAS) -> bool:
    """
    Membership test G x <= g + tol on normalized rows.

    Args:
        P: Polytope
        x: Point of matching dimension
        tol: Absolute tolerance on normalized rows

    Returns:
        True iff x satisfies every half-space
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != P.dim:
        raise DimensionError(f"point of dimension {x.size} tested against a {P.dim}-dimensional set")
    if P.n_rows == 0:
        return True
    slack = (P.G @ x - P.g) / _row_norms(P.G)
    return bool(np.all(slack <= tol))


def contains_points(P: Polytope, X, tol: float = TOL_FEAS) -> np.ndarray:
    """Vectorized membership of the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != P.dim:
        raise DimensionError(f"points of dimension {X.shape[1]} tested against a {P.dim}-dimensional set")
    if P.n_rows == 0:
        return np.ones(X.shape[0], dtype=bool)
    slack = (X @ P.G.T - P.g) / _row_norms(P.G)
    return np.all(slack <= tol, axis=1)


def intersect(P: Polytope, Q: Polytope) -> Polytope:
    """Intersection by stacking half-spaces."""
    if P.dim != Q.dim:
        raise DimensionError(f"cannot intersect a {P.dim}-dimensional set with a {Q.dim}-dimensional set")
    return Polytope(np.vstack([P.G, Q.G]), np.concatenate([P.g, Q.g]),
                    normalized=P.normalized and Q.normalized)


def intersect_all(sets: Sequence[Polytope], dim: Optional[int] = None) -> Polytope:
    """Intersection of many polytopes of the same dimension."""
    if not sets:
        if dim is None:
            raise DimensionError("dimension required for an empty intersection")
        return Polytope.whole_space(dim)
    d = sets[0].dim
    if any(s.dim != d for s in sets):
        raise DimensionError("all sets of an intersection must share their dimension")
    return Polytope(np.vstack([s.G for s in sets]), np.concatenate([s.g for s in sets]),
                    normalized=all(s.normalized for s in sets))


def scale_about_center(P: Polytope, c, sigma: float) -> Polytope:
    """
    The set {c} + sigma (P - {c}).

    Args:
        P: Polytope
        c: Center strictly inside P
        sigma: Non-negative scaling factor

    Returns:
        Polytope with rows G x <= sigma g + (1 - sigma) G c
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    if sigma < 0:
        raise GeometryError(f"scaling factor must be non-negative, got {sigma}")
    if c.size != P.dim:
        raise DimensionError("center dimension does not match the set")
    if P.n_rows and np.any(P.G @ c >= P.g):
        raise GeometryError("scaling center is not strictly inside the set")
    return Polytope(P.G.copy(), sigma * P.g + (1.0 - sigma) * (P.G @ c), normalized=P.normalized)


def erode_by_image(P: Polytope, E: np.ndarray, D_vertices) -> Polytope:
    """
    Robust tightening {x | x + E d in P for all d in conv(D_vertices)}.

    Args:
        P: Polytope
        E: Matrix mapping disturbances into the space of P
        D_vertices: VertexSet or array of disturbance vertices

    Returns:
        Polytope with offsets g - h, h_r = max_v G_r E v
    """
    V = _as_vertices(D_vertices)
    if V.size == 0 or V.shape[0] == 0:
        raise GeometryError("erosion needs at least one disturbance vertex")
    E = np.atleast_2d(np.asarray(E, dtype=float))
    if E.shape[0] != P.dim or E.shape[1] != V.shape[1]:
        raise DimensionError(f"E of shape {E.shape} does not map {V.shape[1]}-vectors into dimension {P.dim}")
    if P.n_rows == 0:
        return P
    h = (P.G @ E @ V.T).max(axis=1)
    return Polytope(P.G.copy(), P.g - h, normalized=P.normalized)


def chebyshev_center(P: Polytope) -> Tuple[np.ndarray, float]:
    """
    Center and radius of the largest inscribed ball.

    Args:
        P: Nonempty bounded polytope

    Returns:
        Tuple (c, r); r > 0 iff the interior is nonempty
    """
    norms = np.linalg.norm(P.G, axis=1)
    cost = np.zeros(P.dim + 1)
    cost[-1] = -1.0
    A = np.hstack([P.G, norms[:, None]])
    bounds = [(None, None)] * P.dim + [(0, None)]
    res = solve_lp(cost, A, P.g, bounds=bounds)
    if res.status == INFEASIBLE:
        raise EmptySetError("Chebyshev center LP is infeasible: the set is empty")
    if res.status == UNBOUNDED:
        raise UnboundedSetError("Chebyshev center LP is unbounded: the set is unbounded")
    if not res.optimal:
        raise GeometryError(f"Chebyshev center LP failed ({res.status})")
    return res.x[:-1], float(res.x[-1])


def interior_point(P: Polytope, radius_cap: float = 1.0) -> Tuple[np.ndarray, float]:
    """
    Point with the largest inscribed ball, radius capped so unbounded sets work.

    Returns:
        Tuple (x, r) with r <= radius_cap
    """
    norms = np.linalg.norm(P.G, axis=1)
    cost = np.zeros(P.dim + 1)
    cost[-1] = -1.0
    A = np.hstack([P.G, norms[:, None]])
    bounds = [(None, None)] * P.dim + [(0, radius_cap)]
    res = solve_lp(cost, A, P.g, bounds=bounds)
    if res.status == INFEASIBLE:
        raise EmptySetError("the set is empty")
    if not res.optimal:
        raise GeometryError(f"interior point LP failed ({res.status})")
    return res.x[:-1], float(res.x[-1])


def is_empty(P: Polytope) -> bool:
    """True iff no point satisfies all half-spaces."""
    if P.n_rows == 0:
        return False
    return solve_lp(np.zeros(P.dim), P.G, P.g).status == INFEASIBLE


def bounding_box(P: Polytope) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-coordinate bounds from 2d LPs.

    Returns:
        Tuple (lower, upper); entries are infinite along unbounded directions
    """
    d = P.dim
    lower = np.empty(d)
    upper = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        upper[i] = support(P.G, P.g, e)
        lower[i] = -support(P.G, P.g, -e)
    if np.any(upper == -np.inf):
        raise EmptySetError("bounding box of an empty set")
    return lower, upper


def _dedupe(G: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Indices of the tightest row within each group of parallel normalized rows."""
    if G.shape[0] == 0:
        return np.zeros(0, dtype=int)
    keys = np.round(G, _DEDUPE_DECIMALS)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.lexsort((np.arange(G.shape[0]), g, inverse))
    first = np.ones(order.size, dtype=bool)
    first[1:] = inverse[order[1:]] != inverse[order[:-1]]
    return np.sort(order[first])


def _redundant_by_lp(G: np.ndarray, g: np.ndarray, candidates: np.ndarray, tol: float) -> np.ndarray:
    """Sequential one-LP-per-row elimination; returns the kept candidate indices."""
    active = np.ones(G.shape[0], dtype=bool)
    for r in candidates:
        active[r] = False
        value = support(G[active], g[active], G[r], cap=g[r] + 1.0)
        if value > g[r] + tol:
            active[r] = True
    return np.flatnonzero(active)


def _clarkson(G: np.ndarray, g: np.ndarray, z: np.ndarray, tol: float) -> np.ndarray:
    """
    Clarkson's redundancy elimination from a strictly interior point z.

    Rows are tested against the growing irredundant set only; a row that
    survives its test is resolved by ray shooting from z.
    """
    n = G.shape[0]
    slack0 = g - G @ z
    irredundant: List[int] = []
    state = np.zeros(n, dtype=np.int8)  # 0 unknown, 1 irredundant, -1 redundant
    for r in range(n):
        while state[r] == 0:
            if irredundant:
                GI, gI = G[irredundant], g[irredundant]
            else:
                GI, gI = np.zeros((0, G.shape[1])), np.zeros(0)
            A = np.vstack([GI, G[r]])
            b = np.append(gI, g[r] + 1.0)
            res = solve_lp(-G[r], A, b)
            if not res.optimal:
                state[r] = 1
                irredundant.append(r)
                break
            if -res.value <= g[r] + tol:
                state[r] = -1
                break
            direction = res.x - z
            rate = G @ direction
            open_rows = (state == 0) & (rate > 1e-14)
            if not np.any(open_rows):
                state[r] = 1
                irredundant.append(r)
                break
            t = np.full(n, np.inf)
            t[open_rows] = slack0[open_rows] / rate[open_rows]
            hit = int(np.argmin(t))
            state[hit] = 1
            irredundant.append(hit)
    return np.flatnonzero(state == 1)


def irredundant_indices(P: Polytope, tol: float = TOL_RED) -> Tuple[np.ndarray, Polytope]:
    """
    Indices of rows forming a minimal description, plus the normalized set they index.

    Args:
        P: Nonempty polytope
        tol: Redundancy tolerance

    Returns:
        Tuple (indices into normalize(P) rows, normalized polytope)
    """
    Pn = normalize(P)
    G, g = Pn.G, Pn.g
    if G.shape[0] == 0:
        return np.zeros(0, dtype=int), Pn
    candidates = _dedupe(G, g)
    if candidates.size <= 1:
        if is_empty(Pn):
            raise EmptySetError("redundancy removal of an empty set")
        return candidates, Pn
    Gc, gc = G[candidates], g[candidates]
    z, radius = interior_point(Polytope(Gc, gc))
    if radius > 1e-9:
        try:
            lower, upper = bounding_box(Polytope(Gc, gc))
        except EmptySetError:
            raise
        if np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)):
            box_max = np.clip(Gc, 0, None) @ upper + np.clip(Gc, None, 0) @ lower
            survivors = np.flatnonzero(box_max >= gc - tol)
        else:
            survivors = np.arange(candidates.size)
        kept = survivors[_clarkson(Gc[survivors], gc[survivors], z, tol)]
    else:
        kept = _redundant_by_lp(Gc, gc, np.arange(candidates.size), tol)
    return candidates[np.sort(kept)], Pn


def remove_redundant(P: Polytope, tol: float = TOL_RED) -> Polytope:
    """
    Minimal half-space description of the same set.

    A row is dropped when maximizing G_r x over the remaining rows stays
    within g_r + tol. Parallel duplicates keep the tightest offset.

    Args:
        P: Nonempty polytope
        tol: Redundancy tolerance

    Returns:
        Polytope with normalized irredundant rows
    """
    kept, Pn = irredundant_indices(P, tol)
    result = Polytope(Pn.G[kept], Pn.g[kept], normalized=True)
    if P.n_rows > 1000:
        logger.info(f"Redundancy removal: {P.n_rows} -> {result.n_rows} rows")
    return result


def is_subset(P: Polytope, Q: Polytope, tol: float = TOL_SET) -> bool:
    """
    Inclusion test P subset of Q via one support LP per row of Q.

    Args:
        P: Candidate subset
        Q: Candidate superset
        tol: Absolute tolerance on normalized rows of Q

    Returns:
        True iff every row of Q is valid on P up to tol
    """
    if P.dim != Q.dim:
        raise DimensionError("inclusion test between sets of different dimension")
    Qn = normalize(Q)
    if is_empty(P):
        return True
    for row, offset in zip(Qn.G, Qn.g):
        if support(P.G, P.g, row) > offset + tol:
            return False
    return True


def equal_sets(P: Polytope, Q: Polytope, tol: float = TOL_SET) -> bool:
    """Set equality by mutual inclusion."""
    return is_subset(P, Q, tol) and is_subset(Q, P, tol)


def project(P: Polytope, keep_dims: Sequence[int], row_cap: int = FM_ROW_CAP,
            tol: float = TOL_RED) -> Polytope:
    """
    Orthogonal projection by Fourier-Motzkin elimination.

    Redundant rows are pruned after every eliminated coordinate, first by
    Chernikov's history rule and then by LP-based redundancy removal.

    Args:
        P: Polytope
        keep_dims: Coordinates to keep, in the order of the result
        row_cap: Largest admissible number of intermediate rows
        tol: Redundancy tolerance

    Returns:
        Polytope over the kept coordinates
    """
    keep_dims = [int(k) for k in keep_dims]
    if len(set(keep_dims)) != len(keep_dims) or any(k < 0 or k >= P.dim for k in keep_dims):
        raise DimensionError(f"invalid projection coordinates {keep_dims} for dimension {P.dim}")
    columns = list(range(P.dim))
    eliminate = [c for c in reversed(columns) if c not in keep_dims]
    kept, Pn = irredundant_indices(P, tol)
    G, g = Pn.G[kept], Pn.g[kept]
    history = np.eye(G.shape[0], dtype=bool)
    for step, coord in enumerate(eliminate):
        k = columns.index(coord)
        col = G[:, k]
        pos = np.flatnonzero(col > 1e-12)
        neg = np.flatnonzero(col < -1e-12)
        zero = np.flatnonzero(np.abs(col) <= 1e-12)
        n_new = pos.size * neg.size
        if zero.size + n_new > row_cap:
            raise ProjectionLimitError(
                f"Fourier-Motzkin elimination needs {zero.size + n_new} rows (cap {row_cap}); "
                "reduce the horizon, the number of samples or the state dimension"
            )
        Gp = G[pos] / col[pos, None]
        gp = g[pos] / col[pos]
        Gn = G[neg] / -col[neg, None]
        gn = g[neg] / -col[neg]
        G_new = (Gp[:, None, :] + Gn[None, :, :]).reshape(-1, G.shape[1])
        g_new = (gp[:, None] + gn[None, :]).reshape(-1)
        h_new = (history[pos][:, None, :] | history[neg][None, :, :]).reshape(-1, history.shape[1])
        chernikov = h_new.sum(axis=1) <= step + 2
        G = np.vstack([G[zero], G_new[chernikov]])
        g = np.concatenate([g[zero], g_new[chernikov]])
        history = np.vstack([history[zero], h_new[chernikov]])
        G = np.delete(G, k, axis=1)
        columns.pop(k)
        if G.shape[0] == 0:
            break
        kept, Pn = irredundant_indices(Polytope(G, g), tol)
        norms = np.linalg.norm(G, axis=1)
        nonzero = np.flatnonzero(norms > 1e-14)
        G, g, history = Pn.G[kept], Pn.g[kept], history[nonzero][kept]
        logger.debug(f"Eliminated coordinate {coord}: {G.shape[0]} rows remain")
    order = [columns.index(k) for k in keep_dims]
    if G.shape[0] == 0:
        return Polytope.whole_space(len(keep_dims))
    return Polytope(G[:, order], g, normalized=True)


def box_hull_vertices(P: Polytope) -> VertexSet:
    """
    Corners of the axis-aligned bounding box of P.

    Args:
        P: Bounded polytope

    Returns:
        VertexSet with 2^d corners
    """
    lower, upper = bounding_box(P)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise UnboundedSetError("box hull of an unbounded set")
    corners = np.array(list(itertools.product(*zip(lower, upper))))
    return VertexSet(corners)


def affine_hull(P: Polytope, tol: float = 1e-9) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Affine hull of a nonempty polytope.

    Returns:
        Tuple (x0, N, equality_mask): the hull is x0 + range(N), equality_mask marks
        the implicit equality rows of normalize(P)
    """
    Pn = normalize(P)
    d = Pn.dim
    x, radius = interior_point(Pn)
    mask = np.zeros(Pn.n_rows, dtype=bool)
    if radius > tol:
        return x, np.eye(d), mask
    for r in range(Pn.n_rows):
        low = -support(Pn.G, Pn.g, -Pn.G[r])
        if low >= Pn.g[r] - max(tol, 1e-7):
            mask[r] = True
    if not np.any(mask):
        return x, np.eye(d), mask
    Ge, ge = Pn.G[mask], Pn.g[mask]
    x0 = np.linalg.lstsq(Ge, ge, rcond=None)[0]
    N = scipy.linalg.null_space(Ge, rcond=1e-10)
    return x0, N, mask


def restrict_to_hull(P: Polytope) -> Tuple[Polytope, np.ndarray, np.ndarray]:
    """
    Full-dimensional description of P in affine-hull coordinates.

    Returns:
        Tuple (reduced polytope over z, x0, N) with x = x0 + N z
    """
    x0, N, mask = affine_hull(P)
    Pn = normalize(P)
    if N.shape[1] == Pn.dim and not np.any(mask):
        return Pn, np.zeros(Pn.dim), np.eye(Pn.dim)
    G = Pn.G[~mask] @ N
    g = Pn.g[~mask] - Pn.G[~mask] @ x0
    reduced = normalize(Polytope(G, g)) if G.shape[0] else Polytope.whole_space(N.shape[1])
    return reduced, x0, N


def exact_vertices(P: Polytope, vertex_cap: int = VERTEX_CAP) -> VertexSet:
    """
    Vertex enumeration of a bounded polytope.

    Flat polytopes are handled in their affine hull; full-dimensional ones
    through qhull's half-space intersection.

    Args:
        P: Bounded polytope of dimension at most vertex_cap
        vertex_cap: Largest admissible dimension

    Returns:
        VertexSet of the distinct vertices
    """
    if P.dim > vertex_cap:
        raise GeometryError(
            f"exact vertex enumeration is capped at dimension {vertex_cap} (got {P.dim}); use box_hull_vertices"
        )
    reduced, x0, N = restrict_to_hull(P)
    k = N.shape[1]
    if k == 0:
        return VertexSet(x0.reshape(1, -1))
    if k == 1:
        low = -support(reduced.G, reduced.g, -np.ones(1))
        high = support(reduced.G, reduced.g, np.ones(1))
        if not (np.isfinite(low) and np.isfinite(high)):
            raise UnboundedSetError("vertex enumeration of an unbounded set")
        z = np.array([[low], [high]]) if high - low > TOL_FEAS else np.array([[low]])
        return VertexSet(x0 + z @ N.T)
    center, radius = chebyshev_center(reduced)
    if radius <= 1e-12:
        raise GeometryError("vertex enumeration needs a nonempty relative interior")
    halfspaces = np.hstack([reduced.G, -reduced.g[:, None]])
    try:
        hs = HalfspaceIntersection(halfspaces, center)
    except QhullError as exc:
        raise GeometryError(f"vertex enumeration failed: {exc}") from exc
    Z = hs.intersections
    Z = Z[np.all(np.isfinite(Z), axis=1)]
    _, first = np.unique(np.round(Z, 9), axis=0, return_index=True)
    Z = Z[np.sort(first)]
    return VertexSet(x0 + Z @ N.T)


def extreme_points(points: np.ndarray) -> np.ndarray:
    """
    Indices of the extreme points of a finite point cloud.

    Args:
        points: Array of shape (n, d)

    Returns:
        Sorted indices of points that are vertices of the convex hull
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _, unique = np.unique(np.round(points, 12), axis=0, return_index=True)
    unique = np.sort(unique)
    if unique.size <= 2:
        return unique
    cloud = points[unique]
    centered = cloud - cloud.mean(axis=0)
    _, sigma, Vt = np.linalg.svd(centered, full_matrices=False)
    rank = int(np.sum(sigma > 1e-10 * max(sigma[0], 1e-300)))
    if rank == 0:
        return unique[:1]
    coords = centered @ Vt[:rank].T
    if rank == 1:
        return np.sort(unique[[int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))]])
    if cloud.shape[0] <= rank + 1:
        return unique
    try:
        hull = ConvexHull(coords)
    except QhullError:
        return unique
    return np.sort(unique[hull.vertices])
