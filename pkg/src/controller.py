"""
Online Controller
Sample-average cost, robust first-step constraint and the quadratic program
solved at every time step, plus the shifted candidate solution used to track
recursive feasibility.

The decision vector of every problem is z = (xi, v_f) with
u_l = K xi_l + v_l; at run time the xi-columns are folded into the
right-hand sides so the QP is posed over v_f alone.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .behavioral import IoTrajectory
from .consistency import ConsistencyModel
from .errors import DimensionError, EmptySetError, InfeasibleDesignError
from .geometry import (Polytope, contains, exact_vertices, intersect, is_empty, project,
                       robust_preimage_rows)
from .geometry.polytope import FM_ROW_CAP, TOL_FEAS
from .predictor import PredictorBasis, PredictorMatrices, UncertaintySample, build_basis, build_predictors
from .solvers import DualActiveSetQP, QpResult
from .synthesis import VertexDynamics

logger = logging.getLogger(__name__)


def _mat(value) -> np.ndarray:
    return np.atleast_2d(np.asarray(value, dtype=float))


@dataclass(frozen=True)
class CostModel:
    """
    Sample-average cost J_N(xi, v_f) = z^T Q_ocp z + q_ocp^T z + c over z = (xi, v_f).

    Attributes:
        Q_ocp: Symmetric positive semidefinite quadratic term.
        q_ocp: Linear term.
        c: Constant.
        n_samples: Number of averaged samples.
    """

    Q_ocp: np.ndarray
    q_ocp: np.ndarray
    c: float
    n_samples: int = 1

    def __post_init__(self):
        Q = _mat(self.Q_ocp)
        object.__setattr__(self, "Q_ocp", 0.5 * (Q + Q.T))
        object.__setattr__(self, "q_ocp", np.asarray(self.q_ocp, dtype=float).reshape(-1))
        if self.q_ocp.size != Q.shape[0]:
            raise DimensionError(f"cost linear term has {self.q_ocp.size} entries, expected {Q.shape[0]}")
        if np.linalg.eigvalsh(self.Q_ocp).min() < -1e-8 * max(1.0, np.abs(Q).max()):
            raise DimensionError("sample-average cost matrix is not positive semidefinite")

    @property
    def n_z(self) -> int:
        return self.Q_ocp.shape[0]

    def to_dict(self) -> Dict:
        return {"Q_ocp": self.Q_ocp.tolist(), "q_ocp": self.q_ocp.tolist(), "c": self.c,
                "n_samples": self.n_samples}

    @classmethod
    def from_dict(cls, data: Dict) -> "CostModel":
        return cls(_mat(data["Q_ocp"]), np.asarray(data["q_ocp"], dtype=float), float(data["c"]),
                   int(data.get("n_samples", 1)))


def sample_cost(pm: PredictorMatrices, Q_bar: np.ndarray, R_bar: np.ndarray, P: np.ndarray):
    """
    Quadratic form of the cost predicted by one sample.

    Returns:
        Tuple (Q_i, q_i, c_i)
    """
    Q_i = pm.My.T @ Q_bar @ pm.My + pm.Mu.T @ R_bar @ pm.Mu + pm.Mxi.T @ P @ pm.Mxi
    q_i = 2.0 * (pm.my @ Q_bar @ pm.My + pm.mu @ R_bar @ pm.Mu + pm.mxi @ P @ pm.Mxi)
    c_i = float(pm.my @ Q_bar @ pm.my + pm.mu @ R_bar @ pm.mu + pm.mxi @ P @ pm.mxi)
    return Q_i, q_i, c_i


def average_cost(predictors: Sequence[PredictorMatrices], Q, R, P, N: int) -> CostModel:
    """Average the per-sample quadratic forms with Q_bar = I_N kron Q and R_bar = I_N kron R."""
    if not predictors:
        raise DimensionError("the sample-average cost needs at least one sample")
    Q_bar = np.kron(np.eye(N), _mat(Q))
    R_bar = np.kron(np.eye(N), _mat(R))
    P = _mat(P)
    n_z = predictors[0].My.shape[1]
    Q_sum, q_sum, c_sum = np.zeros((n_z, n_z)), np.zeros(n_z), 0.0
    for pm in predictors:
        Q_i, q_i, c_i = sample_cost(pm, Q_bar, R_bar, P)
        Q_sum += Q_i
        q_sum += q_i
        c_sum += c_i
    n = len(predictors)
    return CostModel(Q_sum / n, q_sum / n, c_sum / n, n)


def build_cost(traj: IoTrajectory, K, cm: ConsistencyModel, samples: Sequence[UncertaintySample], Q, R, P,
               N: int, basis: Optional[PredictorBasis] = None, threads: int = 1) -> CostModel:
    """
    Sample-average cost over the given uncertainty samples.

    Args:
        traj: Recorded trajectory
        K: Feedback gain
        cm: Consistency model
        samples: Cost samples
        Q: Output weight
        R: Input weight
        P: Terminal weight
        N: Prediction horizon
        basis: Optional precomputed predictor basis
        threads: Worker threads for the predictor construction

    Returns:
        CostModel
    """
    basis = basis or build_basis(traj, K, N)
    predictors = build_predictors(basis, cm, samples, threads)
    cost = average_cost(predictors, Q, R, P, N)
    logger.info(f"Sample-average cost over {cost.n_samples} samples")
    return cost


def evaluate_cost(cost: CostModel, xi, v_f) -> float:
    """J_N at (xi, v_f)."""
    z = np.concatenate([np.asarray(xi, dtype=float).reshape(-1), np.asarray(v_f, dtype=float).reshape(-1)])
    if z.size != cost.n_z:
        raise DimensionError(f"cost argument must have {cost.n_z} entries, got {z.size}")
    return float(z @ cost.Q_ocp @ z + cost.q_ocp @ z + cost.c)


def build_first_step_constraint(dyn: VertexDynamics, K, D: Polytope, Xi_inf: Polytope, N: int) -> Polytope:
    """
    Robust one-step constraint C_R over (xi, v_f).

    Every vertex system must map (xi, v_0) into Xi_inf for every disturbance
    vertex; the columns of v_1 ... v_{N-1} are zero.

    Args:
        dyn: Vertex dynamics
        K: Feedback gain
        D: Disturbance support
        Xi_inf: Robust control invariant set
        N: Prediction horizon

    Returns:
        Polytope C_R
    """
    if Xi_inf.dim != dyn.n_xi:
        raise DimensionError(f"invariant set has dimension {Xi_inf.dim}, expected {dyn.n_xi}")
    maps = [np.hstack([A_cl, B]) for A_cl, B in zip(dyn.closed_loop(K), dyn.B_tilde)]
    G, g = robust_preimage_rows(Xi_inf, maps, dyn.E_tilde, exact_vertices(D, max(D.dim, 1)))
    m = dyn.m
    G = np.hstack([G, np.zeros((G.shape[0], m * (N - 1)))])
    C_R = Polytope(G, g)
    if is_empty(C_R):
        raise EmptySetError("disturbance too large for the invariant set: the first-step constraint is empty")
    return C_R


def feasible_first_inputs(C: Polytope, n_xi: int, m: int, row_cap: int = FM_ROW_CAP) -> Polytope:
    """Projection C_N of C onto (xi, v_0)."""
    return project(C, list(range(n_xi + m)), row_cap=row_cap)


@dataclass(frozen=True)
class OcpProblem:
    """
    Optimal control problem solved at every time step.

    Attributes:
        cost: Sample-average cost.
        C: Aggregate sampled constraint set over (xi, v_f).
        C_R: First-step constraint over (xi, v_f).
        n_xi, m, N: Dimensions.
    """

    cost: CostModel
    C: Polytope
    C_R: Polytope
    n_xi: int
    m: int
    N: int
    _qp: DualActiveSetQP = field(init=False, repr=False, compare=False)
    _rows: Polytope = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n_z = self.n_xi + self.m * self.N
        for name, P in (("C", self.C), ("C_R", self.C_R)):
            if P.dim != n_z:
                raise DimensionError(f"{name} has dimension {P.dim}, expected {n_z}")
            if not (np.all(np.isfinite(P.G)) and np.all(np.isfinite(P.g))):
                raise DimensionError(f"{name} contains non-finite entries")
        if self.cost.n_z != n_z:
            raise DimensionError(f"cost has dimension {self.cost.n_z}, expected {n_z}")
        rows = intersect(self.C, self.C_R)
        if is_empty(rows):
            raise EmptySetError("C and C_R do not intersect; no extended state admits a feasible input sequence")
        object.__setattr__(self, "_rows", rows)
        v = slice(self.n_xi, n_z)
        object.__setattr__(self, "_qp", DualActiveSetQP(2.0 * self.cost.Q_ocp[v, v]))

    @property
    def constraints(self) -> Polytope:
        """C intersected with C_R."""
        return self._rows

    def folded(self, xi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Linear term and constraint rows of the QP over v_f at a given xi."""
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.size != self.n_xi or not np.all(np.isfinite(xi)):
            raise DimensionError(f"extended state must be a finite {self.n_xi}-vector")
        n = self.n_xi
        Q, q = self.cost.Q_ocp, self.cost.q_ocp
        f = 2.0 * Q[n:, :n] @ xi + q[n:]
        G = self._rows.G
        return f, G[:, n:], self._rows.g - G[:, :n] @ xi

    def to_dict(self) -> Dict:
        return {"cost": self.cost.to_dict(), "C": self.C.to_dict(), "C_R": self.C_R.to_dict(),
                "n_xi": self.n_xi, "m": self.m, "N": self.N}

    @classmethod
    def from_dict(cls, data: Dict) -> "OcpProblem":
        return cls(CostModel.from_dict(data["cost"]), Polytope.from_dict(data["C"]),
                   Polytope.from_dict(data["C_R"]), int(data["n_xi"]), int(data["m"]), int(data["N"]))


def solve_ocp(prob: OcpProblem, xi) -> QpResult:
    """
    Minimize J_N(xi, v_f) subject to (xi, v_f) in C and C_R.

    Returns:
        QpResult whose objective is the full cost J_N at the minimizer
    """
    f, A, b = prob.folded(xi)
    result = prob._qp.solve(f, A, b)
    logger.debug(f"OCP solve: {result.status} after {result.iterations} iterations")
    return replace(result, objective=evaluate_cost(prob.cost, xi, result.v_f_opt))


def control_step(prob: OcpProblem, K, xi) -> Tuple[np.ndarray, QpResult]:
    """
    Control law u = K xi + v*_0.

    Raises:
        InfeasibleDesignError: when the OCP is infeasible, which contradicts recursive feasibility
    """
    result = solve_ocp(prob, xi)
    if not result.optimal:
        logger.error(f"OCP {result.status} at xi={np.round(np.asarray(xi, dtype=float), 6).tolist()}: "
                     f"recursive feasibility falsified")
        raise InfeasibleDesignError(f"OCP is {result.status} at the current extended state")
    u = _mat(K) @ np.asarray(xi, dtype=float).reshape(-1) + result.v_f_opt[:prob.m]
    return u, result


def candidate_solution(v_f_prev, K, A_cl_nominal, E, d_k) -> np.ndarray:
    """
    Shifted candidate for the next step.

    v_l = v*_{l+1} + K A_cl^l E d_k for l < N - 1 and v_{N-1} = K A_cl^{N-1} E d_k.

    Args:
        v_f_prev: Previous optimal input offsets, length m N
        K: Feedback gain
        A_cl_nominal: Nominal closed-loop matrix
        E: Disturbance input matrix
        d_k: Disturbance realized at the previous step

    Returns:
        Candidate input offsets, length m N
    """
    K, A_cl, E = _mat(K), _mat(A_cl_nominal), _mat(E)
    m = K.shape[0]
    v_prev = np.asarray(v_f_prev, dtype=float).reshape(-1, m)
    N = v_prev.shape[0]
    shifted = np.vstack([v_prev[1:], np.zeros((1, m))])
    state = E @ np.asarray(d_k, dtype=float).reshape(-1)
    for l in range(N):
        shifted[l] += K @ state
        state = A_cl @ state
    return shifted.reshape(-1)


def check_candidate_feasible(prob: OcpProblem, xi, v_f, tol: float = TOL_FEAS) -> bool:
    """Membership of (xi, v_f) in C and C_R."""
    z = np.concatenate([np.asarray(xi, dtype=float).reshape(-1), np.asarray(v_f, dtype=float).reshape(-1)])
    return contains(prob.constraints, z, tol)
