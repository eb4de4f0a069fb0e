"""
Dual Active-Set QP
Goldfarb-Idnani method for dense strictly convex quadratic programs

    minimize 1/2 x^T H x + f^T x   subject to   A x <= b.

The iteration starts at the unconstrained minimizer and adds violated
constraints one at a time (lowest index first) while keeping the active
multipliers dual feasible, so every accepted point carries its own
optimality certificate.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from ..errors import DimensionError

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"


@dataclass
class QpResult:
    """
    Outcome of a QP solve.

    Attributes:
        v_f_opt: Minimizer (the decision vector of the solved problem).
        objective: Objective value at the minimizer.
        status: "optimal", "infeasible" or "max_iter".
        kkt_residual: Largest of the primal, stationarity and complementarity residuals.
        multipliers: Lagrange multipliers of all rows (zero for inactive rows).
        active_set: Indices of the active rows.
        iterations: Number of inner iterations.
    """

    v_f_opt: np.ndarray
    objective: float
    status: str
    kkt_residual: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    active_set: List[int] = field(default_factory=list)
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def kkt_residuals(H: np.ndarray, f: np.ndarray, A: np.ndarray, b: np.ndarray, x: np.ndarray,
                  lam: np.ndarray) -> Tuple[float, float, float]:
    """
    Primal feasibility, stationarity and complementarity residuals.

    Returns:
        Tuple (primal, stationarity, complementarity)
    """
    slack = A @ x - b if A.shape[0] else np.zeros(0)
    primal = float(max(0.0, slack.max())) if slack.size else 0.0
    stationarity = float(np.max(np.abs(H @ x + f + A.T @ lam))) if x.size else 0.0
    complementarity = float(np.max(np.abs(lam * slack))) if slack.size else 0.0
    return primal, stationarity, complementarity


class DualActiveSetQP:
    """Goldfarb-Idnani solver for a fixed Hessian."""

    def __init__(self, H: np.ndarray, ridge: float = 1e-9, feas_tol: float = 1e-9,
                 max_iter: Optional[int] = None):
        """
        Factor the Hessian once.

        Args:
            H: Symmetric Hessian; a ridge is added when it is not positive definite
            ridge: Ridge magnitude used as a fallback
            feas_tol: Violation threshold on normalized rows
            max_iter: Iteration cap (defaults to 10 (n + rows) + 50 per solve)
        """
        H = np.atleast_2d(np.asarray(H, dtype=float))
        if H.shape[0] != H.shape[1]:
            raise DimensionError(f"Hessian must be square, got {H.shape}")
        self.H = 0.5 * (H + H.T)
        self.n = H.shape[0]
        self.feas_tol = feas_tol
        self.max_iter = max_iter
        self.ridged = False
        try:
            factor = scipy.linalg.cho_factor(self.H)
        except np.linalg.LinAlgError:
            logger.warning(f"QP Hessian is not positive definite; adding ridge {ridge:g} I")
            self.ridged = True
            factor = scipy.linalg.cho_factor(self.H + ridge * np.eye(self.n))
        self.H_inv = scipy.linalg.cho_solve(factor, np.eye(self.n))

    def solve(self, f: np.ndarray, A: np.ndarray, b: np.ndarray) -> QpResult:
        """
        Solve the QP for a linear term and a constraint set.

        Args:
            f: Linear cost term
            A: Constraint matrix (rows x n)
            b: Constraint offsets

        Returns:
            QpResult
        """
        f = np.asarray(f, dtype=float).reshape(-1)
        A = np.asarray(A, dtype=float).reshape(-1, self.n)
        b = np.asarray(b, dtype=float).reshape(-1)
        if f.size != self.n or A.shape[0] != b.size:
            raise DimensionError("QP data dimensions do not match the Hessian")
        n_rows = A.shape[0]
        norms = np.linalg.norm(A, axis=1)
        norms = np.where(norms > 0.0, norms, 1.0)
        max_iter = self.max_iter or 10 * (self.n + n_rows) + 50
        H_inv = self.H_inv
        x = -H_inv @ f
        active: List[int] = []
        lam = np.zeros(0)
        iterations = 0
        status = None
        while status is None:
            violation = (A @ x - b) / norms
            if active:
                violation[active] = -np.inf
            candidates = np.flatnonzero(violation > self.feas_tol)
            if candidates.size == 0:
                status = OPTIMAL
                break
            p = int(candidates[0])
            a = A[p]
            lam_p = 0.0
            while True:
                iterations += 1
                if iterations > max_iter:
                    status = MAX_ITER
                    break
                H_inv_a = H_inv @ a
                if active:
                    N = A[active].T
                    H_inv_N = H_inv @ N
                    gram = N.T @ H_inv_N
                    rhs = H_inv_N.T @ a
                    try:
                        r = np.linalg.solve(gram, rhs)
                    except np.linalg.LinAlgError:
                        r = np.linalg.lstsq(gram, rhs, rcond=None)[0]
                    z = -(H_inv_a - H_inv_N @ r)
                else:
                    r = np.zeros(0)
                    z = -H_inv_a
                blocking = None
                t_partial = np.inf
                for j in range(r.size):
                    if r[j] > 1e-12:
                        ratio = lam[j] / r[j]
                        if ratio < t_partial:
                            t_partial, blocking = ratio, j
                decrease = -(a @ z)
                if decrease <= 1e-14 * (1.0 + a @ a):
                    if blocking is None:
                        status = INFEASIBLE
                        break
                    lam = lam - t_partial * r
                    lam_p += t_partial
                    del active[blocking]
                    lam = np.delete(lam, blocking)
                    continue
                t_full = (a @ x - b[p]) / decrease
                if t_full <= t_partial:
                    x = x + t_full * z
                    lam = np.append(lam - t_full * r, lam_p + t_full)
                    active.append(p)
                    break
                x = x + t_partial * z
                lam = lam - t_partial * r
                lam_p += t_partial
                del active[blocking]
                lam = np.delete(lam, blocking)
        multipliers = np.zeros(n_rows)
        if active:
            multipliers[active] = np.clip(lam, 0.0, None)
        objective = float(0.5 * x @ self.H @ x + f @ x)
        residual = max(kkt_residuals(self.H, f, A, b, x, multipliers))
        if status != OPTIMAL:
            logger.debug(f"QP terminated with status {status} after {iterations} iterations")
        return QpResult(v_f_opt=x, objective=objective, status=status, kkt_residual=residual,
                        multipliers=multipliers, active_set=list(active), iterations=iterations)


def solve_qp(H: np.ndarray, f: np.ndarray, A: np.ndarray, b: np.ndarray) -> QpResult:
    """One-shot convenience wrapper around DualActiveSetQP."""
    return DualActiveSetQP(H).solve(f, A, b)
