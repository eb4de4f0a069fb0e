"""
Linear Programming Utility
Thin wrapper around scipy's HiGHS interface used by every set operation.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"

_STATUS = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}


@dataclass
class LpResult:
    """
    Outcome of a linear program.

    Attributes:
        status: "optimal", "infeasible", "unbounded" or "failed".
        x: Minimizer when optimal.
        value: Optimal value of the minimization, +inf if infeasible, -inf if unbounded.
    """

    status: str
    x: Optional[np.ndarray]
    value: float

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def solve_lp(c: np.ndarray, A_ub: Optional[np.ndarray] = None, b_ub: Optional[np.ndarray] = None,
             A_eq: Optional[np.ndarray] = None, b_eq: Optional[np.ndarray] = None,
             bounds=(None, None)) -> LpResult:
    """
    Minimize c^T x subject to A_ub x <= b_ub and A_eq x = b_eq.

    Variables are free unless ``bounds`` says otherwise.

    Args:
        c: Cost vector
        A_ub: Inequality matrix
        b_ub: Inequality offsets
        A_eq: Equality matrix
        b_eq: Equality offsets
        bounds: Variable bounds in linprog format

    Returns:
        LpResult
    """
    c = np.asarray(c, dtype=float)
    if A_ub is not None and np.asarray(A_ub).shape[0] == 0:
        A_ub, b_ub = None, None
    if A_eq is not None and np.asarray(A_eq).shape[0] == 0:
        A_eq, b_eq = None, None
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    status = _STATUS.get(res.status, FAILED)
    if status == OPTIMAL:
        return LpResult(status, res.x, float(res.fun))
    if status == INFEASIBLE:
        return LpResult(status, None, np.inf)
    if status == UNBOUNDED:
        return LpResult(status, None, -np.inf)
    logger.debug(f"LP terminated with status {res.status}: {res.message}")
    return LpResult(status, None, np.nan)


def support(G: np.ndarray, g: np.ndarray, direction: np.ndarray,
            cap: Optional[float] = None) -> float:
    """
    Support function max { direction^T x | G x <= g }.

    Args:
        G: Half-space normals
        g: Half-space offsets
        direction: Direction of maximization
        cap: Optional extra constraint direction^T x <= cap that keeps the LP bounded

    Returns:
        Maximum value, +inf when unbounded, -inf when the set is empty
    """
    direction = np.asarray(direction, dtype=float)
    if cap is not None:
        G = np.vstack([G, direction])
        g = np.append(g, cap)
    res = solve_lp(-direction, G, g)
    if res.status == INFEASIBLE:
        return -np.inf
    if res.status == UNBOUNDED:
        return np.inf
    if not res.optimal:
        # HiGHS occasionally reports "failed" on unbounded-or-infeasible instances
        return np.inf
    return -res.value
