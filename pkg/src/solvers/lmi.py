"""
LMI Feasibility
Semidefinite feasibility problems posed with cvxpy and re-verified with an
independent eigendecomposition of every block.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np

logger = logging.getLogger(__name__)

SOLVED = "solved"
INFEASIBLE = "infeasible"
UNDECIDED = "undecided"

TOL_LMI = 1e-6

# Relative solver slack accepted when re-verifying the margin
_MARGIN_SLACK = 1e-3
_MARGIN_ROUNDS = 3
_MARGIN_BOOST = 1.1

_INFEASIBLE_STATUSES = (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE)
_SOLVED_STATUSES = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


@dataclass
class LmiResult:
    """
    Outcome of an LMI problem.

    Attributes:
        status: "solved", "infeasible" or "undecided".
        values: Numerical values of the named decision variables.
        min_eigenvalues: Smallest eigenvalue of every block at the returned point.
        objective: Objective value when an objective was given.
    """

    status: str
    values: Dict[str, np.ndarray] = field(default_factory=dict)
    min_eigenvalues: List[float] = field(default_factory=list)
    objective: Optional[float] = None

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


def symmetric_part(block):
    """Symmetrized cvxpy expression or array."""
    return 0.5 * (block + block.T)


def _solve(blocks: Sequence, margins: Sequence[float], goal, constraints: Sequence, solver: Optional[str]):
    lmis = [symmetric_part(B) >> m * np.eye(B.shape[0]) for B, m in zip(blocks, margins)]
    problem = cp.Problem(goal, lmis + list(constraints))
    try:
        problem.solve(solver=solver)
    except cp.error.SolverError as exc:
        logger.warning(f"LMI solver failed: {exc}")
        return None
    return problem


def _block_spectrum(B) -> Tuple[float, float]:
    """Smallest eigenvalue and spectral norm of the symmetric part of a solved block."""
    value = np.asarray(B.value, dtype=float)
    eigs = np.linalg.eigvalsh(0.5 * (value + value.T))
    return float(eigs.min()), float(np.abs(eigs).max())


def lmi_feasibility(variables: Dict[str, cp.Variable], blocks: Sequence, objective=None,
                    margin: float = TOL_LMI, constraints: Sequence = (),
                    solver: Optional[str] = None) -> LmiResult:
    """
    Find a point with every block positive definite with a margin relative to its norm.

    A block B passes re-verification when lambda_min(B) >= margin max(1, ||B||),
    up to a relative slack of 1e-3. Blocks that fall short are re-imposed with
    the margin scaled by their norm, for at most a few rounds.

    Args:
        variables: Named decision variables whose values are returned
        blocks: Affine matrix expressions required to satisfy block >= margin I
        objective: Optional linear objective to minimize
        margin: Relative eigenvalue margin
        constraints: Additional cvxpy constraints
        solver: Optional cvxpy solver name

    Returns:
        LmiResult; a solver answer that fails re-verification is "undecided"
    """
    goal = cp.Minimize(objective) if objective is not None else cp.Minimize(0)
    margins = [margin] * len(blocks)
    result = LmiResult(UNDECIDED)
    for round_index in range(_MARGIN_ROUNDS):
        problem = _solve(blocks, margins, goal, constraints, solver)
        if problem is None:
            return result
        if problem.status in _INFEASIBLE_STATUSES:
            # infeasible after rescaling only; the unscaled problem was solved
            return LmiResult(INFEASIBLE) if round_index == 0 else result
        if problem.status not in _SOLVED_STATUSES:
            logger.warning(f"LMI solver returned status '{problem.status}'")
            return result
        spectra = [_block_spectrum(B) for B in blocks]
        min_eigs = [low for low, _ in spectra]
        values = {name: np.asarray(var.value, dtype=float) for name, var in variables.items()}
        objective_value = float(problem.value) if objective is not None else None
        result = LmiResult(UNDECIDED, values, min_eigs, objective_value)
        required = [margin * (1.0 - _MARGIN_SLACK) * max(1.0, norm) for _, norm in spectra]
        short = [low < req for low, req in zip(min_eigs, required)]
        if not any(short):
            return LmiResult(SOLVED, values, min_eigs, objective_value)
        if min(min_eigs, default=1.0) <= 0.0:
            break
        margins = [margin * max(1.0, norm) * _MARGIN_BOOST if miss else m
                   for (_, norm), miss, m in zip(spectra, short, margins)]
        logger.debug(f"LMI margin round {round_index + 1}: rescaling {sum(short)} block(s)")
    logger.warning(f"LMI solution fails re-verification (min eigenvalue {min(result.min_eigenvalues):.3e})")
    return result
