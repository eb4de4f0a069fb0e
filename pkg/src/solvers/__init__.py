"""Numerical kernels: dense dual active-set QP and LMI feasibility."""

from .lmi import INFEASIBLE, SOLVED, UNDECIDED, LmiResult, lmi_feasibility, symmetric_part
from .qp import DualActiveSetQP, QpResult, kkt_residuals, solve_qp

__all__ = [
    'DualActiveSetQP', 'QpResult', 'kkt_residuals', 'solve_qp',
    'LmiResult', 'lmi_feasibility', 'symmetric_part', 'SOLVED', 'INFEASIBLE', 'UNDECIDED',
]
