"""
Terminal Ingredients
Data-driven synthesis of the feedback gain, the terminal weight and the
terminal set for every system consistent with the data, plus the numerical
certificates used to judge closed-loop stability in expectation.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import cvxpy as cp
import numpy as np
import scipy.linalg

from .behavioral import ExtendedStateLayout, IoTrajectory, extended_state_data
from .consistency import ConsistencyModel, SystemMatrixSet, reconstruct_disturbance
from .errors import DimensionError, SynthesisError
from .geometry import InvariantSetResult, Polytope, exact_vertices, rpi_terminal_set
from .geometry.polytope import MAX_ITER, TOL_SET
from .solvers import lmi_feasibility
from .solvers.lmi import TOL_LMI

logger = logging.getLogger(__name__)

DATA_DRIVEN = "data-driven"
USER_SUPPLIED = "user-supplied"
FALLBACK = "fallback"

CERTIFIED = "certified"
NOT_CERTIFIED = "not certified"
VIOLATED = "violated"


def _mat(value) -> np.ndarray:
    return np.atleast_2d(np.asarray(value, dtype=float))


def shift_template(layout: ExtendedStateLayout):
    """
    Fixed parts of the extended-state dynamics.

    Returns:
        Tuple (A_bar, B_bar, E_tilde): the shift rows of A and B (all rows except
        the last p) and the disturbance input [0; I_p]
    """
    m, p, t_ini = layout.m, layout.p, layout.t_ini
    n_xi = layout.n_xi
    A = np.zeros((n_xi, n_xi))
    B = np.zeros((n_xi, m))
    nu = m * t_ini
    A[:nu - m, m:nu] = np.eye(nu - m)
    B[nu - m:nu] = np.eye(m)
    A[nu:n_xi - p, nu + p:] = np.eye(n_xi - nu - p)
    E = np.zeros((n_xi, p))
    E[n_xi - p:] = np.eye(p)
    return A[:n_xi - p], B[:n_xi - p], E


@dataclass
class VertexDynamics:
    """
    Extended-state dynamics xi+ = A_j xi + B_j u + E d of every matrix vertex.

    Attributes:
        A_tilde: Per-vertex state matrices.
        B_tilde: Per-vertex input matrices.
        E_tilde: Disturbance input matrix.
    """

    A_tilde: List[np.ndarray]
    B_tilde: List[np.ndarray]
    E_tilde: np.ndarray

    def __post_init__(self):
        self.A_tilde = [_mat(A) for A in self.A_tilde]
        self.B_tilde = [_mat(B) for B in self.B_tilde]
        self.E_tilde = _mat(self.E_tilde)
        if len(self.A_tilde) != len(self.B_tilde) or not self.A_tilde:
            raise DimensionError("vertex dynamics need matching, nonempty A and B lists")

    def __len__(self) -> int:
        return len(self.A_tilde)

    @property
    def n_xi(self) -> int:
        return self.A_tilde[0].shape[0]

    @property
    def m(self) -> int:
        return self.B_tilde[0].shape[1]

    def closed_loop(self, K) -> List[np.ndarray]:
        """Closed-loop matrices A_j + B_j K."""
        K = _mat(K)
        return [A + B @ K for A, B in zip(self.A_tilde, self.B_tilde)]

    def spectral_radii(self, K) -> List[float]:
        return [float(max(abs(np.linalg.eigvals(A)))) for A in self.closed_loop(K)]


def vertex_dynamics(sysset: SystemMatrixSet, layout: ExtendedStateLayout) -> VertexDynamics:
    """
    Stack the shift template with every vertex [Phi_j Psi_j].
    """
    A_bar, B_bar, E = shift_template(layout)
    A_list, B_list = [], []
    for V in sysset.vertices:
        if V.shape != (layout.p, layout.n_xi + layout.m):
            raise DimensionError(f"vertex must be {layout.p}x{layout.n_xi + layout.m}, got {V.shape}")
        A_list.append(np.vstack([A_bar, V[:, :layout.n_xi]]))
        B_list.append(np.vstack([B_bar, V[:, layout.n_xi:]]))
    return VertexDynamics(A_list, B_list, E)


def nominal_dynamics(sysset: SystemMatrixSet, layout: ExtendedStateLayout) -> VertexDynamics:
    """Dynamics of the nominal (Chebyshev-center) system as a single vertex."""
    return vertex_dynamics(SystemMatrixSet([sysset.nominal], sysset.provenance, sysset.nominal), layout)


@dataclass
class GainResult:
    """
    Feedback gain with its certificate.

    Attributes:
        K: Gain of shape (m, n_xi).
        provenance: "data-driven", "user-supplied" or "fallback".
        spectral_radii: Closed-loop spectral radius at every vertex.
        status: LMI outcome.
    """

    K: np.ndarray
    provenance: str
    spectral_radii: List[float]
    status: str

    @property
    def stabilizing(self) -> bool:
        return max(self.spectral_radii) < 1.0


def data_driven_gain(traj: IoTrajectory, cm: ConsistencyModel, sysset: SystemMatrixSet,
                     fallback=None, margin: float = TOL_LMI) -> GainResult:
    """
    Gain stabilizing every consistent system, found from data.

    Solves [[H_1(xi) Theta, H+_j Theta], [(H+_j Theta)^T, H_1(xi) Theta]] > 0 for all
    vertices with Theta = S^+ [Y; L], so that H_1(xi) Theta = Y and H_1(u) Theta = L,
    and returns K = L Y^{-1}. Here H+_j = [xi_2 ... xi_{T+1}] - E H_1(D_j).

    Args:
        traj: Recorded trajectory
        cm: Consistency model
        sysset: Consistent system matrices with their free-block vertices
        fallback: Gain used when the LMI fails
        margin: LMI margin

    Returns:
        GainResult
    """
    layout = traj.layout
    dyn = vertex_dynamics(sysset, layout)
    n_xi, m = layout.n_xi, layout.m
    xi = extended_state_data(traj, include_successor=True)
    successors = xi[1:].T
    Y = cp.Variable((n_xi, n_xi), symmetric=True)
    L = cp.Variable((m, n_xi))
    Theta = cm.S_pinv @ cp.vstack([Y, L])
    blocks = []
    free_vertices = sysset.free_vertices
    for j in range(len(sysset)):
        if free_vertices.size:
            D_j = reconstruct_disturbance(cm, cm.unvectorize(free_vertices[j]))
        else:
            D_j = cm.outputs - sysset.vertices[j] @ cm.S
        H_plus = successors - dyn.E_tilde @ D_j
        top_right = H_plus @ Theta
        blocks.append(cp.bmat([[Y, top_right], [top_right.T, Y]]))
    result = lmi_feasibility({"Y": Y, "L": L}, blocks, margin=margin,
                             constraints=[Y >> np.eye(n_xi)])
    if result.solved:
        K = result.values["L"] @ np.linalg.inv(result.values["Y"])
        radii = dyn.spectral_radii(K)
        if max(radii) < 1.0:
            logger.info(f"Data-driven gain K={np.round(K, 4).tolist()} (max spectral radius {max(radii):.4f})")
            return GainResult(K, DATA_DRIVEN, radii, result.status)
        logger.warning(f"LMI gain fails the spectral-radius check (max {max(radii):.4f})")
    if fallback is None:
        raise SynthesisError(f"no stabilizing gain found (LMI status '{result.status}') and no fallback gain configured")
    K = _mat(fallback)
    radii = dyn.spectral_radii(K)
    logger.warning(f"Using configured fallback gain (LMI status '{result.status}', max spectral radius {max(radii):.4f})")
    return GainResult(K, FALLBACK, radii, result.status)


def _stage_weight(K, Q, R, E) -> np.ndarray:
    K, Q, R, E = _mat(K), _mat(Q), _mat(R), _mat(E)
    return K.T @ R @ K + E @ Q @ E.T


def terminal_weight(K, Q, R, dyn: VertexDynamics, margin: float = TOL_LMI) -> np.ndarray:
    """
    Trace-minimal terminal weight satisfying the terminal decrease condition at every vertex.

    Args:
        K: Feedback gain
        Q: Output weight
        R: Input weight
        dyn: Vertex dynamics
        margin: LMI margin

    Returns:
        P = P_tilde - E Q E^T
    """
    n = dyn.n_xi
    Q_P = _stage_weight(K, Q, R, dyn.E_tilde)
    P_t = cp.Variable((n, n), symmetric=True)
    blocks = [P_t - Q_P]
    for A_cl in dyn.closed_loop(K):
        blocks.append(cp.bmat([[P_t - Q_P, A_cl.T @ P_t], [P_t @ A_cl, P_t]]))
    result = lmi_feasibility({"P_tilde": P_t}, blocks, objective=cp.trace(P_t), margin=margin)
    if not result.solved:
        raise SynthesisError(
            f"terminal weight LMI is {result.status}; shrink the uncertainty set or choose a different gain"
        )
    P_tilde = result.values["P_tilde"]
    P = P_tilde - dyn.E_tilde @ _mat(Q) @ dyn.E_tilde.T
    return 0.5 * (P + P.T)


def terminal_decrease(K, P, Q, R, dyn: VertexDynamics) -> List[float]:
    """
    Largest eigenvalue of A_cl^T P A_cl - P + K^T R K + A_cl^T E Q E^T A_cl at every vertex.
    """
    K, P = _mat(K), _mat(P)
    EQE = dyn.E_tilde @ _mat(Q) @ dyn.E_tilde.T
    KRK = K.T @ _mat(R) @ K
    values = []
    for A in dyn.closed_loop(K):
        M = A.T @ P @ A - P + KRK + A.T @ EQE @ A
        values.append(float(np.linalg.eigvalsh(0.5 * (M + M.T)).max()))
    return values


def check_terminal_weight(K, P, Q, R, dyn: VertexDynamics, margin: float = TOL_LMI) -> bool:
    """True iff every vertex satisfies the terminal decrease condition with margin."""
    return max(terminal_decrease(K, P, Q, R, dyn)) < -margin


def state_constraint_set(U: Polytope, Y: Polytope, t_ini: int) -> Polytope:
    """Constraint set of the extended state: U^{T_ini} x Y^{T_ini}."""
    G = scipy.linalg.block_diag(*([U.G] * t_ini + [Y.G] * t_ini))
    g = np.concatenate([U.g] * t_ini + [Y.g] * t_ini)
    return Polytope(G, g)


def terminal_set(K, dyn: VertexDynamics, D: Polytope, U: Polytope, Y: Polytope, t_ini: int,
                 max_iter: int = MAX_ITER, tol: float = TOL_SET) -> InvariantSetResult:
    """
    Robust positively invariant terminal set under u = K xi.

    Args:
        K: Feedback gain
        dyn: Vertex dynamics
        D: Disturbance support
        U: Input constraint set
        Y: Output constraint set
        t_ini: Extended-state window length
        max_iter: Iteration cap
        tol: Mutual-inclusion tolerance

    Returns:
        InvariantSetResult
    """
    X = state_constraint_set(U, Y, t_ini)
    return rpi_terminal_set(dyn.closed_loop(K), dyn.E_tilde, exact_vertices(D, max(D.dim, 1)), X, U,
                            K, max_iter=max_iter, tol=tol)


@dataclass
class IossCertificate:
    """
    Quadratic IOSS Lyapunov function W(xi) = xi^T P_W xi and its constants.

    Attributes:
        P_W: Lyapunov matrix.
        c_u, c_y, c_d: Input, output and disturbance gains.
        status: "certified" or "not certified".
    """

    P_W: Optional[np.ndarray]
    c_u: float
    c_y: float
    c_d: float
    status: str = CERTIFIED

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED


def _ioss_blocks(dyn: VertexDynamics, outputs: Sequence[np.ndarray], P_W, c_u, c_y, c_d, decay: float):
    n, m = dyn.n_xi, dyn.m
    p = dyn.E_tilde.shape[1]
    blocks = [P_W]
    for A, B, H in zip(dyn.A_tilde, dyn.B_tilde, outputs):
        F = np.hstack([A, B, dyn.E_tilde])
        diag = cp.bmat([
            [P_W - decay * np.eye(n), np.zeros((n, m)), np.zeros((n, p))],
            [np.zeros((m, n)), c_u * np.eye(m), np.zeros((m, p))],
            [np.zeros((p, n)), np.zeros((p, m)), c_d * np.eye(p)],
        ])
        blocks.append(diag + c_y * (H.T @ H) - F.T @ P_W @ F)
    return blocks


def ioss_constants(dyn: VertexDynamics, sysset: SystemMatrixSet, R, Q, grid: Sequence[float] = (1.0, 10.0, 100.0, 1000.0),
                   decay: float = 0.5, margin: float = TOL_LMI) -> IossCertificate:
    """
    IOSS constants W(xi+) - W(xi) <= -decay |xi|^2 + c_u |u|^2 + c_y |y|^2 + c_d |d|^2 at every vertex.

    For each c_y of the grid, c_u + c_d is minimized; the candidate with the
    largest lambda_min(R - c_S c_u I) is returned.

    Args:
        dyn: Vertex dynamics
        sysset: Matrix vertices, giving the output maps y = [Phi_j Psi_j I] (xi, u, d)
        R: Input weight
        Q: Output weight
        grid: Candidate values of c_y
        decay: State decrease coefficient
        margin: LMI margin

    Returns:
        IossCertificate, "not certified" when no grid value is feasible
    """
    p = dyn.E_tilde.shape[1]
    outputs = [np.hstack([V, np.eye(p)]) for V in sysset.vertices]
    R, Q = _mat(R), _mat(Q)
    lam = min(np.linalg.eigvalsh(Q).min(), np.linalg.eigvalsh(R).min())
    best: Optional[IossCertificate] = None
    best_score = -np.inf
    for c_y in grid:
        P_W = cp.Variable((dyn.n_xi, dyn.n_xi), symmetric=True)
        c_u = cp.Variable()
        c_d = cp.Variable()
        blocks = _ioss_blocks(dyn, outputs, P_W, c_u, float(c_y), c_d, decay)
        result = lmi_feasibility({"P_W": P_W, "c_u": c_u, "c_d": c_d}, blocks, objective=c_u + c_d,
                                 margin=margin, constraints=[c_u >= margin, c_d >= margin])
        if not result.solved:
            logger.debug(f"IOSS LMI with c_y={c_y}: {result.status}")
            continue
        cu, cd = float(result.values["c_u"]), float(result.values["c_d"])
        c_S = lam / max(cu, c_y)
        score = float(np.linalg.eigvalsh(R - c_S * cu * np.eye(R.shape[0])).min())
        if score > best_score:
            best_score = score
            best = IossCertificate(result.values["P_W"], cu, float(c_y), cd)
    if best is None:
        logger.warning("No IOSS certificate found on the c_y grid")
        return IossCertificate(None, np.nan, np.nan, np.nan, NOT_CERTIFIED)
    logger.info(f"IOSS constants: c_u={best.c_u:.4g}, c_y={best.c_y:.4g}, c_d={best.c_d:.4g}")
    return best


def lower_cost_bound(sysset: SystemMatrixSet, layout: ExtendedStateLayout, Q, R) -> np.ndarray:
    """
    Unconstrained infinite-horizon cost matrix P_l of the nominal system.

    Solves the discrete algebraic Riccati equation with stage cost
    y^T Q y + u^T R u, y = Phi xi + Psi u.
    """
    dyn = nominal_dynamics(sysset, layout)
    A, B = dyn.A_tilde[0], dyn.B_tilde[0]
    Phi, Psi = sysset.nominal[:, :layout.n_xi], sysset.nominal[:, layout.n_xi:]
    Q, R = _mat(Q), _mat(R)
    try:
        P_l = scipy.linalg.solve_discrete_are(A, B, Phi.T @ Q @ Phi, R + Psi.T @ Q @ Psi, s=Phi.T @ Q @ Psi)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SynthesisError(f"Riccati equation of the nominal system has no stabilizing solution: {exc}") from exc
    return 0.5 * (P_l + P_l.T)


def upper_cost_bound(optimal_cost: Callable[[np.ndarray], float], points: Sequence[np.ndarray],
                     factor: float = 1.1, margin: float = TOL_LMI):
    """
    Quadratic envelope xi^T P_u xi >= J*(xi) - c over sampled states.

    Args:
        optimal_cost: Function returning J*_N at an extended state, or None where the OCP is infeasible
        points: States at which the envelope is enforced
        factor: Safety factor applied to the fitted matrix
        margin: Smallest admissible eigenvalue of P_u

    Returns:
        Tuple (P_u, c) with c = J*_N(0)
    """
    points = [np.asarray(x, dtype=float).reshape(-1) for x in points]
    if not points:
        raise DimensionError("upper cost bound needs at least one point")
    n = points[0].size
    c = optimal_cost(np.zeros(n))
    if c is None:
        raise SynthesisError("the OCP is infeasible at the origin")
    c = float(c)
    evaluated = [(x, optimal_cost(x)) for x in points]
    # infeasible points carry no information about J*
    points = [x for x, v in evaluated if v is not None]
    values = [float(v) for _, v in evaluated if v is not None]
    if not points:
        raise SynthesisError("the OCP is infeasible at every envelope point")
    P_u = cp.Variable((n, n), symmetric=True)
    constraints = [P_u >> margin * np.eye(n)]
    constraints += [cp.quad_form(x, P_u) >= v - c for x, v in zip(points, values)]
    problem = cp.Problem(cp.Minimize(cp.trace(P_u)), constraints)
    try:
        problem.solve()
    except cp.error.SolverError as exc:
        raise SynthesisError(f"upper cost envelope could not be fitted: {exc}") from exc
    if P_u.value is None:
        raise SynthesisError(f"upper cost envelope problem is {problem.status}")
    value = factor * 0.5 * (P_u.value + P_u.value.T)
    return value, c


@dataclass
class RasieReport:
    """
    Stability-in-expectation check.

    Attributes:
        status: "certified", "violated" or "not certified".
        eps_f: Candidate infeasibility probability used.
        min_eigenvalues: Smallest eigenvalue of Q_S at every vertex.
        vertex_only: The certificate covers matrix vertices only.
    """

    status: str
    eps_f: float
    min_eigenvalues: List[float] = field(default_factory=list)
    vertex_only: bool = True

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED


def stability_matrix(eps_f: float, A, B, Q, R, P_l, P_u, ioss: IossCertificate) -> np.ndarray:
    """
    Q_S = blockdiag(c_S/2 I, R - c_S c_u I) - eps_f/(1 - eps_f) [A B]^T P_u [A B] + blockdiag(eps_f/(1 - eps_f) P_l, 0).
    """
    A, B, Q, R = _mat(A), _mat(B), _mat(Q), _mat(R)
    n, m = A.shape[0], B.shape[1]
    c_S = min(np.linalg.eigvalsh(Q).min(), np.linalg.eigvalsh(R).min()) / max(ioss.c_u, ioss.c_y)
    base = scipy.linalg.block_diag(0.5 * c_S * np.eye(n), R - c_S * ioss.c_u * np.eye(m))
    if eps_f == 0.0:
        return base
    AB = np.hstack([A, B])
    penalty = AB.T @ _mat(P_u) @ AB
    penalty[:n, :n] -= _mat(P_l)
    return base - eps_f / (1.0 - eps_f) * penalty


def rasie_check(eps_f: float, K, P, Q, R, P_l, P_u, ioss: Optional[IossCertificate],
                dyn: VertexDynamics) -> RasieReport:
    """
    Evaluate the stability-in-expectation condition Q_S > 0 at every matrix vertex.

    Args:
        eps_f: Upper bound of the candidate-infeasibility probability, in [0, 1)
        K: Feedback gain
        P: Terminal weight
        Q: Output weight
        R: Input weight
        P_l: Lower cost bound matrix
        P_u: Upper cost bound matrix
        ioss: IOSS certificate
        dyn: Vertex dynamics

    Returns:
        RasieReport
    """
    if not 0.0 <= eps_f < 1.0:
        raise DimensionError(f"eps_f must lie in [0, 1), got {eps_f}")
    if ioss is None or not ioss.certified:
        return RasieReport(NOT_CERTIFIED, eps_f)
    min_eigs = []
    for A, B in zip(dyn.A_tilde, dyn.B_tilde):
        Q_S = stability_matrix(eps_f, A, B, Q, R, P_l, P_u, ioss)
        min_eigs.append(float(np.linalg.eigvalsh(0.5 * (Q_S + Q_S.T)).min()))
    status = CERTIFIED if min(min_eigs) > 0.0 else VIOLATED
    logger.info(f"Stability check at eps_f={eps_f:.4g}: {status} (min eigenvalue {min(min_eigs):.4g}, vertex certificate)")
    return RasieReport(status, eps_f, min_eigs)


@dataclass
class TerminalIngredients:
    """
    Gain, terminal weight and terminal set with their certificates.

    Attributes:
        K: Feedback gain.
        P: Terminal weight.
        X_N: Terminal set.
        certificates: Spectral radii, terminal decrease eigenvalues and convergence flags.
        provenance: Origin of K and P.
    """

    K: np.ndarray
    P: np.ndarray
    X_N: Polytope
    certificates: Dict = field(default_factory=dict)
    provenance: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "K": self.K.tolist(),
            "P": self.P.tolist(),
            "X_N": self.X_N.to_dict(),
            "certificates": self.certificates,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TerminalIngredients":
        return cls(K=_mat(data["K"]), P=_mat(data["P"]), X_N=Polytope.from_dict(data["X_N"]),
                   certificates=dict(data.get("certificates", {})), provenance=dict(data.get("provenance", {})))


def synthesize_ingredients(traj: IoTrajectory, cm: ConsistencyModel, sysset: SystemMatrixSet, Q, R,
                           D: Polytope, U: Polytope, Y: Polytope, gain=None, weight=None,
                           inject_supplied: bool = False, margin: float = TOL_LMI,
                           max_iter: int = MAX_ITER, tol: float = TOL_SET) -> TerminalIngredients:
    """
    Gain, terminal weight and terminal set, data-driven unless supplied values are injected.
    """
    layout = traj.layout
    dyn = vertex_dynamics(sysset, layout)
    if inject_supplied:
        K = _mat(gain)
        gain_source = USER_SUPPLIED
        logger.warning("Using the user-supplied feedback gain")
    else:
        gain_result = data_driven_gain(traj, cm, sysset, fallback=gain, margin=margin)
        K, gain_source = gain_result.K, gain_result.provenance
    radii = dyn.spectral_radii(K)
    if max(radii) >= 1.0:
        raise SynthesisError(f"gain does not stabilize every vertex (max spectral radius {max(radii):.4f})")
    if inject_supplied and weight is not None:
        P = _mat(weight)
        weight_source = USER_SUPPLIED
        logger.warning("Using the user-supplied terminal weight")
    else:
        P = terminal_weight(K, Q, R, dyn, margin)
        weight_source = DATA_DRIVEN
    decrease = terminal_decrease(K, P, Q, R, dyn)
    if max(decrease) >= 0.0:
        raise SynthesisError(f"terminal weight violates the decrease condition (max eigenvalue {max(decrease):.3e})")
    X_N = terminal_set(K, dyn, D, U, Y, layout.t_ini, max_iter=max_iter, tol=tol)
    certificates = {
        "spectral_radii": radii,
        "terminal_decrease": decrease,
        "terminal_set_converged": X_N.converged,
        "terminal_set_iterations": X_N.iterations,
    }
    return TerminalIngredients(K=K, P=P, X_N=X_N.polytope, certificates=certificates,
                               provenance={"K": gain_source, "P": weight_source})
