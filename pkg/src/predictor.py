"""
Sample-Based Predictors
Affine multi-step predictors of outputs, inputs and the terminal extended
state, one per uncertainty sample, obtained from a single recorded trajectory.

For a sample with data disturbances D and future disturbances d_f the
Hankel coefficient vector splits into a part reproducing (xi, v_f) while
cancelling D, and a part reproducing d_f while cancelling (xi, v_f). Both
parts are pseudo-inverse solutions, which gives

    y_f = M_y [xi; v_f] + m_y,   m_y = L_y d_f

and analogous maps for the inputs and the terminal extended state.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .behavioral import IoTrajectory, build_hankel, extended_state_data, numerical_rank, pseudo_inverse
from .consistency import ConsistencyModel, reconstruct_disturbance
from .errors import DimensionError, ExcitationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UncertaintySample:
    """
    One draw of the uncertainty entering the predictors.

    Attributes:
        free_block: Consistent free disturbance block, shape (p, n_xi + m).
        d_future: Stacked future disturbances d_0 ... d_{N-1}, length p N.
        seed_index: Position of the sample in its stream.
        data_disturbance: Full data disturbances (p, T) overriding the consistent reconstruction.
    """

    free_block: np.ndarray
    d_future: np.ndarray
    seed_index: int = 0
    data_disturbance: Optional[np.ndarray] = None

    def disturbance_data(self, cm: ConsistencyModel) -> np.ndarray:
        """Data disturbances of this sample, shape (p, T)."""
        if self.data_disturbance is not None:
            return np.atleast_2d(np.asarray(self.data_disturbance, dtype=float))
        return reconstruct_disturbance(cm, self.free_block)

    def with_future(self, d_future) -> "UncertaintySample":
        return UncertaintySample(self.free_block, np.asarray(d_future, dtype=float).reshape(-1),
                                 self.seed_index, self.data_disturbance)


@dataclass(frozen=True)
class PredictorBasis:
    """
    Sample-independent data matrices of the predictors.

    Attributes:
        W: [H_1(xi^d); H_N(v^d)] over the first T - N + 1 windows.
        Pi_xv: Projector onto the kernel of W.
        responses: Stacked [H_N(y^d); H_N(u^d); [xi_{N+1} ... xi_{T+1}]].
        K: Feedback gain used to form v^d = u^d - K xi^d.
        horizon: Prediction horizon N.
        m, p, n_xi: Dimensions.
    """

    W: np.ndarray
    Pi_xv: np.ndarray
    responses: np.ndarray
    K: np.ndarray
    horizon: int
    m: int
    p: int
    n_xi: int

    @property
    def width(self) -> int:
        return self.W.shape[1]

    @property
    def n_z(self) -> int:
        """Length of the predictor argument (xi, v_f)."""
        return self.n_xi + self.m * self.horizon


def build_basis(traj: IoTrajectory, K, N: int) -> PredictorBasis:
    """
    Assemble the sample-independent predictor data.

    Args:
        traj: Recorded trajectory
        K: Feedback gain of shape (m, n_xi)
        N: Prediction horizon

    Returns:
        PredictorBasis
    """
    traj.validate(N)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (traj.m, traj.n_xi):
        raise DimensionError(f"gain must be {traj.m}x{traj.n_xi}, got {K.shape}")
    xi = extended_state_data(traj, include_successor=True)
    u = traj.data_inputs()
    y = traj.data_outputs()
    T = traj.data_len
    width = T - N + 1
    v = u - xi[:T] @ K.T
    W = np.vstack([xi[:width].T, build_hankel(v, N).entries])
    responses = np.vstack([build_hankel(y, N).entries, build_hankel(u, N).entries, xi[N:N + width].T])
    Pi_xv = np.eye(width) - pseudo_inverse(W) @ W
    return PredictorBasis(W=W, Pi_xv=Pi_xv, responses=responses, K=K, horizon=N,
                          m=traj.m, p=traj.p, n_xi=traj.n_xi)


@dataclass(frozen=True)
class PredictorMatrices:
    """
    Affine predictors of one uncertainty sample.

    Attributes:
        My, my: Output predictor, shapes (p N, n_xi + m N) and (p N,).
        Mu, mu: Input predictor, shapes (m N, n_xi + m N) and (m N,).
        Mxi, mxi: Terminal extended-state predictor.
        sample_id: Index of the uncertainty sample.
        Ly, Lu, Lxi: Fixed factors with my = Ly d_f (and likewise for mu, mxi).
    """

    My: np.ndarray
    my: np.ndarray
    Mu: np.ndarray
    mu: np.ndarray
    Mxi: np.ndarray
    mxi: np.ndarray
    sample_id: int = 0
    Ly: Optional[np.ndarray] = None
    Lu: Optional[np.ndarray] = None
    Lxi: Optional[np.ndarray] = None

    def with_future(self, d_future) -> "PredictorMatrices":
        """Recompute the offsets for other future disturbances."""
        d = np.asarray(d_future, dtype=float).reshape(-1)
        if self.Ly is None:
            raise DimensionError("predictor was built without fixed disturbance factors")
        return PredictorMatrices(self.My, self.Ly @ d, self.Mu, self.Lu @ d, self.Mxi, self.Lxi @ d,
                                 self.sample_id, self.Ly, self.Lu, self.Lxi)


def predictor_from_basis(basis: PredictorBasis, cm: ConsistencyModel, w: UncertaintySample) -> PredictorMatrices:
    """
    Predictor matrices of one sample from a precomputed basis.

    Raises:
        ExcitationError: when [H_1(xi); H_N(v)] Pi_d loses rank, or when a nonzero
            future disturbance meets a rank-deficient H_N(D) Pi_xv
    """
    N, p = basis.horizon, basis.p
    d_future = np.asarray(w.d_future, dtype=float).reshape(-1)
    if d_future.size != p * N:
        raise DimensionError(f"future disturbances must have {p * N} entries, got {d_future.size}")
    D = w.disturbance_data(cm)
    if D.shape != (p, basis.width + N - 1):
        raise DimensionError(f"data disturbances must be {p}x{basis.width + N - 1}, got {D.shape}")
    H_d = build_hankel(D.T, N).entries
    Pi_d = np.eye(basis.width) - pseudo_inverse(H_d) @ H_d
    state_part = basis.W @ Pi_d
    if numerical_rank(state_part) < basis.W.shape[0]:
        raise ExcitationError(
            f"insufficient excitation for sampled data: [H_1(xi); H_N(v)] Pi_d has rank "
            f"{numerical_rank(state_part)} < {basis.W.shape[0]} (sample {w.seed_index})"
        )
    M_all = basis.responses @ pseudo_inverse(state_part)
    dist_part = H_d @ basis.Pi_xv
    if numerical_rank(dist_part) < p * N and np.any(d_future != 0.0):
        raise ExcitationError(
            f"insufficient excitation for sampled data: H_N(D) Pi_xv has rank "
            f"{numerical_rank(dist_part)} < {p * N} (sample {w.seed_index})"
        )
    L_all = basis.responses @ pseudo_inverse(dist_part)
    ny, nu = p * N, basis.m * N
    L = (L_all[:ny], L_all[ny:ny + nu], L_all[ny + nu:])
    M = (M_all[:ny], M_all[ny:ny + nu], M_all[ny + nu:])
    return PredictorMatrices(My=M[0], my=L[0] @ d_future, Mu=M[1], mu=L[1] @ d_future,
                             Mxi=M[2], mxi=L[2] @ d_future, sample_id=w.seed_index,
                             Ly=L[0], Lu=L[1], Lxi=L[2])


def build_predictor(traj: IoTrajectory, K, cm: ConsistencyModel, w: UncertaintySample, N: int) -> PredictorMatrices:
    """
    Predictor matrices of one uncertainty sample.

    Args:
        traj: Recorded trajectory
        K: Feedback gain
        cm: Consistency model of the trajectory
        w: Uncertainty sample
        N: Prediction horizon

    Returns:
        PredictorMatrices
    """
    return predictor_from_basis(build_basis(traj, K, N), cm, w)


def build_predictors(basis: PredictorBasis, cm: ConsistencyModel, samples: Sequence[UncertaintySample],
                     threads: int = 1) -> List[PredictorMatrices]:
    """
    Predictors of many samples, in sample order regardless of the thread count.
    """
    if threads <= 1 or len(samples) < 2:
        return [predictor_from_basis(basis, cm, w) for w in samples]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda w: predictor_from_basis(basis, cm, w), samples))


def _argument(pm: PredictorMatrices, xi, v_f) -> np.ndarray:
    z = np.concatenate([np.asarray(xi, dtype=float).reshape(-1), np.asarray(v_f, dtype=float).reshape(-1)])
    if z.size != pm.My.shape[1]:
        raise DimensionError(f"predictor argument must have {pm.My.shape[1]} entries, got {z.size}")
    return z


def predict_output(pm: PredictorMatrices, xi, v_f) -> np.ndarray:
    """Predicted outputs y_0 ... y_{N-1}, stacked."""
    return pm.My @ _argument(pm, xi, v_f) + pm.my


def predict_input(pm: PredictorMatrices, xi, v_f) -> np.ndarray:
    """Predicted inputs u_0 ... u_{N-1}, stacked."""
    return pm.Mu @ _argument(pm, xi, v_f) + pm.mu


def predict_terminal(pm: PredictorMatrices, xi, v_f) -> np.ndarray:
    """Predicted extended state after N steps."""
    return pm.Mxi @ _argument(pm, xi, v_f) + pm.mxi
