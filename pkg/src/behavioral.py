"""
Behavioral Data Tools
Input-output trajectory containers, Hankel matrices, extended-state windows
and persistency-of-excitation checks.

Data indices -T_ini+1 ... T are stored zero-based: storage row s holds data
index s - T_ini + 1. Negative indices never leave this module.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DimensionError

logger = logging.getLogger(__name__)


def rank_tolerance(shape: Tuple[int, ...]) -> float:
    """Relative singular-value threshold for numerical rank decisions."""
    return 1e-10 * max(shape)


def numerical_rank(matrix: np.ndarray) -> int:
    """
    Numerical rank via singular values.

    Args:
        matrix: Dense matrix

    Returns:
        Number of singular values above rank_tolerance * sigma_max
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return 0
    sigma = scipy.linalg.svdvals(matrix)
    if sigma[0] == 0.0:
        return 0
    return int(np.sum(sigma > rank_tolerance(matrix.shape) * sigma[0]))


def pseudo_inverse(matrix: np.ndarray) -> np.ndarray:
    """
    Moore-Penrose pseudo-inverse with the package rank tolerance.

    Args:
        matrix: Dense matrix

    Returns:
        Pseudo-inverse computed from a truncated SVD
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    U, sigma, Vt = scipy.linalg.svd(matrix, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros((matrix.shape[1], matrix.shape[0]))
    keep = sigma > rank_tolerance(matrix.shape) * sigma[0]
    return (Vt[keep].T / sigma[keep]) @ U[:, keep].T


def _as_sequence(seq) -> np.ndarray:
    array = np.asarray(seq, dtype=float)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise DimensionError("a sequence must be a list of scalars or of equally sized vectors")
    return array


@dataclass(frozen=True)
class HankelMatrix:
    """
    Block-Hankel matrix of a vector sequence.

    Attributes:
        entries: Dense matrix of shape (block_dim * order, T - order + 1).
        order: Window length L.
        block_dim: Dimension of one sequence element.
    """

    entries: np.ndarray
    order: int
    block_dim: int

    @property
    def width(self) -> int:
        return self.entries.shape[1]

    def column(self, j: int) -> np.ndarray:
        """Stacked window starting at sequence element j (zero-based)."""
        return self.entries[:, j]

    def block(self, i: int) -> np.ndarray:
        """Rows belonging to window position i (zero-based)."""
        return self.entries[i * self.block_dim:(i + 1) * self.block_dim]


def build_hankel(seq, L: int) -> HankelMatrix:
    """
    Build the Hankel matrix H_L of a sequence.

    Args:
        seq: Sequence of T vectors (array of shape (T, n_s)) or of scalars
        L: Window length, 1 <= L <= T

    Returns:
        HankelMatrix whose column j stacks seq[j], ..., seq[j + L - 1]
    """
    data = _as_sequence(seq)
    T, n_s = data.shape
    if L < 1 or L > T:
        raise DimensionError(f"Hankel order {L} must lie in [1, {T}]")
    windows = np.lib.stride_tricks.sliding_window_view(data, (L, n_s))[:, 0]
    entries = windows.reshape(T - L + 1, L * n_s).T.copy()
    return HankelMatrix(entries=entries, order=L, block_dim=n_s)


def is_persistently_exciting(seq, L: int) -> bool:
    """
    Check persistency of excitation of order L.

    Args:
        seq: Sequence of vectors or scalars
        L: Order

    Returns:
        True iff H_L(seq) has full row rank
    """
    hankel = build_hankel(seq, L)
    if hankel.entries.shape[0] > hankel.width:
        return False
    return numerical_rank(hankel.entries) == hankel.entries.shape[0]


@dataclass(frozen=True)
class ExtendedStateLayout:
    """
    Layout of the extended state: past inputs then past outputs, oldest first.

    Attributes:
        m: Input dimension.
        p: Output dimension.
        t_ini: Number of past samples in the window.
    """

    m: int
    p: int
    t_ini: int

    @property
    def n_xi(self) -> int:
        return (self.m + self.p) * self.t_ini

    @property
    def input_slice(self) -> slice:
        return slice(0, self.m * self.t_ini)

    @property
    def output_slice(self) -> slice:
        return slice(self.m * self.t_ini, self.n_xi)

    def build(self, past_inputs, past_outputs) -> np.ndarray:
        """Stack the last t_ini inputs and outputs into an extended state."""
        return build_extended_state(past_inputs, past_outputs, m=self.m, p=self.p)

    def shift(self, xi: np.ndarray, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        """
        Advance the window by one input/output pair.

        Args:
            xi: Current extended state
            u: Applied input
            y: Measured output

        Returns:
            Successor extended state
        """
        xi = np.asarray(xi, dtype=float)
        u_block = np.concatenate([xi[self.input_slice][self.m:], np.atleast_1d(u)])
        y_block = np.concatenate([xi[self.output_slice][self.p:], np.atleast_1d(y)])
        return np.concatenate([u_block, y_block])

    def split(self, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return the past-input and past-output windows as (t_ini, m) and (t_ini, p) arrays."""
        xi = np.asarray(xi, dtype=float)
        return (xi[self.input_slice].reshape(self.t_ini, self.m),
                xi[self.output_slice].reshape(self.t_ini, self.p))


def build_extended_state(past_inputs, past_outputs, m: Optional[int] = None,
                         p: Optional[int] = None) -> np.ndarray:
    """
    Stack past inputs and outputs into the extended state.

    Args:
        past_inputs: Last T_ini inputs, oldest first
        past_outputs: Last T_ini outputs, oldest first
        m: Input dimension when the windows are given flat
        p: Output dimension when the windows are given flat

    Returns:
        Vector (u_{k-T_ini}, ..., u_{k-1}, y_{k-T_ini}, ..., y_{k-1})
    """
    u = np.asarray(past_inputs, dtype=float)
    y = np.asarray(past_outputs, dtype=float)
    if u.ndim < 2:
        u = u.reshape(-1, m if m is not None else 1)
    if y.ndim < 2:
        y = y.reshape(-1, p if p is not None else 1)
    if u.shape[0] != y.shape[0]:
        raise DimensionError(f"input window has {u.shape[0]} samples but output window has {y.shape[0]}")
    return np.concatenate([u.reshape(-1), y.reshape(-1)])


@dataclass(frozen=True)
class IoTrajectory:
    """
    Recorded input-output data with an initialization prefix.

    Attributes:
        inputs: Array of shape (T_ini + T, m); row s holds data index s - T_ini + 1.
        outputs: Array of shape (T_ini + T, p).
        prefix_len: T_ini.
        disturbances: Optional ground-truth disturbances, shape (T_ini + T, p).
    """

    inputs: np.ndarray
    outputs: np.ndarray
    prefix_len: int
    disturbances: Optional[np.ndarray] = None

    def __post_init__(self):
        inputs = _as_sequence(self.inputs)
        outputs = _as_sequence(self.outputs)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        if self.disturbances is not None:
            object.__setattr__(self, "disturbances", _as_sequence(self.disturbances))
        if self.prefix_len < 1:
            raise DimensionError("prefix length T_ini must be at least 1")
        if inputs.shape[0] != outputs.shape[0]:
            raise DimensionError(f"{inputs.shape[0]} input rows but {outputs.shape[0]} output rows")
        if inputs.shape[0] <= self.prefix_len:
            raise DimensionError("trajectory holds no data beyond the initialization prefix")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(outputs))):
            raise DimensionError("trajectory contains non-finite entries")
        if self.disturbances is not None and self.disturbances.shape != outputs.shape:
            raise DimensionError("disturbance record must match the output record")

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def p(self) -> int:
        return self.outputs.shape[1]

    @property
    def index_offset(self) -> int:
        """Storage row of data index 0 is index_offset."""
        return self.prefix_len - 1

    @property
    def data_len(self) -> int:
        return self.inputs.shape[0] - self.prefix_len

    @property
    def layout(self) -> ExtendedStateLayout:
        return ExtendedStateLayout(self.m, self.p, self.prefix_len)

    @property
    def n_xi(self) -> int:
        return self.layout.n_xi

    def validate(self, horizon: int) -> None:
        """Require T >= T_ini + N for the given horizon."""
        if self.data_len < self.prefix_len + horizon:
            raise DimensionError(
                f"data length T={self.data_len} is shorter than T_ini + N = {self.prefix_len + horizon}"
            )

    def data_inputs(self) -> np.ndarray:
        """Inputs u_1 ... u_T as a (T, m) array."""
        return self.inputs[self.prefix_len:]

    def data_outputs(self) -> np.ndarray:
        """Outputs y_1 ... y_T as a (T, p) array."""
        return self.outputs[self.prefix_len:]

    def data_disturbances(self) -> Optional[np.ndarray]:
        """Ground-truth disturbances d_1 ... d_T when recorded."""
        if self.disturbances is None:
            return None
        return self.disturbances[self.prefix_len:]

    def time_indices(self) -> np.ndarray:
        """Data indices of every stored row."""
        return np.arange(self.inputs.shape[0]) - self.index_offset


def extended_state_data(traj: IoTrajectory, include_successor: bool = False) -> np.ndarray:
    """
    Extended states of the recorded data.

    Args:
        traj: Recorded trajectory
        include_successor: Also return xi_{T+1}

    Returns:
        Array of shape (T, n_xi) (or (T + 1, n_xi)); row i - 1 holds xi_i, built
        from the window ending at data index i - 1
    """
    t_ini = traj.prefix_len
    count = traj.data_len + (1 if include_successor else 0)
    u_windows = np.lib.stride_tricks.sliding_window_view(traj.inputs, (t_ini, traj.m))[:, 0]
    y_windows = np.lib.stride_tricks.sliding_window_view(traj.outputs, (t_ini, traj.p))[:, 0]
    u_flat = u_windows.reshape(-1, t_ini * traj.m)[:count]
    y_flat = y_windows.reshape(-1, t_ini * traj.p)[:count]
    return np.hstack([u_flat, y_flat])


def excitation_report(traj: IoTrajectory, order_bound: int, horizon: int) -> dict:
    """
    Persistency-of-excitation report for the recorded inputs.

    Checks PE of order n_hat + N + T_ini on the inputs and, when ground-truth
    disturbances are available, on the generalized inputs (u, d).

    Args:
        traj: Recorded trajectory
        order_bound: Upper bound n_hat on the plant order
        horizon: Prediction horizon N

    Returns:
        Dictionary with the order and the check outcomes
    """
    order = order_bound + horizon + traj.prefix_len
    inputs = traj.data_inputs()
    report = {"order": order, "inputs": False, "generalized": None}
    if order <= inputs.shape[0]:
        report["inputs"] = is_persistently_exciting(inputs, order)
        d = traj.data_disturbances()
        if d is not None:
            report["generalized"] = is_persistently_exciting(np.hstack([inputs, d]), order)
    logger.info(f"PE check of order {order}: inputs={report['inputs']}, generalized={report['generalized']}")
    return report


def arx_rollout(phi: np.ndarray, psi: np.ndarray, t_ini: int, xi0, v_f, K: Optional[np.ndarray] = None,
                d_f=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Roll an ARX system forward under u_l = K xi_l + v_l.

    Args:
        phi: Output matrix of the extended state, shape (p, n_xi)
        psi: Direct feedthrough, shape (p, m)
        t_ini: Window length of the extended state
        xi0: Initial extended state
        v_f: Stacked inputs v_0 ... v_{N-1} (length m N)
        K: Optional feedback gain (zero when omitted)
        d_f: Optional stacked disturbances d_0 ... d_{N-1}

    Returns:
        Tuple (u, y, xi_N) with u of shape (N, m) and y of shape (N, p)
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    p, m = psi.shape
    layout = ExtendedStateLayout(m, p, t_ini)
    v = np.asarray(v_f, dtype=float).reshape(-1, m)
    N = v.shape[0]
    d = np.zeros((N, p)) if d_f is None else np.asarray(d_f, dtype=float).reshape(N, p)
    K = np.zeros((m, layout.n_xi)) if K is None else np.atleast_2d(np.asarray(K, dtype=float))
    xi = np.asarray(xi0, dtype=float).reshape(-1)
    u_out = np.zeros((N, m))
    y_out = np.zeros((N, p))
    for l in range(N):
        u = K @ xi + v[l]
        y = phi @ xi + psi @ u + d[l]
        u_out[l], y_out[l] = u, y
        xi = layout.shift(xi, u, y)
    return u_out, y_out, xi
