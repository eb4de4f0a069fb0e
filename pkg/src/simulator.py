"""
Plant Simulation and Experiments
Ground-truth ARX plant, data collection, open-loop predictor evaluation and
closed-loop Monte Carlo runs of the predictive controller.
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .behavioral import (ExtendedStateLayout, IoTrajectory, arx_rollout, is_persistently_exciting,
                         numerical_rank)
from .consistency import ConsistencyModel, data_matrices
from .controller import OcpProblem, candidate_solution, check_candidate_feasible, control_step
from .errors import (DimensionError, ExcitationError, GeometryError, InfeasibleDesignError, InfeasibleStartError,
                     UnboundedSetError)
from .geometry import Polytope, contains
from .geometry.polytope import TOL_FEAS
from .predictor import UncertaintySample, build_basis, predict_output, predictor_from_basis
from .scenario import (HIT_AND_RUN, REJECTION, SamplerConfig, draw_inconsistent_samples, draw_uncertainty_samples,
                       sample_uniform_polytope)

logger = logging.getLogger(__name__)

UNIFORM = "uniform"
ZERO = "zero"

# Stream keys of the counter-based generators
_DATA_STREAM = 11
_RUN_STREAM = 13
_OPENLOOP_STREAM = 17


def uniform_points(P: Polytope, n: int, seed: int, *keys: int) -> np.ndarray:
    """
    Independent uniform points of a bounded polytope on the stream (seed, keys).

    Rejection sampling is exact; sets too thin for it fall back to hit-and-run.
    """
    try:
        return sample_uniform_polytope(P, n, SamplerConfig(method=REJECTION, seed=seed), stream=keys)
    except UnboundedSetError:
        raise
    except GeometryError as exc:
        logger.warning(f"{exc}; sampling by hit-and-run")
        return sample_uniform_polytope(P, n, SamplerConfig(method=HIT_AND_RUN, seed=seed), stream=keys)


@dataclass(frozen=True)
class PlantModel:
    """
    Ground-truth ARX plant y = Phi xi + Psi u + d.

    Attributes:
        phi: Extended-state output matrix (p, n_xi).
        psi: Feedthrough (p, m).
        t_ini: Window length of the extended state.
        disturbance_set: Support of the uniform disturbance.
    """

    phi: np.ndarray
    psi: np.ndarray
    t_ini: int
    disturbance_set: Polytope

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        psi = np.atleast_2d(np.asarray(self.psi, dtype=float))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        if phi.shape != (psi.shape[0], (psi.shape[0] + psi.shape[1]) * self.t_ini):
            raise DimensionError(f"Phi has shape {phi.shape}, inconsistent with Psi {psi.shape} and T_ini={self.t_ini}")
        if self.disturbance_set.dim != psi.shape[0]:
            raise DimensionError("disturbance set dimension differs from the output dimension")

    @classmethod
    def from_config(cls, cfg) -> "PlantModel":
        """Plant of an ExperimentConfig."""
        return cls(np.asarray(cfg.plant.phi), np.asarray(cfg.plant.psi), cfg.plant.t_ini,
                   cfg.disturbance_set.polytope())

    @property
    def m(self) -> int:
        return self.psi.shape[1]

    @property
    def p(self) -> int:
        return self.psi.shape[0]

    @property
    def layout(self) -> ExtendedStateLayout:
        return ExtendedStateLayout(self.m, self.p, self.t_ini)

    def disturbances(self, n: int, seed: int, *keys: int) -> np.ndarray:
        return uniform_points(self.disturbance_set, n, seed, *keys)


def simulate_plant_step(plant: PlantModel, xi, u, d) -> Tuple[np.ndarray, np.ndarray]:
    """
    One plant step.

    Returns:
        Tuple (y_k, xi_{k+1})
    """
    xi = np.asarray(xi, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    y = plant.phi @ xi + plant.psi @ u + np.asarray(d, dtype=float).reshape(-1)
    return y, plant.layout.shift(xi, u, y)


def collect_data(plant: PlantModel, T: int, U: Polytope, seed: int, policy: str = UNIFORM,
                 order_bound: Optional[int] = None, horizon: int = 1, max_redraws: int = 10,
                 excitation: Optional[Sequence[float]] = None) -> IoTrajectory:
    """
    Record T_ini + T samples of the plant under random admissible inputs.

    The trajectory is redrawn until the inputs are persistently exciting of
    order n_hat + N + T_ini and the data matrix S has full row rank.

    Args:
        plant: Ground-truth plant
        T: Number of data samples after the initialization prefix
        U: Input constraint set
        seed: Seed of the excitation and disturbance streams
        policy: "uniform" over U (or the excitation box) or "zero"
        order_bound: Upper bound on the plant order (defaults to n_xi)
        horizon: Prediction horizon N
        max_redraws: Attempts before giving up
        excitation: Optional symmetric excitation box half-widths

    Returns:
        IoTrajectory including the true disturbances
    """
    if policy not in (UNIFORM, ZERO):
        raise DimensionError(f"unknown input policy '{policy}'")
    layout = plant.layout
    order = (layout.n_xi if order_bound is None else order_bound) + horizon + plant.t_ini
    support = U if excitation is None else Polytope.from_box(-np.asarray(excitation), np.asarray(excitation))
    length = plant.t_ini + T
    for attempt in range(max_redraws):
        if policy == UNIFORM:
            u = uniform_points(support, length, seed, _DATA_STREAM, attempt, 0)
        else:
            u = np.zeros((length, plant.m))
        d = plant.disturbances(length, seed, _DATA_STREAM, attempt, 1)
        _, y, _ = arx_rollout(plant.phi, plant.psi, plant.t_ini, np.zeros(layout.n_xi), u.reshape(-1),
                              d_f=d.reshape(-1))
        traj = IoTrajectory(inputs=u, outputs=y, prefix_len=plant.t_ini, disturbances=d)
        S, _ = data_matrices(traj)
        if is_persistently_exciting(traj.data_inputs(), order) and numerical_rank(S) == S.shape[0]:
            logger.info(f"Collected {T} data samples (attempt {attempt + 1}, PE order {order})")
            return traj
        logger.warning(f"Data attempt {attempt + 1}: inputs not persistently exciting of order {order}; redrawing")
    raise ExcitationError(f"no persistently exciting trajectory after {max_redraws} attempts")


def prediction_rmse(traj: IoTrajectory, cm: ConsistencyModel, plant: PlantModel, input_sequences: np.ndarray,
                    samples: Sequence[UncertaintySample], K=None) -> np.ndarray:
    """
    Root-mean-square prediction error per input sequence from xi = 0.

    Every sample predicts with zero future disturbances; the reference is the
    disturbance-free rollout of the true plant. Samples whose predictors lose
    rank are skipped.

    Args:
        traj: Recorded trajectory
        cm: Consistency model
        plant: Ground-truth plant
        input_sequences: Array (n_inputs, m N) of stacked inputs
        samples: Uncertainty samples
        K: Feedback gain of the predictors (zero when omitted)

    Returns:
        RMSE per input sequence
    """
    sequences = np.atleast_2d(np.asarray(input_sequences, dtype=float))
    N = sequences.shape[1] // plant.m
    n_xi = plant.layout.n_xi
    K = np.zeros((plant.m, n_xi)) if K is None else np.atleast_2d(np.asarray(K, dtype=float))
    basis = build_basis(traj, K, N)
    predictors = []
    for w in samples:
        try:
            predictors.append(predictor_from_basis(basis, cm, w.with_future(np.zeros(plant.p * N))))
        except ExcitationError as exc:
            logger.warning(f"{exc}; sample skipped")
    if not predictors:
        raise ExcitationError("no sample produced a predictor")
    xi0 = np.zeros(n_xi)
    errors = np.empty(sequences.shape[0])
    for i, v in enumerate(sequences):
        _, y_true, _ = arx_rollout(plant.phi, plant.psi, plant.t_ini, xi0, v, K=K)
        y_true = y_true.reshape(-1)
        sq = [np.mean((predict_output(pm, xi0, v) - y_true) ** 2) for pm in predictors]
        errors[i] = float(np.sqrt(np.mean(sq)))
    return errors


def open_loop_eval(traj: IoTrajectory, cm: ConsistencyModel, plant: PlantModel, U: Polytope, N: int,
                   n_inputs: int, n_samples: int, consistent: bool, sampler: SamplerConfig, seed: int,
                   K=None) -> Dict:
    """
    Prediction RMSE statistics of one sampling mode.

    Args:
        traj: Recorded trajectory
        cm: Consistency model
        plant: Ground-truth plant
        U: Input constraint set
        N: Prediction horizon
        n_inputs: Number of random admissible input sequences
        n_samples: Uncertainty samples per sequence
        consistent: Draw data disturbances consistent with the data, or iid over D
        sampler: Sampler settings
        seed: Seed of the input sequences
        K: Optional feedback gain

    Returns:
        Dictionary with the per-sequence RMSE and its mean, min and max
    """
    inputs = uniform_points(U, n_inputs * N, seed, _OPENLOOP_STREAM).reshape(n_inputs, N * plant.m)
    draw = draw_uncertainty_samples if consistent else draw_inconsistent_samples
    samples = draw(cm, plant.disturbance_set, N, n_samples, sampler, stream=_OPENLOOP_STREAM)
    rmse = prediction_rmse(traj, cm, plant, inputs, samples, K)
    mode = "consistent" if consistent else "inconsistent"
    logger.info(f"Open-loop RMSE ({mode}): mean {rmse.mean():.4g}, min {rmse.min():.4g}, max {rmse.max():.4g}")
    return {"mode": mode, "rmse": rmse.tolist(), "mean": float(rmse.mean()), "min": float(rmse.min()),
            "max": float(rmse.max())}


def open_loop_compare(traj: IoTrajectory, cm: ConsistencyModel, plant: PlantModel, U: Polytope, N: int,
                      n_inputs: int, n_samples: int, sampler: SamplerConfig, seed: int, K=None) -> Dict:
    """
    Compare consistent and inconsistent sampling over the same input sequences.

    Returns:
        Report with both RMSE statistics and the per-sequence reduction in percent
    """
    consistent = open_loop_eval(traj, cm, plant, U, N, n_inputs, n_samples, True, sampler, seed, K)
    inconsistent = open_loop_eval(traj, cm, plant, U, N, n_inputs, n_samples, False, sampler, seed, K)
    rc, ri = np.asarray(consistent["rmse"]), np.asarray(inconsistent["rmse"])
    reduction = 100.0 * (ri - rc) / np.where(ri > 0.0, ri, 1.0)
    logger.info(f"RMSE reduction: mean {reduction.mean():.2f} %, min {reduction.min():.2f} %, max {reduction.max():.2f} %")
    return {
        "consistent": consistent,
        "inconsistent": inconsistent,
        "reduction": {"per_sequence": reduction.tolist(), "mean": float(reduction.mean()),
                      "min": float(reduction.min()), "max": float(reduction.max())},
    }


@dataclass(frozen=True)
class ClosedLoopSetup:
    """
    Everything the online loop needs besides the plant.

    Attributes:
        problem: OCP solved at every step.
        K: Feedback gain.
        Q: Output weight.
        R: Input weight.
        U: Input constraint set.
        Y: Output constraint set.
        A_cl_nominal: Nominal closed-loop matrix used by the candidate solution.
        E: Disturbance input matrix.
        Xi_inf: Optional invariant set every initial state must lie in.
    """

    problem: OcpProblem
    K: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    U: Polytope
    Y: Polytope
    A_cl_nominal: np.ndarray
    E: np.ndarray
    Xi_inf: Optional[Polytope] = None


@dataclass
class RunRecord:
    """
    One closed-loop run.

    Attributes:
        run: Run index.
        xi: Extended states, shape (steps + 1, n_xi).
        u, y, d: Applied inputs, measured outputs and realized disturbances.
        stage_cost: y^T Q y + u^T R u per step.
        optimal_cost: J*_N per step (NaN where the OCP failed).
        status: OCP status per step.
        candidate_feasible: Candidate feasibility per step (None at k = 0).
        solve_time: Wall-clock seconds of every OCP solve.
        valid: False once a fallback input was applied.
    """

    run: int
    xi: np.ndarray
    u: np.ndarray
    y: np.ndarray
    d: np.ndarray
    stage_cost: np.ndarray
    optimal_cost: np.ndarray
    status: List[str] = field(default_factory=list)
    candidate_feasible: List[Optional[bool]] = field(default_factory=list)
    solve_time: List[float] = field(default_factory=list)
    valid: bool = True
    input_violations: int = 0
    output_violations: int = 0

    @property
    def steps(self) -> int:
        return self.u.shape[0]

    @property
    def total_cost(self) -> float:
        return float(self.stage_cost.sum())

    @property
    def candidate_infeasible(self) -> int:
        return sum(1 for flag in self.candidate_feasible if flag is False)

    @property
    def candidate_checks(self) -> int:
        return sum(1 for flag in self.candidate_feasible if flag is not None)

    def to_dict(self) -> Dict:
        return {
            "run": self.run,
            "J_tot": self.total_cost,
            "valid": self.valid,
            "input_violations": self.input_violations,
            "output_violations": self.output_violations,
            "candidate_infeasible": self.candidate_infeasible,
            "xi": self.xi.tolist(),
            "u": self.u.tolist(),
            "y": self.y.tolist(),
            "d": self.d.tolist(),
            "stage_cost": self.stage_cost.tolist(),
            "optimal_cost": [None if np.isnan(c) else float(c) for c in self.optimal_cost],
            "status": self.status,
            "candidate_feasible": self.candidate_feasible,
            "solve_time": self.solve_time,
        }


def run_closed_loop(setup: ClosedLoopSetup, plant: PlantModel, xi0, steps: int, seed: int,
                    run_index: int = 0) -> RunRecord:
    """
    Apply the predictive controller to the plant.

    Args:
        setup: Controller data
        plant: Ground-truth plant
        xi0: Initial extended state
        steps: Number of closed-loop steps
        seed: Seed of the disturbance streams
        run_index: Run number selecting the disturbance substream

    Returns:
        RunRecord

    Raises:
        InfeasibleStartError: when xi0 lies outside the invariant set
    """
    prob = setup.problem
    xi = np.asarray(xi0, dtype=float).reshape(-1)
    if setup.Xi_inf is not None and not contains(setup.Xi_inf, xi):
        raise InfeasibleStartError("initial extended state lies outside the robust control invariant set")
    m, p = plant.m, plant.p
    disturbances = plant.disturbances(steps, seed, _RUN_STREAM, run_index) if steps else np.zeros((0, p))
    K = np.atleast_2d(setup.K)
    record = RunRecord(run=run_index, xi=np.zeros((steps + 1, xi.size)), u=np.zeros((steps, m)),
                       y=np.zeros((steps, p)), d=disturbances, stage_cost=np.zeros(steps),
                       optimal_cost=np.full(steps, np.nan))
    record.xi[0] = xi
    v_prev = None
    for k in range(steps):
        if v_prev is not None:
            candidate = candidate_solution(v_prev, K, setup.A_cl_nominal, setup.E, disturbances[k - 1])
            record.candidate_feasible.append(check_candidate_feasible(prob, xi, candidate))
        else:
            record.candidate_feasible.append(None)
        start = time.perf_counter()
        try:
            u, result = control_step(prob, K, xi)
            record.status.append(result.status)
            record.optimal_cost[k] = result.objective
            v_prev = result.v_f_opt
        except InfeasibleDesignError:
            u = K @ xi
            record.status.append("infeasible")
            record.valid = False
            v_prev = None
            logger.warning(f"Run {run_index}, step {k}: OCP infeasible, applying u = K xi; run flagged invalid")
        record.solve_time.append(time.perf_counter() - start)
        y, xi = simulate_plant_step(plant, xi, u, disturbances[k])
        record.u[k], record.y[k], record.xi[k + 1] = u, y, xi
        record.stage_cost[k] = float(y @ setup.Q @ y + u @ setup.R @ u)
        record.input_violations += int(not contains(setup.U, u, TOL_FEAS))
        record.output_violations += int(not contains(setup.Y, y, TOL_FEAS))
    return record


def clopper_pearson_upper(k: int, n: int, alpha: float = 0.05) -> float:
    """One-sided (1 - alpha) Clopper-Pearson upper bound of a binomial rate."""
    if n == 0 or k >= n:
        return 1.0
    return float(stats.beta.ppf(1.0 - alpha, k + 1, n - k))


def summarize_runs(records: Sequence[RunRecord], alpha: float = 0.05) -> Dict:
    """Aggregate statistics over Monte Carlo runs."""
    records = sorted(records, key=lambda r: r.run)
    if not records:
        return {"runs": 0, "J_tot": {"min": 0.0, "mean": 0.0, "max": 0.0}, "eps_f": 0.0, "eps_f_upper": 1.0,
                "input_violations": 0, "output_violations": 0, "output_violation_rate": 0.0,
                "invalid_runs": 0, "mean_solve_time": 0.0}
    costs = np.array([r.total_cost for r in records])
    checks = sum(r.candidate_checks for r in records)
    failures = sum(r.candidate_infeasible for r in records)
    steps = sum(r.steps for r in records)
    times = [t for r in records for t in r.solve_time]
    out_viol = sum(r.output_violations for r in records)
    return {
        "runs": len(records),
        "J_tot": {"min": float(costs.min()), "mean": float(costs.mean()), "max": float(costs.max())},
        "eps_f": failures / checks if checks else 0.0,
        "eps_f_upper": clopper_pearson_upper(failures, checks, alpha),
        "candidate_checks": checks,
        "input_violations": sum(r.input_violations for r in records),
        "output_violations": out_viol,
        "output_violation_rate": out_viol / steps if steps else 0.0,
        "invalid_runs": sum(1 for r in records if not r.valid),
        "mean_solve_time": float(np.mean(times)) if times else 0.0,
    }


def monte_carlo(setup: ClosedLoopSetup, plant: PlantModel, xi0, steps: int, n_runs: int, seed: int,
                threads: int = 0) -> Tuple[List[RunRecord], Dict]:
    """
    Independent closed-loop runs over per-run disturbance substreams.

    Results do not depend on the thread count.

    Args:
        setup: Controller data
        plant: Ground-truth plant
        xi0: Initial extended state
        steps: Steps per run
        n_runs: Number of runs
        seed: Seed of the disturbance streams
        threads: Worker threads; 0 selects the number of available cores

    Returns:
        Tuple (records in run order, summary)
    """
    workers = threads or os.cpu_count() or 1
    if setup.Xi_inf is not None and not contains(setup.Xi_inf, np.asarray(xi0, dtype=float)):
        raise InfeasibleStartError("initial extended state lies outside the robust control invariant set")
    if workers <= 1 or n_runs < 2:
        records = [run_closed_loop(setup, plant, xi0, steps, seed, i) for i in range(n_runs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda i: run_closed_loop(setup, plant, xi0, steps, seed, i), range(n_runs)))
    summary = summarize_runs(records)
    logger.info(
        f"Monte Carlo: {summary['runs']} runs, J_tot min/mean/max = {summary['J_tot']['min']:.1f} / "
        f"{summary['J_tot']['mean']:.1f} / {summary['J_tot']['max']:.1f}, eps_f = {summary['eps_f']:.4f}, "
        f"violations (input/output) = {summary['input_violations']}/{summary['output_violations']}"
    )
    return records, summary
