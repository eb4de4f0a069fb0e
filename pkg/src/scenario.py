"""
Constraint Sampling
Uniform sampling of uncertainty, sample-complexity bounds and the two
offline approximations of chance-constrained sets: intersecting enough
sampled sets (direct), or scaling a simple approximating set about its center
until a prescribed fraction of validation samples contains it (scaling).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .behavioral import IoTrajectory
from .consistency import ConsistencyModel
from .errors import (ConfigError, DimensionError, EmptySetError, ExcitationError, GeometryError,
                     SampleDeficitError, UnboundedSetError)
from .geometry import (Polytope, bounding_box, chebyshev_center, contains, intersect_all, is_empty,
                       remove_redundant, restrict_to_hull, scale_about_center, support)
from .predictor import (PredictorBasis, PredictorMatrices, UncertaintySample, build_basis,
                        predictor_from_basis)

logger = logging.getLogger(__name__)

HIT_AND_RUN = "hit-and-run"
REJECTION = "rejection"
DIRECT = "direct"
SCALING = "scaling"

# Sampled sets folded into the running intersection per redundancy-removal pass
_FOLD_CHUNK = 250
_REJECTION_BATCH = 100_000
_REJECTION_MIN_DRAWS = 1_000_000
_MAX_REDRAW_ROUNDS = 10


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by (seed, keys)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True)
class SamplerConfig:
    """
    Uniform polytope sampler settings.

    Attributes:
        method: "hit-and-run" or "rejection".
        burn_in: Discarded chain steps; None selects 10 times the dimension.
        thinning: Keep every thinning-th chain state.
        seed: Stream seed.
    """

    method: str = HIT_AND_RUN
    burn_in: Optional[int] = None
    thinning: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.method not in (HIT_AND_RUN, REJECTION):
            raise ConfigError(f"unknown sampling method '{self.method}'")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError("burn_in must be non-negative")
        if self.thinning < 1:
            raise ConfigError("thinning must be at least 1")

    @classmethod
    def from_settings(cls, settings) -> "SamplerConfig":
        """Build from a SamplingConfig section."""
        return cls(method=settings.method, burn_in=settings.burn_in, thinning=settings.thinning, seed=settings.seed)


@dataclass(frozen=True)
class CcsApproxConfig:
    """
    Chance-constraint approximation settings.

    Attributes:
        eps, eps_conf: Output risk and confidence.
        mode: "direct" or "scaling".
        design_samples: Samples forming the simple approximating set (scaling).
        eps_u, eps_conf_u: Input risk and confidence (default eps, eps_conf).
        eps_xi, eps_conf_xi: Terminal risk and confidence (default eps, eps_conf).
        direct_sample_cap: Optional cap on the learning-theory sample count.
        validation_samples: Optional validation count (raised to at least n_ps).
        state_box_scale: Scale of the extended-state bounding box.
    """

    eps: float = 0.05
    eps_conf: float = 1e-4
    mode: str = DIRECT
    design_samples: int = 200
    eps_u: Optional[float] = None
    eps_conf_u: Optional[float] = None
    eps_xi: Optional[float] = None
    eps_conf_xi: Optional[float] = None
    direct_sample_cap: Optional[int] = None
    validation_samples: Optional[int] = None
    state_box_scale: float = 1.0

    def __post_init__(self):
        if self.mode not in (DIRECT, SCALING):
            raise ConfigError(f"unknown approximation mode '{self.mode}'")
        for name in ("eps", "eps_conf", "eps_u", "eps_conf_u", "eps_xi", "eps_conf_xi"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
        if self.mode == DIRECT and max(self.risk("output")[0], self.risk("input")[0], self.risk("terminal")[0]) >= 0.14:
            raise ConfigError("direct approximation requires risk parameters below 0.14")

    @classmethod
    def from_controller(cls, ctrl) -> "CcsApproxConfig":
        """Build from a ControllerConfig section."""
        return cls(eps=ctrl.eps, eps_conf=ctrl.eps_conf, mode=ctrl.mode, design_samples=ctrl.design_samples,
                   eps_u=ctrl.eps_u, eps_conf_u=ctrl.eps_conf_u, eps_xi=ctrl.eps_xi, eps_conf_xi=ctrl.eps_conf_xi,
                   direct_sample_cap=ctrl.direct_sample_cap, validation_samples=ctrl.validation_samples,
                   state_box_scale=ctrl.state_box_scale)

    def risk(self, constraint_class: str) -> Tuple[float, float]:
        """(eps, eps_conf) of "output", "input" or "terminal" constraints."""
        if constraint_class == "input":
            return (self.eps_u or self.eps, self.eps_conf_u or self.eps_conf)
        if constraint_class == "terminal":
            return (self.eps_xi or self.eps, self.eps_conf_xi or self.eps_conf)
        return (self.eps, self.eps_conf)


def n_lt(eps: float, eps_conf: float, n_zeta: int, n_c: int) -> int:
    """
    Learning-theory sample complexity of the direct approximation.

    Args:
        eps: Risk parameter in (0, 0.14)
        eps_conf: Confidence parameter in (0, 1)
        n_zeta: Number of decision variables
        n_c: Number of constraint rows per sample

    Returns:
        ceil(4.1/eps (ln(21.64/eps_conf) + 4.39 n_zeta log2(8 e n_c / eps)))
    """
    if not 0.0 < eps < 0.14:
        raise ConfigError(f"learning-theory bound needs eps in (0, 0.14), got {eps}")
    if not 0.0 < eps_conf < 1.0:
        raise ConfigError(f"confidence eps_conf must lie in (0, 1), got {eps_conf}")
    if n_zeta < 1 or n_c < 1:
        raise ConfigError("n_zeta and n_c must be positive")
    value = 4.1 / eps * (math.log(21.64 / eps_conf) + 4.39 * n_zeta * math.log2(8.0 * math.e * n_c / eps))
    return int(math.ceil(value))


def n_ps(eps: float, eps_conf: float) -> int:
    """
    Validation sample count of probabilistic scaling, ceil(7.47/eps ln(1/eps_conf)).
    """
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"risk eps must lie in (0, 1), got {eps}")
    if not 0.0 < eps_conf <= 1.0:
        raise ConfigError(f"confidence eps_conf must lie in (0, 1], got {eps_conf}")
    return int(math.ceil(7.47 / eps * math.log(1.0 / eps_conf)))


def discarded_count(eps: float, n_samples: int) -> int:
    """Index N_r = ceil(eps N_s / 2) of the scaling factor kept by probabilistic scaling."""
    return max(int(math.ceil(eps * n_samples / 2.0)), 1)


def _hit_and_run(G: np.ndarray, g: np.ndarray, x0: np.ndarray, n: int, burn_in: int, thinning: int,
                 rng: np.random.Generator) -> np.ndarray:
    d = x0.size
    out = np.empty((n, d))
    x = x0.copy()
    kept = 0
    step = 0
    while kept < n:
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        slack = np.maximum(g - G @ x, 0.0)
        rate = G @ direction
        ahead = rate > 1e-14
        behind = rate < -1e-14
        hi = np.min(slack[ahead] / rate[ahead]) if np.any(ahead) else np.inf
        lo = np.max(slack[behind] / rate[behind]) if np.any(behind) else -np.inf
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise UnboundedSetError("hit-and-run needs a bounded polytope")
        x = x + rng.uniform(lo, hi) * direction
        step += 1
        if step > burn_in and (step - burn_in) % thinning == 0:
            out[kept] = x
            kept += 1
    return out


def _rejection(P: Polytope, n: int, rng: np.random.Generator) -> np.ndarray:
    lower, upper = bounding_box(P)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise UnboundedSetError("rejection sampling needs a bounded polytope")
    accepted: List[np.ndarray] = []
    count = 0
    drawn = 0
    while count < n:
        batch = rng.uniform(lower, upper, size=(_REJECTION_BATCH, P.dim))
        drawn += _REJECTION_BATCH
        keep = batch[np.all(batch @ P.G.T <= P.g, axis=1)]
        accepted.append(keep)
        count += keep.shape[0]
        if drawn >= _REJECTION_MIN_DRAWS and count / drawn < 1e-6:
            raise GeometryError(
                f"rejection sampling accepted {count} of {drawn} draws; use method '{HIT_AND_RUN}' instead"
            )
    return np.vstack(accepted)[:n]


def sample_uniform_polytope(P: Polytope, n: int, cfg: SamplerConfig,
                            stream: Union[int, Sequence[int]] = 0) -> np.ndarray:
    """
    Draw points approximately uniformly from a bounded polytope.

    Flat polytopes are sampled uniformly within their affine hull.

    Args:
        P: Bounded polytope
        n: Number of points
        cfg: Sampler settings
        stream: Stream key, or tuple of keys, distinguishing independent uses of one seed

    Returns:
        Array of shape (n, P.dim)
    """
    if n < 0:
        raise DimensionError("sample count must be non-negative")
    if n == 0:
        return np.zeros((0, P.dim))
    reduced, x0, N = restrict_to_hull(P)
    k = N.shape[1]
    if k == 0:
        return np.tile(x0, (n, 1))
    center, radius = chebyshev_center(reduced)
    if radius <= 1e-12:
        raise GeometryError("cannot sample a polytope with zero Chebyshev radius")
    keys = (stream,) if np.ndim(stream) == 0 else tuple(stream)
    rng = make_rng(cfg.seed, *keys)
    if cfg.method == REJECTION:
        Z = _rejection(reduced, n, rng)
    else:
        burn_in = 10 * k if cfg.burn_in is None else cfg.burn_in
        Z = _hit_and_run(reduced.G, reduced.g, center, n, burn_in, cfg.thinning, rng)
    return x0 + Z @ N.T


def draw_uncertainty_samples(cm: ConsistencyModel, D: Polytope, N: int, n: int, cfg: SamplerConfig,
                             stream: int = 0) -> List[UncertaintySample]:
    """
    Draw uncertainty samples: consistent free blocks and future disturbances.

    Args:
        cm: Consistency model
        D: Disturbance support
        N: Prediction horizon
        n: Number of samples
        cfg: Sampler settings
        stream: Stream key; different keys give independent sample sets

    Returns:
        List of UncertaintySample with seed_index 0 ... n - 1
    """
    if n == 0:
        return []
    if is_empty(cm.Dc):
        raise EmptySetError("the consistent free-parameter set is empty")
    free = sample_uniform_polytope(cm.Dc, n, cfg, stream=2 * stream)
    future = sample_uniform_polytope(D, n * N, cfg, stream=2 * stream + 1).reshape(n, N * D.dim)
    return [UncertaintySample(free_block=cm.unvectorize(free[i]), d_future=future[i], seed_index=i)
            for i in range(n)]


def draw_inconsistent_samples(cm: ConsistencyModel, D: Polytope, N: int, n: int, cfg: SamplerConfig,
                              stream: int = 0) -> List[UncertaintySample]:
    """
    Samples whose data disturbances ignore consistency: every data column uniform over D.
    """
    if n == 0:
        return []
    T = cm.data_len
    columns = sample_uniform_polytope(D, n * T, cfg, stream=2 * stream).reshape(n, T, D.dim)
    future = sample_uniform_polytope(D, n * N, cfg, stream=2 * stream + 1).reshape(n, N * D.dim)
    samples = []
    for i in range(n):
        data = columns[i].T
        samples.append(UncertaintySample(free_block=data[:, :cm.free_dim], d_future=future[i], seed_index=i,
                                         data_disturbance=data))
    return samples


def _stage_rows(M: np.ndarray, offset: np.ndarray, block: int, stage: int, G: np.ndarray,
                g: np.ndarray) -> Polytope:
    rows = slice(stage * block, (stage + 1) * block)
    return Polytope(G @ M[rows], g - G @ offset[rows])


def sampled_stage_constraint(pm: PredictorMatrices, stage: int, G_y, g_y) -> Polytope:
    """
    Sampled output constraint of one prediction stage over (xi, v_f).

    Returns:
        Polytope with rows G_y M_y[l] <= g_y - G_y m_y[l]
    """
    G_y = np.atleast_2d(np.asarray(G_y, dtype=float))
    p = G_y.shape[1]
    if not 0 <= stage < pm.My.shape[0] // p:
        raise DimensionError(f"stage {stage} outside the prediction horizon")
    return _stage_rows(pm.My, pm.my, p, stage, G_y, np.asarray(g_y, dtype=float))


def sampled_input_constraint(pm: PredictorMatrices, stage: int, G_u, g_u) -> Polytope:
    """Sampled input constraint of one prediction stage over (xi, v_f)."""
    G_u = np.atleast_2d(np.asarray(G_u, dtype=float))
    m = G_u.shape[1]
    if not 0 <= stage < pm.Mu.shape[0] // m:
        raise DimensionError(f"stage {stage} outside the prediction horizon")
    return _stage_rows(pm.Mu, pm.mu, m, stage, G_u, np.asarray(g_u, dtype=float))


def sampled_terminal_constraint(pm: PredictorMatrices, X_N: Polytope) -> Polytope:
    """Sampled terminal constraint M_xi z + m_xi in X_N over (xi, v_f)."""
    return Polytope(X_N.G @ pm.Mxi, X_N.g - X_N.G @ pm.mxi)


def approximate_ccs_direct(stage_sets: Sequence[Polytope], n_required: int,
                           bounding: Optional[Polytope] = None) -> Polytope:
    """
    Intersection of sampled sets with redundancy removal.

    Args:
        stage_sets: Sampled sets of one constraint class and stage
        n_required: Required number of samples
        bounding: Optional set intersected first to keep the fold bounded

    Returns:
        Irredundant intersection
    """
    if len(stage_sets) < n_required:
        raise SampleDeficitError(f"direct approximation needs {n_required} sampled sets, got {len(stage_sets)}")
    if not stage_sets:
        raise SampleDeficitError("direct approximation needs at least one sampled set")
    dim = stage_sets[0].dim
    current = bounding if bounding is not None else Polytope.whole_space(dim)
    total = 0
    for start in range(0, len(stage_sets), _FOLD_CHUNK):
        chunk = list(stage_sets[start:start + _FOLD_CHUNK])
        total += sum(P.n_rows for P in chunk)
        merged = intersect_all([current] + chunk, dim)
        if is_empty(merged):
            raise EmptySetError("sampled constraint sets have an empty intersection")
        current = remove_redundant(merged)
    logger.debug(f"Direct approximation: {total} sampled rows, {current.n_rows} irredundant")
    return current


@dataclass
class ScalingResult:
    """
    Outcome of probabilistic scaling.

    Attributes:
        polytope: Scaled simple approximating set.
        sigma_star: Selected scaling factor.
        center: Scaling center.
        sigmas: Scaling factor of every validation sample.
        center_inside: Fraction of validation sets containing the center.
    """

    polytope: Polytope
    sigma_star: float
    center: np.ndarray
    sigmas: np.ndarray
    center_inside: float


def scaling_factor(sas: Polytope, center: np.ndarray, sampled: Polytope) -> float:
    """
    Largest sigma with the SAS scaled about center by sigma inside the sampled set.

    Returns:
        sigma >= 0 (0 when the center violates the sampled set, inf when unconstrained)
    """
    slack = sampled.g - sampled.G @ center
    if np.any(slack < 0.0):
        return 0.0
    sigma = np.inf
    for r in range(sampled.n_rows):
        reach = support(sas.G, sas.g, sampled.G[r]) - sampled.G[r] @ center
        if reach > 1e-12:
            sigma = min(sigma, slack[r] / reach)
    return float(sigma)


def approximate_ccs_scaling(design_sets: Sequence[Polytope], validation_sets: Sequence[Polytope],
                            eps: float, eps_conf: float, bounding: Optional[Polytope] = None) -> ScalingResult:
    """
    Probabilistic scaling of the intersection of design samples.

    Args:
        design_sets: Sampled sets forming the simple approximating set
        validation_sets: Independent sampled sets, at least n_ps(eps, eps_conf) of them
        eps: Risk parameter
        eps_conf: Confidence parameter
        bounding: Optional set intersected with the approximating set

    Returns:
        ScalingResult
    """
    required = n_ps(eps, eps_conf)
    if len(validation_sets) < required:
        raise SampleDeficitError(f"probabilistic scaling needs {required} validation samples, got {len(validation_sets)}")
    if not design_sets:
        raise SampleDeficitError("probabilistic scaling needs at least one design sample")
    dim = design_sets[0].dim
    members = list(design_sets) + ([bounding] if bounding is not None else [])
    sas = intersect_all(members, dim)
    if is_empty(sas):
        raise EmptySetError("simple approximating set is empty")
    sas = remove_redundant(sas)
    center, radius = chebyshev_center(sas)
    if radius <= 1e-12:
        raise GeometryError("simple approximating set is degenerate (zero Chebyshev radius)")
    sigmas = np.array([scaling_factor(sas, center, V) for V in validation_sets])
    inside = float(np.mean([contains(V, center) for V in validation_sets]))
    if inside < 1.0 - eps:
        logger.warning(f"scaling center lies in only {inside:.3f} of the validation sets (expected >= {1 - eps:.3f})")
    n_r = discarded_count(eps, len(validation_sets))
    sigma_star = float(np.sort(sigmas)[n_r - 1])
    if not np.isfinite(sigma_star):
        sigma_star = 1.0
    logger.info(f"Probabilistic scaling: N_s={len(validation_sets)}, N_r={n_r}, sigma*={sigma_star:.4f}")
    return ScalingResult(scale_about_center(sas, center, sigma_star), sigma_star, center, sigmas, inside)


def state_box(U: Polytope, Y: Polytope, K, t_ini: int, N: int, scale: float = 1.0) -> Polytope:
    """
    Bounding box over (xi, v_f) implied by the input and output constraints.

    xi lies in scale (U^{T_ini} x Y^{T_ini}) and every v_l in scale (u_bar + |K| xi_bar).
    """
    u_low, u_high = bounding_box(U)
    y_low, y_high = bounding_box(Y)
    bounds = np.concatenate([np.tile(np.maximum(abs(u_low), abs(u_high)), t_ini),
                             np.tile(np.maximum(abs(y_low), abs(y_high)), t_ini)])
    if not np.all(np.isfinite(bounds)):
        raise UnboundedSetError("input and output constraint sets must be bounded")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    u_bar = np.maximum(abs(u_low), abs(u_high))
    v_bar = u_bar + np.abs(K) @ bounds
    upper = scale * np.concatenate([bounds, np.tile(v_bar, N)])
    return Polytope.from_box(-upper, upper)


def first_input_constraint(U: Polytope, K, N: int) -> Polytope:
    """Hard constraint G_u (K xi + v_0) <= g_u over (xi, v_f)."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    m, n_xi = K.shape
    selector = np.hstack([K, np.eye(m), np.zeros((m, m * (N - 1)))])
    return Polytope(U.G @ selector, U.g.copy())


@dataclass
class ConstraintSetResult:
    """
    Aggregate sampled constraint set and its provenance.

    Attributes:
        polytope: Constraint set C over (xi, v_f).
        stages: Per stage and constraint class: sample count, rows and (scaling) sigma*.
        predictors: Predictors of the sample pool, in pool order.
        redraws: Samples replaced after a rank collapse.
    """

    polytope: Polytope
    stages: List[Dict] = field(default_factory=list)
    predictors: List[PredictorMatrices] = field(default_factory=list)
    redraws: int = 0


def _required_samples(approx: CcsApproxConfig, constraint_class: str, n_zeta: int, n_c: int) -> Tuple[int, int]:
    """(design, validation) counts; validation is zero in direct mode."""
    eps, conf = approx.risk(constraint_class)
    if approx.mode == SCALING:
        return approx.design_samples, max(n_ps(eps, conf), approx.validation_samples or 0)
    required = n_lt(eps, conf, n_zeta, n_c)
    if approx.direct_sample_cap is not None and required > approx.direct_sample_cap:
        logger.warning(
            f"{constraint_class} constraints: {required} samples required, capped at {approx.direct_sample_cap}; "
            f"the confidence 1 - {conf} is not certified"
        )
        required = approx.direct_sample_cap
    return required, 0


def predictor_pool(basis: PredictorBasis, cm: ConsistencyModel, D: Polytope, n: int, sampler: SamplerConfig,
                   stream: int = 0) -> Tuple[List[PredictorMatrices], int]:
    """
    Predictors of n uncertainty samples, replacing samples whose predictors lose rank.

    Returns:
        Tuple (predictors, number of replaced samples)
    """
    samples = draw_uncertainty_samples(cm, D, basis.horizon, n, sampler, stream)
    predictors: List[PredictorMatrices] = []
    redraws = 0
    for round_index in range(_MAX_REDRAW_ROUNDS + 1):
        failed = 0
        for w in samples:
            try:
                predictors.append(predictor_from_basis(basis, cm, w))
            except ExcitationError as exc:
                failed += 1
                logger.warning(f"{exc}; drawing a replacement sample")
        redraws += failed
        if failed == 0:
            return predictors, redraws
        samples = draw_uncertainty_samples(cm, D, basis.horizon, failed, sampler,
                                           stream=stream + 1000 * (round_index + 1))
    raise ExcitationError(f"predictors kept losing rank after {_MAX_REDRAW_ROUNDS} replacement rounds")


def assemble_constraint_set(traj: IoTrajectory, cm: ConsistencyModel, K, N: int, approx: CcsApproxConfig,
                            sampler: SamplerConfig, X_N: Polytope, U: Polytope, Y: Polytope,
                            basis: Optional[PredictorBasis] = None) -> ConstraintSetResult:
    """
    Aggregate deterministic approximation C of all chance constraints.

    Stage 0 carries the exact input constraint; sampled output constraints
    cover stages 0 ... N-1, sampled input constraints stages 1 ... N-1 and
    the sampled terminal constraint the predicted terminal extended state.

    Args:
        traj: Recorded trajectory
        cm: Consistency model
        K: Feedback gain
        N: Prediction horizon
        approx: Approximation settings
        sampler: Sampler settings
        X_N: Terminal set
        U: Input constraint set
        Y: Output constraint set
        basis: Optional precomputed predictor basis

    Returns:
        ConstraintSetResult
    """
    basis = basis or build_basis(traj, K, N)
    m, n_xi = basis.m, basis.n_xi
    box = state_box(U, Y, K, traj.prefix_len, N, approx.state_box_scale)
    plan = []
    for l in range(N):
        plan.append(("output", l, n_xi + m * (l + 1), Y.n_rows))
    for l in range(1, N):
        plan.append(("input", l, n_xi + m * (l + 1), U.n_rows))
    plan.append(("terminal", N, n_xi + m * N, max(X_N.n_rows, 1)))
    counts = {(cls, l): _required_samples(approx, cls, nz, nc) for cls, l, nz, nc in plan}
    pool_size = max(sum(c) for c in counts.values())
    logger.info(f"Constraint sampling ({approx.mode}): pool of {pool_size} uncertainty samples")
    predictors, redraws = predictor_pool(basis, cm, cm.disturbance_set, pool_size, sampler)
    pieces = [first_input_constraint(U, K, N), box]
    stages: List[Dict] = []
    for cls, l, _, _ in plan:
        design, validation = counts[(cls, l)]
        pool = predictors[:design + validation]
        if cls == "output":
            sets = [sampled_stage_constraint(pm, l, Y.G, Y.g) for pm in pool]
        elif cls == "input":
            sets = [sampled_input_constraint(pm, l, U.G, U.g) for pm in pool]
        else:
            sets = [sampled_terminal_constraint(pm, X_N) for pm in pool]
        record = {"class": cls, "stage": l, "samples": len(pool), "rows_sampled": sum(P.n_rows for P in sets)}
        if approx.mode == SCALING:
            eps, conf = approx.risk(cls)
            result = approximate_ccs_scaling(sets[:design], sets[design:], eps, conf, bounding=box)
            piece = result.polytope
            record["sigma_star"] = result.sigma_star
            record["center_inside"] = result.center_inside
        else:
            piece = approximate_ccs_direct(sets, design, bounding=box)
        record["rows"] = piece.n_rows
        stages.append(record)
        pieces.append(piece)
        logger.info(f"{cls} constraints, stage {l}: {record['rows_sampled']} sampled rows -> {piece.n_rows}")
    C = intersect_all(pieces, basis.n_z)
    if is_empty(C):
        raise EmptySetError("aggregate constraint set is empty; the disturbance bounds are likely too large")
    before = C.n_rows
    C = remove_redundant(C)
    logger.info(f"Aggregate constraint set: {before} rows, {C.n_rows} after redundancy removal")
    return ConstraintSetResult(polytope=C, stages=stages, predictors=predictors, redraws=redraws)
