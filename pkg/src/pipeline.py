"""
Offline Pipeline
Runs the offline design stages in order: consistency, system-matrix
vertices, terminal ingredients, constraint sampling, invariant set,
first-step constraint, sample-average cost and stability certificates.
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .behavioral import IoTrajectory, excitation_report
from .config import ExperimentConfig
from .consistency import (ConsistencyModel, SystemMatrixSet, apply_prior_knowledge, build_consistency_model,
                          system_matrix_vertices)
from .controller import (CostModel, OcpProblem, average_cost, build_first_step_constraint,
                         feasible_first_inputs, solve_ocp)
from .errors import DpcError, NumericalError, SynthesisError
from .geometry import Polytope, exact_vertices, max_robust_control_invariant
from .predictor import build_basis
from .scenario import (CcsApproxConfig, SamplerConfig, assemble_constraint_set, predictor_pool,
                       sample_uniform_polytope)
from .simulator import ClosedLoopSetup
from .synthesis import (TerminalIngredients, ioss_constants, lower_cost_bound, nominal_dynamics, rasie_check,
                        synthesize_ingredients, upper_cost_bound, vertex_dynamics)

logger = logging.getLogger(__name__)

# Stream keys separating the cost samples and envelope points from the constraint samples
_COST_STREAM = 7
_ENVELOPE_STREAM = 9
_ENVELOPE_POINTS = 30


@dataclass
class OfflineBundle:
    """
    Everything the online controller and the reports need.

    Attributes:
        mode: Chance-constraint approximation mode.
        consistency: Consistency model after prior knowledge.
        systems: Consistent system-matrix vertices.
        ingredients: Gain, terminal weight and terminal set.
        C, C_R, C_N: Sampled constraint set, first-step constraint and its projection.
        Xi_inf: Robust control invariant set and whether its recursion converged.
        cost: Sample-average cost.
        A_cl_nominal: Nominal closed-loop matrix.
        E: Disturbance input matrix.
        stages: Per-stage sampling records (sample counts, rows, sigma*).
        certificates: IOSS constants, cost bounds and the nominal stability check.
        timings: Wall-clock seconds per stage.
    """

    mode: str
    consistency: ConsistencyModel
    systems: SystemMatrixSet
    ingredients: TerminalIngredients
    C: Polytope
    C_R: Polytope
    C_N: Polytope
    Xi_inf: Polytope
    Xi_converged: bool
    cost: CostModel
    A_cl_nominal: np.ndarray
    E: np.ndarray
    stages: List[Dict] = field(default_factory=list)
    certificates: Dict = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def K(self) -> np.ndarray:
        return self.ingredients.K

    def problem(self) -> OcpProblem:
        n_xi, m = self.K.shape[1], self.K.shape[0]
        N = (self.C.dim - n_xi) // m
        return OcpProblem(self.cost, self.C, self.C_R, n_xi, m, N)

    def setup(self, cfg: ExperimentConfig) -> ClosedLoopSetup:
        """Closed-loop data of this bundle for the configured weights and constraints."""
        return ClosedLoopSetup(problem=self.problem(), K=self.K, Q=np.asarray(cfg.controller.Q),
                               R=np.asarray(cfg.controller.R), U=cfg.input_set.polytope(),
                               Y=cfg.output_set.polytope(), A_cl_nominal=self.A_cl_nominal, E=self.E,
                               Xi_inf=self.Xi_inf)

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode,
            "consistency": self.consistency.to_dict(),
            "systems": self.systems.to_dict(),
            "ingredients": self.ingredients.to_dict(),
            "C": self.C.to_dict(),
            "C_R": self.C_R.to_dict(),
            "C_N": self.C_N.to_dict(),
            "Xi_inf": {**self.Xi_inf.to_dict(), "converged": self.Xi_converged},
            "cost": self.cost.to_dict(),
            "A_cl_nominal": self.A_cl_nominal.tolist(),
            "E": self.E.tolist(),
            "stages": self.stages,
            "certificates": self.certificates,
            "timings": self.timings,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "OfflineBundle":
        return cls(
            mode=data["mode"],
            consistency=ConsistencyModel.from_dict(data["consistency"]),
            systems=SystemMatrixSet.from_dict(data["systems"]),
            ingredients=TerminalIngredients.from_dict(data["ingredients"]),
            C=Polytope.from_dict(data["C"]),
            C_R=Polytope.from_dict(data["C_R"]),
            C_N=Polytope.from_dict(data["C_N"]),
            Xi_inf=Polytope.from_dict(data["Xi_inf"]),
            Xi_converged=bool(data["Xi_inf"].get("converged", False)),
            cost=CostModel.from_dict(data["cost"]),
            A_cl_nominal=np.atleast_2d(np.asarray(data["A_cl_nominal"], dtype=float)),
            E=np.atleast_2d(np.asarray(data["E"], dtype=float)),
            stages=list(data.get("stages", [])),
            certificates=dict(data.get("certificates", {})),
            timings=dict(data.get("timings", {})),
        )


class OfflinePipeline:
    """Offline design of the sampling-based predictive controller."""

    def __init__(self, cfg: ExperimentConfig, threads: int = 1):
        """
        Initialize the pipeline with a validated configuration.

        Args:
            cfg: Experiment configuration
            threads: Worker threads for predictor construction
        """
        self.cfg = cfg
        self.threads = max(threads, 1)
        self.timings: Dict[str, float] = {}
        self.D = cfg.disturbance_set.polytope()
        self.U = cfg.input_set.polytope()
        self.Y = cfg.output_set.polytope()
        self.sampler = SamplerConfig.from_settings(cfg.sampling)
        self.approx = CcsApproxConfig.from_controller(cfg.controller)

    @contextmanager
    def stage(self, name: str):
        """Time a stage and tag escaping errors with its name."""
        logger.info(f"Stage '{name}' started")
        start = time.perf_counter()
        try:
            yield
        except DpcError as exc:
            if not hasattr(exc, "stage"):
                exc.stage = name
            raise
        finally:
            self.timings[name] = time.perf_counter() - start
        logger.info(f"Stage '{name}' finished in {self.timings[name]:.2f} s")

    def run(self, traj: IoTrajectory) -> OfflineBundle:
        """
        Execute every offline stage on a recorded trajectory.

        Args:
            traj: Recorded trajectory

        Returns:
            OfflineBundle
        """
        cfg, tol = self.cfg, self.cfg.tolerances
        ctrl = cfg.controller
        N = ctrl.horizon
        Q, R = np.asarray(ctrl.Q), np.asarray(ctrl.R)
        layout = traj.layout

        with self.stage("excitation"):
            excitation_report(traj, cfg.data.order_bound, N)

        with self.stage("consistency"):
            cm = build_consistency_model(traj, self.D)
            if cfg.prior_knowledge:
                cm = apply_prior_knowledge(cm, cfg.prior_knowledge)
            systems = system_matrix_vertices(cm, tol.vertex_cap)

        with self.stage("terminal ingredients"):
            ingredients = synthesize_ingredients(
                traj, cm, systems, Q, R, self.D, self.U, self.Y,
                gain=np.asarray(ctrl.gain) if ctrl.gain is not None else None,
                weight=np.asarray(ctrl.terminal_weight) if ctrl.terminal_weight is not None else None,
                inject_supplied=ctrl.inject_supplied, margin=tol.lmi, max_iter=tol.max_iter, tol=tol.set_equality,
            )
            K = ingredients.K

        with self.stage("constraint sampling"):
            basis = build_basis(traj, K, N)
            constraints = assemble_constraint_set(traj, cm, K, N, self.approx, self.sampler, ingredients.X_N,
                                                  self.U, self.Y, basis=basis)

        dyn = vertex_dynamics(systems, layout)
        with self.stage("invariant set"):
            C_N = feasible_first_inputs(constraints.polytope, layout.n_xi, layout.m, tol.fm_row_cap)
            invariant = max_robust_control_invariant(dyn.closed_loop(K), dyn.B_tilde, dyn.E_tilde,
                                                     exact_vertices(self.D, max(self.D.dim, 1)), C_N,
                                                     max_iter=tol.max_iter, tol=tol.set_equality)

        with self.stage("first-step constraint"):
            C_R = build_first_step_constraint(dyn, K, self.D, invariant.polytope, N)

        with self.stage("cost"):
            predictors, _ = predictor_pool(basis, cm, self.D, ctrl.cost_samples, self.sampler, stream=_COST_STREAM)
            cost = average_cost(predictors, Q, R, ingredients.P, N)
            problem = OcpProblem(cost, constraints.polytope, C_R, layout.n_xi, layout.m, N)

        with self.stage("certificates"):
            certificates = self.certificates(systems, layout, dyn, ingredients, problem, invariant.polytope)

        A_cl_nominal = nominal_dynamics(systems, layout).closed_loop(K)[0]
        return OfflineBundle(
            mode=ctrl.mode, consistency=cm, systems=systems, ingredients=ingredients, C=constraints.polytope,
            C_R=C_R, C_N=C_N, Xi_inf=invariant.polytope, Xi_converged=bool(invariant.converged), cost=cost,
            A_cl_nominal=A_cl_nominal, E=dyn.E_tilde, stages=constraints.stages,
            certificates=certificates, timings=dict(self.timings),
        )

    def certificates(self, systems, layout, dyn, ingredients: TerminalIngredients, problem: OcpProblem,
                     Xi_inf: Polytope) -> Dict:
        """
        IOSS constants, quadratic cost bounds and the stability check at eps_f = 0.

        Failures are reported in the result instead of aborting the design.
        """
        ctrl, tol = self.cfg.controller, self.cfg.tolerances
        Q, R = np.asarray(ctrl.Q), np.asarray(ctrl.R)
        result: Dict = {"ioss": None, "P_l": None, "P_u": None, "c": None, "stability": None}
        ioss = ioss_constants(dyn, systems, R, Q, grid=ctrl.ioss_grid, margin=tol.lmi)
        if ioss.certified:
            result["ioss"] = {"P_W": ioss.P_W.tolist(), "c_u": ioss.c_u, "c_y": ioss.c_y, "c_d": ioss.c_d}
        try:
            P_l = lower_cost_bound(systems, layout, Q, R)
            points = sample_uniform_polytope(Xi_inf, _ENVELOPE_POINTS, self.sampler, stream=_ENVELOPE_STREAM)

            def optimal_cost(xi: np.ndarray) -> Optional[float]:
                solved = solve_ocp(problem, xi)
                return solved.objective if solved.optimal else None

            P_u, c = upper_cost_bound(optimal_cost, points, margin=tol.lmi)
        except (SynthesisError, NumericalError) as exc:
            logger.warning(f"Quadratic cost bounds unavailable: {exc}")
            return result
        result.update({"P_l": P_l.tolist(), "P_u": P_u.tolist(), "c": c})
        report = rasie_check(0.0, ingredients.K, ingredients.P, Q, R, P_l, P_u, ioss, dyn)
        result["stability"] = {"status": report.status, "eps_f": report.eps_f,
                               "min_eigenvalues": report.min_eigenvalues}
        return result
