"""
Experiment Configuration
Typed, validated view of the TOML experiment files consumed by the CLI.

Each TOML table maps onto a frozen dataclass section. Unknown keys are
rejected with the dotted path of the offending entry so that a typo never
silently falls back to a default.
"""

import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python 3.10: tomli is the upstream of the stdlib tomllib
    import tomli as tomllib

from .errors import ConfigError
from .geometry import Polytope

logger = logging.getLogger(__name__)

Matrix = Tuple[Tuple[float, ...], ...]
Vector = Tuple[float, ...]

MODES = ("direct", "scaling")
SAMPLING_METHODS = ("hit-and-run", "rejection")


def _matrix(value: Any, path: str, allow_inf: bool = False) -> Matrix:
    try:
        array = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: expected a numeric matrix") from exc
    if array.ndim == 1:
        array = array.reshape(1, -1)
    finite = ~np.isnan(array) if allow_inf else np.isfinite(array)
    if array.ndim != 2 or not np.all(finite):
        raise ConfigError(f"{path}: expected a finite 2-D matrix")
    return tuple(tuple(float(v) for v in row) for row in array)


def _vector(value: Any, path: str) -> Vector:
    try:
        array = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: expected a numeric vector") from exc
    if np.any(np.isnan(array)):
        raise ConfigError(f"{path}: NaN entries are not allowed")
    return tuple(float(v) for v in array)


def _int(value: Any, path: str) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return int(value)


def _float(value: Any, path: str) -> float:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if np.isnan(value):
        raise ConfigError(f"{path}: NaN is not allowed")
    return float(value)


def _bool(value: Any, path: str) -> bool:
    # TOML booleans only; the string "false" is truthy
    if not isinstance(value, (bool, np.bool_)):
        raise ConfigError(f"{path}: expected true or false, got {value!r}")
    return bool(value)


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _check_keys(table: Mapping[str, Any], allowed: Sequence[str], required: Sequence[str], path: str) -> None:
    if not isinstance(table, Mapping):
        raise ConfigError(f"{path}: expected a table")
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}'")
    for key in required:
        if key not in table:
            raise ConfigError(f"missing required field '{path}.{key}'")


@dataclass(frozen=True)
class ConstraintConfig:
    """
    Polytopic constraint written as a symmetric box or explicit half-spaces.

    Attributes:
        bound: Per-coordinate half-widths of a box centred at the origin.
        G: Half-space normals, used when no box is given.
        g: Half-space offsets.
    """

    bound: Optional[Vector] = None
    G: Optional[Matrix] = None
    g: Optional[Vector] = None

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str) -> "ConstraintConfig":
        _check_keys(table, ("bound", "G", "g"), (), path)
        if "bound" in table:
            if "G" in table or "g" in table:
                raise ConfigError(f"{path}: give either 'bound' or 'G'/'g', not both")
            bound = _vector(table["bound"], f"{path}.bound")
            if any(b <= 0 for b in bound):
                raise ConfigError(f"{path}.bound: half-widths must be positive")
            return cls(bound=bound)
        if "G" not in table or "g" not in table:
            raise ConfigError(f"missing required field '{path}.bound' (or '{path}.G' and '{path}.g')")
        G = _matrix(table["G"], f"{path}.G")
        g = _vector(table["g"], f"{path}.g")
        if len(G) != len(g):
            raise ConfigError(f"{path}: G has {len(G)} rows but g has {len(g)} entries")
        return cls(G=G, g=g)

    @property
    def dim(self) -> int:
        if self.bound is not None:
            return len(self.bound)
        return len(self.G[0])

    def polytope(self) -> Polytope:
        """Build the constraint polytope."""
        if self.bound is not None:
            bound = np.asarray(self.bound)
            return Polytope.from_box(-bound, bound)
        return Polytope(np.asarray(self.G), np.asarray(self.g))


@dataclass(frozen=True)
class PlantConfig:
    """
    Ground-truth ARX plant used for data collection and simulation.

    Attributes:
        phi: Output map of the extended state, shape (p, n_xi).
        psi: Direct feedthrough of the current input, shape (p, m).
        t_ini: Number of past input/output pairs in the extended state.
    """

    phi: Matrix
    psi: Matrix
    t_ini: int = 1

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str = "plant") -> "PlantConfig":
        _check_keys(table, ("phi", "psi", "t_ini"), ("phi", "psi"), path)
        plant = cls(
            phi=_matrix(table["phi"], f"{path}.phi"),
            psi=_matrix(table["psi"], f"{path}.psi"),
            t_ini=_int(table.get("t_ini", 1), f"{path}.t_ini"),
        )
        if plant.t_ini < 1:
            raise ConfigError(f"{path}.t_ini must be at least 1")
        if len(plant.phi) != len(plant.psi):
            raise ConfigError(f"{path}: phi and psi must have the same number of rows")
        if len(plant.phi[0]) != (plant.m + plant.p) * plant.t_ini:
            raise ConfigError(
                f"{path}.phi: expected {(plant.m + plant.p) * plant.t_ini} columns for "
                f"m={plant.m}, p={plant.p}, t_ini={plant.t_ini}"
            )
        return plant

    @property
    def m(self) -> int:
        return len(self.psi[0])

    @property
    def p(self) -> int:
        return len(self.phi)


@dataclass(frozen=True)
class DataConfig:
    """
    Data-collection settings.

    Attributes:
        length: Number of data samples T after the initialization prefix.
        order_bound: Upper bound on the minimal plant order used in PE checks.
        excitation: Optional box half-widths of the random excitation (defaults to the input box).
        max_redraws: Attempts before a persistent PE failure is reported.
        seed: Seed of the excitation and disturbance streams.
    """

    length: int
    order_bound: int
    excitation: Optional[Vector] = None
    max_redraws: int = 10
    seed: int = 0

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str = "data") -> "DataConfig":
        _check_keys(table, ("length", "order_bound", "excitation", "max_redraws", "seed"), ("length", "order_bound"), path)
        excitation = table.get("excitation")
        data = cls(
            length=_int(table["length"], f"{path}.length"),
            order_bound=_int(table["order_bound"], f"{path}.order_bound"),
            excitation=_vector(excitation, f"{path}.excitation") if excitation is not None else None,
            max_redraws=_int(table.get("max_redraws", 10), f"{path}.max_redraws"),
            seed=_int(table.get("seed", 0), f"{path}.seed"),
        )
        if data.length < 1 or data.order_bound < 0 or data.max_redraws < 1:
            raise ConfigError(f"{path}: length and max_redraws must be positive, order_bound non-negative")
        return data


@dataclass(frozen=True)
class ControllerConfig:
    """
    Offline design and online OCP settings.

    Attributes:
        horizon: Prediction horizon N.
        Q: Output weight.
        R: Input weight.
        mode: Chance-constraint approximation, "direct" or "scaling".
        eps: Output risk parameter.
        eps_conf: Output confidence parameter.
        eps_u, eps_conf_u: Risk and confidence of the sampled input constraints (default eps, eps_conf).
        eps_xi, eps_conf_xi: Risk and confidence of the sampled terminal constraint.
        direct_sample_cap: Optional cap on the per-stage learning-theory sample count.
        design_samples: Number of samples forming the approximating set in scaling mode.
        validation_samples: Optional validation count in scaling mode (at least n_ps).
        cost_samples: Samples averaged into the OCP cost.
        state_box_scale: Scale of the extended-state bounding box added to the constraint set.
        gain: Optional externally computed feedback gain.
        terminal_weight: Optional externally computed terminal weight.
        inject_supplied: Use the supplied gain/weight instead of synthesizing them.
        ioss_grid: Candidate output constants for the IOSS certificate.
    """

    horizon: int
    Q: Matrix
    R: Matrix
    mode: str = "direct"
    eps: float = 0.05
    eps_conf: float = 1e-4
    eps_u: Optional[float] = None
    eps_conf_u: Optional[float] = None
    eps_xi: Optional[float] = None
    eps_conf_xi: Optional[float] = None
    direct_sample_cap: Optional[int] = None
    design_samples: int = 200
    validation_samples: Optional[int] = None
    cost_samples: int = 200
    state_box_scale: float = 1.0
    gain: Optional[Matrix] = None
    terminal_weight: Optional[Matrix] = None
    inject_supplied: bool = False
    ioss_grid: Vector = (1.0, 10.0, 100.0, 1000.0)

    _OPTIONAL_FLOATS = ("eps_u", "eps_conf_u", "eps_xi", "eps_conf_xi")

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str = "controller") -> "ControllerConfig":
        allowed = [f.name for f in dataclasses.fields(cls)]
        _check_keys(table, allowed, ("horizon", "Q", "R"), path)
        kwargs: Dict[str, Any] = {
            "horizon": _int(table["horizon"], f"{path}.horizon"),
            "Q": _matrix(table["Q"], f"{path}.Q"),
            "R": _matrix(table["R"], f"{path}.R"),
        }
        for key in ("mode",):
            if key in table:
                kwargs[key] = _str(table[key], f"{path}.{key}")
        for key in ("eps", "eps_conf", "state_box_scale") + cls._OPTIONAL_FLOATS:
            if key in table:
                kwargs[key] = _float(table[key], f"{path}.{key}")
        for key in ("direct_sample_cap", "design_samples", "validation_samples", "cost_samples"):
            if key in table:
                kwargs[key] = _int(table[key], f"{path}.{key}")
        for key in ("gain", "terminal_weight"):
            if key in table:
                kwargs[key] = _matrix(table[key], f"{path}.{key}")
        if "inject_supplied" in table:
            kwargs["inject_supplied"] = _bool(table["inject_supplied"], f"{path}.inject_supplied")
        if "ioss_grid" in table:
            kwargs["ioss_grid"] = _vector(table["ioss_grid"], f"{path}.ioss_grid")
        return cls(**kwargs)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"controller.mode must be one of {MODES}, got '{self.mode}'")
        if self.horizon < 1:
            raise ConfigError("controller.horizon must be at least 1")
        for name in ("eps", "eps_conf") + self._OPTIONAL_FLOATS:
            value = getattr(self, name)
            if value is not None and not 0.0 < value < 1.0:
                raise ConfigError(f"controller.{name} must lie in (0, 1), got {value}")
        if self.mode == "direct":
            for name in ("eps", "eps_u", "eps_xi"):
                value = getattr(self, name)
                if value is not None and value >= 0.14:
                    raise ConfigError(f"controller.{name} must be below 0.14 in direct mode, got {value}")
        if self.state_box_scale <= 0:
            raise ConfigError("controller.state_box_scale must be positive")
        if self.cost_samples < 1 or self.design_samples < 1:
            raise ConfigError("controller.cost_samples and controller.design_samples must be positive")
        if self.inject_supplied and self.gain is None:
            raise ConfigError("controller.inject_supplied requires controller.gain")

    def risk(self, constraint_class: str) -> Tuple[float, float]:
        """
        Risk and confidence parameters of a constraint class.

        Args:
            constraint_class: "output", "input" or "terminal"

        Returns:
            Tuple (eps, eps_conf)
        """
        if constraint_class == "input":
            return (self.eps_u or self.eps, self.eps_conf_u or self.eps_conf)
        if constraint_class == "terminal":
            return (self.eps_xi or self.eps, self.eps_conf_xi or self.eps_conf)
        return (self.eps, self.eps_conf)


@dataclass(frozen=True)
class SamplingConfig:
    """
    Uniform polytope sampling settings.

    Attributes:
        method: "hit-and-run" or "rejection".
        burn_in: Discarded chain steps; None selects 10 times the dimension.
        thinning: Keep every thinning-th chain state.
        seed: Seed of the uncertainty-sample streams.
    """

    method: str = "hit-and-run"
    burn_in: Optional[int] = None
    thinning: int = 5
    seed: int = 0

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str = "sampling") -> "SamplingConfig":
        _check_keys(table, ("method", "burn_in", "thinning", "seed"), (), path)
        return cls(
            method=_str(table.get("method", "hit-and-run"), f"{path}.method"),
            burn_in=_int(table["burn_in"], f"{path}.burn_in") if "burn_in" in table else None,
            thinning=_int(table.get("thinning", 5), f"{path}.thinning"),
            seed=_int(table.get("seed", 0), f"{path}.seed"),
        )

    def __post_init__(self):
        if self.method not in SAMPLING_METHODS:
            raise ConfigError(f"sampling.method must be one of {SAMPLING_METHODS}")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError("sampling.burn_in must be non-negative")
        if self.thinning < 1:
            raise ConfigError("sampling.thinning must be at least 1")


@dataclass(frozen=True)
class ToleranceConfig:
    """
    Numerical tolerances and caps.

    Attributes:
        feasibility: Membership tolerance on normalized rows.
        redundancy: Redundancy-removal tolerance.
        set_equality: Mutual-inclusion tolerance of fixed-point iterations.
        lmi: Eigenvalue margin of LMI solutions and certificates.
        vertex_cap: Largest dimension handled by exact vertex enumeration.
        fm_row_cap: Row cap of Fourier-Motzkin elimination.
        max_iter: Iteration cap of invariant-set recursions.
    """

    feasibility: float = 1e-8
    redundancy: float = 1e-9
    set_equality: float = 1e-7
    lmi: float = 1e-6
    vertex_cap: int = 6
    fm_row_cap: int = 200_000
    max_iter: int = 500

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str = "tolerances") -> "ToleranceConfig":
        allowed = [f.name for f in dataclasses.fields(cls)]
        _check_keys(table, allowed, (), path)
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name in table:
                convert = _int if isinstance(f.default, int) else _float
                kwargs[f.name] = convert(table[f.name], f"{path}.{f.name}")
        return cls(**kwargs)


@dataclass(frozen=True)
class SimulationConfig:
    """
    Closed-loop Monte Carlo settings.

    Attributes:
        xi0: Initial extended state.
        steps: Closed-loop steps per run.
        runs: Number of Monte Carlo runs.
        seed: Seed of the per-run disturbance streams.
        threads: Worker threads; 0 selects the number of available cores.
    """

    xi0: Vector
    steps: int = 30
    runs: int = 20
    seed: int = 0
    threads: int = 0

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str = "simulation") -> "SimulationConfig":
        _check_keys(table, ("xi0", "steps", "runs", "seed", "threads"), ("xi0",), path)
        sim = cls(
            xi0=_vector(table["xi0"], f"{path}.xi0"),
            steps=_int(table.get("steps", 30), f"{path}.steps"),
            runs=_int(table.get("runs", 20), f"{path}.runs"),
            seed=_int(table.get("seed", 0), f"{path}.seed"),
            threads=_int(table.get("threads", 0), f"{path}.threads"),
        )
        if sim.steps < 0 or sim.runs < 0 or sim.threads < 0:
            raise ConfigError(f"{path}: steps, runs and threads must be non-negative")
        return sim


@dataclass(frozen=True)
class OpenLoopConfig:
    """
    Open-loop predictor evaluation settings.

    Attributes:
        inputs: Number of random admissible input sequences.
        samples: Uncertainty samples per input sequence.
        seed: Seed of the evaluation streams.
    """

    inputs: int = 100
    samples: int = 200
    seed: int = 0

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str = "openloop") -> "OpenLoopConfig":
        _check_keys(table, ("inputs", "samples", "seed"), (), path)
        return cls(
            inputs=_int(table.get("inputs", 100), f"{path}.inputs"),
            samples=_int(table.get("samples", 200), f"{path}.samples"),
            seed=_int(table.get("seed", 0), f"{path}.seed"),
        )


@dataclass(frozen=True)
class PriorKnowledgeConfig:
    """
    Prior knowledge G1 [Phi Psi] G2 <= G3 (or = G3 when ``equality`` is set).

    Attributes:
        G1: Left factor, shape (r, p).
        G2: Right factor, shape (n_xi + m, s).
        G3: Bound, shape (r, s); infinite entries are vacuous.
        equality: Encode the relation as two opposing inequalities.
    """

    G1: Matrix
    G2: Matrix
    G3: Matrix
    equality: bool = False

    @classmethod
    def from_table(cls, table: Mapping[str, Any], path: str) -> "PriorKnowledgeConfig":
        _check_keys(table, ("G1", "G2", "G3", "equality"), ("G1", "G2", "G3"), path)
        return cls(
            G1=_matrix(table["G1"], f"{path}.G1"),
            G2=_matrix(table["G2"], f"{path}.G2"),
            G3=_matrix(table["G3"], f"{path}.G3", allow_inf=True),
            equality=_bool(table.get("equality", False), f"{path}.equality"),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Complete experiment configuration.

    Attributes:
        plant: Ground-truth plant.
        input_set: Input constraint set U.
        output_set: Output constraint set Y.
        disturbance_set: Disturbance support D.
        data: Data-collection settings.
        controller: Design and OCP settings.
        sampling: Uncertainty sampling settings.
        tolerances: Numerical tolerances.
        simulation: Closed-loop settings.
        openloop: Open-loop evaluation settings.
        prior_knowledge: Optional prior model knowledge.
    """

    plant: PlantConfig
    input_set: ConstraintConfig
    output_set: ConstraintConfig
    disturbance_set: ConstraintConfig
    data: DataConfig
    controller: ControllerConfig
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    simulation: Optional[SimulationConfig] = None
    openloop: OpenLoopConfig = field(default_factory=OpenLoopConfig)
    prior_knowledge: Tuple[PriorKnowledgeConfig, ...] = ()

    def __post_init__(self):
        plant = self.plant
        if self.input_set.dim != plant.m:
            raise ConfigError(f"constraints.input: dimension {self.input_set.dim} does not match m={plant.m}")
        if self.output_set.dim != plant.p:
            raise ConfigError(f"constraints.output: dimension {self.output_set.dim} does not match p={plant.p}")
        if self.disturbance_set.dim != plant.p:
            raise ConfigError(f"constraints.disturbance: dimension {self.disturbance_set.dim} does not match p={plant.p}")
        if self.data.length < plant.t_ini + self.controller.horizon:
            raise ConfigError("data.length must be at least plant.t_ini + controller.horizon")
        if np.asarray(self.controller.Q).shape != (plant.p, plant.p):
            raise ConfigError(f"controller.Q must be {plant.p}x{plant.p}")
        if np.asarray(self.controller.R).shape != (plant.m, plant.m):
            raise ConfigError(f"controller.R must be {plant.m}x{plant.m}")
        n_xi = (plant.m + plant.p) * plant.t_ini
        if self.controller.gain is not None and np.asarray(self.controller.gain).shape != (plant.m, n_xi):
            raise ConfigError(f"controller.gain must be {plant.m}x{n_xi}")
        if self.controller.terminal_weight is not None and np.asarray(self.controller.terminal_weight).shape != (n_xi, n_xi):
            raise ConfigError(f"controller.terminal_weight must be {n_xi}x{n_xi}")
        if self.simulation is not None and len(self.simulation.xi0) != n_xi:
            raise ConfigError(f"simulation.xi0 must have {n_xi} entries")
        if self.data.excitation is not None and len(self.data.excitation) != plant.m:
            raise ConfigError(f"data.excitation must have {plant.m} entries")

    @property
    def n_xi(self) -> int:
        return (self.plant.m + self.plant.p) * self.plant.t_ini

    def with_overrides(self, seed: Optional[int] = None, mode: Optional[str] = None,
                       threads: Optional[int] = None) -> "ExperimentConfig":
        """
        Apply command-line overrides.

        Args:
            seed: Replaces every seed of the configuration
            mode: Replaces the chance-constraint approximation mode
            threads: Replaces the simulation thread count

        Returns:
            New configuration
        """
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(
                cfg,
                data=dataclasses.replace(cfg.data, seed=seed),
                sampling=dataclasses.replace(cfg.sampling, seed=seed + 1),
                openloop=dataclasses.replace(cfg.openloop, seed=seed + 2),
                simulation=dataclasses.replace(cfg.simulation, seed=seed + 3) if cfg.simulation else None,
            )
        if mode is not None:
            cfg = dataclasses.replace(cfg, controller=dataclasses.replace(cfg.controller, mode=mode))
        if threads is not None and cfg.simulation is not None:
            cfg = dataclasses.replace(cfg, simulation=dataclasses.replace(cfg.simulation, threads=threads))
        return cfg


_TOP_LEVEL = ("plant", "constraints", "data", "controller", "sampling", "tolerances",
              "simulation", "openloop", "prior_knowledge")


def parse_config(document: Mapping[str, Any]) -> ExperimentConfig:
    """
    Build an experiment configuration from a parsed TOML document.

    Args:
        document: Parsed TOML tables

    Returns:
        Validated ExperimentConfig
    """
    _check_keys(document, _TOP_LEVEL, ("plant", "constraints", "data", "controller"), "config")
    constraints = document["constraints"]
    _check_keys(constraints, ("input", "output", "disturbance"), ("input", "output", "disturbance"), "constraints")
    prior = document.get("prior_knowledge", [])
    if not isinstance(prior, list):
        raise ConfigError("prior_knowledge must be an array of tables")
    return ExperimentConfig(
        plant=PlantConfig.from_table(document["plant"]),
        input_set=ConstraintConfig.from_table(constraints["input"], "constraints.input"),
        output_set=ConstraintConfig.from_table(constraints["output"], "constraints.output"),
        disturbance_set=ConstraintConfig.from_table(constraints["disturbance"], "constraints.disturbance"),
        data=DataConfig.from_table(document["data"]),
        controller=ControllerConfig.from_table(document["controller"]),
        sampling=SamplingConfig.from_table(document.get("sampling", {})),
        tolerances=ToleranceConfig.from_table(document.get("tolerances", {})),
        simulation=SimulationConfig.from_table(document["simulation"]) if "simulation" in document else None,
        openloop=OpenLoopConfig.from_table(document.get("openloop", {})),
        prior_knowledge=tuple(
            PriorKnowledgeConfig.from_table(entry, f"prior_knowledge[{i}]") for i, entry in enumerate(prior)
        ),
    )


def load_config(path: str) -> ExperimentConfig:
    """
    Load and validate an experiment configuration file.

    Args:
        path: Path to a TOML file

    Returns:
        Validated ExperimentConfig
    """
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with config_path.open("rb") as handle:
            document = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = parse_config(document)
    logger.info(f"Loaded configuration {path} (hash {config_hash(cfg)[:12]})")
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    """
    Hash every numerically relevant configuration field.

    The thread count is excluded because results do not depend on it.

    Args:
        cfg: Experiment configuration

    Returns:
        Hex SHA-256 digest
    """
    payload = dataclasses.asdict(cfg)
    if payload.get("simulation") is not None:
        payload["simulation"].pop("threads", None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_summary(cfg: ExperimentConfig) -> List[str]:
    """Human-readable one-line summaries of the main settings."""
    ctrl = cfg.controller
    return [
        f"plant: m={cfg.plant.m}, p={cfg.plant.p}, T_ini={cfg.plant.t_ini}, n_xi={cfg.n_xi}",
        f"data: T={cfg.data.length}, order bound={cfg.data.order_bound}",
        f"controller: N={ctrl.horizon}, mode={ctrl.mode}, eps={ctrl.eps}, eps_conf={ctrl.eps_conf}",
    ]
