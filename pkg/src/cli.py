"""
Command-Line Interface
Batch front end: collect data, run the offline design, simulate the closed
loop and evaluate open-loop predictions.
"""

import argparse
import logging
import os
from typing import List, Optional

import numpy as np

from . import __version__
from .behavioral import excitation_report
from .config import ExperimentConfig, config_hash, config_summary, load_config
from .consistency import apply_prior_knowledge, build_consistency_model
from .errors import ConfigError, DpcError
from .persistence import ReportWriter, load_bundle, read_trajectory, save_bundle, write_trajectory
from .pipeline import OfflineBundle, OfflinePipeline
from .scenario import SamplerConfig
from .simulator import PlantModel, collect_data, monte_carlo, open_loop_compare
from .synthesis import IossCertificate, rasie_check, vertex_dynamics

logger = logging.getLogger(__name__)


def _threads(value: Optional[int], cfg: ExperimentConfig) -> int:
    if value:
        return value
    if cfg.simulation is not None and cfg.simulation.threads:
        return cfg.simulation.threads
    return os.cpu_count() or 1


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config).with_overrides(seed=args.seed, mode=getattr(args, "mode", None),
                                                  threads=args.threads)
    for line in config_summary(cfg):
        logger.info(line)
    return cfg


def cmd_collect(args) -> int:
    """Record a data trajectory from the configured plant."""
    cfg = _load(args)
    plant = PlantModel.from_config(cfg)
    traj = collect_data(plant, cfg.data.length, cfg.input_set.polytope(), cfg.data.seed,
                        order_bound=cfg.data.order_bound, horizon=cfg.controller.horizon,
                        max_redraws=cfg.data.max_redraws, excitation=cfg.data.excitation)
    excitation_report(traj, cfg.data.order_bound, cfg.controller.horizon)
    write_trajectory(traj, args.out)
    return 0


def cmd_offline(args) -> int:
    """Run the offline design and write the bundle."""
    cfg = _load(args)
    traj = read_trajectory(args.data)
    if traj.prefix_len != cfg.plant.t_ini or traj.m != cfg.plant.m or traj.p != cfg.plant.p:
        raise ConfigError(f"{args.data}: trajectory dimensions do not match the configured plant")
    bundle = OfflinePipeline(cfg, threads=_threads(args.threads, cfg)).run(traj)
    save_bundle(bundle.to_dict(), args.out, config_hash(cfg))
    return 0


def stability_reports(cfg: ExperimentConfig, bundle: OfflineBundle, eps_values: List[float]) -> List[dict]:
    """Stability-in-expectation check at each candidate-infeasibility estimate."""
    cert = bundle.certificates
    if not cert.get("ioss") or cert.get("P_u") is None:
        return [{"eps_f": eps, "status": "not certified"} for eps in eps_values]
    ioss = IossCertificate(np.asarray(cert["ioss"]["P_W"]), cert["ioss"]["c_u"], cert["ioss"]["c_y"],
                           cert["ioss"]["c_d"])
    dyn = vertex_dynamics(bundle.systems, PlantModel.from_config(cfg).layout)
    reports = []
    for eps in eps_values:
        eps = min(eps, 1.0 - 1e-9)
        report = rasie_check(eps, bundle.K, bundle.ingredients.P, np.asarray(cfg.controller.Q),
                             np.asarray(cfg.controller.R), np.asarray(cert["P_l"]), np.asarray(cert["P_u"]),
                             ioss, dyn)
        reports.append({"eps_f": eps, "status": report.status, "min_eigenvalues": report.min_eigenvalues})
    return reports


def cmd_simulate(args) -> int:
    """Closed-loop Monte Carlo runs from a bundle."""
    cfg = _load(args)
    if cfg.simulation is None:
        raise ConfigError("config has no [simulation] table")
    bundle = OfflineBundle.from_dict(load_bundle(args.bundle, config_hash(cfg)))
    sim = cfg.simulation
    records, summary = monte_carlo(bundle.setup(cfg), PlantModel.from_config(cfg), np.asarray(sim.xi0), sim.steps,
                                   sim.runs, sim.seed, threads=_threads(args.threads, cfg))
    summary["stability"] = stability_reports(cfg, bundle, [summary["eps_f"], summary["eps_f_upper"]])
    summary["mode"] = bundle.mode
    writer = ReportWriter(args.out)
    writer.write_runs(records)
    writer.write_trajectories(records)
    writer.write_summary(summary)
    return 0


def cmd_openloop(args) -> int:
    """Open-loop prediction error with consistent and inconsistent samples."""
    cfg = _load(args)
    traj = read_trajectory(args.data)
    D = cfg.disturbance_set.polytope()
    cm = build_consistency_model(traj, D)
    if cfg.prior_knowledge:
        cm = apply_prior_knowledge(cm, cfg.prior_knowledge)
    report = open_loop_compare(traj, cm, PlantModel.from_config(cfg), cfg.input_set.polytope(),
                               cfg.controller.horizon, cfg.openloop.inputs, cfg.openloop.samples,
                               SamplerConfig.from_settings(cfg.sampling), cfg.openloop.seed)
    ReportWriter(args.out).write_openloop(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpc", description="Sampling-based stochastic data-driven predictive control")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", required=True, help="experiment TOML file")
        sub.add_argument("--out", required=True, help="output file or directory")
        sub.add_argument("--seed", type=int, default=None, help="override every seed of the config")
        sub.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")

    collect = commands.add_parser("collect", help="record a data trajectory")
    common(collect)
    collect.set_defaults(handler=cmd_collect)

    offline = commands.add_parser("offline", help="offline design from a trajectory")
    common(offline)
    offline.add_argument("--data", required=True, help="trajectory CSV")
    offline.add_argument("--mode", choices=["direct", "scaling"], default=None)
    offline.set_defaults(handler=cmd_offline)

    simulate = commands.add_parser("simulate", help="closed-loop Monte Carlo from a bundle")
    common(simulate)
    simulate.add_argument("--bundle", required=True, help="offline bundle JSON")
    simulate.add_argument("--mode", choices=["direct", "scaling"], default=None)
    simulate.set_defaults(handler=cmd_simulate)

    openloop = commands.add_parser("openloop", help="open-loop prediction RMSE")
    common(openloop)
    openloop.add_argument("--data", required=True, help="trajectory CSV")
    openloop.set_defaults(handler=cmd_openloop)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one subcommand.

    Returns:
        Exit code: 0 on success, otherwise the code of the escaping error
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except DpcError as exc:
        logger.error(f"{getattr(exc, 'stage', args.command)}: {exc}")
        return exc.exit_code
