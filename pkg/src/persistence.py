"""
Persistence Module
Reads and writes trajectories, offline bundles and simulation reports.
"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np

from .behavioral import IoTrajectory
from .errors import BundleMismatchError, ConfigError

logger = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1


def _ensure_parent(path: str) -> None:
    os.makedirs(os.path.dirname(path) if os.path.dirname(path) else '.', exist_ok=True)


def write_trajectory(traj: IoTrajectory, path: str, include_disturbances: bool = True) -> None:
    """
    Write a trajectory as CSV with header t,u_1..u_m,y_1..y_p[,d_1..d_p].

    Args:
        traj: Trajectory to write
        path: Output file
        include_disturbances: Append the true disturbances when recorded
    """
    _ensure_parent(path)
    columns = [traj.time_indices()[:, None], traj.inputs, traj.outputs]
    header = ["t"] + [f"u_{i + 1}" for i in range(traj.m)] + [f"y_{i + 1}" for i in range(traj.p)]
    if include_disturbances and traj.disturbances is not None:
        columns.append(traj.disturbances)
        header += [f"d_{i + 1}" for i in range(traj.p)]
    np.savetxt(path, np.hstack(columns), delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    logger.info(f"Wrote trajectory with {traj.data_len} data samples to {path}")


def read_trajectory(path: str) -> IoTrajectory:
    """
    Read a trajectory CSV.

    Rows with t <= 0 form the initialization prefix; disturbance columns are
    kept as ground truth when present.

    Args:
        path: CSV file

    Returns:
        IoTrajectory
    """
    if not os.path.exists(path):
        raise ConfigError(f"trajectory file not found: {path}")
    with open(path, 'r', encoding='utf-8') as handle:
        header = handle.readline().strip().split(",")
    if not header or header[0] != "t":
        raise ConfigError(f"{path}: first column must be 't'")
    u_cols = [i for i, name in enumerate(header) if name.startswith("u_")]
    y_cols = [i for i, name in enumerate(header) if name.startswith("y_")]
    d_cols = [i for i, name in enumerate(header) if name.startswith("d_")]
    if not u_cols or not y_cols:
        raise ConfigError(f"{path}: header needs u_ and y_ columns")
    table = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    t = table[:, 0]
    prefix = int(np.count_nonzero(t <= 0))
    disturbances = table[:, d_cols] if len(d_cols) == len(y_cols) else None
    return IoTrajectory(inputs=table[:, u_cols], outputs=table[:, y_cols], prefix_len=prefix,
                        disturbances=disturbances)


def _to_builtin(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(data: Dict, path: str) -> None:
    """Write a JSON document with indent 2; numpy values become plain numbers and lists."""
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(data, handle, indent=2, default=_to_builtin)


def read_json(path: str) -> Dict:
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)


def save_bundle(bundle: Dict, path: str, cfg_hash: str) -> None:
    """
    Write an offline bundle stamped with the format version and configuration hash.
    """
    document = {"format_version": BUNDLE_FORMAT_VERSION, "config_hash": cfg_hash}
    document.update(bundle)
    write_json(document, path)
    logger.info(f"Wrote offline bundle to {path}")


def load_bundle(path: str, expected_hash: Optional[str] = None) -> Dict:
    """
    Read an offline bundle, refusing one built from another configuration.

    Args:
        path: Bundle file
        expected_hash: Hash of the current configuration

    Returns:
        Bundle dictionary
    """
    document = read_json(path)
    if document.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise BundleMismatchError(f"{path}: unsupported bundle format {document.get('format_version')}")
    if expected_hash is not None and document.get("config_hash") != expected_hash:
        raise BundleMismatchError(
            f"{path} was built from a different configuration (bundle {str(document.get('config_hash'))[:12]}, "
            f"config {expected_hash[:12]}); rerun 'offline'"
        )
    return document


class ReportWriter:
    """Writes the simulation outputs of one experiment directory."""

    def __init__(self, out_dir: str):
        """
        Prepare the output directory.

        Args:
            out_dir: Directory receiving runs.jsonl, summary.json and trajectories.csv
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def runs_path(self) -> Path:
        return self.out_dir / "runs.jsonl"

    def write_runs(self, records: Iterable) -> int:
        """One JSON line per run record; returns the number of lines."""
        count = 0
        with open(self.runs_path, 'w', encoding='utf-8') as handle:
            for record in records:
                handle.write(json.dumps(record.to_dict(), sort_keys=True, default=_to_builtin) + "\n")
                count += 1
        return count

    def write_trajectories(self, records: Iterable) -> None:
        """Flat table run,k,u..,y..,xi..,cost,status,candidate_feasible for external plotting."""
        records = list(records)
        path = self.out_dir / "trajectories.csv"
        with open(path, 'w', encoding='utf-8') as handle:
            if not records:
                handle.write("run,k,cost,status,candidate_feasible\n")
                return
            first = records[0]
            header = (["run", "k"] + [f"u_{i + 1}" for i in range(first.u.shape[1])]
                      + [f"y_{i + 1}" for i in range(first.y.shape[1])]
                      + [f"xi_{i + 1}" for i in range(first.xi.shape[1])]
                      + ["cost", "status", "candidate_feasible"])
            handle.write(",".join(header) + "\n")
            for r in records:
                for k in range(r.steps):
                    values = [str(r.run), str(k)] + [repr(float(x)) for x in
                                                     np.concatenate([r.u[k], r.y[k], r.xi[k]])]
                    flag = r.candidate_feasible[k]
                    values += [repr(float(r.stage_cost[k])), r.status[k], "" if flag is None else str(flag).lower()]
                    handle.write(",".join(values) + "\n")

    def write_summary(self, summary: Dict) -> None:
        write_json(summary, str(self.out_dir / "summary.json"))

    def write_openloop(self, report: Dict) -> None:
        write_json(report, str(self.out_dir / "openloop.json"))
