"""
Shared fixtures for the test suites: plant constants, random ARX systems and
trajectory generation with known disturbances.
"""

import os
import unittest
from pathlib import Path
from typing import Tuple

import numpy as np

from src.behavioral import IoTrajectory, arx_rollout
from src.geometry import Polytope

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
DCDC_CONFIG = CONFIG_DIR / "dcdc_converter.toml"
CONSISTENCY_CONFIG = CONFIG_DIR / "consistency_example.toml"

# DC-DC converter, xi = (u_{k-1}, y1_{k-1}, y2_{k-1})
DCDC_PHI = np.array([[4.697, 1.0, 0.073], [0.083, -0.060, 0.997]])
DCDC_PSI = np.zeros((2, 1))
DCDC_GAIN = np.array([[-1.21, -0.27, 0.04]])
DCDC_INPUT_BOUND = 0.2
DCDC_OUTPUT_BOUND = (3.0, 3.0)
DCDC_DISTURBANCE_BOUND = (0.1, 0.05)

# Scalar integrator-like example y_k = u_{k-1} + y_{k-1} + d_k
EXAMPLE_PHI = np.array([[1.0, 1.0]])
EXAMPLE_PSI = np.zeros((1, 1))

run_experiments = unittest.skipUnless(os.environ.get("DPC_RUN_EXPERIMENTS") == "1",
                                      "set DPC_RUN_EXPERIMENTS=1 to run the experiment suites")


def box(*bound) -> Polytope:
    """Symmetric box with the given half-widths."""
    b = np.asarray(bound, dtype=float).reshape(-1)
    return Polytope.from_box(-b, b)


def random_arx(rng: np.random.Generator, m: int, p: int, t_ini: int) -> Tuple[np.ndarray, np.ndarray]:
    """Random ARX matrices with small output coefficients."""
    n_u, n_y = m * t_ini, p * t_ini
    phi_u = rng.uniform(-1.0, 1.0, size=(p, n_u))
    phi_y = rng.uniform(-0.4, 0.4, size=(p, n_y)) / t_ini
    psi = rng.uniform(-1.0, 1.0, size=(p, m))
    return np.hstack([phi_u, phi_y]), psi


def simulate_trajectory(phi, psi, t_ini: int, T: int, u_bound: float, d_bound, seed: int) -> IoTrajectory:
    """
    Record T_ini + T samples from rest under uniform inputs and disturbances.

    A zero d_bound gives noise-free data.
    """
    phi, psi = np.atleast_2d(phi), np.atleast_2d(psi)
    p, m = psi.shape
    rng = np.random.default_rng(seed)
    length = t_ini + T
    u = rng.uniform(-u_bound, u_bound, size=(length, m))
    d_bound = np.broadcast_to(np.asarray(d_bound, dtype=float), (p,))
    d = rng.uniform(-1.0, 1.0, size=(length, p)) * d_bound
    _, y, _ = arx_rollout(phi, psi, t_ini, np.zeros((m + p) * t_ini), u.reshape(-1), d_f=d.reshape(-1))
    return IoTrajectory(inputs=u, outputs=y, prefix_len=t_ini, disturbances=d)
