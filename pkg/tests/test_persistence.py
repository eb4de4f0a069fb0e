import json
import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.errors import BundleMismatchError, ConfigError
from src.persistence import (ReportWriter, load_bundle, read_json, read_trajectory, save_bundle, write_json,
                             write_trajectory)
from src.simulator import RunRecord
from tests.support import DCDC_PHI, DCDC_PSI, simulate_trajectory


def two_step_record(run: int) -> RunRecord:
    return RunRecord(
        run=run, xi=np.zeros((3, 2)), u=np.array([[0.1], [-0.1]]), y=np.array([[0.2], [0.3]]),
        d=np.zeros((2, 1)), stage_cost=np.array([0.05, 0.1]), optimal_cost=np.array([1.0, np.nan]),
        status=["optimal", "infeasible"], candidate_feasible=[None, False], solve_time=[1e-3, 2e-3],
    )


class TestTrajectoryFiles(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_round_trip(self):
        traj = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 30, 0.2, (0.1, 0.05), seed=4)
        path = os.path.join(self.tmp.name, "nested", "data.csv")
        write_trajectory(traj, path)
        loaded = read_trajectory(path)
        self.assertEqual(loaded.prefix_len, 1)
        self.assertEqual(loaded.data_len, 30)
        assert_allclose(loaded.inputs, traj.inputs, rtol=0, atol=0)
        assert_allclose(loaded.outputs, traj.outputs, rtol=0, atol=0)
        assert_allclose(loaded.disturbances, traj.disturbances, rtol=0, atol=0)

    def test_header_and_time_column(self):
        traj = simulate_trajectory(DCDC_PHI, DCDC_PSI, 1, 5, 0.2, 0.0, seed=0)
        path = os.path.join(self.tmp.name, "data.csv")
        write_trajectory(traj, path, include_disturbances=False)
        with open(path, encoding="utf-8") as handle:
            self.assertEqual(handle.readline().strip(), "t,u_1,y_1,y_2")
        self.assertIsNone(read_trajectory(path).disturbances)
        assert_allclose(np.loadtxt(path, delimiter=",", skiprows=1)[:, 0], np.arange(6))

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            read_trajectory(os.path.join(self.tmp.name, "absent.csv"))

    def test_bad_header(self):
        path = os.path.join(self.tmp.name, "bad.csv")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("k,u_1,y_1\n0,0,0\n")
        with self.assertRaisesRegex(ConfigError, "first column"):
            read_trajectory(path)


class TestBundles(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = os.path.join(self.tmp.name, "bundle.json")

    def test_numpy_values_serialize(self):
        write_json({"A": np.eye(2), "x": np.float64(1.5)}, self.path)
        self.assertEqual(read_json(self.path), {"A": [[1.0, 0.0], [0.0, 1.0]], "x": 1.5})

    def test_hash_match(self):
        save_bundle({"mode": "direct"}, self.path, "abc123")
        document = load_bundle(self.path, "abc123")
        self.assertEqual(document["mode"], "direct")
        self.assertEqual(document["config_hash"], "abc123")

    def test_hash_mismatch(self):
        save_bundle({"mode": "direct"}, self.path, "abc123")
        with self.assertRaises(BundleMismatchError):
            load_bundle(self.path, "def456")

    def test_format_version(self):
        write_json({"format_version": 99, "config_hash": "abc123"}, self.path)
        with self.assertRaises(BundleMismatchError):
            load_bundle(self.path)


class TestReportWriter(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.writer = ReportWriter(os.path.join(self.tmp.name, "sim"))

    def test_runs_jsonl(self):
        count = self.writer.write_runs([two_step_record(0), two_step_record(1)])
        self.assertEqual(count, 2)
        with open(self.writer.runs_path, encoding="utf-8") as handle:
            lines = [json.loads(line) for line in handle]
        self.assertEqual(len(lines), 2)
        self.assertEqual(lines[1]["run"], 1)
        self.assertEqual(lines[0]["optimal_cost"], [1.0, None])
        self.assertEqual(lines[0]["candidate_feasible"], [None, False])

    def test_trajectory_table(self):
        self.writer.write_trajectories([two_step_record(0)])
        with open(os.path.join(self.writer.out_dir, "trajectories.csv"), encoding="utf-8") as handle:
            rows = handle.read().splitlines()
        self.assertEqual(rows[0], "run,k,u_1,y_1,xi_1,xi_2,cost,status,candidate_feasible")
        self.assertEqual(len(rows), 3)
        self.assertTrue(rows[2].endswith("infeasible,false"))

    def test_summary_and_openloop(self):
        self.writer.write_summary({"runs": 2})
        self.writer.write_openloop({"reduction": {"mean": 0.5}})
        self.assertEqual(read_json(str(self.writer.out_dir / "summary.json")), {"runs": 2})
        self.assertEqual(read_json(str(self.writer.out_dir / "openloop.json"))["reduction"]["mean"], 0.5)


if __name__ == "__main__":
    unittest.main()
