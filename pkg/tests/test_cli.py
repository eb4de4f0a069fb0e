import contextlib
import io
import os
import tempfile
import unittest

from src.cli import build_parser, main
from src.persistence import read_json, read_trajectory, save_bundle
from tests.support import CONSISTENCY_CONFIG, DCDC_CONFIG, run_experiments


class TestParser(unittest.TestCase):

    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["offline", "--config", "c.toml", "--data", "d.csv", "--out", "b.json",
                                  "--mode", "scaling", "--seed", "5"])
        self.assertEqual((args.command, args.mode, args.seed, args.threads), ("offline", "scaling", 5, None))
        args = parser.parse_args(["simulate", "--config", "c.toml", "--bundle", "b.json", "--out", "sim",
                                  "--threads", "4"])
        self.assertEqual((args.command, args.threads), ("simulate", 4))

    def test_rejects_unknown_mode(self):
        with contextlib.redirect_stderr(io.StringIO()), self.assertRaises(SystemExit):
            build_parser().parse_args(["offline", "--config", "c.toml", "--data", "d.csv", "--out", "b.json",
                                       "--mode", "robust"])

    def test_requires_subcommand(self):
        with contextlib.redirect_stderr(io.StringIO()), self.assertRaises(SystemExit):
            build_parser().parse_args([])


class TestMain(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_missing_config_exit_code(self):
        code = main(["--log-level", "ERROR", "collect", "--config", os.path.join(self.tmp.name, "none.toml"),
                     "--out", os.path.join(self.tmp.name, "data.csv")])
        self.assertEqual(code, 2)

    def test_malformed_value_exit_code(self):
        with open(DCDC_CONFIG, encoding="utf-8") as handle:
            text = handle.read().replace("horizon = 6", 'horizon = "six"')
        config = os.path.join(self.tmp.name, "bad.toml")
        with open(config, "w", encoding="utf-8") as handle:
            handle.write(text)
        with self.assertLogs("src.cli", level="ERROR") as logs:
            code = main(["--log-level", "ERROR", "collect", "--config", config,
                         "--out", os.path.join(self.tmp.name, "data.csv")])
        self.assertEqual(code, 2)
        self.assertIn("controller.horizon", logs.output[0])

    def test_collect_is_deterministic(self):
        first = os.path.join(self.tmp.name, "a.csv")
        second = os.path.join(self.tmp.name, "b.csv")
        for path in (first, second):
            self.assertEqual(main(["--log-level", "ERROR", "collect", "--config", str(DCDC_CONFIG),
                                   "--out", path]), 0)
        with open(first, "rb") as a, open(second, "rb") as b:
            self.assertEqual(a.read(), b.read())
        traj = read_trajectory(first)
        self.assertEqual((traj.prefix_len, traj.data_len, traj.m, traj.p), (1, 55, 1, 2))

    def test_seed_override_changes_data(self):
        first = os.path.join(self.tmp.name, "a.csv")
        second = os.path.join(self.tmp.name, "b.csv")
        main(["--log-level", "ERROR", "collect", "--config", str(DCDC_CONFIG), "--out", first])
        main(["--log-level", "ERROR", "collect", "--config", str(DCDC_CONFIG), "--out", second, "--seed", "9"])
        with open(first, "rb") as a, open(second, "rb") as b:
            self.assertNotEqual(a.read(), b.read())

    def test_stale_bundle_exit_code(self):
        bundle = os.path.join(self.tmp.name, "bundle.json")
        save_bundle({"mode": "direct"}, bundle, "0" * 64)
        code = main(["--log-level", "ERROR", "simulate", "--config", str(DCDC_CONFIG), "--bundle", bundle,
                     "--out", os.path.join(self.tmp.name, "sim")])
        self.assertEqual(code, 2)


@run_experiments
class TestWorkflow(unittest.TestCase):

    def test_collect_offline_simulate_openloop(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = str(CONSISTENCY_CONFIG)
            data = os.path.join(tmp, "data.csv")
            bundle = os.path.join(tmp, "bundle.json")
            steps = [
                ["collect", "--config", config, "--out", data],
                ["offline", "--config", config, "--data", data, "--out", bundle],
                ["simulate", "--config", config, "--bundle", bundle, "--out", os.path.join(tmp, "sim")],
                ["openloop", "--config", config, "--data", data, "--out", os.path.join(tmp, "ol")],
            ]
            for argv in steps:
                self.assertEqual(main(["--log-level", "WARNING"] + argv), 0, argv[0])
            summary = read_json(os.path.join(tmp, "sim", "summary.json"))
            self.assertEqual(summary["runs"], 10)
            self.assertEqual(summary["input_violations"], 0)
            self.assertEqual(len(summary["stability"]), 2)
            self.assertTrue(os.path.exists(os.path.join(tmp, "ol", "openloop.json")))


if __name__ == "__main__":
    unittest.main()
