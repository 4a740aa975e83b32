"""End-to-end tests of the `lab` command line on small atomic-limit lattices"""

import unittest
import tempfile
import os
import csv
import json
import logging
import sys
from unittest.mock import patch
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.main import main
from src.utils.error_handler import EXIT_INVALID_INPUT, EXIT_NUMERICAL, EXIT_OK


def _atomic_config(**overrides):
    data = {
        "version": "1.0",
        "model": {"kind": "atomic_limit", "N": 4, "g": 2.0, "W": 0.0, "seed": 0},
        "fermi_level": 0.0,
        "L_values": [1, 2],
        "a": 1,
        "b_values": [1, 2],
    }
    data.update(overrides)
    return data


@patch("src.main.setup_logging", return_value=logging.getLogger("lab-test"))
class TestCommandLine(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.temp_dir.name, "out")

    def tearDown(self):
        self.temp_dir.cleanup()

    def _config(self, **overrides) -> str:
        path = os.path.join(self.temp_dir.name, "config.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_atomic_config(**overrides), f)
        return path

    def _run(self, command, config, out=None, *extra) -> int:
        return main([command, "--config", config, "--out", out or self.out, *extra])

    def _rows(self, name, out=None):
        with open(os.path.join(out or self.out, name), encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))

    def _json(self, name):
        with open(os.path.join(self.out, name), encoding="utf-8") as f:
            return json.load(f)

    def test_spectrum(self, _logging):
        """Test the atomic spectrum has exactly the two levels -1 and +1"""
        self.assertEqual(self._run("spectrum", self._config()), EXIT_OK)
        values = {float(row["eigenvalue"]) for row in self._rows("eigenvalues.csv")}
        self.assertEqual(values, {-1.0, 1.0})
        fit = self._json("decay_fit.json")["4"]
        self.assertEqual(fit["regime"], "super_exponential")
        self.assertEqual(fit["rank"], 64)
        manifest = self._json("manifest.json")
        self.assertTrue(manifest["success"])
        self.assertEqual(manifest["artifacts"], ["eigenvalues.csv", "decay_fit.json"])

    def test_window_too_large(self, _logging):
        """Test L > N/2 exits with 2 and writes nothing"""
        self.assertEqual(self._run("spectrum", self._config(L_values=[3])), EXIT_INVALID_INPUT)
        self.assertFalse(os.path.exists(self.out))

    def test_unknown_toggle(self, _logging):
        """Test an unknown estimates key exits with 2"""
        code = self._run("estimates", self._config(estimates={"approx": False, "bogus": True}))
        self.assertEqual(code, EXIT_INVALID_INPUT)
        self.assertFalse(os.path.exists(self.out))

    def test_missing_config(self, _logging):
        """Test an unreadable config exits with 2"""
        missing = os.path.join(self.temp_dir.name, "missing.json")
        self.assertEqual(self._run("spectrum", missing), EXIT_INVALID_INPUT)

    def test_unknown_command(self, _logging):
        """Test argparse rejects unknown commands with status 2"""
        with self.assertRaises(SystemExit) as ctx:
            main(["plot", "--config", self._config()])
        self.assertEqual(ctx.exception.code, EXIT_INVALID_INPUT)

    def test_fermi_level_on_spectrum(self, _logging):
        """Test E_F on an eigenvalue exits with 1 and publishes no files"""
        self.assertEqual(self._run("spectrum", self._config(fermi_level=-1.0)), EXIT_NUMERICAL)
        self.assertEqual(os.listdir(self.out), [])

    def test_marker_sweep(self, _logging):
        """Test atomic markers vanish and reruns are byte-identical"""
        config = self._config()
        self.assertEqual(self._run("marker-sweep", config), EXIT_OK)
        rows = self._rows("markers.csv")
        self.assertEqual(len(rows), 4)
        self.assertEqual({row["form"] for row in rows}, {"chi_window", "pl_window"})
        for row in rows:
            self.assertLessEqual(abs(float(row["value"])), 1e-8)
        self.assertFalse(os.path.exists(os.path.join(self.out, "fhs_oracle.json")))

        second = os.path.join(self.temp_dir.name, "second")
        self.assertEqual(self._run("marker-sweep", config, second, "--threads", "2"), EXIT_OK)
        with open(os.path.join(self.out, "markers.csv"), "rb") as a, \
                open(os.path.join(second, "markers.csv"), "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_marker_sweep_oracle(self, _logging):
        """Test a clean two-band model also writes the k-space oracle"""
        config = self._config(model={"kind": "two_band_chern", "N": 4, "u": 3.0}, L_values=[2])
        self.assertEqual(self._run("marker-sweep", config), EXIT_OK)
        self.assertEqual(self._json("fhs_oracle.json")["chern_number"], 0)

    def test_dichotomy(self, _logging):
        """Test the atomic limit is reported trivial with unit moments"""
        self.assertEqual(self._run("dichotomy", self._config(sizes=[4, 6])), EXIT_OK)
        verdict = self._json("verdict.json")
        self.assertEqual(verdict["phase_guess"], "trivial")
        self.assertAlmostEqual(verdict["max_moment_trend"], 0.0)
        for row in self._rows("moments.csv"):
            self.assertAlmostEqual(float(row["moment"]), 1.0)
        self.assertTrue(os.path.exists(os.path.join(self.out, "basis_N6.gwb")))
        self.assertEqual(self._json("localization.json")["4"]["degeneracy"], 1)

    def test_estimates(self, _logging):
        """Test every enabled atomic series is numerically zero"""
        config = self._config(estimates={"approx": False})
        self.assertEqual(self._run("estimates", config), EXIT_OK)
        summary = self._json("estimates_summary.json")
        entries = {entry["name"]: entry for entry in summary["sizes"]["4"]}
        self.assertNotIn("approx", entries)
        for name in ("near_bd", "far_bd", "p_x_pl_X", "p_x_pl_Y"):
            self.assertEqual(entries[name]["status"], "numerically_zero")
        self.assertLessEqual(entries["decay_trick"]["max_ratio"], 1e-20)
        self.assertTrue(os.path.exists(os.path.join(self.out, "series_near_bd_N4.csv")))
        self.assertTrue(self._json("manifest.json")["success"])


if __name__ == '__main__':
    unittest.main()
