"""
Tests for the command line entry point.
"""

import csv
import json
import logging
import os
import sys
import tempfile
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

logging.basicConfig(level=logging.ERROR)

from vlexplore_sim.__main__ import ablated_algorithm, main, map_source, parse_point
from vlexplore_sim.core.errors import EXIT_OK, EXIT_RUNTIME_ERROR, EXIT_SPEC_ERROR, ConfigurationError
from vlexplore_sim.maps.fixtures import OFFICE_WAYPOINTS

SPEC_TEXT = """\
[map]
builtin empty
[waypoints]
S 2.0 5.0
T 8.0 5.0
[tasks]
S T
[algorithms]
bug0-l 1
[trial]
wave_max_steps 2000
"""


class TestHelpers(unittest.TestCase):
    def test_map_source(self):
        self.assertEqual(map_source("office"), "builtin:office")
        self.assertEqual(map_source("builtin:empty"), "builtin:empty")

    def test_parse_point(self):
        self.assertEqual(parse_point("1.5,2"), [1.5, 2.0])
        self.assertEqual(parse_point("1,2,0.5"), [1.0, 2.0, 0.5])
        self.assertEqual(parse_point("NW", OFFICE_WAYPOINTS), [1.2, 8.8])
        for bad in ("NW", "1", "a,b"):
            with self.assertRaises(ConfigurationError):
                parse_point(bad)

    def test_ablated_algorithm(self):
        self.assertEqual(ablated_algorithm("vl-explore", True, False), "vl-explore-no-look-around")
        self.assertEqual(ablated_algorithm("vl-explore", False, True), "vl-explore-no-familiarity")
        self.assertEqual(ablated_algorithm("bug2-l", True, False), "bug2-l")
        with self.assertRaises(ConfigurationError):
            ablated_algorithm("vl-explore", True, True)


class TestCommands(unittest.TestCase):
    def setUp(self):
        self.temp = tempfile.TemporaryDirectory()
        self.dir = self.temp.name

    def tearDown(self):
        self.temp.cleanup()

    def path(self, *parts):
        return os.path.join(self.dir, *parts)

    def test_run(self):
        code = main(["--log-level", "error", "run", "--map", "empty", "--algo", "bug0-l",
                     "--source", "2,5", "--target", "8,5", "--out-dir", self.path("run")])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(self.path("run", "trajectory.csv")))
        self.assertTrue(os.path.exists(self.path("run", "overlay.svg")))
        self.assertFalse(os.path.exists(self.path("run", "decisions.csv")))

        code = main(["--log-level", "error", "render", "--map", "empty",
                     "--trajectory", self.path("run", "trajectory.csv"), "--out", self.path("render.svg")])
        self.assertEqual(code, EXIT_OK)
        with open(self.path("render.svg"), encoding="utf-8") as handle:
            self.assertIn('id="trajectory-0"', handle.read())

    def test_run_rejects_both_ablations(self):
        code = main(["--log-level", "critical", "run", "--map", "empty", "--source", "2,5", "--target", "8,5",
                     "--no-look-around", "--no-familiarity", "--out-dir", self.path("run")])
        self.assertEqual(code, EXIT_SPEC_ERROR)

    def test_run_rejects_bad_point(self):
        code = main(["--log-level", "critical", "run", "--map", "empty", "--algo", "bug0-l",
                     "--source", "here", "--target", "8,5", "--out-dir", self.path("run")])
        self.assertEqual(code, EXIT_SPEC_ERROR)

    def test_batch_then_metrics(self):
        spec = self.path("exp.spec")
        with open(spec, "w", encoding="utf-8") as handle:
            handle.write(SPEC_TEXT)
        out = self.path("batch")
        self.assertEqual(main(["--log-level", "error", "batch", "--spec", spec, "--workers", "1",
                               "--out-dir", out]), EXIT_OK)
        for name in ("trials.csv", "pairs.csv", "summary.csv", "baselines.csv", "overlay_S_T.svg"):
            self.assertTrue(os.path.exists(os.path.join(out, name)), name)

        code = main(["--log-level", "error", "metrics", "--trials", os.path.join(out, "trials.csv"),
                     "--baselines", os.path.join(out, "baselines.csv"), "--out-dir", self.path("metrics")])
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(out, "pairs.csv"), encoding="utf-8") as a, \
                open(self.path("metrics", "pairs.csv"), encoding="utf-8") as b:
            self.assertEqual(a.read(), b.read())

    def test_batch_invalid_spec(self):
        spec = self.path("bad.spec")
        with open(spec, "w", encoding="utf-8") as handle:
            handle.write(SPEC_TEXT.replace("bug0-l 1", "bug7-x 1"))
        code = main(["--log-level", "critical", "batch", "--spec", spec, "--out-dir", self.path("batch")])
        self.assertEqual(code, EXIT_SPEC_ERROR)

    def test_fit_eps(self):
        paths = 10.0 * (1.0 + np.random.default_rng(5).exponential(4.0, size=400))
        walks = self.path("walks.csv")
        with open(walks, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["source", "target", "trial", "path_length_m"])
            writer.writerows(["S", "T", i, repr(float(p))] for i, p in enumerate(paths))
        baselines = self.path("baselines.csv")
        with open(baselines, "w", encoding="utf-8") as handle:
            handle.write("source,target,baseline_m,mean_m,std_m,truncated\nS,T,10.000000,12.0,1.0,false\n")

        code = main(["--log-level", "error", "fit-eps", "--random-walk", walks, "--baselines", baselines,
                     "--out-dir", self.path("eps")])
        self.assertEqual(code, EXIT_OK)
        for name in ("eps_model.csv", "equipotential.csv", "equipotential.svg"):
            self.assertTrue(os.path.exists(self.path("eps", name)), name)

    def test_fit_eps_without_successes(self):
        walks = self.path("walks.csv")
        with open(walks, "w", encoding="utf-8") as handle:
            handle.write("source,target,trial,path_length_m\nS,T,0,nan\n")
        baselines = self.path("baselines.csv")
        with open(baselines, "w", encoding="utf-8") as handle:
            handle.write("source,target,baseline_m,mean_m,std_m,truncated\nS,T,10.000000,12.0,1.0,false\n")
        code = main(["--log-level", "critical", "fit-eps", "--random-walk", walks, "--baselines", baselines,
                     "--out-dir", self.path("eps")])
        self.assertEqual(code, EXIT_RUNTIME_ERROR)


def test_error_envelope_on_stdout(capsys, tmp_path):
    code = main(["--log-level", "critical", "run", "--map", "castle", "--out-dir", str(tmp_path)])
    assert code == EXIT_SPEC_ERROR
    envelope = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert envelope["ok"] is False
    assert envelope["error_code"] == "CONFIGURATION_ERROR"


if __name__ == '__main__':
    unittest.main()
