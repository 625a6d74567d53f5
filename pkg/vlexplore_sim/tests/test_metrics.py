"""
Tests for SPL, aggregate statistics, the R-Lbar curve and the EPS fit.
"""

import logging
import math
import os
import sys
import tempfile
import unittest

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

logging.basicConfig(level=logging.ERROR)

from vlexplore_sim.core.errors import FitError, MetricsError
from vlexplore_sim.evaluation.metrics import (EQUIPOTENTIAL_CSV_HEADER, EpsModel, RLCurve, RunRecord, aggregate,
                                              default_cutoffs, eps_score, equipotential_grid, fit_eps,
                                              records_from_trials, rl_curve, spl, summary_row,
                                              write_equipotential_csv)

PAIR = ("S", "T")


def run(success, path=math.nan, baseline=10.0):
    return RunRecord(PAIR, success, path, baseline)


def synthetic_curve(p2=0.8, p3=1.2, t1=0.3, rates=(0.4, 0.6, 0.8, 1.0)):
    """Points lying exactly on Lbar^p2 * R^p3 = t1."""
    return RLCurve(tuple((r, (t1 / r ** p3) ** (1.0 / p2)) for r in rates))


class TestSuccessMetrics(unittest.TestCase):
    def test_hand_computed_spl(self):
        records = [run(True, 10.0), run(False), run(False), run(False)]
        self.assertAlmostEqual(spl(records), 0.25)

    def test_inverse_length_is_clipped(self):
        self.assertEqual(run(True, 8.0).inverse_length, 1.0)
        self.assertEqual(run(True, 40.0).inverse_length, 0.25)
        self.assertEqual(run(False).inverse_length, 0.0)

    def test_spl_is_lbar_times_r(self):
        records = [run(True, 10.0), run(True, 20.0), run(True, 40.0), run(False), run(False)]
        stats = aggregate(records)
        self.assertEqual((stats.n, stats.n_success), (5, 3))
        self.assertAlmostEqual(stats.success_rate, 0.6)
        self.assertAlmostEqual(stats.mean_inverse_length, (1.0 + 0.5 + 0.25) / 3)
        self.assertAlmostEqual(stats.spl, stats.mean_inverse_length * stats.success_rate)

    def test_success_shorter_than_baseline(self):
        records = [run(True, 9.7), run(True, 20.0), run(False)]
        stats = aggregate(records)
        self.assertAlmostEqual(stats.mean_inverse_length, (1.0 + 0.5) / 2)
        self.assertAlmostEqual(stats.spl, stats.mean_inverse_length * stats.success_rate)
        curve = rl_curve([9.7, 20.0], 10.0, [9.7, 20.0])
        self.assertEqual(curve.points[0], (0.5, 1.0))
        self.assertAlmostEqual(curve.points[1][1], 0.75)

    def test_no_successes(self):
        stats = aggregate([run(False), run(False)])
        self.assertEqual(stats.mean_inverse_length, 0.0)
        self.assertFalse(stats.lbar_defined)
        self.assertEqual(stats.spl, 0.0)

    def test_invalid_records(self):
        with self.assertRaises(MetricsError):
            spl([])
        with self.assertRaises(MetricsError):
            run(True, 5.0, baseline=0.0)
        with self.assertRaises(MetricsError):
            run(True, math.nan)


class TestRLCurve(unittest.TestCase):
    def test_sweep(self):
        curve = rl_curve([10.0, 20.0, 40.0, math.inf], 10.0, [10.0, 20.0, 40.0])
        self.assertEqual(len(curve), 3)
        expected = [(1 / 3, 1.0), (2 / 3, 0.75), (1.0, (1.0 + 0.5 + 0.25) / 3)]
        for (r, lbar), (er, elbar) in zip(curve.points, expected):
            self.assertAlmostEqual(r, er)
            self.assertAlmostEqual(lbar, elbar)

    def test_repeated_and_empty_cutoffs_are_skipped(self):
        curve = rl_curve([10.0, 10.0, 20.0], 10.0, [5.0, 10.0, 10.0, 20.0])
        self.assertEqual([r for r, _ in curve.points], [2 / 3, 1.0])

    def test_default_cutoffs(self):
        self.assertEqual(default_cutoffs([3.0, 1.0, math.nan, 3.0, 2.0]), [1.0, 2.0, 3.0])

    def test_errors(self):
        with self.assertRaises(MetricsError):
            rl_curve([math.inf], 10.0, [10.0])
        with self.assertRaises(MetricsError):
            rl_curve([10.0], 10.0, [20.0, 10.0])
        with self.assertRaises(MetricsError):
            RLCurve(((0.5, 0.5), (0.5, 0.4)))
        with self.assertRaises(MetricsError):
            RLCurve(((0.5, 1.5),))


class TestEpsFit(unittest.TestCase):
    def test_canonical_fit_recovers_exponents(self):
        model = fit_eps(synthetic_curve())
        (k1, t1, p1), (k2, t2, p2), (k3, t3, p3) = model.h
        self.assertAlmostEqual(p2, 0.8, places=9)
        self.assertAlmostEqual(p3, 1.2, places=9)
        self.assertAlmostEqual(t1, 0.3, places=9)
        self.assertEqual((k2, t2, k3, t3, p1), (1.0, 0.0, 1.0, 0.0, 1.0))
        self.assertAlmostEqual(k1, 0.7)

    def test_anchors(self):
        curve = synthetic_curve()
        model = fit_eps(curve)
        self.assertAlmostEqual(eps_score(model, 1.0, 1.0), 1.0)
        self.assertAlmostEqual(model.boundary_residual, 0.0)
        for rate, lbar in curve.points:
            self.assertAlmostEqual(eps_score(model, rate, lbar), 0.0, places=6)
        self.assertEqual(eps_score(model, 0.1, 0.1), 0.0)

    def test_monotone(self):
        model = fit_eps(synthetic_curve())
        self.assertLess(eps_score(model, 0.7, 0.6), eps_score(model, 0.9, 0.6))
        self.assertLess(eps_score(model, 0.9, 0.6), eps_score(model, 0.9, 0.8))

    def test_full_fit_keeps_boundary(self):
        model = fit_eps(synthetic_curve(), mode="full")
        self.assertAlmostEqual(model.boundary_residual, 0.0, places=9)
        self.assertAlmostEqual(eps_score(model, 1.0, 1.0), 1.0, places=6)
        self.assertAlmostEqual(model.as_dict()["p2"], 0.8, places=3)

    def test_fit_errors(self):
        with self.assertRaises(FitError):
            fit_eps(synthetic_curve(rates=(0.5, 1.0)))
        with self.assertRaises(FitError):
            fit_eps(synthetic_curve(), mode="cubic")

    def test_equipotential_csv(self):
        model = fit_eps(synthetic_curve())
        grid = equipotential_grid(model, samples=5)
        self.assertEqual(len(grid), 25)
        self.assertTrue(all(0.0 <= eps <= 1.0 for _, _, eps in grid))
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "eq.csv")
            write_equipotential_csv(model, path, samples=5)
            with open(path, encoding="utf-8") as handle:
                lines = handle.read().splitlines()
        self.assertEqual(lines[0], ",".join(EQUIPOTENTIAL_CSV_HEADER))
        self.assertEqual(len(lines), 26)

    def test_random_walk_pool_scores_zero(self):
        """Paths drawn so that the curve follows the model's zero line."""
        rng = np.random.default_rng(5)
        paths = 1.0 + rng.exponential(4.0, size=400)
        curve = rl_curve(paths, 1.0, default_cutoffs(paths))
        model = fit_eps(curve)
        residual = [eps_score(model, r, lbar) for r, lbar in curve.points[len(curve) // 2:]]
        self.assertLess(float(np.median(residual)), 0.2)
        (_, t1, _), (_, _, p2), (_, _, p3) = model.h
        self.assertTrue(0.0 < t1 < 1.0)
        self.assertGreater(min(p2, p3), 0.0)


class TestRecordsFromTrials(unittest.TestCase):
    rows = [
        {"algo": "bug0-l", "source": "S", "target": "T", "status": "Success", "path_length_m": "12.0"},
        {"algo": "bug0-l", "source": "S", "target": "T", "status": "FailStuck", "path_length_m": "3.0"},
        {"algo": "wall-bounce", "source": "S", "target": "T", "status": "Success", "path_length_m": "30.0"},
    ]

    def test_filter_and_lookup(self):
        records = records_from_trials(self.rows, {PAIR: 10.0}, algo="bug0-l")
        self.assertEqual(len(records), 2)
        self.assertTrue(math.isnan(records[1].path))
        self.assertAlmostEqual(aggregate(records).spl, (10.0 / 12.0) / 2)

    def test_missing_baseline(self):
        with self.assertRaises(MetricsError):
            records_from_trials(self.rows, {("S", "X"): 10.0})

    def test_summary_row_without_model(self):
        stats = aggregate(records_from_trials(self.rows, {PAIR: 10.0}, algo="bug0-l"))
        self.assertEqual(summary_row("bug0-l", stats, None),
                         ["bug0-l", "0.500000", "0.833333", "0.416667", "nan"])


@pytest.mark.parametrize("rate, lbar", [(0.0, 0.5), (0.5, 0.0), (1e-6, 1e-6)])
def test_eps_clamps_at_zero(rate, lbar):
    model = EpsModel(((0.7, 0.3, 1.0), (1.0, 0.0, 0.8), (1.0, 0.0, 1.2)))
    assert eps_score(model, rate, lbar) == 0.0


if __name__ == '__main__':
    unittest.main()
