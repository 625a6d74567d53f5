"""
Tests for the motion mixer, trap detection, look-around and the mode machine.
"""

import logging
import math
import os
import sys
import unittest

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

logging.basicConfig(level=logging.ERROR)

from vlexplore_sim.core.errors import ConfigurationError, IllegalTransitionError
from vlexplore_sim.core.simkernel import STOP, MotionCommand
from vlexplore_sim.core.worldmap import Pose, raycast, wrap_angle
from vlexplore_sim.decision.look_around import (HeadingCandidate, LookAroundConfig, _arc_width, look_around,
                                                select_candidates)
from vlexplore_sim.decision.mixer import GATED_UTILITY, MixerConfig, column_utilities, mix_motion
from vlexplore_sim.decision.modes import (DecisionConfig, FailureReason, ModeInputs, ModeState, NavMode,
                                          step_mode, transition)
from vlexplore_sim.decision.trap import TrapConfig, TrapMonitor, detect_trap
from vlexplore_sim.maps.fixtures import doorway_ring_map
from vlexplore_sim.middleware.correlation import ScoreGrid


def scores(nav=0.5, familiarity=0.0, std=0.5, target=None):
    grid = ScoreGrid.uniform(nav=nav, familiarity=familiarity, std=std)
    if target is not None:
        grid.target = np.asarray(target, dtype=float)
    return grid


class TestMixer(unittest.TestCase):
    def setUp(self):
        self.cfg = MixerConfig()

    def test_straight_ahead(self):
        command = mix_motion(scores(nav=0.5, familiarity=0.2), self.cfg)
        self.assertAlmostEqual(command.surge, 0.5 * 0.4)
        self.assertAlmostEqual(command.yaw_rate, 0.0)
        self.assertEqual(command.sway, 0.0)

    def test_turns_toward_better_side(self):
        grid = scores()
        grid.nav[1, 2] = 0.9
        self.assertLess(mix_motion(grid, self.cfg).yaw_rate, 0.0)
        grid = scores()
        grid.nav[1, 0] = 0.9
        self.assertGreater(mix_motion(grid, self.cfg).yaw_rate, 0.0)

    def test_familiar_side_is_avoided(self):
        grid = scores()
        grid.familiarity[1, 0] = 0.9
        self.assertLess(mix_motion(grid, self.cfg).yaw_rate, 0.0)

    def test_gating(self):
        grid = scores()
        grid.std[0, 0] = 0.0
        grid.nav[0, 2] = -0.1
        utilities = column_utilities(grid, self.cfg)
        self.assertEqual(utilities[0], GATED_UTILITY)
        self.assertEqual(utilities[2], GATED_UTILITY)
        self.assertAlmostEqual(utilities[1], 0.5)

    def test_all_blocked_stops(self):
        self.assertEqual(mix_motion(scores(nav=-0.5), self.cfg), STOP)

    def test_config_problems(self):
        with self.assertRaises(ConfigurationError) as ctx:
            MixerConfig(w_nav=0.0, turn_gain=-1.0)
        self.assertEqual(len(ctx.exception.problems), 2)


def straight_odometry(total, duration=5.0, dt=0.1):
    steps = int(round(duration / dt))
    return [(i * dt, (total * i / steps, 0.0)) for i in range(steps + 1)]


class TestTrap(unittest.TestCase):
    def setUp(self):
        self.cfg = TrapConfig()

    def test_short_travel_is_a_trap(self):
        self.assertTrue(detect_trap(straight_odometry(0.15), [], self.cfg, 5.0))

    def test_enough_travel_is_not(self):
        self.assertFalse(detect_trap(straight_odometry(0.25), [], self.cfg, 5.0))

    def test_needs_a_full_window(self):
        odometry = [(t, p) for t, p in straight_odometry(0.0) if t >= 1.0]
        self.assertFalse(detect_trap(odometry, [], self.cfg, 5.0))

    def test_sustained_halt(self):
        halts = [(i * 0.1, True) for i in range(51)]
        self.assertTrue(detect_trap([], halts, self.cfg, 5.0))
        self.assertFalse(detect_trap([], halts[:50], self.cfg, 4.9))
        halts[30] = (3.0, False)
        self.assertFalse(detect_trap([], halts, self.cfg, 5.0))

    def test_monitor(self):
        monitor = TrapMonitor(self.cfg)
        for i in range(200):
            t = i * 0.1
            monitor.record(t, (0.5 * t, 0.0), False)
        self.assertFalse(monitor.trapped(19.9))
        self.assertLess(len(monitor.odometry), 80)
        monitor.reset()
        self.assertFalse(monitor.trapped(20.0))

    def test_positive_thresholds(self):
        with self.assertRaises(ConfigurationError):
            TrapConfig(window=0.0)


class TestLookAround(unittest.TestCase):
    def setUp(self):
        self.cfg = LookAroundConfig()
        self.n = self.cfg.sample_count

    def bump(self, center, width=3):
        raw = np.full(self.n, -0.5)
        for k in range(-width, width + 1):
            raw[(center + k) % self.n] = 1.0
        return raw

    def test_single_opening(self):
        candidates = select_candidates(self.bump(18), self.cfg)
        self.assertAlmostEqual(candidates[0].heading, math.pi / 2)
        self.assertAlmostEqual(candidates[0].arc_width, 7 * self.cfg.angular_step)

    def test_rotation_moves_candidates(self):
        base = select_candidates(self.bump(10), self.cfg)
        shifted = select_candidates(np.roll(self.bump(10), 12), self.cfg)
        self.assertEqual(len(base), len(shifted))
        for a, b in zip(base, shifted):
            self.assertAlmostEqual(wrap_angle(b.heading - a.heading), 12 * self.cfg.angular_step)
            self.assertAlmostEqual(a.score, b.score)

    def test_equal_peaks_prefer_lower_index(self):
        raw = self.bump(0) + self.bump(36) + 0.5
        candidates = select_candidates(raw, self.cfg)
        self.assertEqual(len(candidates), 2)
        self.assertEqual(candidates[0].heading, 0.0)
        self.assertAlmostEqual(abs(candidates[1].heading), math.pi)

    def test_uniform_offset_keeps_ranking(self):
        theta = self.cfg.headings()
        raw = 1.0 + 0.5 * np.cos(2.0 * theta - 1.0) + 0.2 * np.cos(5.0 * theta)
        base = select_candidates(raw, self.cfg)
        self.assertGreaterEqual(len(base), 2)
        for offset in (0.25, -0.2):
            shifted = select_candidates(raw + offset, self.cfg)
            self.assertEqual([c.heading for c in shifted], [c.heading for c in base])
            for a, b in zip(base, shifted):
                self.assertAlmostEqual(b.score - a.score, offset)

    def test_symmetric_openings_prefer_deviation(self):
        raw = np.full(self.n, -0.5)
        for k in range(-3, 4):
            raw[k % self.n] = 1.0
            raw[36 + k] = 1.0
        plain = select_candidates(raw, self.cfg)
        self.assertEqual(plain[0].heading, 0.0)
        recovered = select_candidates(raw, self.cfg, trap_recovery_from=0.0)
        self.assertAlmostEqual(abs(recovered[0].heading), math.pi)
        self.assertEqual(len(recovered), 2)

    def test_doorway_ring_single_candidate(self):
        grid = doorway_ring_map()
        center = (6.0, 6.0)

        def score(theta):
            return -1.0 if raycast(grid, center, theta, 3.0) is not None else 1.0

        candidates = look_around(0.0, score, self.cfg)
        self.assertEqual(len(candidates), 1)
        self.assertLessEqual(abs(wrap_angle(candidates[0].heading - math.pi / 2)), self.cfg.angular_step + 1e-9)

    def test_nothing_open(self):
        self.assertEqual(select_candidates(np.full(self.n, -0.2), self.cfg), [])

    def test_flat_uses_current_heading(self):
        candidates = select_candidates(np.full(self.n, 0.4), self.cfg, current_heading=1.0)
        self.assertEqual(len(candidates), 1)
        self.assertAlmostEqual(candidates[0].heading, 1.0)
        self.assertAlmostEqual(candidates[0].arc_width, 2 * math.pi)

    def test_deviation_reward_turns_away(self):
        candidates = select_candidates(np.full(self.n, 0.4), self.cfg, trap_recovery_from=0.0)
        self.assertAlmostEqual(abs(candidates[0].heading), math.pi)

    def test_arc_width(self):
        raw = np.array([1.0, 1.0, -1.0, 1.0])
        self.assertEqual(_arc_width(raw, 0, 1.0), 3.0)
        self.assertEqual(_arc_width(raw, 2, 1.0), 1.0)

    def test_scan_calls_every_heading(self):
        seen = []

        def score(theta):
            seen.append(theta)
            return math.cos(theta - 1.0)

        candidates = look_around(0.0, score, self.cfg)
        self.assertEqual(len(seen), self.n)
        self.assertAlmostEqual(candidates[0].heading, round(1.0 / self.cfg.angular_step) * self.cfg.angular_step)

    def test_checks(self):
        with self.assertRaises(ConfigurationError):
            LookAroundConfig(angular_step=0.1)
        with self.assertRaises(ConfigurationError):
            select_candidates(np.zeros(10), self.cfg)


class ModeDriver:
    """Feeds the mode machine and integrates its yaw commands."""

    def __init__(self, scan=None, cfg=None, dt=0.1):
        self.cfg = cfg or DecisionConfig()
        self.state = ModeState()
        self.pose = Pose(0.0, 0.0, 0.0)
        self.dt = dt
        self.time = 0.0
        self.scan = scan
        self.commands = []

    def tick(self, **kwargs):
        kwargs.setdefault("scores", scores())
        inputs = ModeInputs(self.time, self.dt, self.pose, look_around=self.scan, **kwargs)
        mode, command = step_mode(self.state, inputs, self.cfg)
        self.commands.append((mode, command))
        self.pose = Pose(self.pose.x, self.pose.y, self.pose.heading + command.yaw_rate * self.dt)
        self.time += self.dt
        return mode, command

    def run_until(self, mode, limit=200, **kwargs):
        for _ in range(limit):
            if self.tick(**kwargs)[0] is mode:
                return True
        return False


class TestModes(unittest.TestCase):
    def test_scan_then_align_then_navigate(self):
        calls = []

        def scan(anchor):
            calls.append(anchor)
            return [HeadingCandidate(math.pi / 2, 1.0, 0.5)]

        driver = ModeDriver(scan)
        self.assertTrue(driver.run_until(NavMode.NAVIGATE))
        self.assertEqual(calls, [None])
        self.assertAlmostEqual(driver.pose.heading, math.pi / 2, places=3)
        for mode, command in driver.commands[:-1]:
            self.assertIs(mode, NavMode.LOOK_AROUND)
            self.assertFalse(command.translates)

    def test_no_look_around_starts_navigating(self):
        driver = ModeDriver(None)
        mode, command = driver.tick()
        self.assertIs(mode, NavMode.NAVIGATE)
        self.assertGreater(command.surge, 0.0)

    def test_trap_without_look_around_fails(self):
        driver = ModeDriver(None)
        driver.tick()
        mode, command = driver.tick(trapped=True)
        self.assertIs(mode, NavMode.FAILED)
        self.assertIs(driver.state.failure, FailureReason.STUCK)
        self.assertEqual(command, STOP)

    def test_trap_starts_recovery_scan(self):
        anchors = []

        def scan(anchor):
            anchors.append(anchor)
            return [HeadingCandidate(0.0, 1.0, 0.5)]

        driver = ModeDriver(scan)
        self.assertTrue(driver.run_until(NavMode.NAVIGATE))
        driver.pose = Pose(0.0, 0.0, 0.7)
        self.assertIs(driver.tick(trapped=True)[0], NavMode.TRAPPED)
        self.assertIs(driver.tick()[0], NavMode.LOOK_AROUND)
        self.assertTrue(driver.run_until(NavMode.NAVIGATE))
        self.assertEqual(anchors[0], None)
        self.assertAlmostEqual(anchors[1], 0.7)

    def test_empty_recovery_scans_fail(self):
        driver = ModeDriver(lambda anchor: [] if anchor is not None else [HeadingCandidate(0.0, 1.0, 0.5)])
        self.assertTrue(driver.run_until(NavMode.NAVIGATE))
        driver.tick(trapped=True)
        self.assertTrue(driver.run_until(NavMode.NAVIGATE))
        driver.tick(trapped=True)
        self.assertTrue(driver.run_until(NavMode.FAILED))
        self.assertIs(driver.state.failure, FailureReason.STUCK)

    def test_target_lock(self):
        driver = ModeDriver(None)
        driver.tick()
        mode, command = driver.tick(scores=scores(target=[[0, 0, 0], [0, 0.8, 0]]))
        self.assertIs(mode, NavMode.TARGET_LOCK)
        self.assertEqual(command, MotionCommand(surge=0.5))
        mode, command = driver.tick(scores=scores(target=[[0, 0, 0], [0.8, 0, 0]]))
        self.assertAlmostEqual(command.yaw_rate, math.radians(30.0))
        mode, command = driver.tick(scores=scores(target=[[0, 0, 0.8], [0, 0, 0]]))
        self.assertAlmostEqual(command.yaw_rate, -math.radians(30.0))
        self.assertIs(driver.tick(goal_reached=True)[0], NavMode.DONE)
        self.assertEqual(driver.tick()[1], STOP)

    def test_target_loss_returns_to_navigate(self):
        driver = ModeDriver(None)
        driver.tick()
        driver.tick(scores=scores(target=[[0, 0, 0], [0, 0.8, 0]]))
        for _ in range(19):
            mode, command = driver.tick()
            self.assertIs(mode, NavMode.TARGET_LOCK)
            self.assertEqual(command, MotionCommand(surge=0.5))
        self.assertTrue(driver.run_until(NavMode.NAVIGATE, limit=3))

    def test_distance_limit(self):
        driver = ModeDriver(None)
        driver.tick()
        self.assertIs(driver.tick(distance_limit_exceeded=True)[0], NavMode.FAILED)
        self.assertIs(driver.state.failure, FailureReason.DISTANCE_LIMIT)

    def test_illegal_transition(self):
        state = ModeState(mode=NavMode.DONE)
        with self.assertRaises(IllegalTransitionError):
            transition(state, NavMode.NAVIGATE, 0.0)


@pytest.mark.parametrize("field, value", [("tau_target", 1.0), ("t_loss", 0.0), ("turn_rate", -1.0)])
def test_decision_config_checks(field, value):
    with pytest.raises(ConfigurationError):
        DecisionConfig(**{field: value})


if __name__ == '__main__':
    unittest.main()
