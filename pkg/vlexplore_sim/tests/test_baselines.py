"""
Tests for the traversal baselines: random walk, wall bounce and the Bug family.
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

from vlexplore_sim.baselines.bug import (POLICY_NAMES, BugMode, BugVariant, TurnRule, bug_policy,
                                         parse_bug_name)
from vlexplore_sim.baselines.random_walk import RandomWalkPolicy
from vlexplore_sim.baselines.wall_bounce import WallBouncePolicy, reflect
from vlexplore_sim.core.errors import ConfigurationError
from vlexplore_sim.core.simkernel import Observation, RobotSpec, TrialConfig, TrialStatus, run_trial
from vlexplore_sim.core.worldmap import Pose
from vlexplore_sim.maps.fixtures import c_trap_map, empty_map, square_obstacle_map


class TestRandomWalk(unittest.TestCase):
    def setUp(self):
        self.grid = empty_map(4.0, 4.0)
        # The footprint keeps the center 0.15 m off the walls, so this target is never reached
        self.config = TrialConfig(Pose(2.0, 2.0, 0.0), (3.95, 3.95), max_steps=400, seed=11, goal_radius=0.1)

    def test_redraws_on_halt(self):
        policy = RandomWalkPolicy()
        outcome = run_trial(policy, self.config, self.grid, RobotSpec())
        self.assertGreater(policy.redraws, 0)
        xy = outcome.trajectory.xy
        self.assertTrue(np.all((xy >= 0.15 - 1e-9) & (xy <= 3.85 + 1e-9)))

    def test_same_seed_same_walk(self):
        first = run_trial(RandomWalkPolicy(), self.config, self.grid, RobotSpec())
        second = run_trial(RandomWalkPolicy(), self.config, self.grid, RobotSpec())
        self.assertTrue(np.array_equal(first.trajectory.xy, second.trajectory.xy))

    def test_fixed_initial_heading(self):
        policy = RandomWalkPolicy(initial_heading=math.pi / 2)
        outcome = run_trial(policy, self.config, self.grid, RobotSpec())
        second = outcome.trajectory.samples[1][1]
        self.assertAlmostEqual(second.x, 2.0)
        self.assertAlmostEqual(second.y, 2.2)


class TestWallBounce(unittest.TestCase):
    def test_reflect(self):
        self.assertEqual(reflect((1.0, 0.0), (-1.0, 0.0)), (-1.0, 0.0))
        dx, dy = reflect((math.sqrt(0.5), math.sqrt(0.5)), (0.0, -1.0))
        self.assertAlmostEqual(dx, math.sqrt(0.5))
        self.assertAlmostEqual(dy, -math.sqrt(0.5))

    def test_bounces_back_to_target(self):
        policy = WallBouncePolicy(initial_heading=0.0)
        config = TrialConfig(Pose(5.0, 5.0, 0.0), (1.0, 5.0))
        outcome = run_trial(policy, config, empty_map(10.0, 10.0), RobotSpec())
        self.assertEqual(outcome.status, TrialStatus.SUCCESS)
        self.assertEqual(policy.bounces, 1)
        self.assertAlmostEqual(outcome.path_length, 13.0, delta=0.1)


class TestBugNames(unittest.TestCase):
    def test_all_six_names(self):
        self.assertEqual(POLICY_NAMES, ["bug0-l", "bug0-r", "bug1-l", "bug1-r", "bug2-l", "bug2-r"])

    def test_parse(self):
        self.assertEqual(parse_bug_name("bug2-r"), (BugVariant.BUG2, TurnRule.RIGHT))
        with self.assertRaises(ConfigurationError):
            parse_bug_name("bug3")

    def test_factory_accepts_strings(self):
        policy = bug_policy("bug1", "left", (1.0, 1.0))
        self.assertEqual(policy.name, "bug1-l")
        self.assertEqual(policy.rule.side, 1.0)

    def test_target_inside_obstacle(self):
        grid = square_obstacle_map(20.0, 2.0)
        policy = bug_policy("bug0", "l", (10.0, 10.0))
        with self.assertRaises(ConfigurationError):
            run_trial(policy, TrialConfig(Pose(2, 2, 0), (10.0, 10.0)), grid, RobotSpec())


@pytest.mark.parametrize("name", POLICY_NAMES)
def test_bug_straight_on_empty_map(name):
    """Free space: every variant drives the straight line."""
    variant, rule = parse_bug_name(name)
    source, target = (2.0, 2.0), (18.0, 18.0)
    policy = bug_policy(variant, rule, target)
    outcome = run_trial(policy, TrialConfig(Pose(*source, 0.0), target), empty_map(20.0, 20.0), RobotSpec())
    assert outcome.status == TrialStatus.SUCCESS
    euclidean = math.dist(source, target)
    assert abs(outcome.path_length - euclidean) <= 0.05 * euclidean
    assert policy.state.mode is BugMode.MOTION_TO_GOAL


@pytest.mark.parametrize("rule", ["l", "r"])
def test_bug1_square_obstacle_bound(rule):
    """Bug1 stays under the circumnavigate-and-return bound."""
    robot = RobotSpec()
    grid = square_obstacle_map(20.0, 2.0)
    source, target = (4.0, 10.0), (16.0, 10.0)
    policy = bug_policy("bug1", rule, target)
    outcome = run_trial(policy, TrialConfig(Pose(*source, 0.0), target), grid, robot)
    assert outcome.status == TrialStatus.SUCCESS
    # Perimeter of the obstacle grown by the follower's standoff
    standoff = robot.footprint_radius + grid.resolution
    perimeter = 4 * 2.0 + 2 * math.pi * standoff
    assert outcome.path_length <= math.dist(source, target) + 1.5 * perimeter
    assert len(policy.state.hit_points) == 1


def test_bug2_square_obstacle_succeeds():
    grid = square_obstacle_map(20.0, 2.0)
    source, target = (4.0, 10.0), (16.0, 10.0)
    policy = bug_policy("bug2", "l", target)
    outcome = run_trial(policy, TrialConfig(Pose(*source, 0.0), target), grid, RobotSpec())
    assert outcome.status == TrialStatus.SUCCESS
    assert outcome.path_length > math.dist(source, target) - 0.75


def test_bug0_c_trap_loops():
    """The cul-de-sac keeps pulling Bug0 back onto the same hit point."""
    grid = c_trap_map()
    source, target = (1.5, 6.0), (10.5, 6.0)
    statuses = []
    for rule in ("l", "r"):
        policy = bug_policy("bug0", rule, target)
        config = TrialConfig(Pose(*source, 0.0), target, distance_limit=200.0)
        statuses.append(run_trial(policy, config, grid, RobotSpec()).status)
    assert TrialStatus.FAIL_LOOP_DETECTED in statuses


class TestBug0Episodes(unittest.TestCase):
    """Visited states are scoped to one boundary-follow episode."""

    def setUp(self):
        self.grid = empty_map(20.0, 20.0)
        self.target = (18.0, 10.0)
        self.config = TrialConfig(Pose(2.0, 10.0, 0.0), self.target)
        self.policy = bug_policy("bug0", "l", self.target)
        self.policy.begin(self.obs(2.0, 10.0, 0.0))

    def obs(self, x, y, travelled):
        return Observation(0.0, 0, Pose(x, y, 0.0), False, self.target, travelled, self.grid, RobotSpec(),
                           self.config, np.random.default_rng(0))

    def test_revisit_in_a_later_episode_is_not_a_loop(self):
        policy = self.policy
        self.assertFalse(policy._start_follow(self.obs(5.0, 5.0, 0.0)))
        self.assertFalse(policy._record(self.obs(6.0, 6.0, 1.0), 0.0))
        policy._leave(self.obs(6.5, 6.5, 1.5))
        self.assertFalse(policy._start_follow(self.obs(8.0, 8.0, 5.0)))
        self.assertFalse(policy._record(self.obs(6.0, 6.0, 7.0), 0.0))

    def test_revisit_in_the_same_episode_is_a_loop(self):
        policy = self.policy
        policy._start_follow(self.obs(5.0, 5.0, 0.0))
        self.assertFalse(policy._record(self.obs(6.0, 6.0, 1.0), 0.0))
        self.assertFalse(policy._record(self.obs(7.0, 7.0, 2.0), 0.0))
        self.assertTrue(policy._record(self.obs(6.0, 6.0, 3.0), 0.0))

    def test_repeated_hit_point(self):
        policy = self.policy
        self.assertFalse(policy._start_follow(self.obs(5.0, 5.0, 0.0)))
        policy._leave(self.obs(5.5, 5.5, 1.0))
        # Back at the first hit after a circuit, no closer to the target
        self.assertTrue(policy._start_follow(self.obs(5.0, 5.05, 3.0)))

    def test_hit_with_progress_is_not_repeated(self):
        policy = self.policy
        self.assertFalse(policy._start_follow(self.obs(5.0, 5.0, 0.0)))
        policy._leave(self.obs(5.5, 5.5, 1.0))
        # Same spot a moment later is jitter, not a circuit
        self.assertFalse(policy._start_follow(self.obs(5.0, 5.05, 0.3)))
        # Nearby but clearly closer to the target is progress
        self.assertFalse(policy._start_follow(self.obs(5.15, 5.1, 3.0)))
