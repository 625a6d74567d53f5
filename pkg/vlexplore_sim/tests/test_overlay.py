"""
Tests for the SVG overlays.
"""

import math
import os
import sys
import tempfile

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from vlexplore_sim.decision.look_around import HeadingCandidate
from vlexplore_sim.evaluation.metrics import EpsModel
from vlexplore_sim.maps.fixtures import square_obstacle_map
from vlexplore_sim.visualization.overlay import (CandidateAnnotation, OverlayTrack, render_equipotential,
                                                 render_overlay)

MODEL = EpsModel(((0.7, 0.3, 1.0), (1.0, 0.0, 0.8), (1.0, 0.0, 1.2)))


def sample_overlay(path=None):
    grid = square_obstacle_map()
    tracks = [OverlayTrack("bug2-l", np.array([[2.0, 10.0], [8.0, 12.0], [18.0, 10.0]])),
              OverlayTrack("bug2-l", np.array([[2.0, 10.0], [10.0, 7.0], [18.0, 10.0]])),
              OverlayTrack("wall-bounce", np.array([[2.0, 10.0], [2.0, 19.0]]))]
    candidates = (HeadingCandidate(0.0, 0.8, 0.6), HeadingCandidate(math.pi / 2, 0.4, 0.3))
    return render_overlay(grid, tracks, {"S": (2.0, 10.0), "T": (18.0, 10.0)},
                          [CandidateAnnotation((2.0, 10.0), candidates)], path=path, title="S -> T")


def test_overlay_elements():
    markup = sample_overlay()
    assert markup.lstrip().startswith("<?xml")
    for gid in ("map", "trajectory-0", "trajectory-1", "trajectory-2", "waypoint-S", "waypoint-T",
                "candidate-0", "candidate-1"):
        assert f'id="{gid}"' in markup
    assert 'id="candidate-2"' not in markup


def test_overlay_is_deterministic():
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "overlay.svg")
        markup = sample_overlay(path)
        with open(path, encoding="utf-8") as handle:
            assert handle.read() == markup
    assert sample_overlay() == markup


def test_equipotential_plot():
    markup = render_equipotential(MODEL, {"bug2-l": (1.0, 0.6), "random-walk": (0.5, 0.2)})
    assert 'id="equipotentials"' in markup
    assert "EPS = " in markup
    assert 'id="result-bug2-l"' in markup
    assert render_equipotential(MODEL, {"bug2-l": (1.0, 0.6), "random-walk": (0.5, 0.2)}) == markup
