"""
SVG renderings: trajectories over the occupancy map, look-around candidate
bars, and EPS equipotential plots.

Figures are built on ``matplotlib.figure.Figure`` directly so that worker
threads never touch pyplot's global state. Every drawn element carries a
``gid`` so tests and downstream tools can find it in the markup.
"""

import io
import logging
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from ..core.worldmap import GridMap, Point
from ..decision.look_around import HeadingCandidate
from ..evaluation.metrics import EpsModel, eps_score

logger = logging.getLogger(__name__)

SVG_SETTINGS = {"svg.hashsalt": "vlexplore", "svg.fonttype": "none"}
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]
EPS_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class OverlayTrack:
    """One trajectory polyline; tracks sharing a label share a color."""

    label: str
    points: np.ndarray


@dataclass(frozen=True)
class CandidateAnnotation:
    origin: Point
    candidates: Tuple[HeadingCandidate, ...]


def _to_svg(figure: Figure, path: Optional[str]) -> str:
    buffer = io.StringIO()
    FigureCanvasSVG(figure)
    with matplotlib.rc_context(SVG_SETTINGS):
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    markup = buffer.getvalue()
    if path:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(markup)
        logger.debug(f"Wrote {path}")
    return markup


def render_overlay(grid: GridMap, tracks: Sequence[OverlayTrack] = (),
                   waypoints: Optional[Mapping[str, Point]] = None,
                   annotations: Sequence[CandidateAnnotation] = (),
                   path: Optional[str] = None, title: Optional[str] = None) -> str:
    """Draw the map raster with trajectories, waypoints and candidate bars.

    Args:
        grid: Occupancy map, drawn black on white
        tracks: Trajectory polylines, gids ``trajectory-<i>``
        waypoints: Named markers, gids ``waypoint-<name>``
        annotations: Look-around results; each candidate becomes a heading
            bar with gid ``candidate-<i>`` whose length grows with its score
        path: Write the SVG here when given
        title: Optional axes title

    Returns:
        str: The SVG markup
    """
    xmin, ymin, xmax, ymax = grid.bounds
    width, height = xmax - xmin, ymax - ymin
    scale = 6.0 / max(width, height)
    figure = Figure(figsize=(max(width * scale, 2.0), max(height * scale, 2.0)))
    ax = figure.add_subplot(1, 1, 1)
    ax.imshow(np.where(grid.occupied, 0.0, 1.0), cmap="gray", vmin=0.0, vmax=1.0, origin="lower",
              extent=(xmin, xmax, ymin, ymax), interpolation="nearest").set_gid("map")

    colors: Dict[str, str] = {}
    for label in sorted({track.label for track in tracks}):
        colors[label] = PALETTE[len(colors) % len(PALETTE)]
    labelled = set()
    for index, track in enumerate(tracks):
        points = np.asarray(track.points, dtype=float).reshape(-1, 2)
        legend = track.label if track.label not in labelled else "_nolegend_"
        labelled.add(track.label)
        (line,) = ax.plot(points[:, 0], points[:, 1], color=colors[track.label], linewidth=1.2, label=legend)
        line.set_gid(f"trajectory-{index}")

    for name, (x, y) in sorted((waypoints or {}).items()):
        marker = ax.scatter([x], [y], marker="o", s=30, color="black", zorder=5)
        marker.set_gid(f"waypoint-{name}")
        ax.annotate(name, (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)

    bar_index = 0
    reach = 0.08 * max(width, height)
    for annotation in annotations:
        ox, oy = annotation.origin
        top = max((c.score for c in annotation.candidates), default=1.0) or 1.0
        for rank, candidate in enumerate(annotation.candidates):
            length = reach * (0.4 + 0.6 * max(candidate.score, 0.0) / top)
            ex = ox + length * math.cos(candidate.heading)
            ey = oy + length * math.sin(candidate.heading)
            (bar,) = ax.plot([ox, ex], [oy, ey], color="#ff7f0e", linewidth=2.0)
            bar.set_gid(f"candidate-{bar_index}")
            ax.annotate(f"C{rank}", (ex, ey), fontsize=7)
            bar_index += 1

    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    if title:
        ax.set_title(title)
    if tracks:
        ax.legend(loc="upper right", fontsize=7)
    figure.tight_layout()
    return _to_svg(figure, path)


def render_equipotential(model: EpsModel, results: Optional[Mapping[str, Tuple[float, float]]] = None,
                         path: Optional[str] = None, samples: int = 101) -> str:
    """Equipotential lines labelled ``EPS = x`` over the (R, Lbar) plane.

    Args:
        model: Fitted EPS model
        results: Optional (R, Lbar) per algorithm, drawn as labelled points
        path: Write the SVG here when given
        samples: Grid resolution per axis
    """
    axis = np.linspace(1.0 / samples, 1.0, samples)
    rates, lbars = np.meshgrid(axis, axis)
    scores = np.vectorize(lambda r, lbar: eps_score(model, r, lbar))(rates, lbars)

    figure = Figure(figsize=(5.0, 4.5))
    ax = figure.add_subplot(1, 1, 1)
    contours = ax.contour(rates, lbars, scores, levels=EPS_LEVELS, colors="#555555", linewidths=0.8)
    contours.set_gid("equipotentials")
    ax.clabel(contours, fmt=lambda value: f"EPS = {value:.1f}", fontsize=7)
    for index, (algo, (rate, lbar)) in enumerate(sorted((results or {}).items())):
        point = ax.scatter([rate], [lbar], color=PALETTE[index % len(PALETTE)], zorder=5, label=algo)
        point.set_gid(f"result-{algo}")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("R (success rate)")
    ax.set_ylabel("Lbar (mean inverse path length)")
    if results:
        ax.legend(loc="lower right", fontsize=7)
    figure.tight_layout()
    return _to_svg(figure, path)
