"""
Batch reports: per-trial, per-pair and overall CSVs, the EPS model fitted on
the pooled random-walk runs, and SVG overlays.

Every table is written in canonical sorted order with fixed-precision
numbers so that identical seeds give byte-identical files.
"""

import csv
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from ..baselines.wavefront import WavefrontResult, write_arrival_csv
from ..core.errors import FitError, MetricsError
from ..core.simkernel import TRIAL_CSV_HEADER
from ..core.worldmap import GridMap
from ..pipeline import VlExploreConfig
from ..visualization.overlay import OverlayTrack, render_equipotential, render_overlay
from .experiment import (RANDOM_WALK, ExperimentSpec, TrialResult, pair_baselines, plan_trials, run_trials,
                         validate_experiment)
from .metrics import (SUMMARY_CSV_HEADER, AggregateStats, EpsModel, PairId, aggregate, default_cutoffs, fit_eps,
                      records_from_trials, rl_curve, summary_row, write_equipotential_csv)

logger = logging.getLogger(__name__)

PAIRS_CSV_HEADER = ["algo", "source", "target", "N", "N_s", "R", "Lbar", "SPL", "baseline_m"]
BASELINES_CSV_HEADER = ["source", "target", "baseline_m", "mean_m", "std_m", "truncated"]
RANDOM_WALK_CSV_HEADER = ["source", "target", "trial", "path_length_m"]
EPS_MODEL_CSV_HEADER = ["n", "k", "t", "p"]

TRIALS_CSV = "trials.csv"
PAIRS_CSV = "pairs.csv"
SUMMARY_CSV = "summary.csv"
BASELINES_CSV = "baselines.csv"
RANDOM_WALK_CSV = "random_walk_paths.csv"
EPS_MODEL_CSV = "eps_model.csv"
EQUIPOTENTIAL_CSV = "equipotential.csv"
EQUIPOTENTIAL_SVG = "equipotential.svg"


@dataclass
class ReportBundle:
    """Paths of everything a batch run wrote, plus the fitted model if any."""

    out_dir: str
    trials_csv: str
    pairs_csv: str
    summary_csv: str
    baselines_csv: str
    overlays: List[str] = field(default_factory=list)
    arrival_csvs: List[str] = field(default_factory=list)
    eps_model: Optional[EpsModel] = None
    summary: Dict[str, AggregateStats] = field(default_factory=dict)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.debug(f"Wrote {path}")
    return path


def read_rows(path: str) -> List[Dict[str, str]]:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def trial_rows(results: Sequence[TrialResult]) -> List[List[str]]:
    """Per-trial rows sorted by (algo, source, target, trial)."""
    ordered = sorted(results, key=lambda r: (r.task.algo, r.task.source, r.task.target, r.task.trial))
    return [[r.task.algo, r.task.source, r.task.target, str(r.task.seed), r.status.value,
             _fmt(r.path_length), str(r.steps)] for r in ordered]


def read_baselines(path: str) -> Dict[PairId, float]:
    return {(row["source"], row["target"]): float(row["baseline_m"]) for row in read_rows(path)}


def pair_table(rows: Sequence[Mapping[str, str]], baselines: Mapping[PairId, float]) -> List[List[str]]:
    """Aggregate per (algo, source, target) from per-trial rows."""
    groups: Dict[Tuple[str, str, str], List[Mapping[str, str]]] = defaultdict(list)
    for row in rows:
        groups[(row["algo"], row["source"], row["target"])].append(row)
    table = []
    for (algo, source, target), members in sorted(groups.items()):
        stats = aggregate(records_from_trials(members, baselines))
        table.append([algo, source, target, str(stats.n), str(stats.n_success), _fmt(stats.success_rate),
                      _fmt(stats.mean_inverse_length), _fmt(stats.spl), _fmt(baselines[(source, target)])])
    return table


def algorithm_stats(rows: Sequence[Mapping[str, str]],
                    baselines: Mapping[PairId, float]) -> Dict[str, AggregateStats]:
    algos = sorted({row["algo"] for row in rows})
    return {algo: aggregate(records_from_trials(rows, baselines, algo)) for algo in algos}


def normalized_random_walk_paths(rows: Sequence[Mapping[str, str]], baselines: Mapping[PairId, float]) -> List[float]:
    """Uncapped random-walk paths in units of their pair baseline; failures drop out."""
    paths = []
    for row in rows:
        path = float(row["path_length_m"])
        if math.isfinite(path):
            paths.append(path / baselines[(row["source"], row["target"])])
    return paths


def fit_pooled_eps(rows: Sequence[Mapping[str, str]], baselines: Mapping[PairId, float],
                   mode: str = "canonical") -> EpsModel:
    """Fit EPS on the pair-normalized random-walk pool, where every baseline becomes 1."""
    paths = normalized_random_walk_paths(rows, baselines)
    return fit_eps(rl_curve(paths, 1.0, default_cutoffs(paths)), mode)


def write_eps_model(model: EpsModel, path: str) -> str:
    return _write_rows(path, EPS_MODEL_CSV_HEADER,
                       [[str(n)] + [repr(float(v)) for v in row] for n, row in enumerate(model.h, start=1)])


def read_eps_model(path: str) -> EpsModel:
    rows = sorted(read_rows(path), key=lambda row: int(row["n"]))
    if len(rows) != 3:
        raise MetricsError(f"{path}: expected 3 model rows, got {len(rows)}")
    return EpsModel(tuple((float(row["k"]), float(row["t"]), float(row["p"])) for row in rows))


def write_summary(stats: Mapping[str, AggregateStats], model: Optional[EpsModel], path: str) -> str:
    return _write_rows(path, SUMMARY_CSV_HEADER, [summary_row(algo, s, model) for algo, s in sorted(stats.items())])


def recompute_metrics(trials_csv: str, baselines_csv: str, out_dir: str,
                      random_walk_csv: Optional[str] = None) -> ReportBundle:
    """Rebuild the per-pair and summary tables from existing CSVs."""
    rows = read_rows(trials_csv)
    baselines = read_baselines(baselines_csv)
    os.makedirs(out_dir, exist_ok=True)
    pairs_csv = _write_rows(os.path.join(out_dir, PAIRS_CSV), PAIRS_CSV_HEADER, pair_table(rows, baselines))
    model = None
    if random_walk_csv and os.path.exists(random_walk_csv):
        try:
            model = fit_pooled_eps(read_rows(random_walk_csv), baselines)
        except (FitError, MetricsError) as e:
            logger.warning(f"EPS not available: {e}")
    stats = algorithm_stats(rows, baselines)
    summary_csv = write_summary(stats, model, os.path.join(out_dir, SUMMARY_CSV))
    return ReportBundle(out_dir, trials_csv, pairs_csv, summary_csv, baselines_csv, eps_model=model, summary=stats)


def _overlay(grid: GridMap, spec: ExperimentSpec, pair: PairId, results: Sequence[TrialResult], path: str) -> str:
    tracks = [OverlayTrack(r.task.algo, r.trajectory_xy)
              for r in sorted(results, key=lambda r: r.task.algo)
              if (r.task.source, r.task.target) == pair and r.task.trial == 0 and len(r.trajectory_xy)]
    waypoints = {label: spec.waypoints[label] for label in pair}
    render_overlay(grid, tracks, waypoints, path=path, title=f"{pair[0]} -> {pair[1]}")
    return path


def run_experiment(spec: ExperimentSpec, out_dir: str, workers: Optional[int] = None,
                   vl_config: Optional[VlExploreConfig] = None, overlays: bool = True) -> ReportBundle:
    """Run a full spec and write its report.

    The wave-front runs once per pair to fix the baseline distance; every
    configured policy then runs its trial count on every pair.

    Args:
        spec: The experiment grid
        out_dir: Output directory, created if missing
        workers: Worker processes; physical core count by default
        vl_config: VL-Explore stack settings for the vl-explore algorithms
        overlays: Draw one SVG overlay per pair

    Returns:
        ReportBundle: Paths of the written files and the aggregate stats

    Raises:
        ConfigurationError: Pre-flight validation failed, listing every problem
    """
    grid = validate_experiment(spec)
    os.makedirs(out_dir, exist_ok=True)

    logger.info(f"Computing wave-front baselines for {len(set(spec.tasks))} pairs")
    waves: Dict[PairId, WavefrontResult] = pair_baselines(spec, grid)
    baselines_csv = _write_rows(
        os.path.join(out_dir, BASELINES_CSV), BASELINES_CSV_HEADER,
        [[s, t, _fmt(r.first_contact_distance), _fmt(r.mean), _fmt(r.std), str(r.truncated).lower()]
         for (s, t), r in sorted(waves.items())])
    # Tables use the written precision so `metrics` reproduces them from the CSVs
    baselines = read_baselines(baselines_csv)
    arrival_csvs = []
    for (source, target), result in sorted(waves.items()):
        path = os.path.join(out_dir, f"arrival_{source}_{target}.csv")
        write_arrival_csv(result, path)
        arrival_csvs.append(path)

    tasks = plan_trials(spec)
    logger.info(f"Running {len(tasks)} trials over {len(spec.algorithms)} algorithms")
    results = run_trials(spec, grid, tasks, workers, vl_config)

    rows = trial_rows(results)
    trials_csv = _write_rows(os.path.join(out_dir, TRIALS_CSV), TRIAL_CSV_HEADER, rows)
    row_dicts = [dict(zip(TRIAL_CSV_HEADER, row)) for row in rows]
    pairs_csv = _write_rows(os.path.join(out_dir, PAIRS_CSV), PAIRS_CSV_HEADER, pair_table(row_dicts, baselines))

    model = None
    walks = sorted((r for r in results if r.task.algo == RANDOM_WALK),
                   key=lambda r: (r.task.source, r.task.target, r.task.trial))
    if walks:
        walk_rows = [[r.task.source, r.task.target, str(r.task.trial), _fmt(r.uncapped_path)] for r in walks]
        walk_csv = _write_rows(os.path.join(out_dir, RANDOM_WALK_CSV), RANDOM_WALK_CSV_HEADER, walk_rows)
        try:
            model = fit_pooled_eps(read_rows(walk_csv), baselines)
            write_eps_model(model, os.path.join(out_dir, EPS_MODEL_CSV))
            write_equipotential_csv(model, os.path.join(out_dir, EQUIPOTENTIAL_CSV))
        except (FitError, MetricsError) as e:
            logger.warning(f"EPS not available: {e}")
            model = None

    stats = algorithm_stats(row_dicts, baselines)
    summary_csv = write_summary(stats, model, os.path.join(out_dir, SUMMARY_CSV))
    if model is not None:
        points = {algo: (s.success_rate, s.mean_inverse_length) for algo, s in stats.items()}
        render_equipotential(model, points, path=os.path.join(out_dir, EQUIPOTENTIAL_SVG))

    overlay_paths = []
    if overlays:
        for pair in sorted(set(spec.tasks)):
            overlay_paths.append(_overlay(grid, spec, pair, results,
                                          os.path.join(out_dir, f"overlay_{pair[0]}_{pair[1]}.svg")))

    logger.info(f"Report written to {out_dir}")
    return ReportBundle(out_dir, trials_csv, pairs_csv, summary_csv, baselines_csv, overlay_paths,
                        arrival_csvs, model, stats)
