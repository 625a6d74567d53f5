"""
Command line entry point.

Subcommands:
    run      one trial with verbose logs, trajectory CSV and overlay
    batch    a full experiment spec with its report
    metrics  recompute per-pair and summary tables from CSVs
    render   draw trajectory CSVs over a map
    fit-eps  fit the EPS model from random-walk paths
    serve    start the MCP tool server over stdio
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional

from colorama import Fore, Style
from colorama import init as colorama_init

from .core.errors import EXIT_OK, ConfigurationError, exit_code_for
from .core.responses import response_from_error, success_response
from .core.simkernel import RobotSpec, read_trajectory_csv, write_trajectory_csv
from .core.worldmap import Point, Pose
from .evaluation.experiment import (ALGORITHMS, VL_EXPLORE, builtin_office_spec, default_limit,
                                    load_experiment_spec, load_grid, run_single_trial, with_overrides)
from .evaluation.metrics import write_equipotential_csv
from .evaluation.report import (EPS_MODEL_CSV, EQUIPOTENTIAL_CSV, EQUIPOTENTIAL_SVG, fit_pooled_eps, read_baselines,
                                read_rows, recompute_metrics, run_experiment, write_eps_model)
from .maps.fixtures import OFFICE_WAYPOINTS
from .pipeline import VlExplorePolicy
from .visualization.overlay import CandidateAnnotation, OverlayTrack, render_equipotential, render_overlay

logger = logging.getLogger(__name__)

LOG_LEVELS = {
    'debug': logging.DEBUG,
    'info': logging.INFO,
    'warning': logging.WARNING,
    'error': logging.ERROR,
    'critical': logging.CRITICAL
}


def status_line(text: str, color: str = Fore.GREEN) -> None:
    print(f"{color}{text}{Style.RESET_ALL}", file=sys.stderr)


def map_source(value: str) -> str:
    """Accept a file path or the name of a bundled map."""
    if os.path.exists(value) or value.startswith("builtin:"):
        return value
    return f"builtin:{value}"


def parse_point(value: str, labels: Optional[Dict[str, Point]] = None) -> List[float]:
    """``x,y`` or ``x,y,heading``, or a waypoint label."""
    if labels and value in labels:
        return list(labels[value])
    try:
        numbers = [float(part) for part in value.split(",")]
    except ValueError:
        raise ConfigurationError(f"expected 'x,y' or a waypoint label, got {value!r}")
    if len(numbers) not in (2, 3):
        raise ConfigurationError(f"expected 'x,y' or 'x,y,heading', got {value!r}")
    return numbers


def ablated_algorithm(algo: str, no_look_around: bool, no_familiarity: bool) -> str:
    if algo != VL_EXPLORE or not (no_look_around or no_familiarity):
        return algo
    if no_look_around and no_familiarity:
        raise ConfigurationError("--no-look-around and --no-familiarity are separate ablations; pick one")
    return "vl-explore-no-look-around" if no_look_around else "vl-explore-no-familiarity"


def cmd_run(args) -> str:
    grid = load_grid(map_source(args.map))
    labels = OFFICE_WAYPOINTS if args.map in ("office", "builtin:office") else None
    source = parse_point(args.source, labels)
    target = tuple(parse_point(args.target, labels)[:2])
    algo = ablated_algorithm(args.algo, args.no_look_around, args.no_familiarity)
    pose = Pose(source[0], source[1], source[2] if len(source) == 3 else 0.0)
    limit = args.limit if args.limit is not None else default_limit(algo)

    outcome, policy = run_single_trial(algo, grid, RobotSpec(), pose, target, limit,
                                       seed=args.seed, stride=args.stride)
    os.makedirs(args.out_dir, exist_ok=True)
    trajectory_csv = os.path.join(args.out_dir, "trajectory.csv")
    write_trajectory_csv(outcome.trajectory, trajectory_csv)
    annotations = []
    if isinstance(policy, VlExplorePolicy):
        policy.write_decision_log(os.path.join(args.out_dir, "decisions.csv"))
        annotations = [CandidateAnnotation(p.position, tuple(c)) for _, p, c in policy.scans if c]
    waypoints = {"S": (pose.x, pose.y), "T": target}
    render_overlay(grid, [OverlayTrack(algo, outcome.trajectory.xy)], waypoints, annotations,
                   path=os.path.join(args.out_dir, "overlay.svg"), title=algo)

    color = Fore.GREEN if outcome.success else Fore.RED
    status_line(f"{algo}: {outcome.status.value}, {outcome.path_length:.2f} m in {outcome.wall_steps} steps", color)
    return success_response(f"Trial finished: {outcome.status.value}", {
        "algo": algo,
        "status": outcome.status.value,
        "path_length_m": outcome.path_length,
        "steps": outcome.wall_steps,
        "trajectory_csv": trajectory_csv,
    })


def cmd_batch(args) -> str:
    spec = load_experiment_spec(args.spec) if args.spec else builtin_office_spec()
    spec = with_overrides(spec, args.algo, args.seed, args.stride)
    if args.map:
        spec = replace(spec, map_source=map_source(args.map))
    if args.no_look_around or args.no_familiarity:
        renamed = {}
        for algo, count in spec.algorithms.items():
            renamed[ablated_algorithm(algo, args.no_look_around, args.no_familiarity)] = count
        spec = replace(spec, algorithms=renamed)
    bundle = run_experiment(spec, args.out_dir, workers=args.workers)

    for algo, stats in sorted(bundle.summary.items()):
        status_line(f"{algo:28s} R={stats.success_rate:.3f} Lbar={stats.mean_inverse_length:.3f} "
                    f"SPL={stats.spl:.3f}", Fore.GREEN if stats.n_success else Fore.YELLOW)
    if bundle.eps_model is None:
        status_line("EPS model not fitted (no usable random-walk curve)", Fore.YELLOW)
    return success_response("Batch finished", {
        "out_dir": bundle.out_dir,
        "trials_csv": bundle.trials_csv,
        "pairs_csv": bundle.pairs_csv,
        "summary_csv": bundle.summary_csv,
        "overlays": bundle.overlays,
        "eps_model": bundle.eps_model.as_dict() if bundle.eps_model else None,
    })


def cmd_metrics(args) -> str:
    bundle = recompute_metrics(args.trials, args.baselines, args.out_dir, args.random_walk)
    status_line(f"Wrote {bundle.pairs_csv} and {bundle.summary_csv}")
    return success_response("Metrics recomputed", {"pairs_csv": bundle.pairs_csv, "summary_csv": bundle.summary_csv})


def cmd_render(args) -> str:
    grid = load_grid(map_source(args.map))
    tracks = []
    for path in args.trajectory:
        label = os.path.splitext(os.path.basename(path))[0]
        tracks.append(OverlayTrack(label, read_trajectory_csv(path).xy))
    labels = OFFICE_WAYPOINTS if args.map in ("office", "builtin:office") else None
    render_overlay(grid, tracks, labels, path=args.out, title=args.title)
    status_line(f"Wrote {args.out}")
    return success_response("Overlay rendered", {"path": args.out, "tracks": len(tracks)})


def cmd_fit_eps(args) -> str:
    baselines = read_baselines(args.baselines)
    model = fit_pooled_eps(read_rows(args.random_walk), baselines, args.mode)
    os.makedirs(args.out_dir, exist_ok=True)
    write_eps_model(model, os.path.join(args.out_dir, EPS_MODEL_CSV))
    write_equipotential_csv(model, os.path.join(args.out_dir, EQUIPOTENTIAL_CSV))
    render_equipotential(model, path=os.path.join(args.out_dir, EQUIPOTENTIAL_SVG))
    status_line("EPS model: " + ", ".join(f"{k}={v:.4f}" for k, v in model.as_dict().items()))
    return success_response("EPS model fitted", {"model": model.as_dict(), "out_dir": args.out_dir})


def cmd_serve(args) -> Optional[str]:
    from .server import serve
    serve()
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlexplore_sim", description='VL-Explore navigation simulator')
    parser.add_argument('--log-level', type=str, default='info', choices=list(LOG_LEVELS),
                        help='Logging level')
    sub = parser.add_subparsers(dest="command", required=True)

    def ablation_flags(p):
        p.add_argument('--no-look-around', action='store_true', help='Disable look-around (trap fails the run)')
        p.add_argument('--no-familiarity', action='store_true', help='Freeze familiarity at 0.5')

    run = sub.add_parser("run", help="Run one trial")
    run.add_argument('--map', default='office', help='Map .pgm path or builtin name')
    run.add_argument('--algo', default=VL_EXPLORE, choices=ALGORITHMS)
    run.add_argument('--source', default='C', help="'x,y[,heading]' or an office waypoint label")
    run.add_argument('--target', default='NW', help="'x,y' or an office waypoint label")
    run.add_argument('--limit', type=float, default=None, help='Distance limit in meters')
    run.add_argument('--seed', type=int, default=0)
    run.add_argument('--stride', type=int, default=5)
    run.add_argument('--out-dir', default='run_out')
    ablation_flags(run)
    run.set_defaults(handler=cmd_run)

    batch = sub.add_parser("batch", help="Run a full experiment spec")
    batch.add_argument('--spec', help='Experiment spec file; the builtin office grid when omitted')
    batch.add_argument('--map', help='Override the spec map')
    batch.add_argument('--algo', help='Comma separated algorithm subset')
    batch.add_argument('--seed', type=int, default=None)
    batch.add_argument('--workers', type=int, default=None, help='Worker processes (default: physical cores)')
    batch.add_argument('--stride', type=int, default=None)
    batch.add_argument('--out-dir', default='batch_out')
    ablation_flags(batch)
    batch.set_defaults(handler=cmd_batch)

    metrics = sub.add_parser("metrics", help="Recompute tables from CSVs")
    metrics.add_argument('--trials', required=True, help='Per-trial CSV')
    metrics.add_argument('--baselines', required=True, help='Pair baseline CSV')
    metrics.add_argument('--random-walk', default=None, help='Uncapped random-walk paths CSV for EPS')
    metrics.add_argument('--out-dir', default='metrics_out')
    metrics.set_defaults(handler=cmd_metrics)

    render = sub.add_parser("render", help="Draw trajectories over a map")
    render.add_argument('--map', default='office')
    render.add_argument('--trajectory', nargs='+', required=True, help='Trajectory CSVs')
    render.add_argument('--out', default='overlay.svg')
    render.add_argument('--title', default=None)
    render.set_defaults(handler=cmd_render)

    fit = sub.add_parser("fit-eps", help="Fit EPS from random-walk paths")
    fit.add_argument('--random-walk', required=True, help='Uncapped random-walk paths CSV')
    fit.add_argument('--baselines', required=True, help='Pair baseline CSV')
    fit.add_argument('--mode', default='canonical', choices=['canonical', 'full'])
    fit.add_argument('--out-dir', default='eps_out')
    fit.set_defaults(handler=cmd_fit_eps)

    serve = sub.add_parser("serve", help="Start the MCP tool server (stdio)")
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the simulator CLI"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=LOG_LEVELS[args.log_level],
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    colorama_init()
    try:
        response = args.handler(args)
    except Exception as e:
        logger.exception(f"{args.command} failed: {str(e)}")
        status_line(f"{args.command} failed: {e}", Fore.RED)
        print(response_from_error(e))
        return exit_code_for(e)
    if response is not None:
        print(json.dumps(json.loads(response), indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
