"""
Evaluation metrics: SPL, success rate and mean inverse path length, and the
Entropy Preserving Score (EPS) with its fit to a random-walk R-Lbar curve.

EPS solves f1(EPS) = f2(Lbar) * f3(R) with f_n(x) = k_n * x**p_n + t_n.
The random-walk curve is the EPS = 0 equipotential and (R, Lbar) = (1, 1)
maps to EPS = 1.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ..core.errors import FitError, MetricsError

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 3
FULL_FIT_REGULARIZATION = 1e-2
EXPONENT_FLOOR = 1e-3
EQUIPOTENTIAL_CSV_HEADER = ["R", "Lbar", "EPS"]
SUMMARY_CSV_HEADER = ["algo", "R", "Lbar", "SPL", "EPS"]

PairId = Tuple[str, str]


@dataclass(frozen=True)
class RunRecord:
    """One trial reduced to what the metrics need.

    ``path`` is only meaningful for successes; failed runs carry ``nan``.
    """

    pair_id: PairId
    success: bool
    path: float
    baseline: float

    def __post_init__(self):
        if not self.baseline > 0:
            raise MetricsError(f"baseline must be positive for pair {self.pair_id}, got {self.baseline}")
        if self.success and not (math.isfinite(self.path) and self.path >= 0):
            raise MetricsError(f"successful run on pair {self.pair_id} has path {self.path}")

    @property
    def inverse_length(self) -> float:
        """l / max(p, l) for a success, 0 otherwise.

        The ratio l / p is clamped at 1. A success can end up to the goal
        radius short of the target, so p < l happens; the clamp keeps Lbar in
        (0, 1], the domain of the R-Lbar curve and of EPS, and makes SPL equal
        R * Lbar.
        """
        if not self.success:
            return 0.0
        return self.baseline / max(self.path, self.baseline)


@dataclass(frozen=True)
class AggregateStats:
    n: int
    n_success: int
    success_rate: float
    mean_inverse_length: float
    spl: float
    lbar_defined: bool = True


def _check_records(records: Sequence[RunRecord]) -> None:
    if not records:
        raise MetricsError("no run records")


def spl(records: Sequence[RunRecord]) -> float:
    """Success weighted by path length, averaged over all runs."""
    _check_records(records)
    return float(sum(r.inverse_length for r in records) / len(records))


def aggregate(records: Sequence[RunRecord]) -> AggregateStats:
    """N, successes, R, Lbar (over successes only) and SPL.

    With no successes Lbar is reported as 0 and ``lbar_defined`` is False.
    """
    _check_records(records)
    n = len(records)
    successes = [r for r in records if r.success]
    rate = len(successes) / n
    if successes:
        lbar = float(sum(r.inverse_length for r in successes) / len(successes))
    else:
        lbar = 0.0
    return AggregateStats(n, len(successes), rate, lbar, spl(records), bool(successes))


@dataclass(frozen=True)
class RLCurve:
    points: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        rates = [r for r, _ in self.points]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise MetricsError("R must be strictly increasing along the curve")
        for rate, lbar in self.points:
            if not (0 < rate <= 1 and 0 < lbar <= 1):
                raise MetricsError(f"curve point ({rate}, {lbar}) lies outside (0, 1] x (0, 1]")

    def __len__(self):
        return len(self.points)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for r, _ in self.points])

    @property
    def lbars(self) -> np.ndarray:
        return np.array([lbar for _, lbar in self.points])


def rl_curve(random_walk_paths: Iterable[float], baseline: float, cutoffs: Sequence[float]) -> RLCurve:
    """Sweep the failure cutoff over completed random-walk trials.

    Each cutoff D counts trials with path <= D as successes. Cutoffs with no
    success, and cutoffs that add no new success, produce no point.
    Non-finite paths are ignored.
    """
    if not baseline > 0:
        raise MetricsError(f"baseline must be positive, got {baseline}")
    paths = np.array([p for p in random_walk_paths if math.isfinite(p)], dtype=float)
    if len(paths) == 0:
        raise MetricsError("no completed random-walk trials")
    if any(b < a for a, b in zip(cutoffs, cutoffs[1:])):
        raise MetricsError("cutoffs must be sorted ascending")

    # same clamp as RunRecord.inverse_length
    inverse = baseline / np.maximum(paths, baseline)
    points: List[Tuple[float, float]] = []
    for cutoff in cutoffs:
        mask = paths <= cutoff
        count = int(mask.sum())
        if count == 0:
            continue
        rate = count / len(paths)
        if points and rate <= points[-1][0]:
            continue
        points.append((rate, float(inverse[mask].mean())))
    return RLCurve(tuple(points))


def default_cutoffs(paths: Iterable[float]) -> List[float]:
    """Every distinct finite path length, ascending: the finest possible sweep."""
    return sorted({p for p in paths if math.isfinite(p)})


@dataclass(frozen=True)
class EpsModel:
    """Rows of ``h`` are (k_n, t_n, p_n) for f1, f2, f3."""

    h: Tuple[Tuple[float, float, float], ...]

    def f(self, n: int, x: float) -> float:
        k, t, p = self.h[n - 1]
        return k * x ** p + t

    @property
    def boundary_residual(self) -> float:
        return self.f(1, 1.0) - self.f(2, 1.0) * self.f(3, 1.0)

    def as_dict(self) -> Dict[str, float]:
        return {f"{name}{n}": value for n, row in enumerate(self.h, start=1) for name, value in zip("ktp", row)}


def eps_score(model: EpsModel, rate: float, lbar: float) -> float:
    """Invert f1 at f2(Lbar) * f3(R), clamped into [0, 1]."""
    k1, t1, p1 = model.h[0]
    x = (model.f(2, lbar) * model.f(3, rate) - t1) / k1
    if x <= 0.0:
        return 0.0
    return min(1.0, x ** (1.0 / p1))


def _canonical_fit(curve: RLCurve) -> Tuple[float, float, float]:
    # p2 * ln L + p3 * ln R = ln t1 is scale-free; p2 + p3 = 2 pins the scale
    a = np.log(curve.lbars)
    b = np.log(curve.rates)
    design = np.column_stack([a - b, -np.ones_like(a)])
    solution, _, rank, _ = np.linalg.lstsq(design, -2.0 * b, rcond=None)
    if rank < 2:
        raise FitError("degenerate R-Lbar curve: points do not constrain the fit")
    p2, log_t1 = float(solution[0]), float(solution[1])
    return p2, 2.0 - p2, math.exp(log_t1)


def _validate_model(model: EpsModel) -> EpsModel:
    (k1, t1, p1), (_, _, p2), (_, _, p3) = model.h
    if not 0.0 < t1 < 1.0:
        raise FitError(f"fitted t1 = {t1:.6g} lies outside (0, 1)")
    if min(p1, p2, p3) <= 0.0:
        raise FitError(f"fitted exponents must be positive, got p1={p1:.6g}, p2={p2:.6g}, p3={p3:.6g}")
    if not k1 > 0.0:
        raise FitError(f"fitted k1 = {k1:.6g} is not positive; f1 would not be increasing")
    return model


def _full_fit(curve: RLCurve, start: np.ndarray) -> EpsModel:
    rates, lbars = curve.rates, curve.lbars

    def residuals(theta: np.ndarray) -> np.ndarray:
        _, t1, _, k2, t2, p2, k3, t3, p3 = theta
        curve_part = t1 - (k2 * lbars ** p2 + t2) * (k3 * rates ** p3 + t3)
        return np.concatenate([curve_part, FULL_FIT_REGULARIZATION * (theta - start)])

    lower = np.array([-np.inf, 1e-9, EXPONENT_FLOOR, -np.inf, -np.inf, EXPONENT_FLOOR,
                      -np.inf, -np.inf, EXPONENT_FLOOR])
    upper = np.array([np.inf, 1.0 - 1e-9, np.inf, np.inf, np.inf, np.inf, np.inf, np.inf, np.inf])
    result = least_squares(residuals, start, bounds=(lower, upper))
    if not result.success:
        raise FitError(f"full EPS fit did not converge: {result.message}")
    _, t1, p1, k2, t2, p2, k3, t3, p3 = (float(v) for v in result.x)
    partial = EpsModel(((1.0, t1, p1), (k2, t2, p2), (k3, t3, p3)))
    # Boundary condition as a hard constraint: f1(1) = f2(1) * f3(1)
    k1 = partial.f(2, 1.0) * partial.f(3, 1.0) - t1
    return EpsModel(((k1, t1, p1), (k2, t2, p2), (k3, t3, p3)))


def fit_eps(curve: RLCurve, mode: str = "canonical") -> EpsModel:
    """Fit the EPS hyper-parameters to a random-walk R-Lbar curve.

    Args:
        curve: At least three (R, Lbar) points
        mode: ``canonical`` pins k2 = k3 = 1, t2 = t3 = 0 and p1 = 1;
            ``full`` refines all nine parameters from there with a small
            pull toward the canonical solution

    Raises:
        FitError: Too few points, a degenerate curve, or a fit outside the
            admissible parameter ranges
    """
    if len(curve) < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} curve points, got {len(curve)}")
    p2, p3, t1 = _canonical_fit(curve)
    canonical = EpsModel(((1.0 - t1, t1, 1.0), (1.0, 0.0, p2), (1.0, 0.0, p3)))
    _validate_model(canonical)
    if mode == "canonical":
        model = canonical
    elif mode == "full":
        start = np.array([1.0 - t1, t1, 1.0, 1.0, 0.0, p2, 1.0, 0.0, p3])
        model = _validate_model(_full_fit(curve, start))
    else:
        raise FitError(f"unknown fit mode {mode!r}")
    logger.info(f"EPS fit ({mode}): " + ", ".join(f"{k}={v:.4f}" for k, v in model.as_dict().items()))
    return model


def equipotential_grid(model: EpsModel, samples: int = 51) -> List[Tuple[float, float, float]]:
    """(R, Lbar, EPS) over a regular grid of (0, 1] x (0, 1]."""
    axis = np.linspace(1.0 / samples, 1.0, samples)
    return [(float(r), float(lbar), eps_score(model, float(r), float(lbar))) for r in axis for lbar in axis]


def write_equipotential_csv(model: EpsModel, path: str, samples: int = 51) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(EQUIPOTENTIAL_CSV_HEADER)
        for rate, lbar, eps in equipotential_grid(model, samples):
            writer.writerow([f"{rate:.6f}", f"{lbar:.6f}", f"{eps:.6f}"])


def records_from_trials(rows: Iterable[Mapping[str, str]], baselines: Mapping[PairId, float],
                        algo: Optional[str] = None) -> List[RunRecord]:
    """Per-trial CSV rows to run records, looking up each pair's baseline.

    Raises:
        MetricsError: When a pair has no baseline
    """
    records = []
    for row in rows:
        if algo is not None and row["algo"] != algo:
            continue
        pair = (row["source"], row["target"])
        if pair not in baselines:
            raise MetricsError(f"no baseline distance for pair {pair[0]}->{pair[1]}")
        success = row["status"] == "Success"
        path = float(row["path_length_m"]) if success else math.nan
        records.append(RunRecord(pair, success, path, float(baselines[pair])))
    return records


def summary_row(algo: str, stats: AggregateStats, model: Optional[EpsModel]) -> List[str]:
    eps = eps_score(model, stats.success_rate, stats.mean_inverse_length) if model is not None else math.nan
    return [algo, f"{stats.success_rate:.6f}", f"{stats.mean_inverse_length:.6f}", f"{stats.spl:.6f}",
            f"{eps:.6f}"]
