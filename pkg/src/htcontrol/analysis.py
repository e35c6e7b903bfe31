"""Post-hoc certification over trajectory logs.

Everything here is pure post-processing: spectral-decay fits, contraction
estimation, tube-decay fits, the rank-for-tolerance design rule, and the
recursion/closed-form bound checks.  For physical runs the bound checks
*report* rather than assert -- a violated bound is a finding about the
loop, not a software failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .closed_loop import RankSweepResult, TrajectoryLog
from .errors import InsufficientDataError
from .ht import TruncationReport

SPECTRAL_FLOOR_RATIO = 1e-12
DEFAULT_SLACK = 1e-9


@dataclass(frozen=True)
class DecayFit:
    """Fitted decay law: amplitude * exp(-rate * x) or amplitude * x**(-rate)."""

    model: str
    amplitude: float
    rate: float
    residual: float
    count: int


@dataclass(eq=False)
class CertificateReport:
    """Outcome of one empirical bound check."""

    kind: str
    contraction: float
    metric_constant: float
    applicable: bool
    predicted_radius: float
    observed_tail_max: float
    bound_satisfied: bool | None
    violation_step: int | None = None
    max_truncation_error: float | None = None
    max_transfer_error: float | None = None
    initial_gap: float | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "contraction": self.contraction,
            "metric_constant": self.metric_constant,
            "applicable": self.applicable,
            "predicted_radius": self.predicted_radius,
            "observed_tail_max": self.observed_tail_max,
            "bound_satisfied": self.bound_satisfied,
            "violation_step": self.violation_step,
            "max_truncation_error": self.max_truncation_error,
            "max_transfer_error": self.max_transfer_error,
            "initial_gap": self.initial_gap,
        }


def _collect_spectra(spectra) -> list[np.ndarray]:
    out: list[np.ndarray] = []

    def walk(obj) -> None:
        if isinstance(obj, Mapping):
            for value in obj.values():
                walk(value)
        elif isinstance(obj, np.ndarray) and obj.ndim == 1:
            out.append(obj)
        elif isinstance(obj, Iterable):
            arrays = list(obj)
            if arrays and all(np.isscalar(v) or isinstance(v, float) for v in arrays):
                out.append(np.asarray(arrays, dtype=float))
            else:
                for value in arrays:
                    walk(value)
        else:
            raise ValueError(f"cannot interpret spectra input of type {type(obj)!r}")

    walk(spectra)
    return out


def fit_spectral_decay(spectra, model: str = "exponential") -> DecayFit:
    """Fit a decay law to pooled singular spectra.

    Points are (alpha, sigma_alpha) with alpha 1-based per spectrum,
    pooled over all nodes/samples; values below 1e-12 of the largest
    pooled singular value are excluded as numerical noise.  The
    exponential fit returns the upper-envelope variant: the least-squares
    slope with the intercept shifted so every point lies on or below the
    fitted curve.
    """
    if model not in ("exponential", "algebraic"):
        raise ValueError(f"unknown decay model {model!r}")
    arrays = _collect_spectra(spectra)
    alphas: list[float] = []
    values: list[float] = []
    for arr in arrays:
        for i, sigma in enumerate(np.asarray(arr, dtype=float)):
            alphas.append(float(i + 1))
            values.append(float(sigma))
    if not values:
        raise InsufficientDataError("no singular values provided")
    floor = SPECTRAL_FLOOR_RATIO * max(values)
    pairs = [(a, v) for a, v in zip(alphas, values) if v > floor and v > 0.0]
    if len(pairs) < 3:
        raise InsufficientDataError(
            f"need at least 3 singular values above the floor, got {len(pairs)}"
        )
    alpha = np.array([p[0] for p in pairs])
    logv = np.log(np.array([p[1] for p in pairs]))
    x = alpha if model == "exponential" else np.log(alpha)
    slope, intercept = np.polyfit(x, logv, 1)
    fit_residual = float(np.sqrt(np.mean((logv - (intercept + slope * x)) ** 2)))
    rate = -float(slope)
    if model == "exponential":
        intercept = float(np.max(logv - slope * x))  # envelope shift
    return DecayFit(model, float(np.exp(intercept)), rate, fit_residual, len(pairs))


def _contraction_ratios(log: TrajectoryLog, tail_fraction: float) -> np.ndarray:
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    dist = np.asarray(log.dist_to_target, dtype=float)
    steps = log.steps
    tail_len = max(1, int(round(tail_fraction * steps)))
    eps_bar = 0.0
    if log.residual is not None and np.any(np.isfinite(log.residual)):
        eps_bar = float(np.nanmax(log.residual))
    ratios = []
    for k in range(max(0, steps - tail_len)):
        if dist[k] > max(10.0 * eps_bar, 0.0) and np.isfinite(dist[k + 1]):
            ratios.append(dist[k + 1] / dist[k])
    if not ratios:
        raise InsufficientDataError("no qualifying steps for contraction estimation")
    return np.asarray(ratios)


def estimate_contraction(log: TrajectoryLog, tail_fraction: float = 0.1) -> float:
    """Median one-step distance ratio over the transient phase.

    Steps inside the tail window and steps where the distance has already
    collapsed to the truncation level (dist <= 10 * max residual) are
    excluded, so the tube region does not pollute the estimate.
    """
    return float(np.median(_contraction_ratios(log, tail_fraction)))


def contraction_quartiles(log: TrajectoryLog, tail_fraction: float = 0.1) -> dict:
    ratios = _contraction_ratios(log, tail_fraction)
    return {
        "median": float(np.median(ratios)),
        "q25": float(np.percentile(ratios, 25)),
        "q75": float(np.percentile(ratios, 75)),
        "count": int(ratios.size),
    }


def geometric_bound(contraction: float, drive: float, initial: float, k: int) -> float:
    """Closed form of the k-fold iterated recursion d_{j+1} = rho*d_j + drive."""
    return contraction**k * initial + (1.0 - contraction**k) / (1.0 - contraction) * drive


def _tail_max(dist: np.ndarray, steps: int, tail_steps: int | None) -> float:
    if tail_steps is None:
        tail_steps = max(1, steps // 10)
    tail_steps = min(tail_steps, steps)
    return float(np.nanmax(dist[steps + 1 - tail_steps :]))


def check_practical_stability(
    log: TrajectoryLog,
    contraction: float,
    metric_constant: float = 1.0,
    *,
    slack: float = DEFAULT_SLACK,
    tail_steps: int | None = None,
) -> CertificateReport:
    """Check the perturbed-contraction recursion on a truncated-loop log.

    Verifies dist_{k+1} <= rho*dist_k + M*eps pointwise and the closed
    form dist_k <= rho^k*dist_0 + M*eps/(1-rho), with eps the largest
    logged truncation residual.  With contraction >= 1 the check is
    marked inapplicable instead of failing.
    """
    if log.residual is None:
        raise ValueError("log has no truncation residual channel (need a truncated run)")
    dist = np.asarray(log.dist_to_target, dtype=float)
    finite = log.residual[np.isfinite(log.residual)]
    eps_bar = float(np.max(finite)) if finite.size else 0.0
    applicable = 0.0 < contraction < 1.0
    radius = metric_constant * eps_bar / (1.0 - contraction) if applicable else float("nan")

    violation = None
    if applicable:
        for k in range(log.steps):
            if dist[k + 1] > contraction * dist[k] + metric_constant * eps_bar + slack:
                violation = k
                break
        if violation is None:
            for k in range(log.steps + 1):
                if dist[k] > contraction**k * dist[0] + radius + slack:
                    violation = k
                    break
    return CertificateReport(
        kind="practical_stability",
        contraction=contraction,
        metric_constant=metric_constant,
        applicable=applicable,
        predicted_radius=radius,
        observed_tail_max=_tail_max(dist, log.steps, tail_steps),
        bound_satisfied=(violation is None) if applicable else None,
        violation_step=violation,
        max_truncation_error=eps_bar,
    )


def check_transfer_bound(
    log: TrajectoryLog,
    contraction: float,
    metric_constant: float = 1.0,
    *,
    slack: float = DEFAULT_SLACK,
    tail_steps: int | None = None,
) -> CertificateReport:
    """Check the surrogate-to-plant tracking bound on a coupled-run log.

    Uses the largest logged one-step transfer error and the initial
    plant-surrogate gap as the persistent drive of the recursion.
    """
    if log.gap is None or log.onestep_transfer_err is None:
        raise ValueError("log lacks transfer channels (need a coupled transfer run)")
    dist = np.asarray(log.dist_to_target, dtype=float)
    finite = log.onestep_transfer_err[np.isfinite(log.onestep_transfer_err)]
    delta = float(np.max(finite)) if finite.size else 0.0
    delta0 = float(log.gap[0])
    applicable = 0.0 < contraction < 1.0
    drive = contraction * delta0 + delta
    radius = drive / (1.0 - contraction) if applicable else float("nan")

    violation = None
    if applicable:
        for k in range(log.steps + 1):
            if dist[k] > geometric_bound(contraction, drive, dist[0], k) + slack:
                violation = k
                break
    return CertificateReport(
        kind="transfer",
        contraction=contraction,
        metric_constant=metric_constant,
        applicable=applicable,
        predicted_radius=radius,
        observed_tail_max=_tail_max(dist, log.steps, tail_steps),
        bound_satisfied=(violation is None) if applicable else None,
        violation_step=violation,
        max_transfer_error=delta,
        initial_gap=delta0,
    )


def fit_tube_decay(
    sweep: RankSweepResult | Sequence[tuple[int, float]],
    *,
    plateau_factor: float = 10.0,
) -> DecayFit:
    """Log-linear fit of tube(rank) over the pre-plateau regime.

    Only ranks whose tube exceeds ``plateau_factor`` times the smallest
    observed tube enter the fit; fewer than three such points raise
    InsufficientDataError.
    """
    if isinstance(sweep, RankSweepResult):
        pairs = [(r, sweep.tubes[r]) for r in sweep.ranks]
    else:
        pairs = [(int(r), float(t)) for r, t in sweep]
    pairs = [(r, t) for r, t in pairs if t > 0.0 and np.isfinite(t)]
    if not pairs:
        raise InsufficientDataError("no positive tube values to fit")
    floor = min(t for _, t in pairs)
    usable = [(r, t) for r, t in pairs if t > plateau_factor * floor]
    if len(usable) < 3:
        raise InsufficientDataError(
            f"need at least 3 pre-plateau tube values, got {len(usable)}"
        )
    ranks = np.array([r for r, _ in usable], dtype=float)
    logt = np.log(np.array([t for _, t in usable]))
    slope, intercept = np.polyfit(ranks, logt, 1)
    fit_residual = float(np.sqrt(np.mean((logt - (intercept + slope * ranks)) ** 2)))
    return DecayFit("exponential", float(np.exp(intercept)), -float(slope), fit_residual, len(usable))


def rank_for_tolerance(
    amplitude: float,
    decay_rate: float,
    contraction: float,
    tolerance: float,
    metric_constant: float = 1.0,
) -> int:
    """Smallest rank whose predicted asymptotic radius meets ``tolerance``.

    Inverts radius(r) = metric_constant * amplitude * exp(-decay_rate*r)
    / (1 - contraction); clamped below at 1.
    """
    if decay_rate <= 0:
        raise ValueError(f"decay_rate must be positive, got {decay_rate}")
    if not 0.0 < contraction < 1.0:
        raise ValueError(f"contraction must lie in (0, 1), got {contraction}")
    if tolerance <= 0 or amplitude <= 0 or metric_constant <= 0:
        raise ValueError("tolerance, amplitude and metric_constant must be positive")
    need = math.log(metric_constant * amplitude / ((1.0 - contraction) * tolerance)) / decay_rate
    return max(1, math.ceil(need))


def check_tail_bound(report: TruncationReport, slack: float = DEFAULT_SLACK) -> bool:
    """residual^2 <= sum of nodewise tail masses (+ slack)."""
    if not report.per_node_tail:
        raise ValueError("report carries no per-node tail masses")
    return report.residual**2 <= sum(report.per_node_tail.values()) + slack
