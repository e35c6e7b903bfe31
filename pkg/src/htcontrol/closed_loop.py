"""Closed-loop engines with full trajectory logging.

Three loops share one stepping core:
  * nominal   -- feedback evaluated on the full plant state, no truncation;
  * surrogate -- feedback on the rank-truncated state, truncation after
                 every step (the state the controller believes in);
  * transfer  -- the surrogate drives the control, and the full plant is
                 propagated with the same control values (coupled run).

Log row semantics: row k holds quantities of the state *at* step k
(distances, norms, gap) together with the control value u_k computed at
step k and the truncation / one-step transfer errors of the transition
k -> k+1.  Row K therefore has u_K (never applied) and empty transition
channels.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ht import RankBudget, build_balanced_tree, hsvd_truncate
from .model import LatticeSpec, State, feedback, metric_by_name
from .propagate import SplitPlan, strang_step

UNIT_NORM_TOL = 1e-8


@dataclass(eq=False)
class TrajectoryLog:
    """Per-step record of one closed-loop run (arrays of length steps+1)."""

    kind: str
    steps: int
    rank: int | None
    dist_to_target: np.ndarray
    u: np.ndarray
    surrogate_norm: np.ndarray | None = None
    residual: np.ndarray | None = None
    gap: np.ndarray | None = None
    onestep_transfer_err: np.ndarray | None = None
    plant_norm: np.ndarray | None = None
    spectra: dict[int, dict[int, np.ndarray]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    intermediates: dict | None = None


@dataclass(eq=False)
class RankSweepResult:
    """Tube statistics per rank plus the shared nominal run."""

    ranks: tuple[int, ...]
    tubes: dict[int, float]
    final_dist: dict[int, float]
    max_residual: dict[int, float]
    logs: dict[int, TrajectoryLog] | None = None
    nominal: TrajectoryLog | None = None


def _check_unit(psi0: State) -> None:
    if abs(psi0.norm() - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"initial state must have unit norm, got {psi0.norm():.12g}")


def _nan_channel(steps: int) -> np.ndarray:
    return np.full(steps + 1, np.nan)


def run_nominal(spec: LatticeSpec, psi0: State, *, metric: str = "phase") -> TrajectoryLog:
    """Closed loop with feedback evaluated on the full plant state."""
    _check_unit(psi0)
    dist_fn = metric_by_name(metric)
    drift, control, target = spec.drift(), spec.control(), spec.target_vec()
    plan = SplitPlan(drift, control, spec.dt)
    steps = spec.steps

    dist = _nan_channel(steps)
    u = _nan_channel(steps)
    norms = _nan_channel(steps)
    state = psi0.copy()
    for k in range(steps + 1):
        dist[k] = dist_fn(state, target)
        u[k] = feedback(state, target, control, spec.gain, spec.u_max)
        norms[k] = state.norm()
        if k == steps:
            break
        state = strang_step(state, drift, control, float(u[k]), spec.dt, plan=plan)
    return TrajectoryLog(
        kind="nominal",
        steps=steps,
        rank=None,
        dist_to_target=dist,
        u=u,
        surrogate_norm=norms,
        plant_norm=norms,
        meta={"kind": "nominal", "steps": steps, "metric": metric},
    )


def run_surrogate(
    spec: LatticeSpec,
    psi0: State,
    rank: int,
    *,
    snapshot_stride: int = 10,
    renormalize: bool = False,
    metric: str = "phase",
    record_intermediates: bool = False,
) -> TrajectoryLog:
    """Rank-truncated closed loop: step, then project to the rank budget.

    The surrogate starts from the truncation of ``psi0`` so that a
    standalone surrogate run coincides exactly with the surrogate leg of
    a coupled transfer run.
    """
    return _run_truncated(
        spec,
        psi0,
        rank,
        couple_plant=False,
        snapshot_stride=snapshot_stride,
        renormalize=renormalize,
        metric=metric,
        record_intermediates=record_intermediates,
    )


def run_transfer(
    spec: LatticeSpec,
    psi0: State,
    rank: int,
    *,
    snapshot_stride: int = 10,
    renormalize: bool = False,
    metric: str = "phase",
    record_intermediates: bool = False,
) -> TrajectoryLog:
    """Coupled run: the surrogate's control drives the full plant.

    Both trajectories start from ``psi0`` (the surrogate from its
    truncation); the plant is never truncated.
    """
    return _run_truncated(
        spec,
        psi0,
        rank,
        couple_plant=True,
        snapshot_stride=snapshot_stride,
        renormalize=renormalize,
        metric=metric,
        record_intermediates=record_intermediates,
    )


def _run_truncated(
    spec: LatticeSpec,
    psi0: State,
    rank: int,
    *,
    couple_plant: bool,
    snapshot_stride: int,
    renormalize: bool,
    metric: str,
    record_intermediates: bool,
) -> TrajectoryLog:
    _check_unit(psi0)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if snapshot_stride < 1:
        raise ValueError(f"snapshot_stride must be >= 1, got {snapshot_stride}")
    dist_fn = metric_by_name(metric)
    drift, control, target = spec.drift(), spec.control(), spec.target_vec()
    plan = SplitPlan(drift, control, spec.dt)
    tree = build_balanced_tree(spec.n_sites)
    budget = RankBudget.uniform_rank(rank)
    steps = spec.steps

    dist = _nan_channel(steps)
    u = _nan_channel(steps)
    surr_norm = _nan_channel(steps)
    residual = _nan_channel(steps)
    gap = _nan_channel(steps) if couple_plant else None
    onestep = _nan_channel(steps) if couple_plant else None
    plant_norm = _nan_channel(steps) if couple_plant else None
    spectra: dict[int, dict[int, np.ndarray]] = {}
    intermediates = (
        {"pre_truncation": [], "post_truncation": [], "truncation_error": []}
        if record_intermediates
        else None
    )

    surrogate, _ = hsvd_truncate(
        psi0, tree, budget, include_spectra=False, renormalize=renormalize
    )
    plant = psi0.copy() if couple_plant else None

    for k in range(steps + 1):
        u_k = feedback(surrogate, target, control, spec.gain, spec.u_max)
        u[k] = u_k
        surr_norm[k] = surrogate.norm()
        if couple_plant:
            dist[k] = dist_fn(plant, target)
            gap[k] = dist_fn(surrogate, plant)
            plant_norm[k] = plant.norm()
        else:
            dist[k] = dist_fn(surrogate, target)
        if k == steps:
            break

        pre = strang_step(surrogate, drift, control, u_k, spec.dt, plan=plan)
        want_spectra = k % snapshot_stride == 0
        surrogate_next, report = hsvd_truncate(
            pre, tree, budget, include_spectra=want_spectra, renormalize=renormalize
        )
        residual[k] = report.residual
        if want_spectra:
            spectra[k] = report.per_node_spectra
        if record_intermediates:
            intermediates["pre_truncation"].append(pre.copy())
            intermediates["post_truncation"].append(surrogate_next.copy())
            intermediates["truncation_error"].append(surrogate_next.amps - pre.amps)
        if couple_plant:
            plant = strang_step(plant, drift, control, u_k, spec.dt, plan=plan)
            onestep[k] = float(np.linalg.norm(plant.amps - surrogate_next.amps))
        surrogate = surrogate_next

    kind = "transfer" if couple_plant else "surrogate"
    return TrajectoryLog(
        kind=kind,
        steps=steps,
        rank=rank,
        dist_to_target=dist,
        u=u,
        surrogate_norm=surr_norm,
        residual=residual,
        gap=gap,
        onestep_transfer_err=onestep,
        plant_norm=plant_norm,
        spectra=spectra,
        meta={"kind": kind, "steps": steps, "rank": rank, "metric": metric},
        intermediates=intermediates,
    )


def compute_tube(log: TrajectoryLog, window: int) -> float:
    """Tail average of the plant-surrogate gap over the last ``window`` steps."""
    if log.gap is None:
        raise ValueError("log has no plant-surrogate gap channel (need a transfer run)")
    if not 1 <= window <= log.steps:
        raise ValueError(f"window must satisfy 1 <= window <= {log.steps}, got {window}")
    return float(np.mean(log.gap[log.steps - window + 1 :]))


def _transfer_job(args) -> tuple[int, TrajectoryLog]:
    spec, psi0, rank, snapshot_stride, renormalize, metric = args
    log = run_transfer(
        spec,
        psi0,
        rank,
        snapshot_stride=snapshot_stride,
        renormalize=renormalize,
        metric=metric,
    )
    return rank, log


def run_rank_sweep(
    spec: LatticeSpec,
    psi0: State,
    *,
    snapshot_stride: int = 10,
    renormalize: bool = False,
    metric: str = "phase",
    jobs: int = 1,
    keep_logs: bool = True,
) -> RankSweepResult:
    """One transfer run per rank plus a shared nominal run.

    The rank list is sorted and deduplicated; runs for distinct ranks are
    independent and execute in parallel when ``jobs > 1``.
    """
    if not spec.ranks:
        raise ValueError("config lists no ranks to sweep")
    ranks = tuple(sorted(set(spec.ranks)))
    nominal = run_nominal(spec, psi0, metric=metric)

    args = [(spec, psi0, rank, snapshot_stride, renormalize, metric) for rank in ranks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            produced = dict(pool.map(_transfer_job, args))
    else:
        produced = dict(_transfer_job(a) for a in args)

    tubes, final_dist, max_residual = {}, {}, {}
    for rank in ranks:
        log = produced[rank]
        tubes[rank] = compute_tube(log, spec.tail_window)
        final_dist[rank] = float(log.dist_to_target[-1])
        max_residual[rank] = float(np.nanmax(log.residual))
    return RankSweepResult(
        ranks=ranks,
        tubes=tubes,
        final_dist=final_dist,
        max_residual=max_residual,
        logs=produced if keep_logs else None,
        nominal=nominal,
    )
