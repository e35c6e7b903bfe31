"""Command-line entry point: run, sweep, certify, selftest.

Exit codes: 0 success, 1 numerical/contract failure, 2 usage/config/IO
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import (
    check_practical_stability,
    check_transfer_bound,
    contraction_quartiles,
    estimate_contraction,
    fit_spectral_decay,
    fit_tube_decay,
    rank_for_tolerance,
)
from .closed_loop import RankSweepResult, run_nominal, run_rank_sweep, run_surrogate, run_transfer
from .config import RunConfig, build_initial_state, canonical_dict, fingerprint, parse_config
from .errors import CapabilityError, ConfigError, InsufficientDataError
from .ht import RankBudget, build_balanced_tree, hsvd_truncate, node_spectra
from .model import ModeShape, named_state, phase_distance, target_state
from .propagate import exact_step, strang_step
from .runio import (
    load_run_dir,
    read_sweep_csv,
    write_json,
    write_spectra_csvs,
    write_sweep_csv,
    write_trajectory_csv,
)
from .tensor import State


def _meta_payload(config: RunConfig, mode: str, rank: int | None, wall_time: float, extra=None):
    payload = {
        "fingerprint": fingerprint(config),
        "config": canonical_dict(config),
        "mode": mode,
        "rank": rank,
        "wall_time_s": wall_time,
        "versions": {"htcontrol": __version__, "numpy": np.__version__},
    }
    if extra:
        payload.update(extra)
    return payload


def cmd_run(config: RunConfig, mode: str, rank: int | None, out_dir: str):
    """Run one trajectory and write trajectory.csv / spectra / meta.json."""
    if mode not in ("nominal", "surrogate", "transfer"):
        raise ConfigError(f"unknown mode {mode!r}")
    if mode in ("surrogate", "transfer") and rank is None:
        raise ConfigError(f"mode {mode!r} requires --rank")
    psi0 = build_initial_state(config)
    started = time.perf_counter()
    if mode == "nominal":
        log = run_nominal(config, psi0, metric=config.metric)
    else:
        engine = run_surrogate if mode == "surrogate" else run_transfer
        log = engine(
            config,
            psi0,
            rank,
            snapshot_stride=config.spectra_snapshot_stride,
            renormalize=config.renormalize_after_truncation,
            metric=config.metric,
        )
    wall = time.perf_counter() - started

    os.makedirs(out_dir, exist_ok=True)
    write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), log)
    write_spectra_csvs(out_dir, log)
    extra = {}
    if log.plant_norm is not None:
        extra["max_plant_norm_error"] = float(np.nanmax(np.abs(log.plant_norm - 1.0)))
    write_json(
        os.path.join(out_dir, "meta.json"),
        _meta_payload(config, mode, rank, wall, extra),
    )
    return log


def cmd_sweep(config: RunConfig, out_dir: str, jobs: int = 1) -> RankSweepResult:
    """Transfer run per rank plus the shared nominal run; writes sweep.csv."""
    psi0 = build_initial_state(config)
    started = time.perf_counter()
    result = run_rank_sweep(
        config,
        psi0,
        snapshot_stride=config.spectra_snapshot_stride,
        renormalize=config.renormalize_after_truncation,
        metric=config.metric,
        jobs=jobs,
    )
    wall = time.perf_counter() - started

    os.makedirs(out_dir, exist_ok=True)
    nominal_dir = os.path.join(out_dir, "nominal")
    os.makedirs(nominal_dir, exist_ok=True)
    write_trajectory_csv(os.path.join(nominal_dir, "trajectory.csv"), result.nominal)
    write_json(os.path.join(nominal_dir, "meta.json"), _meta_payload(config, "nominal", None, wall))
    for rank in result.ranks:
        rank_dir = os.path.join(out_dir, f"rank_{rank:03d}")
        os.makedirs(rank_dir, exist_ok=True)
        log = result.logs[rank]
        write_trajectory_csv(os.path.join(rank_dir, "trajectory.csv"), log)
        write_spectra_csvs(rank_dir, log)
        write_json(os.path.join(rank_dir, "meta.json"), _meta_payload(config, "transfer", rank, wall))
    rows = [
        (rank, result.tubes[rank], result.final_dist[rank], result.max_residual[rank])
        for rank in result.ranks
    ]
    write_sweep_csv(os.path.join(out_dir, "sweep.csv"), rows)
    write_json(os.path.join(out_dir, "meta.json"), _meta_payload(config, "sweep", None, wall))
    return result


def _scan_certify_inputs(paths: list[str]):
    runs = []
    sweeps = []
    for path in paths:
        if not os.path.exists(path):
            raise OSError(f"no such file or directory: {path}")
        if os.path.isdir(path):
            if os.path.exists(os.path.join(path, "sweep.csv")):
                sweeps.append(path)
                for entry in sorted(os.listdir(path)):
                    sub = os.path.join(path, entry)
                    if os.path.isdir(sub) and os.path.exists(os.path.join(sub, "trajectory.csv")):
                        runs.append(sub)
            elif os.path.exists(os.path.join(path, "trajectory.csv")):
                runs.append(path)
            else:
                raise OSError(f"{path}: neither a run directory nor a sweep directory")
        else:
            raise OSError(f"{path}: expected a run or sweep directory")
    return runs, sweeps


def cmd_certify(paths: list[str], eta: float | None, out_dir: str) -> dict:
    """Fit decay laws, estimate contraction, and check the tracking bounds."""
    runs, sweeps = _scan_certify_inputs(paths)
    if not runs and not sweeps:
        raise ConfigError("certify needs at least one run or sweep directory")

    logs = []
    fingerprints = {}
    for run_dir in runs:
        log, meta = load_run_dir(run_dir)
        fingerprints[run_dir] = meta.get("fingerprint")
        logs.append((run_dir, log, meta))
    for sweep_dir in sweeps:
        meta = None
        meta_path = os.path.join(sweep_dir, "meta.json")
        if os.path.exists(meta_path):
            with open(meta_path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            fingerprints[sweep_dir] = meta.get("fingerprint")
    distinct = {fp for fp in fingerprints.values() if fp is not None}
    if len(distinct) > 1:
        raise ConfigError(
            "config fingerprint mismatch across inputs: "
            + ", ".join(f"{path}={fp}" for path, fp in sorted(fingerprints.items()))
        )

    certificate: dict = {
        "fingerprint": next(iter(distinct)) if distinct else None,
        "inputs": sorted(fingerprints),
    }

    # Contraction estimate: prefer the nominal log's distance curve.
    by_kind = {}
    for _, log, meta in logs:
        by_kind.setdefault(meta.get("mode", log.kind), []).append(log)
    rho = None
    for kind in ("nominal", "transfer", "surrogate"):
        if kind in by_kind:
            source = by_kind[kind][0]
            steps = source.steps
            config = logs[0][2].get("config", {})
            tail_fraction = config.get("tail_window", max(1, steps // 10)) / steps
            try:
                rho = estimate_contraction(source, tail_fraction=tail_fraction)
                certificate["contraction"] = contraction_quartiles(
                    source, tail_fraction=tail_fraction
                )
                certificate["contraction"]["source"] = kind
            except InsufficientDataError as exc:
                certificate["contraction"] = {"error": str(exc), "source": kind}
            break

    if rho is not None:
        reports = []
        for run_dir, log, meta in logs:
            kind = meta.get("mode", log.kind)
            if log.residual is not None:
                report = check_practical_stability(log, rho)
                entry = report.to_dict()
                entry["source"] = run_dir
                reports.append(entry)
            if log.gap is not None and log.onestep_transfer_err is not None:
                report = check_transfer_bound(log, rho)
                entry = report.to_dict()
                entry["source"] = run_dir
                reports.append(entry)
        certificate["bound_checks"] = reports

    # Spectral decay fit over every logged snapshot.
    pooled = {}
    for run_dir, log, _ in logs:
        if log.spectra:
            pooled[run_dir] = log.spectra
    if pooled:
        try:
            fit = fit_spectral_decay(pooled, model="exponential")
            certificate["spectral_decay"] = {
                "model": fit.model,
                "amplitude": fit.amplitude,
                "rate": fit.rate,
                "residual": fit.residual,
                "count": fit.count,
            }
        except InsufficientDataError as exc:
            certificate["spectral_decay"] = {"error": str(exc)}

    # Tube decay fit and the rank recommendation.
    if sweeps:
        rows = read_sweep_csv(os.path.join(sweeps[0], "sweep.csv"))
        certificate["tubes"] = {str(rank): tube for rank, tube, _, _ in rows}
        try:
            fit = fit_tube_decay([(rank, tube) for rank, tube, _, _ in rows])
            certificate["tube_decay"] = {
                "model": fit.model,
                "amplitude": fit.amplitude,
                "rate": fit.rate,
                "residual": fit.residual,
                "count": fit.count,
            }
            if eta is not None and rho is not None and 0.0 < rho < 1.0:
                certificate["recommended_rank"] = rank_for_tolerance(
                    fit.amplitude, fit.rate, rho, eta
                )
                certificate["eta"] = eta
        except InsufficientDataError as exc:
            certificate["tube_decay"] = {"error": str(exc)}

    os.makedirs(out_dir, exist_ok=True)
    write_json(os.path.join(out_dir, "certificate.json"), certificate)
    return certificate


def cmd_selftest(tol_scale: float = 1.0) -> int:
    """Small oracle-equivalence suite; returns the number of failed checks."""
    failures = 0

    def report(name: str, passed: bool, detail: str) -> None:
        nonlocal failures
        status = "PASS" if passed else "FAIL"
        if not passed:
            failures += 1
        print(f"selftest {name}: {status} ({detail})")

    rng = np.random.default_rng(7)

    # Strang vs exact on the 2x2 lattice: second-order error decay.
    spec_small = RunConfig(rows=2, cols=2, steps=1, ranks=(2,), tail_window=1)
    drift, control = spec_small.drift(), spec_small.control()
    psi0 = named_state("tilted", ModeShape(4, 2))
    errors = []
    for dt in (0.08, 0.04, 0.02):
        approx = strang_step(psi0, drift, control, 0.1, dt)
        exact = exact_step(psi0, drift, control, 0.1, dt)
        errors.append(float(np.linalg.norm(approx.amps - exact.amps)))
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    ok = all(6.5 * tol_scale <= r <= 9.5 / max(tol_scale, 1e-300) for r in ratios) if tol_scale > 0 else False
    report("strang-second-order", ok, f"ratios {ratios[0]:.3f}, {ratios[1]:.3f}")

    # HSVD tail bound on random states.
    worst = -np.inf
    for _ in range(40):
        n = int(rng.choice([4, 6]))
        shape = ModeShape(n, 2)
        amps = rng.standard_normal(shape.total_dim) + 1j * rng.standard_normal(shape.total_dim)
        state = State(shape, amps / np.linalg.norm(amps))
        tree = build_balanced_tree(n)
        rank = int(rng.integers(1, 2 ** (n // 2) + 1))
        _, rep = hsvd_truncate(state, tree, RankBudget.uniform_rank(rank))
        worst = max(worst, rep.residual**2 - sum(rep.per_node_tail.values()))
    ok = worst <= 1e-9 * tol_scale if tol_scale > 0 else worst <= 0.0 and worst < -1
    report("hsvd-tail-bound", ok, f"worst residual^2 - tails = {worst:.3e}")

    # Two-mode truncation matches the best rank-r approximation.
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 7))
        shape = ModeShape(2, d)
        amps = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
        state = State(shape, amps / np.linalg.norm(amps))
        rank = int(rng.integers(1, d))
        tree = build_balanced_tree(2)
        _, rep = hsvd_truncate(state, tree, RankBudget.uniform_rank(rank))
        sv = np.linalg.svd(state.amps.reshape(d, d, order="F"), compute_uv=False)
        best = float(np.sqrt(np.sum(sv[rank:] ** 2)))
        worst = max(worst, abs(rep.residual - best))
    ok = worst <= 1e-10 * tol_scale if tol_scale > 0 else False
    report("two-mode-optimality", ok, f"max |hsvd - best| = {worst:.3e}")

    # Phase-invariant metric sanity.
    shape = ModeShape(4, 2)
    worst = 0.0
    for _ in range(50):
        amps = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        a = State(shape, amps / np.linalg.norm(amps))
        theta = float(rng.uniform(0, 2 * np.pi))
        b = State(shape, np.exp(1j * theta) * a.amps)
        worst = max(worst, phase_distance(a, b))
    ok = worst <= 1e-7 * tol_scale if tol_scale > 0 else False
    report("metric-phase-invariance", ok, f"max dist over phases = {worst:.3e}")

    # Strang unitarity on a random state.
    amps = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    state = State(shape, amps / np.linalg.norm(amps))
    stepped = strang_step(state, drift, control, 0.7, 0.05)
    drift_err = abs(stepped.norm() - 1.0)
    ok = drift_err <= 1e-12 * tol_scale if tol_scale > 0 else False
    report("strang-unitarity", ok, f"norm drift {drift_err:.3e}")

    return failures


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, raw = pair.split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="htcontrol",
        description="Closed-loop spin-lattice simulator with fixed-rank "
        "hierarchical Tucker truncation and empirical certification.",
    )
    parser.add_argument("--version", action="version", version=f"htcontrol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", help="path to a JSON config file")
        p.add_argument("--preset", help="built-in preset name (e.g. paper-4x4)")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (VALUE parsed as JSON when possible)",
        )
        p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="run one trajectory")
    add_config_args(p_run)
    p_run.add_argument(
        "--mode", required=True, choices=("nominal", "surrogate", "transfer")
    )
    p_run.add_argument("--rank", type=int, help="rank budget (surrogate/transfer)")

    p_sweep = sub.add_parser("sweep", help="transfer run per configured rank")
    add_config_args(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel rank runs")

    p_cert = sub.add_parser("certify", help="fit decay laws and check bounds")
    p_cert.add_argument("paths", nargs="+", help="run and/or sweep directories")
    p_cert.add_argument("--eta", type=float, help="target tolerance for the rank rule")
    p_cert.add_argument("--out", help="output directory for certificate.json")

    sub.add_parser("selftest", help="run the built-in oracle suite")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            return 1 if cmd_selftest() else 0
        if args.command == "certify":
            out = args.out or args.paths[0]
            cmd_certify(args.paths, args.eta, out)
            print(os.path.join(out, "certificate.json"))
            return 0

        config = parse_config(
            path=args.config, preset=args.preset, overrides=_parse_overrides(args.overrides)
        )
        if args.command == "run":
            default = f"runs/{args.mode}" + (f"_r{args.rank}" if args.rank is not None else "")
            out = args.out or config.out_dir or default
            cmd_run(config, args.mode, args.rank, out)
            print(out)
            return 0
        if args.command == "sweep":
            out = args.out or config.out_dir or "runs/sweep"
            cmd_sweep(config, out, jobs=args.jobs)
            print(out)
            return 0
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, CapabilityError, InsufficientDataError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
