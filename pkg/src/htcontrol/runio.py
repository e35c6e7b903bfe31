"""Bit-stable CSV/JSON serialization of trajectories, sweeps, and spectra.

CSV conventions: '.' decimal separator, fixed column order, LF endings,
17 significant digits (doubles round-trip exactly), empty fields where a
channel is absent.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .closed_loop import TrajectoryLog

TRAJECTORY_COLUMNS = (
    "k",
    "dist_to_target",
    "u",
    "surrogate_norm",
    "residual",
    "gap",
    "onestep_transfer_err",
)
SWEEP_COLUMNS = ("rank", "tube", "final_dist", "max_residual")
SPECTRA_COLUMNS = ("node_id", "alpha", "sigma")


def fmt_float(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if np.isnan(value):
        return ""
    return f"{value:.17g}"


def _channel_value(channel, k):
    if channel is None:
        return None
    return channel[k]


def write_trajectory_csv(path: str, log: TrajectoryLog) -> None:
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for k in range(log.steps + 1):
        row = [
            str(k),
            fmt_float(log.dist_to_target[k]),
            fmt_float(log.u[k]),
            fmt_float(_channel_value(log.surrogate_norm, k)),
            fmt_float(_channel_value(log.residual, k)),
            fmt_float(_channel_value(log.gap, k)),
            fmt_float(_channel_value(log.onestep_transfer_err, k)),
        ]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_spectra_csvs(directory: str, log: TrajectoryLog) -> list[str]:
    paths = []
    for k in sorted(log.spectra):
        path = os.path.join(directory, f"spectra_{k}.csv")
        lines = [",".join(SPECTRA_COLUMNS)]
        for node_id in sorted(log.spectra[k]):
            for alpha, sigma in enumerate(log.spectra[k][node_id], start=1):
                lines.append(f"{node_id},{alpha},{fmt_float(sigma)}")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def write_sweep_csv(path: str, rows: "list[tuple[int, float, float, float]]") -> None:
    lines = [",".join(SWEEP_COLUMNS)]
    for rank, tube, final_dist, max_residual in rows:
        lines.append(
            f"{rank},{fmt_float(tube)},{fmt_float(final_dist)},{fmt_float(max_residual)}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _parse_cell(cell: str) -> float:
    return float(cell) if cell else float("nan")


def read_trajectory_csv(path: str) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV as arrays (nan for empty cells)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != ",".join(TRAJECTORY_COLUMNS):
        raise ValueError(f"{path}: missing or unexpected trajectory header")
    columns: dict[str, list[float]] = {name: [] for name in TRAJECTORY_COLUMNS}
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(TRAJECTORY_COLUMNS):
            raise ValueError(f"{path}:{lineno}: expected {len(TRAJECTORY_COLUMNS)} fields")
        for name, cell in zip(TRAJECTORY_COLUMNS, cells):
            columns[name].append(_parse_cell(cell))
    return {name: np.asarray(vals) for name, vals in columns.items()}


def load_run_dir(directory: str) -> tuple[TrajectoryLog, dict]:
    """Rehydrate a TrajectoryLog (and its meta) from a run directory."""
    meta = read_json(os.path.join(directory, "meta.json"))
    columns = read_trajectory_csv(os.path.join(directory, "trajectory.csv"))
    steps = len(columns["k"]) - 1

    def channel(name: str):
        values = columns[name]
        return values if np.any(np.isfinite(values)) else None

    spectra: dict[int, dict[int, np.ndarray]] = {}
    for entry in sorted(os.listdir(directory)):
        if entry.startswith("spectra_") and entry.endswith(".csv"):
            k = int(entry[len("spectra_") : -len(".csv")])
            spectra[k] = read_spectra_csv(os.path.join(directory, entry))
    log = TrajectoryLog(
        kind=meta.get("mode", "unknown"),
        steps=steps,
        rank=meta.get("rank"),
        dist_to_target=columns["dist_to_target"],
        u=columns["u"],
        surrogate_norm=channel("surrogate_norm"),
        residual=channel("residual"),
        gap=channel("gap"),
        onestep_transfer_err=channel("onestep_transfer_err"),
        spectra=spectra,
        meta=meta,
    )
    return log, meta


def read_spectra_csv(path: str) -> dict[int, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != ",".join(SPECTRA_COLUMNS):
        raise ValueError(f"{path}: missing or unexpected spectra header")
    values: dict[int, list[tuple[int, float]]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 fields")
        node_id, alpha, sigma = int(cells[0]), int(cells[1]), float(cells[2])
        values.setdefault(node_id, []).append((alpha, sigma))
    return {
        node_id: np.asarray([s for _, s in sorted(pairs)])
        for node_id, pairs in values.items()
    }


def read_sweep_csv(path: str) -> list[tuple[int, float, float, float]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != ",".join(SWEEP_COLUMNS):
        raise ValueError(f"{path}: missing or unexpected sweep header")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(SWEEP_COLUMNS):
            raise ValueError(f"{path}:{lineno}: expected {len(SWEEP_COLUMNS)} fields")
        rows.append((int(cells[0]), float(cells[1]), float(cells[2]), float(cells[3])))
    return rows
