"""Run configuration: presets, JSON parsing, validation, fingerprinting.

Configs are plain JSON objects whose keys are the RunConfig field names.
Unknown keys are rejected by name.  The canonical form excludes only the
output directory (it does not affect any computed number); its SHA-256
prefix is stamped into every output file so mixed-config inputs can be
detected downstream.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields

from .errors import ConfigError
from .model import METRICS, LatticeSpec, State, named_state, target_state
from .tensor import ModeShape

INITIAL_STATE_NAMES = ("all_ones", "all_zeros", "uniform_plus", "neel", "tilted", "spiral", "random")

PRESETS: dict[str, dict] = {
    # 4x4 Heisenberg lattice benchmark; these mirror the RunConfig defaults.
    "paper-4x4": {
        "rows": 4,
        "cols": 4,
        "coupling": 0.25,
        "control_sites": [[0, 0], [0, 1]],
        "u_max": 3.0,
        "gain": 3.0,
        "dt": 0.02,
        "target": "all_ones",
        "steps": 220,
        "ranks": [2, 4, 8, 12, 16, 24, 32, 64],
        "tail_window": 20,
        "initial_state": "tilted",
    },
}


@dataclass(frozen=True)
class RunConfig(LatticeSpec):
    """LatticeSpec plus run plumbing (initial state, output, logging)."""

    initial_state: str = "tilted"
    seed: int = 0
    out_dir: str | None = None
    spectra_snapshot_stride: int = 10
    renormalize_after_truncation: bool = False
    metric: str = "phase"
    oracle_max_dim: int = 4096

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.initial_state not in INITIAL_STATE_NAMES and not self.initial_state.startswith(
            "basis:"
        ):
            raise ConfigError(f"unknown initial_state name: {self.initial_state!r}")
        if self.spectra_snapshot_stride < 1:
            raise ConfigError("spectra_snapshot_stride must be >= 1")
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}; choose from {sorted(METRICS)}")
        if self.oracle_max_dim < 2:
            raise ConfigError("oracle_max_dim must be >= 2")


_FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


def parse_config(
    path: str | None = None,
    preset: str | None = None,
    overrides: dict | None = None,
) -> RunConfig:
    """Build a validated RunConfig from preset, JSON file, and overrides.

    Later sources win key by key: preset < file < overrides.
    """
    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        data.update(PRESETS[preset])
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in config file {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        data.update(loaded)
    if overrides:
        data.update(overrides)

    unknown = sorted(set(data) - set(_FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if "control_sites" in data:
        try:
            data["control_sites"] = tuple(tuple(int(v) for v in s) for s in data["control_sites"])
        except (TypeError, ValueError):
            raise ConfigError("control_sites must be a list of [row, col] pairs") from None
    if "ranks" in data:
        try:
            data["ranks"] = tuple(int(r) for r in data["ranks"])
        except (TypeError, ValueError):
            raise ConfigError("ranks must be a list of integers") from None
    try:
        return RunConfig(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def canonical_dict(config: RunConfig) -> dict:
    """JSON-ready view of the config, excluding the output directory."""
    out = {}
    for f in fields(RunConfig):
        if f.name == "out_dir":
            continue
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = [list(v) if isinstance(v, tuple) else v for v in value]
        out[f.name] = value
    return out


def fingerprint(config: RunConfig) -> str:
    """Short stable hash of the canonical config."""
    payload = json.dumps(canonical_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def build_initial_state(config: RunConfig) -> State:
    return named_state(config.initial_state, ModeShape(config.n_sites, 2), seed=config.seed)


def build_target_state(config: RunConfig) -> State:
    return target_state(config.target, ModeShape(config.n_sites, 2))
