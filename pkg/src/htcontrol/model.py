"""Spin-lattice Hamiltonians, named states, the phase-invariant metric,
and the sampled-data feedback law.

Conventions (all pinned for reproducibility, hbar = 1):
  * sigma_z = diag(1, -1); basis label 0 is the +1 eigenstate of sigma_z.
  * site (i, j) maps to mode i * cols + j (row-major).
  * lattice edges are open (non-periodic) unless requested otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .tensor import LocalTerm, ModeShape, State, apply_local_term, inner

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
ID2 = np.eye(2, dtype=np.complex128)

# Per-site tilt angle of the "tilted" and "spiral" product states, and the
# per-site phase pitch of the spiral (see named_state).
TILT_ANGLE = 0.3
SPIRAL_PITCH = 1.9

TARGET_NAMES = ("all_ones", "all_zeros", "uniform_plus", "neel")


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Sum of local Hermitian terms over a fixed tensorization."""

    shape: ModeShape
    terms: tuple[LocalTerm, ...]

    def __post_init__(self) -> None:
        for term in self.terms:
            if any(m >= self.shape.n for m in term.support):
                raise ValueError(f"term support {term.support} outside n={self.shape.n} modes")
            dim = self.shape.d ** len(term.support)
            if term.matrix.shape != (dim, dim):
                raise ValueError(
                    f"term matrix {term.matrix.shape} does not match d^|support| = {dim}"
                )

    def apply(self, state: State) -> State:
        """Matrix-vector product, term by term."""
        out = np.zeros_like(state.amps)
        for term in self.terms:
            out += apply_local_term(state, term.matrix, term.support).amps
        return State(self.shape, out)


def site_mode(i: int, j: int, cols: int) -> int:
    return i * cols + j


def two_site_matrix(op_first: np.ndarray, op_second: np.ndarray) -> np.ndarray:
    """Two-site operator with ``op_first`` on the first support mode.

    Little-endian matrix index: the first support mode is the fast index,
    hence the reversed kron order.
    """
    return np.kron(op_second, op_first)


def lattice_edges(rows: int, cols: int, periodic: bool = False) -> list[tuple[int, int]]:
    """Nearest-neighbor edges: horizontal row-major first, then vertical."""
    edges = []
    for i in range(rows):
        for j in range(cols - 1):
            edges.append((site_mode(i, j, cols), site_mode(i, j + 1, cols)))
    for i in range(rows - 1):
        for j in range(cols):
            edges.append((site_mode(i, j, cols), site_mode(i + 1, j, cols)))
    if periodic:
        if cols > 2:
            for i in range(rows):
                edges.append((site_mode(i, cols - 1, cols), site_mode(i, 0, cols)))
        if rows > 2:
            for j in range(cols):
                edges.append((site_mode(rows - 1, j, cols), site_mode(0, j, cols)))
    return edges


def heisenberg_drift(rows: int, cols: int, coupling: float, periodic: bool = False) -> Hamiltonian:
    """Nearest-neighbor Heisenberg exchange, one term per lattice edge."""
    if rows < 1 or cols < 1:
        raise ValueError(f"lattice dimensions must be >= 1, got {rows}x{cols}")
    shape = ModeShape(rows * cols, 2)
    exchange = coupling * (
        two_site_matrix(SIGMA_X, SIGMA_X)
        + two_site_matrix(SIGMA_Y, SIGMA_Y)
        + two_site_matrix(SIGMA_Z, SIGMA_Z)
    )
    terms = tuple(LocalTerm((p, q), exchange) for p, q in lattice_edges(rows, cols, periodic))
    return Hamiltonian(shape, terms)


def control_hamiltonian(rows: int, cols: int, control_sites) -> Hamiltonian:
    """Transverse control: (1/2) sigma_x on each listed site."""
    shape = ModeShape(rows * cols, 2)
    sites = [tuple(int(v) for v in s) for s in control_sites]
    if len(set(sites)) != len(sites):
        raise ValueError(f"duplicate control sites: {sites}")
    for i, j in sites:
        if not (0 <= i < rows and 0 <= j < cols):
            raise ValueError(f"control site ({i}, {j}) outside {rows}x{cols} lattice")
    terms = tuple(LocalTerm((site_mode(i, j, cols),), 0.5 * SIGMA_X) for i, j in sites)
    return Hamiltonian(shape, terms)


def named_state(name: str, shape: ModeShape, seed: int = 0) -> State:
    """Deterministic named unit states (plus a seeded ``random``).

    ``tilted`` is a product state with every site rotated slightly off
    the all-ones configuration, cos(t)|1> + i sin(t)|0> with t =
    TILT_ANGLE; it overlaps every magnetization sector and therefore
    actually engages the feedback loop.
    """
    n, d = shape.n, shape.d
    total = shape.total_dim
    amps = np.zeros(total, dtype=np.complex128)
    if name == "all_zeros":
        amps[0] = 1.0
    elif name == "all_ones":
        amps[total - 1] = 1.0
    elif name == "uniform_plus":
        amps[:] = 1.0 / np.sqrt(total)
    elif name == "neel":
        if d != 2:
            raise ConfigError("neel state requires local dimension 2")
        index = sum((m % 2) * 2**m for m in range(n))
        amps[index] = 1.0
    elif name == "tilted":
        if d != 2:
            raise ConfigError("tilted state requires local dimension 2")
        site = np.array([1j * np.sin(TILT_ANGLE), np.cos(TILT_ANGLE)], dtype=np.complex128)
        amps = site
        for _ in range(n - 1):
            amps = np.kron(site, amps)
    elif name == "spiral":
        # Uniform tilt is a global rotation of the all-ones state and hence
        # stationary under isotropic exchange; the per-site phase winding
        # breaks that symmetry so the drift genuinely entangles the state.
        if d != 2:
            raise ConfigError("spiral state requires local dimension 2")
        amps = np.array([1.0], dtype=np.complex128)
        for m in range(n):
            site = np.array(
                [1j * np.exp(1j * SPIRAL_PITCH * m) * np.sin(TILT_ANGLE), np.cos(TILT_ANGLE)],
                dtype=np.complex128,
            )
            amps = np.kron(site, amps)
    elif name == "random":
        rng = np.random.default_rng(seed)
        amps = rng.standard_normal(total) + 1j * rng.standard_normal(total)
        amps /= np.linalg.norm(amps)
    elif name.startswith("basis:"):
        try:
            index = int(name.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"malformed basis state name: {name!r}") from None
        if not 0 <= index < total:
            raise ConfigError(f"basis index {index} out of range [0, {total})")
        amps[index] = 1.0
    else:
        raise ConfigError(f"unknown state name: {name!r}")
    return State(shape, amps)


def target_state(name: str, shape: ModeShape) -> State:
    """Named target states; a restricted subset of :func:`named_state`."""
    if name not in TARGET_NAMES and not name.startswith("basis:"):
        raise ConfigError(f"unknown target state name: {name!r}")
    return named_state(name, shape)


def phase_distance(a: State, b: State) -> float:
    """Euclidean distance minimized over a global phase of either state."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na2 = float(np.vdot(a.amps, a.amps).real)
    nb2 = float(np.vdot(b.amps, b.amps).real)
    return float(np.sqrt(max(0.0, na2 + nb2 - 2.0 * abs(np.vdot(b.amps, a.amps)))))


def projector_distance(a: State, b: State) -> float:
    """Frobenius distance of the rank-1 projectors, via inner products."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na2 = float(np.vdot(a.amps, a.amps).real)
    nb2 = float(np.vdot(b.amps, b.amps).real)
    overlap = abs(np.vdot(a.amps, b.amps))
    return float(np.sqrt(max(0.0, na2**2 + nb2**2 - 2.0 * overlap**2)))


METRICS = {"phase": phase_distance, "projector": projector_distance}


def metric_by_name(name: str):
    try:
        return METRICS[name]
    except KeyError:
        raise ConfigError(f"unknown metric {name!r}; choose from {sorted(METRICS)}") from None


def feedback(state: State, target: State, control: Hamiltonian, gain: float, u_max: float) -> float:
    """Sampled-data control value, clamped to [-u_max, u_max]."""
    raw = gain * (inner(target, control.apply(state)) * inner(state, target)).imag
    return float(np.clip(raw, -u_max, u_max))


@lru_cache(maxsize=None)
def _sz_weights(n: int) -> np.ndarray:
    index = np.arange(1 << n, dtype=np.int64)
    bits = np.zeros(index.shape, dtype=np.int64)
    for m in range(n):
        bits += (index >> m) & 1
    return (n - 2 * bits).astype(np.float64)


def total_sz(state: State) -> float:
    """Normalized expectation of the summed sigma_z over all sites."""
    if state.shape.d != 2:
        raise ValueError("total_sz is defined for spin-1/2 lattices (d=2) only")
    weights = _sz_weights(state.shape.n)
    norm2 = float(np.vdot(state.amps, state.amps).real)
    return float(np.sum(np.abs(state.amps) ** 2 * weights) / norm2)


@dataclass(frozen=True)
class LatticeSpec:
    """Physical and loop parameters of one closed-loop experiment.

    Field defaults are the built-in 4x4 benchmark preset.
    """

    rows: int = 4
    cols: int = 4
    coupling: float = 0.25
    control_sites: tuple[tuple[int, int], ...] = ((0, 0), (0, 1))
    u_max: float = 3.0
    gain: float = 3.0
    dt: float = 0.02
    target: str = "all_ones"
    steps: int = 220
    ranks: tuple[int, ...] = (2, 4, 8, 12, 16, 24, 32, 64)
    tail_window: int = 20
    periodic: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "control_sites", tuple(tuple(int(v) for v in s) for s in self.control_sites)
        )
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("rows and cols must be >= 1")
        for i, j in self.control_sites:
            if not (0 <= i < self.rows and 0 <= j < self.cols):
                raise ConfigError(f"control_sites entry ({i}, {j}) outside the lattice")
        if len(set(self.control_sites)) != len(self.control_sites):
            raise ConfigError("control_sites contains duplicates")
        if not self.u_max > 0:
            raise ConfigError("u_max must be positive")
        if not np.isfinite(self.gain):
            raise ConfigError("gain must be finite")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not self.ranks or any(r < 1 for r in self.ranks):
            raise ConfigError("ranks must be a nonempty list of integers >= 1")
        if not 1 <= self.tail_window <= self.steps:
            raise ConfigError("tail_window must satisfy 1 <= tail_window <= steps")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    def mode_shape(self) -> ModeShape:
        return ModeShape(self.n_sites, 2)

    def drift(self) -> Hamiltonian:
        return heisenberg_drift(self.rows, self.cols, self.coupling, self.periodic)

    def control(self) -> Hamiltonian:
        return control_hamiltonian(self.rows, self.cols, self.control_sites)

    def target_vec(self) -> State:
        return target_state(self.target, self.mode_shape())
