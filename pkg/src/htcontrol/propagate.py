"""One-step propagators.

Production path: second-order Strang splitting over the local terms,
applying each half-step gate in construction order and then in reverse
(palindromic sweep).  Oracle path: dense matrix exponential via Hermitian
eigendecomposition, capped at a configurable total dimension.
"""

from __future__ import annotations

import numpy as np

from .errors import CapabilityError
from .model import Hamiltonian
from .tensor import LocalTerm, ModeShape, State, apply_local_term


def hermitian_gate(matrix: np.ndarray, coefficient: float) -> np.ndarray:
    """exp(-1j * coefficient * matrix) for Hermitian ``matrix``."""
    w, v = np.linalg.eigh(matrix)
    return (v * np.exp(-1j * coefficient * w)) @ v.conj().T


def term_exponential(term: LocalTerm, coefficient: float) -> np.ndarray:
    """Unitary gate generated by a local term (Hermitian by construction)."""
    return hermitian_gate(term.matrix, coefficient)


class SplitPlan:
    """Caches gates for repeated Strang steps with one (drift, control, dt).

    Drift gates depend only on dt and are built once; control gates are
    rebuilt from cached eigendecompositions whenever u changes.
    """

    def __init__(self, drift: Hamiltonian, control: Hamiltonian, dt: float) -> None:
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if drift.shape != control.shape:
            raise ValueError(f"shape mismatch: {drift.shape} vs {control.shape}")
        self.shape: ModeShape = drift.shape
        self.dt = float(dt)
        self._drift_gates = [
            (term.support, hermitian_gate(term.matrix, self.dt / 2.0)) for term in drift.terms
        ]
        self._control_eigs = []
        for term in control.terms:
            w, v = np.linalg.eigh(term.matrix)
            self._control_eigs.append((term.support, w, v))

    def half_sweep(self, u: float) -> list[tuple[tuple[int, ...], np.ndarray]]:
        """Half-step gates in sweep order: drift terms, then control terms."""
        gates = list(self._drift_gates)
        half = u * self.dt / 2.0
        for support, w, v in self._control_eigs:
            gates.append((support, (v * np.exp(-1j * half * w)) @ v.conj().T))
        return gates


def strang_step(
    state: State,
    drift: Hamiltonian,
    control: Hamiltonian,
    u: float,
    dt: float,
    plan: SplitPlan | None = None,
) -> State:
    """One palindromic Strang step approximating exp(-1j*dt*(H0 + u*H1)).

    Local error is O(dt^3); the step is an exact composition of unitaries
    and preserves the norm to machine precision.
    """
    if plan is None:
        plan = SplitPlan(drift, control, dt)
    elif plan.dt != dt:
        raise ValueError(f"plan was built for dt={plan.dt}, called with dt={dt}")
    if state.shape != plan.shape:
        raise ValueError(f"state shape {state.shape} does not match plan shape {plan.shape}")
    gates = plan.half_sweep(u)
    current = state
    for support, gate in gates:
        current = apply_local_term(current, gate, support)
    for support, gate in reversed(gates):
        current = apply_local_term(current, gate, support)
    return current


def _embed_term(term: LocalTerm, shape: ModeShape) -> np.ndarray:
    """Dense full-space embedding of a local term (oracle use only)."""
    n, d = shape.n, shape.d
    total = shape.total_dim
    support = list(term.support)
    rest = [m for m in range(n) if m not in set(support)]
    index = np.arange(total)
    digits = [(index // d**m) % d for m in range(n)]
    # position of each full index inside the (term x identity) ordering
    pos = sum(digits[mode] * d**j for j, mode in enumerate(support))
    pos = pos + sum(digits[mode] * d**j for j, mode in enumerate(rest)) * d ** len(support)
    big = np.kron(np.eye(d ** len(rest), dtype=np.complex128), term.matrix)
    return big[np.ix_(pos, pos)]


def dense_hamiltonian(drift: Hamiltonian, control: Hamiltonian, u: float) -> np.ndarray:
    """Assemble H0 + u*H1 as a dense matrix."""
    if drift.shape != control.shape:
        raise ValueError(f"shape mismatch: {drift.shape} vs {control.shape}")
    total = drift.shape.total_dim
    dense = np.zeros((total, total), dtype=np.complex128)
    for term in drift.terms:
        dense += _embed_term(term, drift.shape)
    for term in control.terms:
        dense += u * _embed_term(term, control.shape)
    return dense


def exact_step(
    state: State,
    drift: Hamiltonian,
    control: Hamiltonian,
    u: float,
    dt: float,
    max_dim: int = 4096,
) -> State:
    """Exact propagator via dense Hermitian eigendecomposition.

    Desk-scale oracle only; refuses total dimensions above ``max_dim``.
    """
    total = state.shape.total_dim
    if total > max_dim:
        raise CapabilityError(
            f"exact_step limited to total dimension {max_dim}, got {total}"
        )
    dense = dense_hamiltonian(drift, control, u)
    w, v = np.linalg.eigh(dense)
    amps = v @ (np.exp(-1j * dt * w) * (v.conj().T @ state.amps))
    return State(state.shape, amps)
