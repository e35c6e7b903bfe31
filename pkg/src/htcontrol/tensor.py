"""Dense tensorized state vectors and local-operator primitives.

A state over ``n`` factors of local dimension ``d`` is stored as a flat
complex vector of length ``d**n``.  The linearization is little-endian:
mode 0 is the fastest-varying index, so entry ``i`` holds the amplitude
of the multi-index ``(i_0, ..., i_{n-1})`` with ``i = sum_k i_k * d**k``.
With this convention any contiguous block of modes matricizes as a plain
Fortran-order reshape; non-contiguous subsets go through a transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class ModeShape:
    """Uniform tensorization: ``n`` factors of local dimension ``d``."""

    n: int
    d: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one tensor factor, got n={self.n}")
        if self.d < 2:
            raise ValueError(f"local dimension must be >= 2, got d={self.d}")

    @property
    def total_dim(self) -> int:
        return self.d**self.n


@dataclass(eq=False)
class State:
    """Complex amplitude vector over a tensorized Hilbert space."""

    shape: ModeShape
    amps: np.ndarray

    def __post_init__(self) -> None:
        amps = np.ascontiguousarray(self.amps, dtype=np.complex128).reshape(-1)
        if amps.size != self.shape.total_dim:
            raise ValueError(
                f"amplitude count {amps.size} does not match d**n = {self.shape.total_dim}"
            )
        self.amps = amps

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> "State":
        return State(self.shape, self.amps.copy())


@dataclass(frozen=True, eq=False)
class LocalTerm:
    """Hermitian operator acting on a small ordered subset of modes.

    The matrix index is little-endian over ``support`` in its given order:
    row ``r`` addresses the local configuration ``(s_0, ..., s_{k-1})``
    with ``r = sum_j s_j * d**j`` where ``s_j`` lives on ``support[j]``.
    """

    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        support = tuple(int(m) for m in self.support)
        if len(set(support)) != len(support) or any(m < 0 for m in support):
            raise ValueError(f"support must be distinct non-negative modes, got {support}")
        matrix = np.asarray(self.matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"term matrix must be square, got shape {matrix.shape}")
        if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOL:
            raise ValueError("term matrix is not Hermitian")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", matrix)


def linear_index(multi: "list[int] | tuple[int, ...]", shape: ModeShape) -> int:
    """Little-endian linearization of a per-mode index tuple."""
    if len(multi) != shape.n:
        raise ValueError(f"expected {shape.n} mode values, got {len(multi)}")
    index = 0
    for k, value in enumerate(multi):
        if not 0 <= value < shape.d:
            raise ValueError(f"mode value {value} out of range [0, {shape.d}) at position {k}")
        index += value * shape.d**k
    return index


def multi_index(index: int, shape: ModeShape) -> tuple[int, ...]:
    """Inverse of :func:`linear_index`."""
    if not 0 <= index < shape.total_dim:
        raise ValueError(f"linear index {index} out of range [0, {shape.total_dim})")
    return tuple((index // shape.d**k) % shape.d for k in range(shape.n))


def _as_tensor(state: State) -> np.ndarray:
    # Fortran order makes axis k correspond to mode k (mode 0 fastest).
    return state.amps.reshape((state.shape.d,) * state.shape.n, order="F")


def _split_modes(subset, n: int) -> tuple[list[int], list[int]]:
    rows = sorted(set(int(m) for m in subset))
    if len(rows) != len(list(subset)):
        raise ValueError(f"mode subset has duplicates: {subset}")
    if any(m < 0 or m >= n for m in rows):
        raise ValueError(f"mode subset {rows} out of range for n={n}")
    if not rows or len(rows) >= n:
        raise ValueError("subset must be nonempty and a proper subset of the modes")
    cols = [m for m in range(n) if m not in set(rows)]
    return rows, cols


def matricize(state: State, subset) -> np.ndarray:
    """Unfold a state into the matrix with row modes ``subset``.

    Rows are the little-endian linearization of the subset modes in
    ascending mode order, columns likewise over the complement.
    """
    n, d = state.shape.n, state.shape.d
    rows, cols = _split_modes(subset, n)
    tensor = _as_tensor(state)
    return tensor.transpose(rows + cols).reshape(d ** len(rows), d ** len(cols), order="F")


def dematricize(matrix: np.ndarray, subset, shape: ModeShape) -> State:
    """Inverse of :func:`matricize` for the same subset."""
    n, d = shape.n, shape.d
    rows, cols = _split_modes(subset, n)
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.shape != (d ** len(rows), d ** len(cols)):
        raise ValueError(f"matrix shape {matrix.shape} does not match subset {rows} of {shape}")
    tensor = matrix.reshape((d,) * n, order="F")
    inverse = np.argsort(rows + cols)
    return State(shape, tensor.transpose(inverse).reshape(-1, order="F"))


def apply_local_term(state: State, matrix: np.ndarray, support) -> State:
    """Apply ``matrix`` on the given modes, identity elsewhere.

    The input state is not mutated.  ``support`` order fixes the matrix
    index convention (see :class:`LocalTerm`).
    """
    n, d = state.shape.n, state.shape.d
    support = [int(m) for m in support]
    if len(set(support)) != len(support):
        raise ValueError(f"support has duplicates: {support}")
    if any(m < 0 or m >= n for m in support):
        raise ValueError(f"support {support} out of range for n={n}")
    matrix = np.asarray(matrix, dtype=np.complex128)
    dim = d ** len(support)
    if matrix.shape != (dim, dim):
        raise ValueError(f"matrix shape {matrix.shape} does not match support size {len(support)}")
    rest = [m for m in range(n) if m not in set(support)]
    perm = support + rest
    tensor = _as_tensor(state)
    unfolded = tensor.transpose(perm).reshape(dim, -1, order="F")
    unfolded = matrix @ unfolded
    tensor = unfolded.reshape((d,) * n, order="F").transpose(np.argsort(perm))
    return State(state.shape, tensor.reshape(-1, order="F"))


def inner(a: State, b: State) -> complex:
    """Inner product, conjugate-linear in the first argument."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a.amps, b.amps))


def _gram_svd(matrix: np.ndarray):
    # Fallback path via the smaller Gram matrix; only used if LAPACK's
    # direct SVD fails to converge.
    m, k = matrix.shape
    if m <= k:
        gram = matrix @ matrix.conj().T
        w, u = np.linalg.eigh(gram)
        order = np.argsort(w)[::-1]
        w, u = w[order], u[:, order]
        s = np.sqrt(np.clip(w, 0.0, None))
        vh = u.conj().T @ matrix
        nonzero = s > 0
        vh[nonzero] /= s[nonzero, None]
        return u, s, vh
    u, s, vh = _gram_svd(matrix.conj().T)
    return vh.conj().T, s, u.conj().T


def svd_compact(matrix: np.ndarray):
    """Thin SVD ``(U, s, Vh)`` with singular values descending."""
    matrix = np.asarray(matrix, dtype=np.complex128)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    try:
        return np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError:
        return _gram_svd(matrix)


def left_svd(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Left singular vectors and values, plus a noise-floor ratio.

    Wide matrices go through the (much smaller) Gram matrix, which is
    fast but squares the condition number: singular values below about
    1e-8 of the largest are then pure noise, signalled by the returned
    floor ratio.  Tall matrices use the direct SVD.
    """
    matrix = np.asarray(matrix, dtype=np.complex128)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    m, k = matrix.shape
    if m <= k:
        gram = matrix @ matrix.conj().T
        w, u = np.linalg.eigh(gram)
        order = np.argsort(w)[::-1]
        return u[:, order], np.sqrt(np.clip(w[order], 0.0, None)), 1e-7
    try:
        u, s, _ = np.linalg.svd(matrix, full_matrices=False)
        return u, s, 1e-12
    except np.linalg.LinAlgError:
        u, s, _ = _gram_svd(matrix)
        return u, s, 1e-7


def singular_values(matrix: np.ndarray) -> np.ndarray:
    """Full singular spectrum of a matrix, descending."""
    matrix = np.asarray(matrix, dtype=np.complex128)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    try:
        return np.linalg.svd(matrix, compute_uv=False)
    except np.linalg.LinAlgError:
        return _gram_svd(matrix)[1]
