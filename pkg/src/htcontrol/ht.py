"""Balanced dimension trees and fixed-rank hierarchical SVD truncation.

Truncation is sequential-projection HSVD: non-root nodes are visited in
breadth-first order starting from the root's children, and at each node
the current tensor is projected onto the span of the top left singular
vectors of its matricization.  The output is *not* renormalized unless
explicitly requested, so the truncation enters downstream dynamics as a
plain additive perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .tensor import ModeShape, State, dematricize, left_svd, matricize, singular_values


@dataclass(frozen=True)
class TreeNode:
    node_id: int
    modes: tuple[int, ...]
    parent: int | None
    children: tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class DimensionTree:
    """Binary tree over tensor modes; node 0 is the root, ids are BFS order."""

    n: int
    nodes: tuple[TreeNode, ...]

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    @property
    def non_root_ids(self) -> tuple[int, ...]:
        # Construction is breadth-first, so id order *is* BFS order.
        return tuple(range(1, len(self.nodes)))

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]


def build_balanced_tree(n: int) -> DimensionTree:
    """Canonical balanced tree over contiguous mode ranges.

    A range of length m splits into a left block of ceil(m/2) modes and a
    right block of floor(m/2); construction is deterministic in n.
    """
    if n < 2:
        raise ValueError(f"need at least two modes to build a tree, got n={n}")
    spans: list[tuple[int, int, int | None]] = [(0, n, None)]
    children: dict[int, list[int]] = {}
    head = 0
    while head < len(spans):
        lo, hi, parent = spans[head]
        node_id = head
        head += 1
        if parent is not None:
            children.setdefault(parent, []).append(node_id)
        if hi - lo > 1:
            mid = lo + (hi - lo + 1) // 2
            spans.append((lo, mid, node_id))
            spans.append((mid, hi, node_id))
    nodes = tuple(
        TreeNode(i, tuple(range(lo, hi)), parent, tuple(children.get(i, ())))
        for i, (lo, hi, parent) in enumerate(spans)
    )
    return DimensionTree(n, nodes)


@dataclass(frozen=True)
class RankBudget:
    """Maximum rank per non-root node, either uniform or per node id."""

    uniform: int | None = None
    per_node: Mapping[int, int] | None = None

    def __post_init__(self) -> None:
        if (self.uniform is None) == (self.per_node is None):
            raise ValueError("specify exactly one of uniform or per_node")
        if self.uniform is not None and self.uniform < 1:
            raise ValueError(f"rank budget must be >= 1, got {self.uniform}")
        if self.per_node is not None:
            per_node = {int(k): int(v) for k, v in self.per_node.items()}
            if any(r < 1 for r in per_node.values()):
                raise ValueError("all per-node rank budgets must be >= 1")
            object.__setattr__(self, "per_node", per_node)

    @classmethod
    def uniform_rank(cls, rank: int) -> "RankBudget":
        return cls(uniform=int(rank))

    @classmethod
    def from_map(cls, per_node: Mapping[int, int]) -> "RankBudget":
        return cls(per_node=per_node)

    def rank_at(self, node_id: int) -> int:
        if self.uniform is not None:
            return self.uniform
        try:
            return self.per_node[node_id]  # type: ignore[index]
        except KeyError:
            raise ValueError(f"rank budget does not cover node {node_id}") from None


@dataclass(eq=False)
class TruncationReport:
    """Residual and nodewise diagnostics of one truncation.

    Spectra and tail masses refer to the *input* tensor, before any
    projection; ``achieved_ranks`` counts the numerically nonzero
    directions actually kept at each node.
    """

    residual: float
    per_node_spectra: dict[int, np.ndarray] = field(default_factory=dict)
    per_node_tail: dict[int, float] = field(default_factory=dict)
    achieved_ranks: dict[int, int] = field(default_factory=dict)


def _check_tree_state(state: State, tree: DimensionTree) -> None:
    if tree.n != state.shape.n:
        raise ValueError(f"tree over {tree.n} modes does not match state with n={state.shape.n}")


def max_node_rank(node: TreeNode, shape: ModeShape) -> int:
    """Largest possible rank of the matricization at ``node``."""
    k = len(node.modes)
    return min(shape.d**k, shape.d ** (shape.n - k))


def node_spectra(state: State, tree: DimensionTree) -> dict[int, np.ndarray]:
    """Singular spectrum of the matricization at every non-root node."""
    _check_tree_state(state, tree)
    return {
        node_id: singular_values(matricize(state, tree.node(node_id).modes))
        for node_id in tree.non_root_ids
    }


def hsvd_truncate(
    state: State,
    tree: DimensionTree,
    budget: RankBudget,
    *,
    include_spectra: bool = True,
    renormalize: bool = False,
) -> tuple[State, TruncationReport]:
    """Project a state onto the fixed-rank hierarchical class of ``budget``.

    Visits non-root nodes breadth-first from the root's children; at each
    node the current tensor's matricization is projected onto its top
    left singular vectors (budget silently capped at the node's maximal
    possible rank).  Returns the projected state plus a report whose
    spectra/tails describe the original input.

    With ``include_spectra=False`` the (costly) spectra and tail masses
    of the input are skipped; residual and achieved ranks are still
    reported.  ``renormalize`` rescales the output to unit norm after the
    residual has been measured.
    """
    _check_tree_state(state, tree)
    shape = state.shape
    spectra = node_spectra(state, tree) if include_spectra else {}

    current = state
    achieved: dict[int, int] = {}
    for node_id in tree.non_root_ids:
        node = tree.node(node_id)
        rank = min(budget.rank_at(node_id), max_node_rank(node, shape))
        unfolded = matricize(current, node.modes)
        u, s, floor_ratio = left_svd(unfolded)
        keep = u[:, :rank]
        unfolded = keep @ (keep.conj().T @ unfolded)
        cutoff = floor_ratio * s[0] if s[0] > 0 else 0.0
        achieved[node_id] = int(np.sum(s[:rank] > cutoff))
        current = dematricize(unfolded, node.modes, shape)

    residual = float(np.linalg.norm(state.amps - current.amps))
    tails: dict[int, float] = {}
    if include_spectra:
        for node_id in tree.non_root_ids:
            rank = min(budget.rank_at(node_id), max_node_rank(tree.node(node_id), shape))
            tails[node_id] = float(np.sum(spectra[node_id][rank:] ** 2))

    if renormalize:
        nrm = current.norm()
        if nrm > 0:
            current = State(shape, current.amps / nrm)

    return current, TruncationReport(residual, spectra, tails, achieved)


def truncation_residual(original: State, truncated: State) -> float:
    """Euclidean norm of the difference between two states."""
    if original.shape != truncated.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {truncated.shape}")
    return float(np.linalg.norm(original.amps - truncated.amps))
