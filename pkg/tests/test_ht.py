"""Dimension trees and hierarchical SVD truncation."""

import numpy as np
import pytest

from htcontrol.ht import (
    RankBudget,
    build_balanced_tree,
    hsvd_truncate,
    node_spectra,
    truncation_residual,
)
from htcontrol.tensor import ModeShape, State, matricize, singular_values

RNG = np.random.default_rng(2024)


def random_state(n, d=2, rng=RNG):
    shape = ModeShape(n, d)
    amps = rng.standard_normal(shape.total_dim) + 1j * rng.standard_normal(shape.total_dim)
    return State(shape, amps / np.linalg.norm(amps))


def ghz_state(n):
    shape = ModeShape(n, 2)
    amps = np.zeros(shape.total_dim)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return State(shape, amps)


class TestBalancedTree:
    def test_two_modes(self):
        tree = build_balanced_tree(2)
        assert tree.root.modes == (0, 1)
        assert [tree.node(i).modes for i in tree.non_root_ids] == [(0,), (1,)]

    def test_four_modes_midpoint_rule(self):
        tree = build_balanced_tree(4)
        children = [tree.node(i).modes for i in tree.root.children]
        assert children == [(0, 1), (2, 3)]

    def test_odd_split_is_left_heavy(self):
        tree = build_balanced_tree(5)
        children = [tree.node(i).modes for i in tree.root.children]
        assert children == [(0, 1, 2), (3, 4)]

    def test_sixteen_modes_node_count_and_depth(self):
        tree = build_balanced_tree(16)
        assert len(tree.nodes) == 31
        assert len(tree.non_root_ids) == 30

        def depth(node_id):
            d = 0
            while tree.node(node_id).parent is not None:
                node_id = tree.node(node_id).parent
                d += 1
            return d

        assert max(depth(i) for i in range(31)) == 4

    def test_binary_partition_invariant(self):
        for n in (2, 3, 4, 7, 16):
            tree = build_balanced_tree(n)
            assert len(tree.nodes) == 2 * n - 1
            for node in tree.nodes:
                if node.children:
                    assert len(node.children) == 2
                    left, right = (tree.node(c).modes for c in node.children)
                    assert left + right == node.modes

    def test_deterministic(self):
        assert build_balanced_tree(8).nodes == build_balanced_tree(8).nodes

    def test_single_mode_rejected(self):
        with pytest.raises(ValueError):
            build_balanced_tree(1)


class TestNodeSpectra:
    def test_product_state_rank_one_everywhere(self):
        shape = ModeShape(4, 2)
        amps = np.zeros(16)
        amps[0] = 1.0
        spectra = node_spectra(State(shape, amps), build_balanced_tree(4))
        for sv in spectra.values():
            np.testing.assert_allclose(sv[0], 1.0, atol=1e-12)
            np.testing.assert_allclose(sv[1:], 0.0, atol=1e-12)

    def test_bell_leaf_spectra(self):
        bell = State(ModeShape(2, 2), np.array([1.0, 0, 0, 1.0]) / np.sqrt(2))
        spectra = node_spectra(bell, build_balanced_tree(2))
        for sv in spectra.values():
            np.testing.assert_allclose(sv, [1 / np.sqrt(2)] * 2, atol=1e-12)

    def test_ghz_two_schmidt_values_at_every_cut(self):
        spectra = node_spectra(ghz_state(4), build_balanced_tree(4))
        for sv in spectra.values():
            np.testing.assert_allclose(sv[:2], [1 / np.sqrt(2)] * 2, atol=1e-12)
            np.testing.assert_allclose(sv[2:], 0.0, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            node_spectra(random_state(4), build_balanced_tree(5))


class TestHsvdTruncate:
    def test_product_state_unchanged_at_rank_one(self):
        shape = ModeShape(4, 2)
        amps = np.zeros(16)
        amps[5] = 1.0
        state = State(shape, amps)
        out, report = hsvd_truncate(state, build_balanced_tree(4), RankBudget.uniform_rank(1))
        assert report.residual <= 1e-12
        np.testing.assert_allclose(out.amps, state.amps, atol=1e-12)

    def test_bell_rank_one_residual(self):
        bell = State(ModeShape(2, 2), np.array([1.0, 0, 0, 1.0]) / np.sqrt(2))
        _, report = hsvd_truncate(bell, build_balanced_tree(2), RankBudget.uniform_rank(1))
        assert abs(report.residual - 0.70710678) <= 1e-8

    def test_full_budget_is_exact(self):
        for n in (3, 4, 6):
            state = random_state(n)
            budget = RankBudget.uniform_rank(2 ** (n // 2))
            _, report = hsvd_truncate(state, build_balanced_tree(n), budget)
            assert report.residual <= 1e-12

    def test_tail_bound_over_random_states(self):
        for _ in range(60):
            n = int(RNG.choice([4, 6, 8]))
            state = random_state(n)
            rank = int(RNG.integers(1, 2 ** (n // 2) + 1))
            _, report = hsvd_truncate(
                state, build_balanced_tree(n), RankBudget.uniform_rank(rank)
            )
            assert report.residual**2 <= sum(report.per_node_tail.values()) + 1e-9

    def test_rank_feasibility_of_output(self):
        for _ in range(10):
            n = 6
            state = random_state(n)
            rank = int(RNG.integers(1, 5))
            tree = build_balanced_tree(n)
            out, _ = hsvd_truncate(state, tree, RankBudget.uniform_rank(rank))
            norm = out.norm()
            for node_id in tree.non_root_ids:
                sv = singular_values(matricize(out, tree.node(node_id).modes))
                assert np.sum(sv > 1e-9 * norm) <= rank

    def test_monotone_in_rank(self):
        state = random_state(6)
        tree = build_balanced_tree(6)
        residuals = [
            hsvd_truncate(state, tree, RankBudget.uniform_rank(r))[1].residual
            for r in range(1, 9)
        ]
        for lo, hi in zip(residuals[1:], residuals[:-1]):
            assert lo <= hi + 1e-10

    def test_non_expansive(self):
        for _ in range(10):
            state = random_state(5)
            out, _ = hsvd_truncate(state, build_balanced_tree(5), RankBudget.uniform_rank(2))
            assert out.norm() <= state.norm() + 1e-12

    def test_idempotent_at_same_budget(self):
        state = random_state(6)
        tree = build_balanced_tree(6)
        budget = RankBudget.uniform_rank(3)
        out, _ = hsvd_truncate(state, tree, budget)
        _, report = hsvd_truncate(out, tree, budget)
        assert report.residual <= 1e-10

    def test_two_mode_matches_truncated_svd(self):
        # Eckart--Young: for n=2 sequential HSVD is the best rank-r approximation.
        for _ in range(30):
            d = int(RNG.integers(2, 7))
            state = random_state(2, d=d)
            rank = int(RNG.integers(1, d))
            _, report = hsvd_truncate(
                state, build_balanced_tree(2), RankBudget.uniform_rank(rank)
            )
            sv = np.linalg.svd(state.amps.reshape(d, d, order="F"), compute_uv=False)
            best = np.sqrt(np.sum(sv[rank:] ** 2))
            assert abs(report.residual - best) <= 1e-10

    def test_budget_capped_at_max_possible_rank(self):
        state = random_state(4)
        out, report = hsvd_truncate(state, build_balanced_tree(4), RankBudget.uniform_rank(999))
        assert report.residual <= 1e-12
        assert all(r <= 4 for r in report.achieved_ranks.values())

    def test_achieved_ranks_within_budget(self):
        state = random_state(6)
        _, report = hsvd_truncate(state, build_balanced_tree(6), RankBudget.uniform_rank(3))
        assert all(1 <= r <= 3 for r in report.achieved_ranks.values())

    def test_report_spectra_are_of_the_input(self):
        state = random_state(5)
        tree = build_balanced_tree(5)
        _, report = hsvd_truncate(state, tree, RankBudget.uniform_rank(2))
        reference = node_spectra(state, tree)
        for node_id, sv in reference.items():
            np.testing.assert_allclose(report.per_node_spectra[node_id], sv, atol=1e-12)

    def test_renormalize_flag(self):
        state = random_state(6)
        out, _ = hsvd_truncate(
            state, build_balanced_tree(6), RankBudget.uniform_rank(2), renormalize=True
        )
        assert abs(out.norm() - 1.0) <= 1e-12

    def test_per_node_budget_and_coverage_error(self):
        state = random_state(4)
        tree = build_balanced_tree(4)
        full = {i: 2 for i in tree.non_root_ids}
        out, _ = hsvd_truncate(state, tree, RankBudget.from_map(full))
        assert out.norm() > 0
        with pytest.raises(ValueError):
            hsvd_truncate(state, tree, RankBudget.from_map({1: 2}))

    def test_invalid_rank_rejected(self):
        with pytest.raises(ValueError):
            RankBudget.uniform_rank(0)


class TestTruncationResidual:
    def test_identical_inputs(self):
        state = random_state(4)
        assert truncation_residual(state, state) == 0.0

    def test_unit_versus_zero(self):
        state = random_state(3)
        zero = State(state.shape, np.zeros_like(state.amps))
        assert abs(truncation_residual(state, zero) - 1.0) <= 1e-12

    def test_matches_bell_truncation(self):
        bell = State(ModeShape(2, 2), np.array([1.0, 0, 0, 1.0]) / np.sqrt(2))
        out, _ = hsvd_truncate(bell, build_balanced_tree(2), RankBudget.uniform_rank(1))
        assert abs(truncation_residual(bell, out) - 0.70710678) <= 1e-8

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            truncation_residual(random_state(2), random_state(3))
