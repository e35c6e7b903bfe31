"""Tensorized state vectors: indexing, matricization, local operators."""

import numpy as np
import pytest

from htcontrol.model import SIGMA_X
from htcontrol.tensor import (
    ModeShape,
    State,
    apply_local_term,
    dematricize,
    inner,
    linear_index,
    matricize,
    multi_index,
    singular_values,
)

RNG = np.random.default_rng(12345)


def random_state(n, d=2, rng=RNG):
    shape = ModeShape(n, d)
    amps = rng.standard_normal(shape.total_dim) + 1j * rng.standard_normal(shape.total_dim)
    return State(shape, amps / np.linalg.norm(amps))


class TestLinearIndex:
    def test_zero_multi_index(self):
        assert linear_index([0, 0, 0], ModeShape(3, 2)) == 0

    def test_mode_zero_is_fastest(self):
        assert linear_index([1, 0], ModeShape(2, 2)) == 1

    def test_hand_evaluated_sum(self):
        # 1*1 + 1*2 + 0*4 + 1*8
        assert linear_index([1, 1, 0, 1], ModeShape(4, 2)) == 11

    def test_round_trip_with_inverse(self):
        shape = ModeShape(5, 3)
        for index in RNG.integers(0, shape.total_dim, size=50):
            assert linear_index(multi_index(int(index), shape), shape) == index

    def test_out_of_range_value_rejected(self):
        with pytest.raises(ValueError):
            linear_index([0, 2], ModeShape(2, 2))


class TestMatricize:
    def test_product_state_rank_one_layout(self):
        state = State(ModeShape(2, 2), np.array([1.0, 0, 0, 0]))
        np.testing.assert_allclose(matricize(state, {0}), [[1, 0], [0, 0]])

    def test_bell_state_is_scaled_identity(self):
        bell = State(ModeShape(2, 2), np.array([1.0, 0, 0, 1.0]) / np.sqrt(2))
        np.testing.assert_allclose(matricize(bell, {0}), np.eye(2) / np.sqrt(2), atol=1e-15)

    def test_reshape_preserves_entry_multiset(self):
        state = random_state(4)
        m = matricize(state, set(range(3)))
        assert m.shape == (8, 2)
        np.testing.assert_allclose(
            np.sort_complex(m.reshape(-1)), np.sort_complex(state.amps.copy())
        )

    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_round_trip_all_subset_sizes(self, n):
        state = random_state(n)
        for size in {1, n // 2, n - 1} - {0}:
            subset = tuple(RNG.permutation(n)[:size])
            back = dematricize(matricize(state, subset), subset, state.shape)
            np.testing.assert_array_equal(back.amps, state.amps)

    def test_empty_and_full_subsets_rejected(self):
        state = random_state(3)
        with pytest.raises(ValueError):
            matricize(state, set())
        with pytest.raises(ValueError):
            matricize(state, {0, 1, 2})


class TestApplyLocalTerm:
    def test_sigma_x_flips_first_site(self):
        n = 4
        shape = ModeShape(n, 2)
        zeros = np.zeros(shape.total_dim)
        zeros[0] = 1.0
        flipped = apply_local_term(State(shape, zeros), SIGMA_X, [0])
        expected = np.zeros(shape.total_dim)
        expected[1] = 1.0  # little-endian: site 0 flipped -> index 1
        np.testing.assert_allclose(flipped.amps, expected)

    def test_identity_leaves_state_bitwise(self):
        state = random_state(4)
        out = apply_local_term(state, np.eye(4), [1, 3])
        np.testing.assert_array_equal(out.amps, state.amps)

    def test_swap_negates_singlet(self):
        swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
        singlet = State(ModeShape(2, 2), np.array([0, 1.0, -1.0, 0]) / np.sqrt(2))
        out = apply_local_term(singlet, swap, [0, 1])
        np.testing.assert_allclose(out.amps, -singlet.amps, atol=1e-15)

    def test_input_not_mutated(self):
        state = random_state(3)
        before = state.amps.copy()
        apply_local_term(state, SIGMA_X, [2])
        np.testing.assert_array_equal(state.amps, before)

    def test_unitary_preserves_norm(self):
        for _ in range(10):
            state = random_state(5)
            h = RNG.standard_normal((4, 4)) + 1j * RNG.standard_normal((4, 4))
            u = np.linalg.qr(h)[0]
            support = tuple(RNG.permutation(5)[:2])
            out = apply_local_term(state, u, support)
            assert abs(out.norm() - 1.0) <= 1e-12

    def test_disjoint_supports_commute(self):
        for _ in range(10):
            state = random_state(6)
            mats = []
            for _ in range(2):
                h = RNG.standard_normal((4, 4)) + 1j * RNG.standard_normal((4, 4))
                mats.append(h + h.conj().T)
            perm = RNG.permutation(6)
            sup_a, sup_b = tuple(perm[:2]), tuple(perm[2:4])
            ab = apply_local_term(apply_local_term(state, mats[0], sup_a), mats[1], sup_b)
            ba = apply_local_term(apply_local_term(state, mats[1], sup_b), mats[0], sup_a)
            np.testing.assert_allclose(ab.amps, ba.amps, atol=1e-12)

    def test_bad_support_rejected(self):
        state = random_state(3)
        with pytest.raises(ValueError):
            apply_local_term(state, SIGMA_X, [3])


class TestInner:
    def test_self_inner_is_one_for_unit(self):
        state = random_state(4)
        assert abs(inner(state, state) - 1.0) <= 1e-12

    def test_orthogonal_basis_states(self):
        shape = ModeShape(1, 2)
        zero = State(shape, np.array([1.0, 0]))
        one = State(shape, np.array([0, 1.0]))
        assert inner(zero, one) == 0

    def test_conjugate_linear_in_first_argument(self):
        state = random_state(3)
        theta = 0.3
        rotated = State(state.shape, np.exp(1j * theta) * state.amps)
        assert abs(inner(rotated, state) - np.exp(-1j * theta)) <= 1e-12

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            inner(random_state(2), random_state(3))


class TestSingularValues:
    def test_identity_spectrum(self):
        np.testing.assert_allclose(singular_values(np.eye(2)), [1.0, 1.0])

    def test_scaled_identity(self):
        np.testing.assert_allclose(
            singular_values(np.eye(2) / np.sqrt(2)), [0.70710678, 0.70710678], atol=1e-8
        )

    def test_zero_matrix(self):
        np.testing.assert_allclose(singular_values(np.zeros((3, 4))), np.zeros(3))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            singular_values(np.array([[np.nan, 0], [0, 1]]))

    def test_frobenius_norm_identity(self):
        for _ in range(10):
            m = RNG.standard_normal((5, 9)) + 1j * RNG.standard_normal((5, 9))
            sv = singular_values(m)
            assert np.all(np.diff(sv) <= 0)
            frob2 = np.linalg.norm(m) ** 2
            assert abs(np.sum(sv**2) - frob2) <= 1e-10 * frob2

    def test_schmidt_symmetry_across_complement(self):
        for n in (3, 4, 5):
            state = random_state(n)
            subset = tuple(RNG.permutation(n)[: n // 2 or 1])
            complement = tuple(m for m in range(n) if m not in subset)
            sv_a = singular_values(matricize(state, subset))
            sv_b = singular_values(matricize(state, complement))
            k = min(len(sv_a), len(sv_b))
            np.testing.assert_allclose(sv_a[:k], sv_b[:k], atol=1e-10)
            assert abs(np.sum(sv_a**2) - 1.0) <= 1e-10
