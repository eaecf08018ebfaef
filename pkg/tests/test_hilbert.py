"""Tests for state preparation and single-spin observables."""

import numpy as np
import pytest

from spin_decohere.errors import DimensionError, InvalidParameterError
from spin_decohere.hilbert import (
    StateVector,
    basis_state,
    dimension,
    inner_product,
    measure_sz,
    prepare_initial_state,
    random_state,
    total_sz,
)


class TestDimension:
    """Test suite for Hilbert space sizes."""

    def test_dimension(self):
        """Test the dimension 2^(L+2)."""
        assert dimension(0) == 4
        assert dimension(10) == 4096

    def test_negative_bath_rejected(self):
        """Test that a negative bath size is invalid."""
        with pytest.raises(InvalidParameterError):
            dimension(-1)

    def test_index_width_exceeded(self):
        """Test that more than 62 spins do not fit a basis index."""
        with pytest.raises(DimensionError):
            dimension(61)


class TestStateVector:
    """Test suite for the StateVector type."""

    def test_shape_mismatch(self):
        """Test that the amplitude count must be 2^num_spins."""
        with pytest.raises(InvalidParameterError):
            StateVector(np.zeros(5), 2)

    def test_amplitudes_are_read_only_copies(self):
        """Test that a state neither aliases nor freezes the caller's array."""
        source = np.zeros(4, dtype=np.complex128)
        source[0] = 1.0
        state = StateVector(source, 2)
        source[0] = 0.0
        assert state.amplitudes[0] == 1.0
        with pytest.raises(ValueError):
            state.amplitudes[0] = 2.0

    def test_writable_copy(self):
        """Test that writable copies can be modified freely."""
        state = basis_state(2, 3)
        psi = state.writable_copy()
        psi[3] = 0.0
        assert state.amplitudes[3] == 1.0


class TestInitialState:
    """Test suite for the central-spin initial state."""

    def test_no_bath(self):
        """Test that L=0 gives |up>_0 |down>_1, basis index 1."""
        state = prepare_initial_state(0, seed=7)
        np.testing.assert_array_equal(state.amplitudes, [0, 1, 0, 0])
        assert measure_sz(state, 0) == pytest.approx(0.5, abs=1e-12)
        assert measure_sz(state, 1) == pytest.approx(-0.5, abs=1e-12)

    def test_normalized_product_state(self):
        """Test normalization and the central spin occupation."""
        state = prepare_initial_state(3, seed=11)
        assert state.num_spins == 5
        assert state.norm() == pytest.approx(1.0, abs=1e-14)
        indices = np.arange(state.dimension)
        wrong_central = ((indices & 1) == 0) | (((indices >> 1) & 1) == 1)
        assert np.all(state.amplitudes[wrong_central] == 0)
        assert measure_sz(state, 0) == pytest.approx(0.5, abs=1e-12)

    def test_bath_spins_vary(self):
        """Test that bath spins have bounded, realization-dependent <S^z>."""
        state = prepare_initial_state(4, seed=3)
        values = [measure_sz(state, site) for site in range(2, 6)]
        assert all(abs(v) <= 0.5 + 1e-12 for v in values)
        assert len(set(np.round(values, 12))) > 1

    def test_seed_reproducibility(self):
        """Test that equal seeds give equal states and different seeds differ."""
        a = prepare_initial_state(3, seed=42)
        b = prepare_initial_state(3, seed=42)
        c = prepare_initial_state(3, seed=43)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
        assert not np.allclose(a.amplitudes, c.amplitudes)

    def test_negative_seed_accepted(self):
        """Test that negative seeds map into the 64-bit seed range."""
        state = prepare_initial_state(2, seed=-1)
        assert state.norm() == pytest.approx(1.0)


class TestObservables:
    """Test suite for magnetization and overlaps."""

    def test_measure_sz_out_of_range(self):
        """Test that invalid sites are rejected."""
        with pytest.raises(InvalidParameterError):
            measure_sz(basis_state(2, 0), 2)

    def test_total_sz_basis_state(self):
        """Test total magnetization of |up, down, up>."""
        state = basis_state(3, 0b101)
        assert total_sz(state) == pytest.approx(0.5)

    def test_total_sz_is_sum_of_sites(self):
        """Test that total_sz agrees with the per-site sum."""
        state = random_state(4, np.random.default_rng(5))
        expected = sum(measure_sz(state, site) for site in range(4))
        assert total_sz(state) == pytest.approx(expected, abs=1e-14)

    def test_inner_product(self):
        """Test orthonormality of basis states."""
        assert inner_product(basis_state(2, 1), basis_state(2, 1)) == 1
        assert inner_product(basis_state(2, 1), basis_state(2, 2)) == 0

    def test_cauchy_schwarz(self):
        """Test |<a|b>| <= ||a|| ||b||, with equality for a state and itself."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            a, b = random_state(4, rng), random_state(4, rng)
            assert abs(inner_product(a, b)) <= a.norm() * b.norm() + 1e-15
        assert abs(inner_product(a, a)) == pytest.approx(a.norm() ** 2)

    def test_inner_product_mismatch(self):
        """Test that states of different size cannot be compared."""
        with pytest.raises(InvalidParameterError):
            inner_product(basis_state(2, 0), basis_state(3, 0))

    def test_random_state_normalized(self):
        """Test the normalization of random states."""
        state = random_state(5, np.random.default_rng(0))
        assert state.norm() == pytest.approx(1.0, abs=1e-14)
