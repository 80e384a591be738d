"""Tests for qubit excitation, photon statistics, purity and negativity."""

import math

import numpy as np
import pytest
import scipy.linalg

from rabi_dce.hilbert import (
    EXCITED,
    GROUND,
    DensityMatrix,
    basis_ket,
    partial_trace_qubit,
    squeezed_vacuum_ket,
    thermal_state,
)
from rabi_dce.io import format_value
from rabi_dce.observables import (
    atomic_excitation,
    linear_entropy,
    negativity,
    photon_distribution,
    photon_moments,
)

from .conftest import random_density_matrix


def bell_like(n_fock: int = 4) -> DensityMatrix:
    """(|e,1⟩ + |g,0⟩)/√2."""
    ket = (basis_ket(EXCITED, 1, n_fock) + basis_ket(GROUND, 0, n_fock)) / np.sqrt(2)
    return DensityMatrix.from_ket(ket, "composite")


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    h = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scipy.linalg.expm(1j * (h + h.conj().T) / 2)


@pytest.mark.unit
class TestAtomicExcitation:
    """Test P_e."""

    def test_excited_and_ground(self):
        assert atomic_excitation(DensityMatrix.from_ket(basis_ket(EXCITED, 2, 4), "composite")) == 1.0
        assert atomic_excitation(DensityMatrix.from_ket(basis_ket(GROUND, 2, 4), "composite")) == 0.0

    def test_superposition(self):
        assert atomic_excitation(bell_like()) == pytest.approx(0.5)

    def test_rejects_field_state(self):
        with pytest.raises(ValueError, match="composite"):
            atomic_excitation(thermal_state(0.1, 4))


@pytest.mark.unit
class TestPhotonStatistics:
    """Test photon moments and the Fock distribution."""

    def test_thermal_moments(self):
        mean, std = photon_moments(thermal_state(1.5, 80))
        assert mean == pytest.approx(1.5, rel=1e-8)
        # thermal variance n̄(n̄+1)
        assert std == pytest.approx(np.sqrt(1.5 * 2.5), rel=1e-8)

    def test_mean_matches_distribution(self, rng):
        rho_cav = partial_trace_qubit(random_density_matrix(12, 3, rng))
        mean, _ = photon_moments(rho_cav)
        assert photon_distribution(rho_cav, 0.0).mean == pytest.approx(mean, abs=1e-10)

    def test_vacuum_distribution(self):
        dist = photon_distribution(thermal_state(0.0, 5), 7.0)
        assert dist.t == 7.0
        assert dist.probabilities == [1.0, 0.0, 0.0, 0.0, 0.0]

    def test_squeezed_vacuum_has_even_support(self):
        dist = photon_distribution(DensityMatrix.from_ket(squeezed_vacuum_ket(2.0, 60), "field"), 0.0)
        assert max(abs(p) for p in dist.probabilities[1::2]) < 1e-12

    def test_clamps_noise(self):
        rho = np.diag([1.0 + 1e-11, -1e-11, -1e-3]).astype(complex)
        dist = photon_distribution(rho, 0.0)
        assert dist.probabilities[0] == 1.0
        assert dist.probabilities[1] == pytest.approx(-1e-11)
        assert dist.probabilities[2] == pytest.approx(-1e-10)


@pytest.mark.unit
class TestPurityAndEntanglement:
    """Test linear entropy and negativity."""

    def test_linear_entropy_pure_and_mixed(self):
        assert linear_entropy(DensityMatrix.from_ket(squeezed_vacuum_ket(1.0, 40), "field")) == pytest.approx(
            0.0, abs=1e-12
        )
        assert linear_entropy(np.eye(4) / 4) == pytest.approx(0.75)

    def test_product_state_has_no_negativity(self, rng):
        rho = np.kron(random_density_matrix(2, 2, rng), random_density_matrix(4, 3, rng))
        assert negativity(rho) == pytest.approx(0.0, abs=1e-10)

    def test_separable_diagonal_state_has_positive_zero(self):
        rho = np.diag([0.0, 0.0, 1.0, 0.0]).astype(complex)
        value = negativity(rho)
        assert value == 0.0
        assert math.copysign(1.0, value) == 1.0
        assert format_value(value) == "0.0"

    def test_bell_like_state(self):
        assert negativity(bell_like()) == pytest.approx(0.5, abs=1e-12)

    def test_werner_family(self):
        bell = bell_like(2).matrix
        for p in np.linspace(0, 1, 11):
            rho = p * bell + (1 - p) * np.eye(4) / 4
            assert negativity(rho) == pytest.approx(max(0.0, (3 * p - 1) / 4), abs=1e-12)

    def test_invariant_under_local_unitaries(self, rng):
        rho = random_density_matrix(8, 2, rng)
        u = np.kron(random_unitary(2, rng), random_unitary(4, rng))
        assert negativity(u @ rho @ u.conj().T) == pytest.approx(negativity(rho), abs=1e-9)

    def test_reduced_state_of_entangled_pure_state_is_mixed(self):
        rho_cav = partial_trace_qubit(bell_like())
        assert linear_entropy(rho_cav) == pytest.approx(0.5)
