"""Qubit excitation, photon statistics, purity and entanglement of the joint state."""

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rabi_dce.hilbert import (
    EXCITED,
    DensityMatrix,
    Operator,
    hermitian_eigvals,
    partial_transpose,
)
from rabi_dce.schemas import PhotonDistribution

# Lower clamp applied to Fock populations before they are reported.
POPULATION_FLOOR = -1e-10


def _matrix(rho: DensityMatrix | ArrayLike, space: str) -> NDArray[np.complex128]:
    if isinstance(rho, Operator):
        if rho.space != space:
            raise ValueError(f"expected a {space} state, got {rho.space}")
        return rho.matrix
    return np.asarray(rho, dtype=np.complex128)


def atomic_excitation(rho: DensityMatrix | ArrayLike) -> float:
    """P_e = Tr[ρ |e⟩⟨e|]."""
    m = _matrix(rho, "composite")
    n = m.shape[0] // 2
    block = slice(EXCITED * n, EXCITED * n + n)
    return float(np.clip(np.real(np.trace(m[block, block])), 0.0, 1.0))


def photon_moments(rho_cav: DensityMatrix | ArrayLike) -> tuple[float, float]:
    """(⟨n⟩, Δn) of the field state."""
    p = np.real(np.diag(_matrix(rho_cav, "field")))
    m = np.arange(p.size, dtype=np.float64)
    mean = float(np.dot(m, p))
    variance = float(np.dot(m * m, p)) - mean**2
    return max(mean, 0.0), float(np.sqrt(max(variance, 0.0)))


def linear_entropy(rho_cav: DensityMatrix | ArrayLike) -> float:
    """S_L = 1 − Tr ρ²; for Hermitian ρ, Tr ρ² = Σ |ρ_ij|²."""
    m = _matrix(rho_cav, "field")
    return float(1.0 - np.sum(np.abs(m) ** 2))


def negativity(rho: DensityMatrix | ArrayLike) -> float:
    """Absolute sum of the negative eigenvalues of the qubit-side partial transpose."""
    eigenvalues = hermitian_eigvals(partial_transpose(_matrix(rho, "composite")))
    return max(0.0, float(-eigenvalues[eigenvalues < 0].sum()))


def photon_distribution(rho_cav: DensityMatrix | ArrayLike, t: float) -> PhotonDistribution:
    p = np.real(np.diag(_matrix(rho_cav, "field")))
    return PhotonDistribution(t=t, probabilities=np.clip(p, POPULATION_FLOOR, 1.0).tolist())
