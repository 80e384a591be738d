"""Quantum Fisher information of the cavity field.

Normalization follows the one used throughout this package:

    F_ph        = 1/2 Σ_ij (p_i − p_j)²/(p_i + p_j) |⟨i|n|j⟩|²
    (F_disp)_kl =     Σ_ij (p_i − p_j)²/(p_i + p_j) ⟨i|x^k|j⟩⟨j|x^l|i⟩
    M_av = Tr F_disp / 4,   M_opt = λ_max(F_disp) / 2

with x¹ = a + a†, x² = (a − a†)/i. Under it a pure state has F_ph = Var(n),
the squeezed vacuum has F_ph = 2(⟨n⟩² + ⟨n⟩), and every classical state obeys
F_ph ≤ ⟨n⟩ and M_av, M_opt ≤ 1 (vacuum saturates the last two). The standard
SLD quantum Fisher information for a generator G is 4× the F_ph-style value.

Terms with p_i + p_j < p_cut are skipped. Since the kernel is bounded by
p_i + p_j, the skipped mass is at most d²·p_cut·‖op‖² for a d-level state.
"""

import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rabi_dce.hilbert import (
    DensityMatrix,
    Operator,
    SpectralDecomposition,
    TOL_POS,
    clamp_spectrum,
    hermitian_eig,
    symmetrize,
)

logger = logging.getLogger(__name__)

P_CUT = 1e-12
P_FLOOR = 1e-10
VACUUM_N_MEAN = 1e-9


class QfiDisplacementMatrix:
    """Real symmetric 2x2 Fisher matrix over the quadrature pair (x¹, x²)."""

    __slots__ = ("entries",)

    def __init__(self, entries: ArrayLike):
        m = np.real(np.asarray(entries))
        if m.shape != (2, 2):
            raise ValueError(f"displacement Fisher matrix must be 2x2, got {m.shape}")
        self.entries: NDArray[np.float64] = (m + m.T) / 2

    @property
    def eigenvalues(self) -> NDArray[np.float64]:
        (f11, f12), (_, f22) = self.entries
        mid = (f11 + f22) / 2
        radius = np.hypot((f11 - f22) / 2, f12)
        return np.array([mid - radius, mid + radius])

    def m_av(self) -> float:
        return m_av(self)

    def m_opt(self) -> float:
        return m_opt(self)

    def __repr__(self):
        return f"QfiDisplacementMatrix({self.entries.tolist()})"


def _field_matrix(rho_cav: DensityMatrix | ArrayLike) -> NDArray[np.complex128]:
    if isinstance(rho_cav, Operator):
        if rho_cav.space != "field":
            raise ValueError(f"expected a field state, got {rho_cav.space}")
        return rho_cav.matrix
    return np.asarray(rho_cav, dtype=np.complex128)


def qfi_kernel(p: NDArray[np.float64], p_cut: float = P_CUT) -> NDArray[np.float64]:
    """(p_i − p_j)²/(p_i + p_j), zero where p_i + p_j < p_cut."""
    total = p[:, None] + p[None, :]
    kernel = np.zeros_like(total)
    keep = total >= p_cut
    kernel[keep] = (p[:, None] - p[None, :])[keep] ** 2 / total[keep]
    return kernel


def _spectrum(
    rho_cav: DensityMatrix | ArrayLike,
    spectrum: SpectralDecomposition | None,
    tol_pos: float,
    positivity_limit: float | None,
) -> SpectralDecomposition:
    spec = spectrum if spectrum is not None else hermitian_eig(_field_matrix(rho_cav))
    return SpectralDecomposition(clamp_spectrum(spec.eigenvalues, tol_pos, positivity_limit), spec.eigenvectors)


def qfi_generator(
    rho_cav: DensityMatrix | ArrayLike,
    generator: Operator | ArrayLike,
    *,
    p_cut: float = P_CUT,
    tol_pos: float = TOL_POS,
    positivity_limit: float | None = None,
    spectrum: SpectralDecomposition | None = None,
) -> float:
    """1/2 Σ K_ij |⟨i|G|j⟩|² for a Hermitian generator G."""
    spec = _spectrum(rho_cav, spectrum, tol_pos, positivity_limit)
    g = generator.matrix if isinstance(generator, Operator) else np.asarray(generator)
    g_ij = spec.in_eigenbasis(g)
    return float(0.5 * np.sum(qfi_kernel(spec.eigenvalues, p_cut) * np.abs(g_ij) ** 2))


def qfi_phase(
    rho_cav: DensityMatrix | ArrayLike,
    *,
    p_cut: float = P_CUT,
    tol_pos: float = TOL_POS,
    positivity_limit: float | None = None,
    spectrum: SpectralDecomposition | None = None,
) -> float:
    """Phase-estimation QFI with generator n."""
    spec = _spectrum(rho_cav, spectrum, tol_pos, positivity_limit)
    n_ij = spec.in_eigenbasis(np.diag(np.arange(len(spec.eigenvalues), dtype=np.float64)))
    return float(0.5 * np.sum(qfi_kernel(spec.eigenvalues, p_cut) * np.abs(n_ij) ** 2))


def ratio_r(f_ph: float, n_mean: float) -> float | None:
    """F_ph relative to the squeezed vacuum of equal ⟨n⟩; None for vacuum."""
    if n_mean < VACUUM_N_MEAN:
        logger.debug("ratio r undefined at n_mean=%g", n_mean)
        return None
    return 0.5 * f_ph / (n_mean**2 + n_mean)


def qfi_displacement(
    rho_cav: DensityMatrix | ArrayLike,
    *,
    p_cut: float = P_CUT,
    tol_pos: float = TOL_POS,
    positivity_limit: float | None = None,
    spectrum: SpectralDecomposition | None = None,
) -> QfiDisplacementMatrix:
    spec = _spectrum(rho_cav, spectrum, tol_pos, positivity_limit)
    kernel = qfi_kernel(spec.eigenvalues, p_cut)
    a = np.diag(np.sqrt(np.arange(1, len(spec.eigenvalues), dtype=np.float64)), k=1)
    # a in the eigenbasis; x¹ and x² follow from it and its adjoint
    a_ij = spec.in_eigenbasis(a)
    a_dag_ij = a_ij.conj().T
    x = (a_ij + a_dag_ij, (a_ij - a_dag_ij) / 1j)
    entries = np.empty((2, 2))
    for k in range(2):
        for j in range(k, 2):
            entries[k, j] = entries[j, k] = np.real(np.sum(kernel * x[k] * x[j].conj()))
    return QfiDisplacementMatrix(entries)


def m_av(f: QfiDisplacementMatrix) -> float:
    return float(np.trace(f.entries) / 4)


def m_opt(f: QfiDisplacementMatrix) -> float:
    return float(f.eigenvalues[-1] / 2)


# ============================================================================
# Fidelity oracle
# ============================================================================


def _psd_sqrt(matrix: NDArray[np.complex128]) -> NDArray[np.complex128]:
    spec = hermitian_eig(matrix)
    root = np.sqrt(np.clip(spec.eigenvalues, 0.0, None))
    return (spec.eigenvectors * root) @ spec.eigenvectors.conj().T


def root_fidelity(rho: ArrayLike, sigma: ArrayLike) -> float:
    """Tr √(√ρ σ √ρ), the square root of the Uhlmann fidelity.

    Evaluated as the nuclear norm ‖√ρ √σ‖₁.
    """
    product = _psd_sqrt(symmetrize(rho)) @ _psd_sqrt(symmetrize(sigma))
    return float(np.linalg.svd(product, compute_uv=False).sum())


def qfi_fidelity_oracle(
    rho_cav: DensityMatrix | ArrayLike,
    generator: Operator | ArrayLike,
    delta: float = 1e-3,
    *,
    p_floor: float = P_FLOOR,
) -> float:
    """Finite-difference QFI from the fidelity between ρ and e^{-iδG} ρ e^{iδG}.

    Returns 2(1 − √F_U)/δ², which equals the F_ph-style value
    1/2 Σ K_ij |G_ij|² up to O(δ²). The state is regularized to full rank
    with ``p_floor`` before use. Quadrature pairing: with generator x^k the
    oracle returns (F_disp)_kk / 2, so the vacuum gives 1 for both quadratures.
    """
    if not 1e-4 <= delta <= 1e-2:
        raise ValueError(f"delta={delta} outside [1e-4, 1e-2]")
    rho = symmetrize(_field_matrix(rho_cav))
    d = rho.shape[0]
    rho = rho + p_floor * np.eye(d)
    rho /= np.trace(rho).real
    g = generator.matrix if isinstance(generator, Operator) else np.asarray(generator, dtype=np.complex128)
    gen = hermitian_eig(g)
    u = (gen.eigenvectors * np.exp(-1j * delta * gen.eigenvalues)) @ gen.eigenvectors.conj().T
    sigma = u @ rho @ u.conj().T
    return 2 * (1 - root_fidelity(rho, sigma)) / delta**2
