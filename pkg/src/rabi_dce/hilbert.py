"""Truncated qubit ⊗ field Hilbert space.

Layout convention used by every module: composite index = q * N + m, with the
qubit index q major (q = 0 is |e⟩, q = 1 is |g⟩) and the Fock index m minor.
Storage is dense throughout.
"""

import logging
from typing import Literal, NamedTuple

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from rabi_dce.errors import DimensionError, EigensolverError, PositivityError
from rabi_dce.schemas import HilbertConfig

logger = logging.getLogger(__name__)

Space = Literal["field", "qubit", "composite"]
ComplexMatrix = NDArray[np.complex128]

QUBIT_DIM = 2
QUBIT_BASIS = ("e", "g")
EXCITED = 0
GROUND = 1

TOL_HERM = 1e-10
TOL_TRACE = 1e-8
TOL_POS = 1e-9


def space_dim(space: Space, n_fock: int) -> int:
    if space == "qubit":
        return QUBIT_DIM
    if space == "field":
        return n_fock
    return QUBIT_DIM * n_fock


class Operator:
    """Dense square matrix tagged with the subsystem it acts on."""

    __slots__ = ("matrix", "space")

    def __init__(self, matrix: ArrayLike, space: Space):
        m = np.asarray(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator matrix must be square, got shape {m.shape}")
        if space == "qubit" and m.shape[0] != QUBIT_DIM:
            raise DimensionError(f"qubit operator must be 2x2, got {m.shape}")
        if space == "composite" and m.shape[0] % QUBIT_DIM:
            raise DimensionError(f"composite dimension {m.shape[0]} is not a multiple of {QUBIT_DIM}")
        self.matrix: ComplexMatrix = m
        self.space: Space = space

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_fock(self) -> int:
        if self.space == "field":
            return self.dim
        if self.space == "composite":
            return self.dim // QUBIT_DIM
        raise DimensionError("a qubit operator has no field dimension")

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.space)

    def check_config(self, config: HilbertConfig) -> None:
        expected = space_dim(self.space, config.n_fock)
        if self.dim != expected:
            raise DimensionError(f"{self.space} operator has dimension {self.dim}, expected {expected}")

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.space != other.space or self.dim != other.dim:
            raise DimensionError(f"cannot compose {self.space}[{self.dim}] with {other.space}[{other.dim}]")
        return Operator(self.matrix @ other.matrix, self.space)

    def __repr__(self):
        return f"Operator({self.space}, dim={self.dim})"


class DensityMatrix(Operator):
    """Hermitian, unit-trace state; checked on construction unless ``check=False``."""

    __slots__ = ()

    def __init__(
        self,
        matrix: ArrayLike,
        space: Space,
        *,
        check: bool = True,
        tol_herm: float = TOL_HERM,
        tol_trace: float = TOL_TRACE,
    ):
        super().__init__(matrix, space)
        if check:
            drift = hermiticity_drift(self.matrix)
            if drift > tol_herm:
                raise ValueError(f"density matrix is not Hermitian (max |ρ-ρ†| = {drift:.3g})")
            trace_error = abs(np.trace(self.matrix) - 1.0)
            if trace_error > tol_trace:
                raise ValueError(f"density matrix trace deviates from 1 by {trace_error:.3g}")

    @classmethod
    def from_ket(cls, ket: ArrayLike, space: Space) -> "DensityMatrix":
        psi = np.asarray(ket, dtype=np.complex128).ravel()
        return cls(np.outer(psi, psi.conj()), space)

    def check_positive(self, tol_pos: float = TOL_POS) -> float:
        """Return the smallest eigenvalue, raising if it is below ``-tol_pos``."""
        lowest = float(hermitian_eigvals(self.matrix)[0])
        if lowest < -tol_pos:
            raise PositivityError(
                f"{self.space} state has eigenvalue {lowest:.3g} below -{tol_pos:g}",
                diagnostics={"min_eigenvalue": lowest},
            )
        return lowest

    def __repr__(self):
        return f"DensityMatrix({self.space}, dim={self.dim})"


class SpectralDecomposition(NamedTuple):
    eigenvalues: NDArray[np.float64]
    eigenvectors: ComplexMatrix

    def reconstruct(self) -> ComplexMatrix:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def in_eigenbasis(self, op: ArrayLike) -> ComplexMatrix:
        """Matrix elements ⟨i|op|j⟩ between eigenvectors."""
        v = self.eigenvectors
        return v.conj().T @ np.asarray(op) @ v


# ============================================================================
# Operators
# ============================================================================


def fock_ladder(config: HilbertConfig) -> tuple[Operator, Operator, Operator]:
    """Annihilation, creation and number operators on the truncated field."""
    n = config.n_fock
    a = np.diag(np.sqrt(np.arange(1, n, dtype=np.float64)), k=1).astype(np.complex128)
    a_dag = a.conj().T
    number = np.diag(np.arange(n, dtype=np.float64)).astype(np.complex128)
    return Operator(a, "field"), Operator(a_dag, "field"), Operator(number, "field")


def quadratures(config: HilbertConfig) -> tuple[Operator, Operator]:
    """x¹ = a + a† and x² = (a − a†)/i."""
    a, a_dag, _ = fock_ladder(config)
    x1 = a.matrix + a_dag.matrix
    x2 = (a.matrix - a_dag.matrix) / 1j
    return Operator(x1, "field"), Operator(x2, "field")


def qubit_ops() -> tuple[Operator, Operator, Operator]:
    """σ_z, σ_+ = |e⟩⟨g| and σ_− in the (|e⟩, |g⟩) basis."""
    sigma_z = np.diag([1.0, -1.0]).astype(np.complex128)
    sigma_plus = np.zeros((QUBIT_DIM, QUBIT_DIM), dtype=np.complex128)
    sigma_plus[EXCITED, GROUND] = 1.0
    return Operator(sigma_z, "qubit"), Operator(sigma_plus, "qubit"), Operator(sigma_plus.T.copy(), "qubit")


def identity(space: Space, config: HilbertConfig) -> Operator:
    return Operator(np.eye(space_dim(space, config.n_fock), dtype=np.complex128), space)


def tensor(q: Operator, f: Operator) -> Operator:
    """Kronecker product in the fixed qubit ⊗ field order."""
    if q.space != "qubit" or f.space != "field":
        raise DimensionError(f"tensor expects (qubit, field) operators, got ({q.space}, {f.space})")
    return Operator(np.kron(q.matrix, f.matrix), "composite")


def lift_qubit(q: Operator, config: HilbertConfig) -> Operator:
    return tensor(q, identity("field", config))


def lift_field(f: Operator) -> Operator:
    return tensor(Operator(np.eye(QUBIT_DIM), "qubit"), f)


# ============================================================================
# Subsystem maps
# ============================================================================


def _as_blocks(matrix: ArrayLike) -> NDArray[np.complex128]:
    m = np.asarray(matrix)
    d = m.shape[0]
    if m.ndim != 2 or m.shape[1] != d or d % QUBIT_DIM:
        raise DimensionError(f"expected a square composite matrix, got shape {m.shape}")
    n = d // QUBIT_DIM
    return m.reshape(QUBIT_DIM, n, QUBIT_DIM, n)


def partial_trace_qubit(rho: DensityMatrix | ArrayLike) -> DensityMatrix:
    """ρ_cav = Tr_qubit ρ."""
    if isinstance(rho, Operator):
        if rho.space != "composite":
            raise DimensionError(f"partial trace needs a composite state, got {rho.space}")
        rho = rho.matrix
    blocks = _as_blocks(rho)
    return DensityMatrix(np.einsum("qaqb->ab", blocks), "field", check=False)


def partial_transpose(rho: DensityMatrix | ArrayLike) -> ComplexMatrix:
    """Transpose on the qubit index only."""
    if isinstance(rho, Operator):
        if rho.space != "composite":
            raise DimensionError(f"partial transpose needs a composite state, got {rho.space}")
        rho = rho.matrix
    blocks = _as_blocks(rho)
    d = blocks.shape[0] * blocks.shape[1]
    return blocks.transpose(2, 1, 0, 3).reshape(d, d).copy()


def tail_population(rho: DensityMatrix | ArrayLike, tail_levels: int) -> float:
    """Population of the ``tail_levels`` highest Fock levels, summed over the qubit."""
    matrix = rho.matrix if isinstance(rho, Operator) else np.asarray(rho)
    blocks = _as_blocks(matrix)
    n = blocks.shape[1]
    diag = np.real(np.einsum("qmqm->m", blocks))
    return float(diag[n - tail_levels :].sum())


# ============================================================================
# Linear algebra
# ============================================================================


def symmetrize(matrix: ArrayLike) -> ComplexMatrix:
    m = np.asarray(matrix, dtype=np.complex128)
    return (m + m.conj().T) / 2


def hermiticity_drift(matrix: ArrayLike) -> float:
    m = np.asarray(matrix)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def hermitian_eig(matrix: Operator | ArrayLike) -> SpectralDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvectors of (M + M†)/2."""
    m = symmetrize(matrix.matrix if isinstance(matrix, Operator) else matrix)
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(m)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise EigensolverError(f"Hermitian eigensolver failed on a {m.shape[0]}x{m.shape[0]} matrix: {e}") from e
    return SpectralDecomposition(np.asarray(eigenvalues, dtype=np.float64), eigenvectors)


def hermitian_eigvals(matrix: Operator | ArrayLike) -> NDArray[np.float64]:
    m = symmetrize(matrix.matrix if isinstance(matrix, Operator) else matrix)
    try:
        return np.asarray(scipy.linalg.eigvalsh(m), dtype=np.float64)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise EigensolverError(f"Hermitian eigensolver failed on a {m.shape[0]}x{m.shape[0]} matrix: {e}") from e


def clamp_spectrum(
    eigenvalues: NDArray[np.float64], tol_pos: float = TOL_POS, positivity_limit: float | None = None
) -> NDArray[np.float64]:
    """Clamp a density-matrix spectrum into [0, 1].

    Eigenvalues down to ``-tol_pos`` are integration noise and become 0. Below
    ``-positivity_limit`` (default ``tol_pos``) the state is broken and this
    raises; in between the eigenvalue is clamped with a warning.
    """
    limit = max(tol_pos, positivity_limit if positivity_limit is not None else tol_pos)
    lowest = float(eigenvalues.min()) if eigenvalues.size else 0.0
    if lowest < -limit:
        raise PositivityError(f"eigenvalue {lowest:.3g} below -{limit:g}", diagnostics={"min_eigenvalue": lowest})
    if lowest < -tol_pos:
        logger.warning("clamping eigenvalue %.3g below -%g", lowest, tol_pos)
    return np.clip(eigenvalues, 0.0, 1.0)


# ============================================================================
# States
# ============================================================================


def basis_ket(qubit: int, m: int, n_fock: int) -> NDArray[np.complex128]:
    """|q, m⟩ with q = EXCITED or GROUND."""
    if qubit not in (EXCITED, GROUND) or not 0 <= m < n_fock:
        raise DimensionError(f"no basis state |{qubit}, {m}⟩ with n_fock={n_fock}")
    ket = np.zeros(QUBIT_DIM * n_fock, dtype=np.complex128)
    ket[qubit * n_fock + m] = 1.0
    return ket


def fock_ket(m: int, n_fock: int) -> NDArray[np.complex128]:
    if not 0 <= m < n_fock:
        raise DimensionError(f"Fock level {m} outside truncation {n_fock}")
    ket = np.zeros(n_fock, dtype=np.complex128)
    ket[m] = 1.0
    return ket


def coherent_ket(alpha: complex, n_fock: int) -> NDArray[np.complex128]:
    """Truncated coherent state from the Poisson amplitude recursion, renormalized."""
    amps = np.zeros(n_fock, dtype=np.complex128)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for m in range(1, n_fock):
        amps[m] = amps[m - 1] * alpha / np.sqrt(m)
    return amps / np.linalg.norm(amps)


def squeezed_vacuum_ket(mean_photons: float, n_fock: int, phase: float = 0.0) -> NDArray[np.complex128]:
    """Squeezed vacuum with ⟨n⟩ = sinh²r, built from the even-Fock amplitude recursion.

    c_{2k+2} = -e^{iφ} tanh r √((2k+1)/(2k+2)) c_{2k}; odd amplitudes vanish.
    """
    r = np.arcsinh(np.sqrt(mean_photons))
    ratio = -np.exp(1j * phase) * np.tanh(r)
    amps = np.zeros(n_fock, dtype=np.complex128)
    amps[0] = 1.0 / np.sqrt(np.cosh(r))
    for m in range(2, n_fock, 2):
        amps[m] = amps[m - 2] * ratio * np.sqrt((m - 1) / m)
    return amps / np.linalg.norm(amps)


def thermal_state(mean_photons: float, n_fock: int) -> DensityMatrix:
    m = np.arange(n_fock)
    if mean_photons == 0:
        weights = (m == 0).astype(np.float64)
    else:
        weights = (mean_photons / (1 + mean_photons)) ** m
    return DensityMatrix(np.diag(weights / weights.sum()), "field")


def initial_state(config: HilbertConfig) -> DensityMatrix:
    """|g, 0⟩⟨g, 0|, the vacuum the modulation starts from."""
    return DensityMatrix.from_ket(basis_ket(GROUND, 0, config.n_fock), "composite")
