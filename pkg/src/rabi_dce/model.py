"""Quantum Rabi Hamiltonian with a chirped sinusoidal qubit-frequency modulation.

    H(t) = Ω(t)/2 σ_z + ν n + g (a + a†)(σ_+ + σ_−)
    Ω(t) = Ω₀ + ε sin[η(t) t],   η(t) = η₀ + α t

The phase of the modulation is η(t)·t, not ∫η dt. The full counter-rotating
coupling is kept.
"""

from functools import lru_cache

import numpy as np

from rabi_dce.hilbert import ComplexMatrix, Operator, fock_ladder, identity, lift_field, qubit_ops, tensor
from rabi_dce.schemas import HilbertConfig, SystemParams


def modulation_frequency(t: float, p: SystemParams) -> float:
    return p.eta0 + p.alpha * t


def qubit_frequency(t: float, p: SystemParams) -> float:
    if p.eps == 0:
        return p.omega0
    return p.omega0 + p.eps * np.sin(modulation_frequency(t, p) * t)


@lru_cache(maxsize=32)
def _static_parts(p: SystemParams, config: HilbertConfig) -> tuple[ComplexMatrix, ComplexMatrix]:
    """(ν n + g x¹ σ_x, σ_z ⊗ I) on the composite space."""
    a, a_dag, n = fock_ladder(config)
    sigma_z, sigma_plus, sigma_minus = qubit_ops()
    sigma_x = Operator(sigma_plus.matrix + sigma_minus.matrix, "qubit")
    x1 = Operator(a.matrix + a_dag.matrix, "field")
    static = p.nu * lift_field(n).matrix + p.g * tensor(sigma_x, x1).matrix
    sz = tensor(sigma_z, identity("field", config)).matrix
    static.setflags(write=False)
    sz.setflags(write=False)
    return static, sz


def hamiltonian(t: float, p: SystemParams, config: HilbertConfig) -> Operator:
    """Dense composite H(t); depends on t only through Ω(t)."""
    static, sz = _static_parts(p, config)
    return Operator(static + (qubit_frequency(t, p) / 2) * sz, "composite")


def bare_energies(p: SystemParams, n_fock: int) -> np.ndarray:
    """Diagonal of ν n + Ω₀ σ_z / 2, the part removed in the rotating frame."""
    m = np.arange(n_fock, dtype=np.float64)
    return np.concatenate([p.nu * m + p.omega0 / 2, p.nu * m - p.omega0 / 2])
