"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest

from rabi_dce.config import parse_config_text, resolve_config
from rabi_dce.evolve import dissipator
from rabi_dce.hilbert import DensityMatrix, fock_ladder, lift_field, lift_qubit, qubit_ops
from rabi_dce.model import hamiltonian
from rabi_dce.schemas import HilbertConfig, SystemParams

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run the long acceptance runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def random_density_matrix(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Random rank-``rank`` state from a Ginibre matrix."""
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def dense_master_rhs(t: float, rho: np.ndarray, p: SystemParams, config: HilbertConfig) -> np.ndarray:
    """Reference right-hand side built from full operator matrices."""
    h = hamiltonian(t, p, config).matrix
    a, _, _ = fock_ladder(config)
    sigma_z, _, sigma_minus = qubit_ops()
    out = -1j * (h @ rho - rho @ h)
    out += p.gamma * dissipator(lift_qubit(sigma_minus, config), rho)
    out += p.gamma_phi * dissipator(lift_qubit(sigma_z, config), rho)
    out += p.kappa * dissipator(lift_field(a), rho)
    return out


def jaynes_cummings_hamiltonian(p: SystemParams, config: HilbertConfig) -> np.ndarray:
    """Rotating-wave limit of the unmodulated Hamiltonian: ν n + Ω₀ σ_z / 2 + g (a σ_+ + a† σ_−)."""
    a, a_dag, number = fock_ladder(config)
    sigma_z, sigma_plus, sigma_minus = qubit_ops()
    absorb = lift_qubit(sigma_plus, config) @ lift_field(a)
    emit = lift_qubit(sigma_minus, config) @ lift_field(a_dag)
    h = p.nu * lift_field(number).matrix + (p.omega0 / 2) * lift_qubit(sigma_z, config).matrix
    return h + p.g * (absorb.matrix + emit.matrix)


@pytest.fixture
def rng():
    """Seeded generator so random-state tests are reproducible."""
    return np.random.default_rng(20240617)


@pytest.fixture
def small_config():
    """Eight Fock levels, enough for operator and generator checks."""
    return HilbertConfig(n_fock=8, tail_levels=2)


@pytest.fixture
def fig1_params():
    """Two-photon parameter set with dissipation."""
    return SystemParams(
        g=0.05, omega0=0.5, eps_rel=0.08, eta0=2.00655, alpha=2e-8, gamma=1e-6, gamma_phi=1e-6, kappa=1e-6
    )


@pytest.fixture
def lossy_params():
    """Rates large enough that every dissipator term matters at unit time."""
    return SystemParams(g=0.3, omega0=0.7, eps=0.1, eta0=1.9, alpha=1e-3, gamma=0.05, gamma_phi=0.02, kappa=0.03)


@pytest.fixture
def random_composite_state(small_config, rng):
    return DensityMatrix(random_density_matrix(small_config.dim, 4, rng), "composite")


@pytest.fixture
def fig1_config_text():
    """Configuration text using the fig1 preset with a short, small run."""
    return (FIXTURES / "fig1_short.conf").read_text()


@pytest.fixture
def custom_config_text():
    """Configuration text without preset."""
    return """
# weak coupling, no modulation, no baths
system {
  g => 0.05
  omega0 => 0.5
  eps => 0
  eta0 => 0
  alpha => 0
  gamma => 0
  gamma_phi => 0
  kappa => 0
}
hilbert { n_fock => 6  tail_levels => 2 }
integrator { t_final => 4  sample_stride => 1 }
output { plot_script => false  progress => false }
"""


@pytest.fixture
def custom_config(custom_config_text, tmp_path):
    """Resolved custom configuration writing into a temporary directory."""
    return resolve_config(parse_config_text(custom_config_text), [("directory", str(tmp_path / "out"))])
