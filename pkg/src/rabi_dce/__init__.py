# Photon generation by a frequency-modulated qubit in the quantum Rabi model,
# with the cavity field's metrological figures of merit.
# Usage: load_config(path) then execute(config), or the rabi-dce command.
from rabi_dce.config import load_config, resolve_config
from rabi_dce.errors import (
    ConfigError,
    DimensionError,
    NumericalError,
    RabiDceError,
    TruncationError,
)
from rabi_dce.evolve import integrate, master_rhs
from rabi_dce.runner import execute, execute_paired, resume, sweep
from rabi_dce.schemas import RunConfig, SystemParams, TrajectoryRecord

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DimensionError",
    "NumericalError",
    "RabiDceError",
    "RunConfig",
    "SystemParams",
    "TrajectoryRecord",
    "TruncationError",
    "execute",
    "execute_paired",
    "integrate",
    "load_config",
    "master_rhs",
    "resolve_config",
    "resume",
    "sweep",
]
