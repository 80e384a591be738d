"""Pydantic schemas for run configuration and trajectory records.

Configuration models are frozen and forbid extra fields, so a resolved
configuration is hashable, can key caches, and a typo in a config file is
reported instead of being silently ignored.

Units: ν = 1 fixes the time unit. Frequencies and rates are in units of ν,
the chirp rate α in units of ν², times in units of 1/ν.
"""

import logging
from typing import Any, Literal

from pydantic import BaseModel, Field, model_validator

logger = logging.getLogger(__name__)

# Relative modulation depth above which the weak-modulation picture is stretched.
EPS_WARN_FRACTION = 0.2
DEFAULT_TAIL_LEVELS = 5


# ============================================================================
# Physical model
# ============================================================================


class SystemParams(BaseModel):
    """Physical constants of the modulated Rabi model and its baths.

    The modulation amplitude is given either absolutely (``eps``) or as a
    fraction of the bare qubit frequency (``eps_rel``); exactly one of the two
    is accepted and the stored value is always absolute.
    """

    model_config = {"extra": "forbid", "frozen": True}

    nu: float = Field(1.0, gt=0, description="Resonator angular frequency")
    g: float = Field(..., ge=0, description="Qubit-resonator coupling")
    omega0: float = Field(..., gt=0, description="Bare qubit frequency Ω₀")
    eps: float = Field(..., ge=0, description="Modulation amplitude ε (absolute)")
    eta0: float = Field(0.0, description="Initial modulation frequency η₀")
    alpha: float = Field(0.0, description="Chirp rate α, may be negative")
    gamma: float = Field(0.0, ge=0, description="Qubit damping rate")
    gamma_phi: float = Field(0.0, ge=0, description="Qubit pure dephasing rate")
    kappa: float = Field(0.0, ge=0, description="Cavity damping rate")

    @model_validator(mode="before")
    @classmethod
    def _resolve_relative_eps(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        has_eps = data.get("eps") is not None
        has_rel = data.get("eps_rel") is not None
        if has_eps and has_rel:
            raise ValueError("give either eps or eps_rel, not both")
        if not has_eps and not has_rel:
            raise ValueError("one of eps or eps_rel is required")
        data = dict(data)
        if has_rel:
            if data.get("omega0") is None:
                raise ValueError("eps_rel needs omega0")
            data["eps"] = float(data.pop("eps_rel")) * float(data["omega0"])
        else:
            data.pop("eps_rel", None)
        return data

    @model_validator(mode="after")
    def _check_weak_modulation(self) -> "SystemParams":
        if self.eps >= self.omega0:
            raise ValueError(f"eps={self.eps} must be smaller than omega0={self.omega0}")
        if self.eps > EPS_WARN_FRACTION * self.omega0:
            logger.warning("eps=%g exceeds %.0f%% of omega0=%g", self.eps, 100 * EPS_WARN_FRACTION, self.omega0)
        return self

    @property
    def rates(self) -> tuple[float, float, float]:
        return self.gamma, self.gamma_phi, self.kappa

    @property
    def is_dissipative(self) -> bool:
        return any(rate > 0 for rate in self.rates)

    def without_dissipation(self) -> "SystemParams":
        return self.model_copy(update={"gamma": 0.0, "gamma_phi": 0.0, "kappa": 0.0})


# ============================================================================
# Hilbert space
# ============================================================================


class HilbertConfig(BaseModel):
    """Truncated qubit ⊗ field space.

    The qubit index is major and the field index minor; the qubit basis is
    ordered (|e⟩, |g⟩).
    """

    model_config = {"extra": "forbid", "frozen": True}

    n_fock: int = Field(120, ge=2, description="Field truncation N (Fock states |0⟩..|N-1⟩)")
    qubit_dim: Literal[2] = 2
    ordering: Literal["qubit-field"] = "qubit-field"
    tail_levels: int = Field(DEFAULT_TAIL_LEVELS, ge=1, description="Top Fock levels watched by the truncation monitor")
    tail_limit: float = Field(1e-6, gt=0, description="Largest tolerated tail population")

    @model_validator(mode="before")
    @classmethod
    def _default_tail(cls, data: Any) -> Any:
        # min(5, n_fock - 1) unless given
        if isinstance(data, dict) and data.get("tail_levels") is None:
            n_fock = data.get("n_fock", cls.model_fields["n_fock"].default)
            if isinstance(n_fock, int) and n_fock >= 2:
                data = {**data, "tail_levels": min(DEFAULT_TAIL_LEVELS, n_fock - 1)}
        return data

    @model_validator(mode="after")
    def _check_tail(self) -> "HilbertConfig":
        if self.tail_levels >= self.n_fock:
            raise ValueError(f"tail_levels={self.tail_levels} must be below n_fock={self.n_fock}")
        return self

    @property
    def dim(self) -> int:
        return self.qubit_dim * self.n_fock


# ============================================================================
# Integration and analysis
# ============================================================================


class IntegratorConfig(BaseModel):
    """Adaptive Runge-Kutta controls and the sampling grid."""

    model_config = {"extra": "forbid", "frozen": True}

    rtol: float = Field(1e-8, gt=0)
    atol: float = Field(1e-10, gt=0)
    max_step: float = Field(1.0, gt=0, description="Largest step, units of 1/ν")
    min_step: float = Field(1e-12, gt=0, description="Step underflow threshold, units of 1/ν")
    initial_step: float = Field(1e-3, gt=0)
    safety: float = Field(0.9, gt=0, lt=1)
    t_final: float = Field(3e4, ge=0, description="End time, units of 1/ν; 0 yields only the initial sample")
    sample_stride: float = Field(20.0, gt=0, description="Output spacing, units of 1/ν")
    frame: Literal["lab", "rotating"] = "lab"
    trace_limit: float = Field(1e-5, gt=0, description="Largest tolerated |Tr ρ - 1|")

    @model_validator(mode="after")
    def _check_steps(self) -> "IntegratorConfig":
        if self.min_step >= self.max_step:
            raise ValueError("min_step must be smaller than max_step")
        return self


class AnalysisConfig(BaseModel):
    """Tolerances of the per-sample analysis and distribution snapshot times."""

    model_config = {"extra": "forbid", "frozen": True}

    p_cut: float = Field(1e-12, gt=0, description="QFI denominator cutoff")
    tol_pos: float = Field(1e-9, gt=0, description="Negative eigenvalues above -tol_pos are clamped silently")
    positivity_limit: float = Field(1e-7, gt=0, description="A state with an eigenvalue below -positivity_limit aborts")
    hermiticity_limit: float = Field(1e-9, gt=0)
    snapshot_times: tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check_positivity(self) -> "AnalysisConfig":
        if self.tol_pos > self.positivity_limit:
            raise ValueError(f"tol_pos={self.tol_pos:g} must not exceed positivity_limit={self.positivity_limit:g}")
        return self


class OutputConfig(BaseModel):
    model_config = {"extra": "forbid", "frozen": True}

    directory: str = "out"
    csv_name: str = "trajectory.csv"
    plot_script: bool = True
    checkpoint_every: int = Field(0, ge=0, description="Write a checkpoint every k samples; 0 disables")
    checkpoint_name: str = "state.ckpt"
    progress: bool = True


class SweepConfig(BaseModel):
    model_config = {"extra": "forbid", "frozen": True}

    axis: str
    values: tuple[float | int | str, ...]
    workers: int = Field(1, ge=1)


PresetName = Literal["fig1", "fig2", "fig4", "fig5"]


class RunConfig(BaseModel):
    """Everything needed to reproduce one run."""

    model_config = {"extra": "forbid", "frozen": True}

    system: SystemParams
    hilbert: HilbertConfig = HilbertConfig()
    integrator: IntegratorConfig = IntegratorConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    output: OutputConfig = OutputConfig()
    preset: PresetName | None = None
    dissipation_on: bool = True
    sweep: SweepConfig | None = None

    @property
    def effective_system(self) -> SystemParams:
        """Physical parameters actually integrated (rates zeroed for unitary runs)."""
        if self.dissipation_on:
            return self.system
        return self.system.without_dissipation()


# ============================================================================
# Records
# ============================================================================


class PhotonDistribution(BaseModel):
    """Fock-basis populations of the cavity field at time ``t``."""

    t: float
    probabilities: list[float] = Field(default_factory=list)

    @property
    def mean(self) -> float:
        return sum(m * p for m, p in enumerate(self.probabilities))


# Frozen CSV schema; bump on any change of columns or their order.
CSV_SCHEMA_VERSION = 1


class TrajectoryRecord(BaseModel):
    """All scalars reported at one sample time.

    Field aliases are the CSV column names.
    """

    model_config = {"populate_by_name": True}

    t: float
    p_e: float = Field(..., alias="P_e")
    n_mean: float
    n_std: float
    s_l: float = Field(..., alias="S_L")
    negativity: float
    f_ph: float = Field(..., alias="F_ph")
    r: float | None = None
    m_av: float = Field(..., alias="M_av")
    m_opt: float = Field(..., alias="M_opt")
    trace_error: float
    tail_population: float
    # diagnostics, not part of the CSV schema
    hermiticity_drift: float = 0.0
    min_eigenvalue: float = 0.0
    photon_distribution: PhotonDistribution | None = None

    def csv_row(self) -> dict[str, float | None]:
        data = self.model_dump(by_alias=True)
        return {column: data[column] for column in CSV_COLUMNS}


CSV_COLUMNS: tuple[str, ...] = (
    "t",
    "P_e",
    "n_mean",
    "n_std",
    "S_L",
    "negativity",
    "F_ph",
    "r",
    "M_av",
    "M_opt",
    "trace_error",
    "tail_population",
)
