"""Lindblad evolution of the joint qubit-field state.

The master equation

    dρ/dt = -i[H(t), ρ] + γ D[σ_−]ρ + γ_φ D[σ_z]ρ + κ D[a]ρ,
    D[L]ρ = LρL† − ½{L†L, ρ}

is integrated with a Verner 6(5) embedded Runge-Kutta pair under PI step
control. Output is produced only at sample times, which the stepper lands on
exactly; there is no dense-output interpolation.

The right-hand side never forms H(t) or the dissipators as matrices. Every
term except the coupling is an elementwise product with a precomputed d x d
array, and the coupling only connects neighbouring Fock levels, so one
evaluation costs O(d²).
"""

import logging
import math
from collections.abc import Callable, Sequence
from functools import lru_cache
from typing import Any, Literal, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from tqdm import tqdm

from rabi_dce.errors import (
    DimensionError,
    NumericalError,
    PositivityError,
    StepUnderflowError,
    TraceDriftError,
    TruncationError,
)
from rabi_dce.hilbert import (
    EXCITED,
    GROUND,
    QUBIT_DIM,
    ComplexMatrix,
    DensityMatrix,
    Operator,
    hermitian_eig,
    hermiticity_drift,
    partial_trace_qubit,
    symmetrize,
    tail_population,
)
from rabi_dce.metrology import qfi_displacement, qfi_phase, ratio_r
from rabi_dce.model import bare_energies, qubit_frequency
from rabi_dce.observables import atomic_excitation, linear_entropy, negativity, photon_distribution, photon_moments
from rabi_dce.schemas import AnalysisConfig, HilbertConfig, IntegratorConfig, SystemParams, TrajectoryRecord

logger = logging.getLogger(__name__)

Frame = Literal["lab", "rotating"]

# Two times closer than this (relative to max(1, |t|)) are the same sample.
TIME_TOL = 1e-9
# INFO progress line every this many samples
LOG_EVERY = 100


def dissipator(jump: Operator | ArrayLike, rho: DensityMatrix | ArrayLike) -> ComplexMatrix:
    """D[L]ρ = LρL† − ½(L†Lρ + ρL†L), dense."""
    L = np.asarray(jump.matrix if isinstance(jump, Operator) else jump, dtype=np.complex128)
    r = np.asarray(rho.matrix if isinstance(rho, Operator) else rho, dtype=np.complex128)
    if L.shape != r.shape:
        raise DimensionError(f"jump operator {L.shape} does not act on state {r.shape}")
    L_dag = L.conj().T
    L_dag_L = L_dag @ L
    return L @ r @ L_dag - 0.5 * (L_dag_L @ r + r @ L_dag_L)


# ============================================================================
# Master equation
# ============================================================================


class LindbladGenerator:
    """dρ/dt for one parameter set, truncation and frame.

    In the rotating frame the state is ρ_I = U†ρU with U = exp(-i H₀ t) and
    H₀ = ν n + Ω₀ σ_z / 2. The bare energies drop out of the diagonal term and
    the coupling picks up the phases e^{±iνt} on a, a† and e^{±iΩ₀t} on σ_±.
    """

    def __init__(self, p: SystemParams, config: HilbertConfig, frame: Frame = "lab"):
        self.p = p
        self.config = config
        self.frame = frame
        n = config.n_fock
        d = config.dim
        self.n_fock = n
        self.dim = d

        s = np.repeat(np.where(np.arange(QUBIT_DIM) == EXCITED, 1.0, -1.0), n)
        m = np.tile(np.arange(n, dtype=np.float64), QUBIT_DIM)
        loss = p.kappa * m + p.gamma_phi + p.gamma * (s > 0)
        energies = bare_energies(p, n) if frame == "lab" else np.zeros(d)
        k = energies - 0.5j * loss
        self._diagonal = k[:, None] - k.conj()[None, :]
        self._sign_split = (s[:, None] - s[None, :]) / 2

        same_qubit = np.equal.outer(s, s)
        self._dephasing = np.where(same_qubit, p.gamma_phi, -p.gamma_phi)
        sq = np.sqrt(np.arange(1, n, dtype=np.float64))
        self._ladder = sq.reshape(1, -1, 1, 1)
        self._cavity_jump = p.kappa * np.outer(sq, sq)[None, :, None, :]

    def coupling_phases(self, t: float) -> tuple[complex, complex]:
        """(c_a, c_q) multiplying a and σ_+ in the coupling at time t."""
        if self.frame == "lab":
            return 1.0 + 0j, 1.0 + 0j
        return complex(np.exp(-1j * self.p.nu * t)), complex(np.exp(1j * self.p.omega0 * t))

    def _apply_coupling(self, r4: NDArray[np.complex128], c_a: complex, c_q: complex) -> NDArray[np.complex128]:
        # g (c_q σ_+ + c_q* σ_−) ⊗ (c_a a + c_a* a†) acting on the row indices
        field = np.zeros_like(r4)
        field[:, :-1] += c_a * self._ladder * r4[:, 1:]
        field[:, 1:] += np.conj(c_a) * self._ladder * r4[:, :-1]
        out = np.empty_like(r4)
        out[EXCITED] = c_q * field[GROUND]
        out[GROUND] = np.conj(c_q) * field[EXCITED]
        return self.p.g * out

    def __call__(self, t: float, rho: ArrayLike) -> ComplexMatrix:
        y = np.asarray(rho, dtype=np.complex128)
        if y.shape != (self.dim, self.dim):
            raise DimensionError(f"state shape {y.shape} does not match dimension {self.dim}")
        n = self.n_fock
        shift = qubit_frequency(t, self.p) - self.p.omega0
        diagonal = self._diagonal if shift == 0 else self._diagonal + shift * self._sign_split
        out = -1j * (diagonal * y)

        if self.p.g:
            c_a, c_q = self.coupling_phases(t)
            c_rho = self._apply_coupling(y.reshape(QUBIT_DIM, n, QUBIT_DIM, n), c_a, c_q).reshape(self.dim, self.dim)
            rho_c = (
                self._apply_coupling(y.conj().T.reshape(QUBIT_DIM, n, QUBIT_DIM, n), c_a, c_q)
                .reshape(self.dim, self.dim)
                .conj()
                .T
            )
            out -= 1j * (c_rho - rho_c)

        o4 = out.reshape(QUBIT_DIM, n, QUBIT_DIM, n)
        r4 = y.reshape(QUBIT_DIM, n, QUBIT_DIM, n)
        if self.p.gamma:
            o4[GROUND, :, GROUND, :] += self.p.gamma * r4[EXCITED, :, EXCITED, :]
        if self.p.gamma_phi:
            out += self._dephasing * y
        if self.p.kappa:
            o4[:, :-1, :, :-1] += self._cavity_jump * r4[:, 1:, :, 1:]
        return out


@lru_cache(maxsize=16)
def _generator(p: SystemParams, config: HilbertConfig, frame: Frame) -> LindbladGenerator:
    return LindbladGenerator(p, config, frame)


def _config_for(dim: int) -> HilbertConfig:
    if dim % QUBIT_DIM or dim < 2 * QUBIT_DIM:
        raise DimensionError(f"dimension {dim} is not a qubit ⊗ field dimension")
    n = dim // QUBIT_DIM
    return HilbertConfig(n_fock=n)


def master_rhs(
    t: float,
    rho: DensityMatrix | ArrayLike,
    p: SystemParams,
    config: HilbertConfig | None = None,
    frame: Frame = "lab",
) -> ComplexMatrix:
    """dρ/dt at time t; the truncation is taken from the state if not given."""
    matrix = rho.matrix if isinstance(rho, Operator) else np.asarray(rho, dtype=np.complex128)
    if config is None:
        config = _config_for(matrix.shape[0])
    return _generator(p, config, frame)(t, matrix)


def _frame_phases(t: float, p: SystemParams, dim: int) -> NDArray[np.complex128]:
    n = _config_for(dim).n_fock
    return np.exp(1j * bare_energies(p, n) * t)


def to_rotating_frame(rho: DensityMatrix | ArrayLike, t: float, p: SystemParams) -> DensityMatrix:
    """ρ_I = e^{iH₀t} ρ e^{-iH₀t}, elementwise since H₀ is diagonal."""
    matrix = rho.matrix if isinstance(rho, Operator) else np.asarray(rho, dtype=np.complex128)
    phases = _frame_phases(t, p, matrix.shape[0])
    return DensityMatrix(phases[:, None] * matrix * phases.conj()[None, :], "composite", check=False)


def from_rotating_frame(rho: DensityMatrix | ArrayLike, t: float, p: SystemParams) -> DensityMatrix:
    matrix = rho.matrix if isinstance(rho, Operator) else np.asarray(rho, dtype=np.complex128)
    phases = _frame_phases(t, p, matrix.shape[0]).conj()
    return DensityMatrix(phases[:, None] * matrix * phases.conj()[None, :], "composite", check=False)


# ============================================================================
# Verner 6(5) stepper
# ============================================================================

# Verner's "most robust" 6(5) pair: nine stages, the last one evaluated at the
# accepted solution so it doubles as the first stage of the next step.
VERNER65_C = (0.0, 9 / 50, 1 / 6, 1 / 4, 53 / 100, 3 / 5, 4 / 5, 1.0, 1.0)
VERNER65_A: tuple[tuple[float, ...], ...] = (
    (),
    (9 / 50,),
    (29 / 324, 25 / 324),
    (1 / 16, 0, 3 / 16),
    (79129 / 250000, 0, -261237 / 250000, 19663 / 15625),
    (1336883 / 4909125, 0, -25476 / 30875, 194159 / 185250, 8225 / 78546),
    (-2459386 / 14727375, 0, 19504 / 30875, 2377474 / 13615875, -6157250 / 5773131, 902 / 735),
    (2699 / 7410, 0, -252 / 1235, -1393253 / 3993990, 236875 / 72618, -135 / 49, 15 / 22),
    (11 / 144, 0, 0, 256 / 693, 0, 125 / 504, 125 / 528, 5 / 72),
)
VERNER65_B = (11 / 144, 0, 0, 256 / 693, 0, 125 / 504, 125 / 528, 5 / 72, 0)
VERNER65_B_EMBEDDED = (28 / 477, 0, 0, 212 / 441, -312500 / 366177, 2125 / 1764, 0, -2105 / 35532, 2995 / 17766)
VERNER65_E = tuple(b - b_hat for b, b_hat in zip(VERNER65_B, VERNER65_B_EMBEDDED, strict=True))
VERNER65_ORDER = 6

# step-size factor bounds
FACTOR_MIN = 0.2
FACTOR_MAX = 5.0


class StepAttempt(NamedTuple):
    y: ComplexMatrix
    k_last: ComplexMatrix
    error: float


class VernerStepper:
    """One adaptive step at a time, with FSAL reuse and a PI controller.

    The error is the RMS over all entries of e/(atol + rtol·max(|y|, |y_new|));
    a step is accepted when it is at most 1.
    """

    def __init__(self, rhs: Callable[[float, ComplexMatrix], ComplexMatrix], ic: IntegratorConfig):
        self.rhs = rhs
        self.rtol = ic.rtol
        self.atol = ic.atol
        self.safety = ic.safety
        self.beta = 0.4 / VERNER65_ORDER
        self.alpha = 1 / VERNER65_ORDER - 0.75 * self.beta
        self._previous_error = 1e-4
        self.n_accepted = 0
        self.n_rejected = 0
        self.n_evaluations = 0

    def evaluate(self, t: float, y: ComplexMatrix) -> ComplexMatrix:
        self.n_evaluations += 1
        return self.rhs(t, y)

    def attempt(self, t: float, y: ComplexMatrix, k0: ComplexMatrix, h: float) -> StepAttempt:
        ks = [k0]
        stage_input = y
        for stage in range(1, len(VERNER65_C)):
            increment = np.zeros_like(y)
            for a, k in zip(VERNER65_A[stage], ks, strict=False):
                if a:
                    increment += a * k
            stage_input = y + h * increment
            ks.append(self.evaluate(t + VERNER65_C[stage] * h, stage_input))
        # the last stage is evaluated at the propagated solution
        y_new = stage_input
        error_estimate = np.zeros_like(y)
        for e, k in zip(VERNER65_E, ks, strict=True):
            if e:
                error_estimate += e * k
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        error = float(np.sqrt(np.mean(np.abs(h * error_estimate / scale) ** 2)))
        return StepAttempt(y_new, ks[-1], error)

    def accept(self, error: float, h: float) -> float:
        """Record an accepted step and propose the next step size."""
        self.n_accepted += 1
        error = max(error, 1e-10)
        factor = self.safety * error**-self.alpha * self._previous_error**self.beta
        self._previous_error = error
        return h * min(FACTOR_MAX, max(FACTOR_MIN, factor))

    def reject(self, error: float, h: float) -> float:
        self.n_rejected += 1
        if not math.isfinite(error):
            return h * FACTOR_MIN
        factor = self.safety * error ** (-1 / VERNER65_ORDER)
        return h * min(1.0, max(FACTOR_MIN, factor))


# ============================================================================
# Sampling and analysis
# ============================================================================


def _same_time(a: float, b: float) -> bool:
    return abs(a - b) <= TIME_TOL * max(1.0, abs(a), abs(b))


def sample_times(
    t0: float, t_final: float, stride: float, extra: Sequence[float] = (), *, include_start: bool = True
) -> list[float]:
    """Stride multiples in [t0, t_final], t_final itself and any ``extra`` times, sorted."""
    first = math.ceil(t0 / stride - TIME_TOL)
    last = math.floor(t_final / stride + TIME_TOL)
    candidates = [k * stride for k in range(first, last + 1)]
    candidates += [t_final, *extra]
    if include_start:
        candidates.append(t0)
    times: list[float] = []
    for t in sorted(c for c in candidates if t0 - TIME_TOL <= c <= t_final * (1 + TIME_TOL) + TIME_TOL):
        if not include_start and _same_time(t, t0):
            continue
        if times and _same_time(times[-1], t):
            continue
        times.append(t)
    if include_start and times:
        times[0] = t0
    return times


class SampleDiagnostics(NamedTuple):
    trace_error: float
    tail_population: float
    hermiticity_drift: float


def sample_diagnostics(rho: ComplexMatrix, tail_levels: int) -> SampleDiagnostics:
    return SampleDiagnostics(
        trace_error=float(abs(np.trace(rho) - 1.0)),
        tail_population=tail_population(rho, tail_levels),
        hermiticity_drift=hermiticity_drift(rho),
    )


class TrajectoryAnalyzer:
    """Default observer: reduces a lab-frame snapshot to a TrajectoryRecord.

    The Fock distribution is attached at the configured snapshot times.
    """

    def __init__(self, config: HilbertConfig, analysis: AnalysisConfig | None = None):
        self.config = config
        self.analysis = analysis or AnalysisConfig()

    def wants_distribution(self, t: float) -> bool:
        return any(_same_time(t, s) for s in self.analysis.snapshot_times)

    def __call__(self, t: float, rho: DensityMatrix, diagnostics: SampleDiagnostics | None = None) -> TrajectoryRecord:
        if diagnostics is None:
            diagnostics = sample_diagnostics(rho.matrix, self.config.tail_levels)
        analysis = self.analysis
        try:
            min_eigenvalue = rho.check_positive(analysis.positivity_limit)
        except PositivityError as e:
            raise _with_time(e, t) from e

        rho_cav = partial_trace_qubit(rho)
        spectrum = hermitian_eig(rho_cav.matrix)
        n_mean, n_std = photon_moments(rho_cav)
        f_ph = qfi_phase(
            rho_cav,
            p_cut=analysis.p_cut,
            tol_pos=analysis.tol_pos,
            positivity_limit=analysis.positivity_limit,
            spectrum=spectrum,
        )
        f_disp = qfi_displacement(
            rho_cav,
            p_cut=analysis.p_cut,
            tol_pos=analysis.tol_pos,
            positivity_limit=analysis.positivity_limit,
            spectrum=spectrum,
        )
        return TrajectoryRecord(
            t=t,
            p_e=atomic_excitation(rho),
            n_mean=n_mean,
            n_std=n_std,
            s_l=linear_entropy(rho_cav),
            negativity=negativity(rho),
            f_ph=f_ph,
            r=ratio_r(f_ph, n_mean),
            m_av=f_disp.m_av(),
            m_opt=f_disp.m_opt(),
            trace_error=diagnostics.trace_error,
            tail_population=diagnostics.tail_population,
            hermiticity_drift=diagnostics.hermiticity_drift,
            min_eigenvalue=min_eigenvalue,
            photon_distribution=photon_distribution(rho_cav, t) if self.wants_distribution(t) else None,
        )


# ============================================================================
# Driver
# ============================================================================


class Checkpoint(NamedTuple):
    """Lab-frame state at a sample time, with the step size to resume with."""

    t: float
    step: float
    state: ComplexMatrix


class IntegrationResult(NamedTuple):
    records: list[Any]
    state: DensityMatrix
    t: float
    step: float
    n_steps: int
    n_rejected: int
    n_evaluations: int


def _with_time(e: NumericalError, t: float) -> NumericalError:
    if e.t is not None:
        return e
    return type(e)(str(e), t=t, diagnostics=e.diagnostics)


def integrate(
    rho0: DensityMatrix,
    p: SystemParams,
    ic: IntegratorConfig,
    observer: Callable[[float, DensityMatrix, SampleDiagnostics], Any] | None = None,
    *,
    config: HilbertConfig | None = None,
    analysis: AnalysisConfig | None = None,
    t0: float = 0.0,
    initial_step: float | None = None,
    extra_times: Sequence[float] = (),
    on_record: Callable[[Any], None] | None = None,
    on_checkpoint: Callable[[Checkpoint], None] | None = None,
    checkpoint_every: int = 0,
    continuation: bool | None = None,
    progress: bool = False,
) -> IntegrationResult:
    """Integrate ``rho0`` from ``t0`` to ``ic.t_final`` and observe it at every sample time.

    The observer sees the lab-frame state whatever ``ic.frame`` is. With
    ``continuation`` (default ``t0 > 0``), ``t0`` itself is not sampled again.
    Records are handed to ``on_record`` as soon as they exist, so a failure
    later in the run keeps everything produced before it. A sample that fails
    a hygiene check produces no record. The last sampled state is passed to
    ``on_checkpoint`` every ``checkpoint_every`` samples and once more if a
    numerical failure aborts the run.
    """
    if rho0.space != "composite":
        raise DimensionError(f"integration needs a composite state, got {rho0.space}")
    if config is None:
        config = _config_for(rho0.dim)
    else:
        rho0.check_config(config)
    analysis = analysis or AnalysisConfig()
    if observer is None:
        observer = TrajectoryAnalyzer(config, analysis)

    frame: Frame = ic.frame
    rhs = _generator(p, config, frame)
    stepper = VernerStepper(rhs, ic)
    resuming = t0 > 0 if continuation is None else continuation
    targets = sample_times(
        t0, ic.t_final, ic.sample_stride, (*analysis.snapshot_times, *extra_times), include_start=not resuming
    )

    t = t0
    y = rho0.matrix.copy()
    if frame == "rotating":
        y = to_rotating_frame(y, t, p).matrix
    h = initial_step or ic.initial_step
    k = stepper.evaluate(t, y)
    records: list[Any] = []
    last_good = Checkpoint(t, h, rho0.matrix.copy())
    samples_since_checkpoint = 0

    logger.info(
        "integrating d=%d from t=%g to t=%g (%s frame, %d samples)", config.dim, t0, ic.t_final, frame, len(targets)
    )
    with tqdm(total=max(ic.t_final - t0, 0.0), disable=not progress, unit="t", desc="evolve", leave=False) as bar:
        try:
            for target in targets:
                while not _same_time(t, target) and t < target:
                    remaining = target - t
                    h_try = min(h, ic.max_step)
                    landing = h_try >= remaining
                    if landing:
                        h_try = remaining
                    attempt = stepper.attempt(t, y, k, h_try)
                    if attempt.error <= 1.0:
                        bar.update(h_try)
                        t = target if landing else t + h_try
                        y, k = attempt.y, attempt.k_last
                        h_next = stepper.accept(attempt.error, h_try)
                        # a landing step is clipped; keep the unclipped proposal
                        h = max(h, h_next) if landing else h_next
                    else:
                        h = stepper.reject(attempt.error, h_try)
                        logger.debug("rejected step h=%.3g at t=%g (error %.3g)", h_try, t, attempt.error)
                        if h < ic.min_step:
                            raise StepUnderflowError(
                                f"step size {h:.3g} below min_step={ic.min_step:g}",
                                t=t,
                                diagnostics={"error": attempt.error, "step": h},
                            )
                t = target

                lab = y if frame == "lab" else from_rotating_frame(y, t, p).matrix
                diagnostics = sample_diagnostics(lab, config.tail_levels)
                logger.debug(
                    "sample t=%g trace_error=%.3g tail=%.3g", t, diagnostics.trace_error, diagnostics.tail_population
                )
                if diagnostics.hermiticity_drift > analysis.hermiticity_limit:
                    logger.warning("hermiticity drift %.3g at t=%g", diagnostics.hermiticity_drift, t)
                if diagnostics.tail_population > config.tail_limit:
                    raise TruncationError(
                        f"tail population {diagnostics.tail_population:.3g} exceeds {config.tail_limit:g}; "
                        f"increase n_fock above {config.n_fock}",
                        t=t,
                        diagnostics={"tail_population": diagnostics.tail_population, "n_fock": config.n_fock},
                    )
                if diagnostics.trace_error > ic.trace_limit:
                    raise TraceDriftError(
                        f"trace error {diagnostics.trace_error:.3g} exceeds {ic.trace_limit:g}",
                        t=t,
                        diagnostics={"trace_error": diagnostics.trace_error},
                    )

                snapshot = DensityMatrix(symmetrize(lab), "composite", check=False)
                try:
                    record = observer(t, snapshot, diagnostics)
                except NumericalError as e:
                    raise _with_time(e, t) from e
                records.append(record)
                if on_record is not None:
                    on_record(record)
                if len(records) % LOG_EVERY == 0:
                    logger.info("t=%g: %d samples, %d steps", t, len(records), stepper.n_accepted)

                last_good = Checkpoint(t, h, lab.copy())
                samples_since_checkpoint += 1
                if on_checkpoint is not None and checkpoint_every and samples_since_checkpoint >= checkpoint_every:
                    on_checkpoint(last_good)
                    samples_since_checkpoint = 0
        except NumericalError as e:
            logger.error("integration failed: %s", e)
            if on_checkpoint is not None and last_good.t > t0:
                on_checkpoint(last_good)
            raise

    logger.info(
        "reached t=%g: %d steps, %d rejected, %d evaluations",
        t,
        stepper.n_accepted,
        stepper.n_rejected,
        stepper.n_evaluations,
    )
    return IntegrationResult(
        records=records,
        state=DensityMatrix(last_good.state, "composite", check=False),
        t=t,
        step=h,
        n_steps=stepper.n_accepted,
        n_rejected=stepper.n_rejected,
        n_evaluations=stepper.n_evaluations,
    )
