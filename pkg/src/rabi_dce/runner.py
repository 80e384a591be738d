"""Run orchestration: single, paired, resumed and swept runs and their output files."""

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Any, NamedTuple

import pandas as pd
from tqdm import tqdm

from rabi_dce.config import canonical_json, config_from_json, config_hash, with_values
from rabi_dce.errors import ConfigError, RabiDceError
from rabi_dce.evolve import Checkpoint, integrate
from rabi_dce.hilbert import DensityMatrix, initial_state
from rabi_dce.io import (
    CheckpointData,
    TrajectoryWriter,
    load_checkpoint,
    save_checkpoint,
    snapshot_path,
    write_plot_script,
    write_snapshot,
)
from rabi_dce.schemas import RunConfig, TrajectoryRecord

logger = logging.getLogger(__name__)

PLOT_SCRIPT_NAME = "plot_trajectory.py"
SWEEP_INDEX_NAME = "sweep_index.csv"
CONVERGENCE_NAME = "convergence.txt"
# Keys a resumed run may change
RESUME_SECTIONS = ("integrator", "analysis", "output")


class RunOutcome(NamedTuple):
    directory: Path
    csv_path: Path
    rows: int
    t: float
    last: TrajectoryRecord | None


def execute(
    config: RunConfig,
    directory: str | Path | None = None,
    *,
    progress: bool = False,
    checkpoint: CheckpointData | None = None,
) -> RunOutcome:
    """Integrate one configuration and write its CSV, snapshots and plot script.

    With ``checkpoint`` the run continues from the stored state and appends to
    the existing CSV. Numerical errors propagate after the partial CSV and a
    checkpoint of the last good sample have been written.
    """
    out = Path(directory if directory is not None else config.output.directory)
    csv_path = out / config.output.csv_name
    checkpoint_path = out / config.output.checkpoint_name
    logger.info("run %s into %s (config %s)", config.preset or "custom", out, config_hash(config)[:12])

    if checkpoint is None:
        rho0 = initial_state(config.hilbert)
        t0, step = 0.0, None
    else:
        rho0 = DensityMatrix(checkpoint.state, "composite", check=False)
        t0, step = checkpoint.t, checkpoint.step

    last: list[TrajectoryRecord] = []

    def on_checkpoint(cp: Checkpoint) -> None:
        save_checkpoint(checkpoint_path, config, cp.t, cp.step, cp.state)

    with TrajectoryWriter(csv_path, config, resume_from=None if checkpoint is None else checkpoint.t) as writer:

        def on_record(record: TrajectoryRecord) -> None:
            writer.write(record)
            if record.photon_distribution is not None:
                write_snapshot(record.photon_distribution, snapshot_path(out, record.t), config)
            last[:] = [record]

        if config.output.plot_script:
            write_plot_script(csv_path, out / PLOT_SCRIPT_NAME, config)
        result = integrate(
            rho0,
            config.effective_system,
            config.integrator,
            config=config.hilbert,
            analysis=config.analysis,
            t0=t0,
            initial_step=step,
            on_record=on_record,
            on_checkpoint=on_checkpoint,
            checkpoint_every=config.output.checkpoint_every,
            continuation=checkpoint is not None,
            progress=progress,
        )
        rows = writer.rows_written

    if config.output.checkpoint_every:
        save_checkpoint(checkpoint_path, config, result.t, result.step, result.state.matrix)
    return RunOutcome(out, csv_path, rows, result.t, last[0] if last else None)


def execute_paired(
    config: RunConfig, directory: str | Path | None = None, *, progress: bool = False
) -> list[RunOutcome]:
    """The same run with and without dissipation, in ``dissipative/`` and ``unitary/``."""
    out = Path(directory if directory is not None else config.output.directory)
    return [
        execute(config.model_copy(update={"dissipation_on": True}), out / "dissipative", progress=progress),
        execute(config.model_copy(update={"dissipation_on": False}), out / "unitary", progress=progress),
    ]


def resume(
    checkpoint_path: str | Path,
    directory: str | Path | None = None,
    overrides: Iterable[tuple[str, Any]] = (),
    *,
    progress: bool = False,
) -> RunOutcome:
    """Continue a run from its checkpoint, appending to the CSV next to it."""
    data = load_checkpoint(checkpoint_path)
    config = with_values(data.config, overrides, sections=RESUME_SECTIONS)
    out = Path(directory) if directory is not None else Path(checkpoint_path).parent
    if data.t >= config.integrator.t_final:
        raise ConfigError(
            f"checkpoint is at t={data.t:g}, nothing left to integrate up to {config.integrator.t_final:g}"
        )
    logger.info("resuming from t=%g", data.t)
    return execute(config, out, progress=progress, checkpoint=data._replace(config=config))


# ============================================================================
# Sweeps
# ============================================================================


class SweepOutcome(NamedTuple):
    value: Any
    directory: Path
    exit_code: int
    message: str
    n_mean: float | None = None
    f_ph: float | None = None


def _sweep_directory(base: Path, axis: str, value: Any) -> Path:
    return base / f"{axis}={value}"


def _sweep_one(config_json: str, axis: str, value: Any, directory: str) -> SweepOutcome:
    out = Path(directory)
    try:
        config = with_values(config_from_json(config_json), [(axis, value)])
        outcome = execute(config, out)
    except RabiDceError as e:
        logger.error("%s=%r failed: %s", axis, value, e)
        return SweepOutcome(value, out, e.exit_code, str(e))
    last = outcome.last
    return SweepOutcome(
        value,
        out,
        0,
        "ok",
        None if last is None else last.n_mean,
        None if last is None else last.f_ph,
    )


def _relative_change(before: float, after: float) -> float:
    return abs(after - before) / max(abs(after), 1e-300)


CONVERGENCE_COLUMNS = ["n_fock_from", "n_fock_to", "rel_change_n_mean", "rel_change_F_ph"]


def convergence_report(outcomes: Sequence[SweepOutcome]) -> pd.DataFrame:
    """Relative change of the final n_mean and F_ph between consecutive truncations."""
    ok = sorted((o for o in outcomes if o.exit_code == 0 and o.n_mean is not None), key=lambda o: o.value)
    rows = [
        (
            before.value,
            after.value,
            _relative_change(before.n_mean or 0.0, after.n_mean or 0.0),
            _relative_change(before.f_ph or 0.0, after.f_ph or 0.0),
        )
        for before, after in zip(ok, ok[1:], strict=False)
    ]
    return pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)


def sweep_index(outcomes: Sequence[SweepOutcome]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "value": [o.value for o in outcomes],
            "directory": [o.directory.name for o in outcomes],
            "exit_code": [o.exit_code for o in outcomes],
            "message": [o.message for o in outcomes],
        }
    )


def sweep(
    config: RunConfig,
    axis: str,
    values: Sequence[Any],
    directory: str | Path | None = None,
    *,
    workers: int = 1,
    progress: bool = False,
) -> list[SweepOutcome]:
    """One independent run per value; failures are recorded, not raised.

    An index file maps each value to its directory and status. Sweeping
    ``n_fock`` also writes a truncation-convergence report.
    """
    if not values:
        raise ConfigError("sweep needs at least one value")
    # fail early on a bad axis or value, before any process starts
    for value in values:
        with_values(config, [(axis, value)])

    base = Path(directory if directory is not None else config.output.directory)
    base.mkdir(parents=True, exist_ok=True)
    payload = canonical_json(config)
    jobs = [(value, str(_sweep_directory(base, axis, value))) for value in values]
    logger.info("sweeping %s over %d values with %d workers", axis, len(values), workers)

    outcomes: list[SweepOutcome] = []
    if workers == 1:
        for value, out in tqdm(jobs, disable=not progress, desc=f"sweep {axis}"):
            outcomes.append(_sweep_one(payload, axis, value, out))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_one, payload, axis, value, out) for value, out in jobs]
            for future in tqdm(as_completed(futures), total=len(futures), disable=not progress, desc=f"sweep {axis}"):
                outcomes.append(future.result())
    order = {str(value): index for index, value in enumerate(values)}
    outcomes.sort(key=lambda o: order[str(o.value)])

    with open(base / SWEEP_INDEX_NAME, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash: {config_hash(config)}\n# axis: {axis}\n")
        sweep_index(outcomes).to_csv(f, index=False, lineterminator="\n")

    if axis == "n_fock":
        report = convergence_report(outcomes)
        report.to_csv(base / CONVERGENCE_NAME, sep=" ", index=False, lineterminator="\n")
        for row in report.itertuples(index=False):
            logger.info("convergence %s -> %s: n_mean %.3g, F_ph %.3g", *row)

    failed = [o for o in outcomes if o.exit_code]
    logger.info("sweep finished: %d ok, %d failed", len(outcomes) - len(failed), len(failed))
    for o in failed:
        logger.warning("%s=%r: %s", axis, o.value, o.message)
    return outcomes
