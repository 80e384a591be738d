"""Run outputs: trajectory CSV, distribution snapshots, plot script and checkpoints.

Every text output starts with ``#`` header lines carrying the CSV schema
version, the build identifier, the config hash and the resolved config as
JSON, so a run can be reconstructed from any one of its files.
"""

import logging
import struct
from pathlib import Path
from typing import IO, Any, NamedTuple

import numpy as np
import pandas as pd
import scipy
from numpy.typing import NDArray

from rabi_dce.config import canonical_json, config_from_json, config_hash
from rabi_dce.errors import ConfigError
from rabi_dce.schemas import CSV_COLUMNS, CSV_SCHEMA_VERSION, PhotonDistribution, RunConfig, TrajectoryRecord

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"RDCECKPT"
CHECKPOINT_VERSION = 1
# magic, version, dimension, t, step, config length
_CHECKPOINT_HEADER = struct.Struct("<8sHIddI")


def build_id() -> str:
    from rabi_dce import __version__

    return f"rabi-dce {__version__} (numpy {np.__version__}, scipy {scipy.__version__}, pandas {pd.__version__})"


def header_lines(config: RunConfig, **extra: Any) -> list[str]:
    lines = [
        f"# schema_version: {CSV_SCHEMA_VERSION}",
        f"# build: {build_id()}",
        f"# config_hash: {config_hash(config)}",
    ]
    lines += [f"# {key}: {value}" for key, value in extra.items()]
    lines.append(f"# config: {canonical_json(config)}")
    return lines


def read_header(path: str | Path) -> dict[str, str]:
    """``key: value`` pairs of the leading ``#`` lines of an output file."""
    header: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            header.setdefault(key, value)
    return header


def format_value(value: float | None) -> str:
    """repr keeps every bit of a float, so reruns give identical bytes."""
    if value is None:
        return ""
    return repr(float(value))


class TrajectoryWriter:
    """Streams TrajectoryRecords to CSV, one flushed row per record.

    With ``resume_from`` the existing file is kept up to and including that
    time; later rows (written after the last checkpoint of a failed run) are
    dropped before new rows are appended.
    """

    def __init__(self, path: str | Path, config: RunConfig, *, resume_from: float | None = None):
        self.path = Path(path)
        self.config = config
        self.rows_written = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if resume_from is not None and self.path.exists():
            self._truncate_after(resume_from)
            self._file: IO[str] = open(self.path, "a", encoding="utf-8", newline="")
            self._file.write(f"# resumed_at: {resume_from!r} config_hash: {config_hash(config)}\n")
        else:
            self._file = open(self.path, "w", encoding="utf-8", newline="")
            self._file.write("\n".join(header_lines(config)) + "\n")
            pd.DataFrame(columns=list(CSV_COLUMNS)).to_csv(self._file, index=False, lineterminator="\n")
        self._file.flush()

    def _truncate_after(self, t: float) -> None:
        lines = self.path.read_text(encoding="utf-8").splitlines(keepends=True)
        kept = []
        for line in lines:
            if line.startswith("#") or line.startswith(CSV_COLUMNS[0] + ","):
                kept.append(line)
                continue
            row_t = float(line.split(",", 1)[0])
            if row_t <= t * (1 + 1e-12):
                kept.append(line)
        dropped = len(lines) - len(kept)
        if dropped:
            logger.info("dropping %d rows after t=%g from %s", dropped, t, self.path)
        self.path.write_text("".join(kept), encoding="utf-8")

    def write(self, record: TrajectoryRecord) -> None:
        row = record.csv_row()
        cells = pd.DataFrame([[format_value(row[column]) for column in CSV_COLUMNS]], columns=list(CSV_COLUMNS))
        cells.to_csv(self._file, header=False, index=False, lineterminator="\n")
        self._file.flush()
        self.rows_written += 1

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "TrajectoryWriter":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def read_trajectory(path: str | Path) -> dict[str, NDArray[np.float64]]:
    """Columns of a trajectory CSV; empty ``r`` cells become NaN."""
    data = pd.read_csv(path, comment="#", float_precision="round_trip")
    return {column: data[column].to_numpy(dtype=np.float64) for column in CSV_COLUMNS}


def snapshot_path(directory: str | Path, t: float) -> Path:
    return Path(directory) / f"distribution_t{t:g}.txt"


def write_snapshot(distribution: PhotonDistribution, path: str | Path, config: RunConfig) -> Path:
    """Fock populations as ``m probability`` rows under the usual header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = pd.DataFrame(
        {
            "m": range(len(distribution.probabilities)),
            "probability": [format_value(p) for p in distribution.probabilities],
        }
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(header_lines(config, t=repr(float(distribution.t)))) + "\n")
        table.to_csv(f, sep=" ", index=False, lineterminator="\n")
    return path


def read_snapshot(path: str | Path) -> PhotonDistribution:
    header = read_header(path)
    table = pd.read_csv(path, sep=" ", comment="#", float_precision="round_trip")
    if list(table.columns) != ["m", "probability"] or "t" not in header:
        raise ConfigError(f"{path} is not a distribution snapshot")
    return PhotonDistribution(t=float(header["t"]), probabilities=table["probability"].astype(float).tolist())


PLOT_SCRIPT = '''"""Plots of {csv_name}; generated by {build}.

config_hash: {config_hash}
"""

import matplotlib.pyplot as plt
import pandas as pd

data = pd.read_csv({csv_path!r}, comment="#")
t = data["t"]

fig, axes = plt.subplots(4, 2, figsize=(10, 12), sharex=True)
(a, b), (c, d), (e, f), (g, h) = axes

a.plot(t, data["P_e"])
a.set_ylabel("P_e")

b.plot(t, data["n_mean"], label="<n>")
b.fill_between(t, data["n_mean"] - data["n_std"], data["n_mean"] + data["n_std"], alpha=0.3)
b.set_ylabel("<n>")

c.plot(t, 1 - data["S_L"])
c.set_ylabel("purity 1 - S_L")

d.plot(t, data["negativity"])
d.set_ylabel("negativity")

e.plot(t, data["F_ph"], label="F_ph")
e.plot(t, data["n_mean"], "--", label="<n>")
e.set_ylabel("F_ph")
e.legend()

f.plot(t, data["r"])
f.axhline(1.0, color="gray", lw=0.5)
f.set_ylabel("r")

g.plot(t, data["M_av"])
g.axhline(1.0, color="gray", lw=0.5)
g.set_ylabel("M_av")

h.plot(t, data["M_opt"])
h.axhline(1.0, color="gray", lw=0.5)
h.set_ylabel("M_opt")

for ax, label in zip(axes.flat, "abcdefgh"):
    ax.set_title(f"({{label}})", loc="left")
for ax in axes[-1]:
    ax.set_xlabel("nu t")

fig.tight_layout()
fig.savefig({png_path!r}, dpi=150)
'''


def write_plot_script(csv_path: str | Path, script_path: str | Path, config: RunConfig) -> Path:
    """Emit a matplotlib script drawing panels a-h from the CSV; it is not run."""
    csv_path = Path(csv_path)
    script_path = Path(script_path)
    script_path.parent.mkdir(parents=True, exist_ok=True)
    script_path.write_text(
        PLOT_SCRIPT.format(
            csv_name=csv_path.name,
            build=build_id(),
            config_hash=config_hash(config),
            csv_path=csv_path.name,
            png_path=csv_path.with_suffix(".png").name,
        ),
        encoding="utf-8",
    )
    return script_path


# ============================================================================
# Checkpoints
# ============================================================================


class CheckpointData(NamedTuple):
    config: RunConfig
    t: float
    step: float
    state: NDArray[np.complex128]


def save_checkpoint(
    path: str | Path, config: RunConfig, t: float, step: float, state: NDArray[np.complex128]
) -> Path:
    """Write a lab-frame state; the file is replaced atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.ascontiguousarray(state, dtype="<c16")
    dim = matrix.shape[0]
    if matrix.shape != (dim, dim):
        raise ValueError(f"checkpoint state must be square, got {matrix.shape}")
    payload = canonical_json(config).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, dim, t, step, len(payload)))
        f.write(payload)
        f.write(matrix.tobytes())
    tmp.replace(path)
    logger.debug("checkpoint at t=%g written to %s", t, path)
    return path


def load_checkpoint(path: str | Path) -> CheckpointData:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise ConfigError(f"Cannot read checkpoint {path}: {e}") from e
    if len(blob) < _CHECKPOINT_HEADER.size:
        raise ConfigError(f"{path} is too short to be a checkpoint")
    magic, version, dim, t, step, length = _CHECKPOINT_HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path} is not a checkpoint (bad magic {magic!r})")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"Checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})")
    offset = _CHECKPOINT_HEADER.size
    config = config_from_json(blob[offset : offset + length].decode("utf-8"))
    offset += length
    expected = dim * dim * 16
    if len(blob) - offset != expected:
        raise ConfigError(f"Checkpoint state has {len(blob) - offset} bytes, expected {expected}")
    state = np.frombuffer(blob, dtype="<c16", offset=offset).reshape(dim, dim).astype(np.complex128)
    if config.hilbert.dim != dim:
        raise ConfigError(f"Checkpoint dimension {dim} does not match its config (n_fock={config.hilbert.n_fock})")
    return CheckpointData(config, t, step, state)
