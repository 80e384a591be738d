"""Tests for single, paired, resumed and swept runs."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from rabi_dce.config import config_from_json, load_config, with_values
from rabi_dce.errors import ConfigError, TruncationError
from rabi_dce.io import load_checkpoint, read_header, read_snapshot, read_trajectory
from rabi_dce.runner import (
    CONVERGENCE_NAME,
    PLOT_SCRIPT_NAME,
    SWEEP_INDEX_NAME,
    SweepOutcome,
    convergence_report,
    execute,
    execute_paired,
    resume,
    sweep,
    sweep_index,
)

from .conftest import FIXTURES


@pytest.mark.integration
class TestExecute:
    """Test one run end to end."""

    def test_zero_length_run_is_one_vacuum_row(self, custom_config):
        outcome = execute(with_values(custom_config, {"t_final": 0.0}))
        assert outcome.rows == 1
        assert outcome.t == 0.0
        assert outcome.last.p_e == 0.0
        assert outcome.last.n_mean == 0.0
        assert outcome.last.r is None
        data = read_trajectory(outcome.csv_path)
        assert data["t"].tolist() == [0.0]
        assert np.isnan(data["r"][0])

    def test_rows_on_the_sample_grid(self, custom_config):
        outcome = execute(custom_config)
        assert outcome.directory == Path(custom_config.output.directory)
        data = read_trajectory(outcome.csv_path)
        assert data["t"].tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]
        assert np.all(data["trace_error"] < 1e-8)
        assert np.all(data["P_e"] >= 0.0)
        assert not (outcome.directory / PLOT_SCRIPT_NAME).exists()

    def test_reruns_are_byte_identical(self, custom_config, tmp_path):
        first = execute(custom_config, tmp_path / "a")
        second = execute(custom_config, tmp_path / "b")
        assert first.csv_path.read_bytes() == second.csv_path.read_bytes()

    def test_outputs_of_preset_run(self, tmp_path):
        config = load_config(FIXTURES / "fig1_short.conf", [("directory", str(tmp_path))])
        outcome = execute(config)
        assert (tmp_path / PLOT_SCRIPT_NAME).exists()
        snapshot = read_snapshot(tmp_path / "distribution_t3.txt")
        assert snapshot.t == 3.0
        assert sum(snapshot.probabilities) == pytest.approx(1.0, abs=1e-8)
        assert read_trajectory(outcome.csv_path)["t"].tolist() == [0.0, 2.0, 3.0, 4.0, 6.0]

    def test_failure_keeps_partial_output(self, custom_config):
        config = with_values(custom_config, {"tail_limit": 1e-14})
        with pytest.raises(TruncationError) as info:
            execute(config)
        assert info.value.t >= 1.0
        csv_path = Path(config.output.directory) / config.output.csv_name
        times = read_trajectory(csv_path)["t"].tolist()
        assert times == [float(k) for k in range(int(info.value.t))]

    def test_paired_run(self, custom_config, tmp_path):
        config = with_values(custom_config, {"kappa": 0.01})
        dissipative, unitary = execute_paired(config, tmp_path)
        assert dissipative.directory == tmp_path / "dissipative"
        assert unitary.directory == tmp_path / "unitary"
        assert config_from_json(read_header(unitary.csv_path)["config"]).dissipation_on is False
        assert config_from_json(read_header(dissipative.csv_path)["config"]).dissipation_on is True
        assert unitary.last.s_l != dissipative.last.s_l


@pytest.mark.integration
class TestCheckpointAndResume:
    """Test checkpoint files and continuation of runs."""

    def test_final_checkpoint(self, custom_config, tmp_path):
        config = with_values(custom_config, {"checkpoint_every": 2}, sections=("output",))
        outcome = execute(config, tmp_path)
        data = load_checkpoint(tmp_path / config.output.checkpoint_name)
        assert data.t == outcome.t == 4.0
        assert data.config == config
        assert np.trace(data.state).real == pytest.approx(1.0, abs=1e-8)

    def test_no_checkpoint_by_default(self, custom_config, tmp_path):
        execute(custom_config, tmp_path)
        assert not (tmp_path / custom_config.output.checkpoint_name).exists()

    def test_resumed_run_matches_full_run(self, custom_config, tmp_path):
        full = execute(custom_config, tmp_path / "full")
        short = with_values(custom_config, {"t_final": 2.0})
        short = with_values(short, {"checkpoint_every": 1}, sections=("output",))
        execute(short, tmp_path / "split")
        outcome = resume(tmp_path / "split" / short.output.checkpoint_name, overrides=[("t_final", 4.0)])
        assert outcome.directory == tmp_path / "split"
        resumed = read_trajectory(outcome.csv_path)
        expected = read_trajectory(full.csv_path)
        assert resumed["t"].tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]
        assert np.allclose(resumed["P_e"], expected["P_e"], atol=1e-8)
        assert np.allclose(resumed["n_mean"], expected["n_mean"], atol=1e-8)
        assert "# resumed_at: 2.0" in outcome.csv_path.read_text()

    def test_nothing_left_to_resume(self, custom_config, tmp_path):
        config = with_values(custom_config, {"checkpoint_every": 1}, sections=("output",))
        execute(config, tmp_path)
        with pytest.raises(ConfigError, match="nothing left"):
            resume(tmp_path / config.output.checkpoint_name)

    def test_physics_cannot_change_on_resume(self, custom_config, tmp_path):
        config = with_values(custom_config, {"checkpoint_every": 1}, sections=("output",))
        execute(with_values(config, {"t_final": 1.0}), tmp_path)
        with pytest.raises(ConfigError, match="cannot be changed"):
            resume(tmp_path / config.output.checkpoint_name, overrides=[("g", 0.1)])


@pytest.mark.integration
class TestSweep:
    """Test parameter sweeps."""

    def test_index_and_directories(self, custom_config, tmp_path):
        outcomes = sweep(custom_config, "g", [0.0, 0.05], tmp_path)
        assert [o.value for o in outcomes] == [0.0, 0.05]
        assert [o.exit_code for o in outcomes] == [0, 0]
        assert (tmp_path / "g=0.0" / "trajectory.csv").exists()
        assert (tmp_path / "g=0.05" / "trajectory.csv").exists()
        lines = (tmp_path / SWEEP_INDEX_NAME).read_text().splitlines()
        assert lines[1] == "# axis: g"
        assert lines[3:] == ["0.0,g=0.0,0,ok", "0.05,g=0.05,0,ok"]
        assert outcomes[0].n_mean == 0.0
        assert outcomes[1].n_mean > 0.0

    def test_failure_is_isolated(self, custom_config, tmp_path):
        outcomes = sweep(custom_config, "tail_limit", [1e-6, 1e-14], tmp_path)
        assert [o.exit_code for o in outcomes] == [0, 4]
        assert "tail population" in outcomes[1].message
        index = pd.read_csv(tmp_path / SWEEP_INDEX_NAME, skiprows=2)
        assert index["directory"].tolist() == ["tail_limit=1e-06", "tail_limit=1e-14"]
        assert index["exit_code"].tolist() == [0, 4]
        assert index["message"].tolist() == ["ok", outcomes[1].message]

    def test_index_quotes_messages(self, tmp_path):
        message = "tail population 2e-06, limit 1e-06\nincrease n_fock"
        outcomes = [SweepOutcome(0.1, tmp_path / "g=0.1", 4, message)]
        path = tmp_path / "index.csv"
        sweep_index(outcomes).to_csv(path, index=False)
        index = pd.read_csv(path)
        assert index["message"].tolist() == [message]
        assert index["directory"].tolist() == ["g=0.1"]

    def test_convergence_skips_failed_points(self, tmp_path):
        outcomes = [
            SweepOutcome(8, tmp_path, 0, "ok", 2.0, 4.0),
            SweepOutcome(6, tmp_path, 4, "tail"),
            SweepOutcome(10, tmp_path, 0, "ok", 2.5, 4.0),
        ]
        report = convergence_report(outcomes)
        assert report[["n_fock_from", "n_fock_to"]].values.tolist() == [[8, 10]]
        assert report["rel_change_n_mean"].iloc[0] == pytest.approx(0.2)
        assert report["rel_change_F_ph"].iloc[0] == 0.0

    def test_truncation_convergence_report(self, custom_config, tmp_path):
        sweep(custom_config, "n_fock", [6, 8], tmp_path)
        lines = (tmp_path / CONVERGENCE_NAME).read_text().splitlines()
        assert lines[0] == "n_fock_from n_fock_to rel_change_n_mean rel_change_F_ph"
        from_, to, d_n, _ = lines[1].split()
        assert (from_, to) == ("6", "8")
        assert float(d_n) < 1e-3

    def test_empty_values(self, custom_config, tmp_path):
        with pytest.raises(ConfigError, match="at least one value"):
            sweep(custom_config, "g", [], tmp_path)

    def test_bad_values_fail_before_running(self, custom_config, tmp_path):
        with pytest.raises(ConfigError, match="Invalid configuration"):
            sweep(custom_config, "n_fock", [8, 1], tmp_path)
        with pytest.raises(ConfigError, match="cannot be changed"):
            sweep(custom_config, "csv_name", ["a.csv"], tmp_path)
        assert not (tmp_path / "n_fock=8").exists()

    @pytest.mark.slow
    def test_parallel_matches_serial(self, custom_config, tmp_path):
        serial = sweep(custom_config, "g", [0.02, 0.05], tmp_path / "serial")
        parallel = sweep(custom_config, "g", [0.02, 0.05], tmp_path / "parallel", workers=2)
        assert [o.value for o in parallel] == [0.02, 0.05]
        for a, b in zip(serial, parallel, strict=True):
            assert (a.directory / "trajectory.csv").read_bytes() == (b.directory / "trajectory.csv").read_bytes()
