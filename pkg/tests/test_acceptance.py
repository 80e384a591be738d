"""Preset runs checked against the published qualitative behaviour.

The full-length runs are marked slow and skipped unless pytest is given
``--run-slow``; they take hours. Shortened runs of the same presets are
integration tests.
"""

import numpy as np
import pytest

from rabi_dce.config import resolve_config
from rabi_dce.io import read_snapshot, read_trajectory, snapshot_path
from rabi_dce.runner import CONVERGENCE_NAME, execute, sweep

SCALAR_COLUMNS = ("P_e", "n_mean", "n_std", "S_L", "negativity", "r", "M_av", "M_opt")


def preset_run(tmp_path, preset, **overrides):
    settings = {"progress": False, "plot_script": False, "directory": str(tmp_path), **overrides}
    config = resolve_config({}, [("preset", preset), *settings.items()])
    return config, read_trajectory(execute(config).csv_path)


def check_hygiene(data):
    assert np.all(data["trace_error"] < 1e-5)
    assert np.all(data["tail_population"] < 1e-6)


@pytest.mark.integration
class TestShortRuns:
    """Shortened preset runs, cheap enough for every test session."""

    SHORT = {"t_final": 60.0, "n_fock": 12, "sample_stride": 5.0, "snapshot_times": []}

    @pytest.mark.parametrize("preset", ["fig1", "fig4"])
    def test_frames_agree(self, tmp_path, preset):
        _, lab = preset_run(tmp_path / "lab", preset, **self.SHORT)
        _, rotating = preset_run(tmp_path / "rotating", preset, frame="rotating", **self.SHORT)
        assert lab["t"].tolist() == rotating["t"].tolist()
        for column in ("P_e", "n_mean", "n_std", "S_L", "negativity"):
            assert np.allclose(lab[column], rotating[column], atol=1e-6, rtol=0), column
        for column in ("F_ph", "M_av", "M_opt"):
            assert np.allclose(lab[column], rotating[column], atol=1e-4, rtol=0), column
        assert np.allclose(lab["r"], rotating["r"], rtol=1e-4, atol=0, equal_nan=True)

    @pytest.mark.parametrize("preset", ["fig1", "fig2", "fig4", "fig5"])
    def test_hygiene(self, tmp_path, preset):
        _, data = preset_run(tmp_path, preset, **self.SHORT)
        check_hygiene(data)
        assert np.all(data["P_e"] >= 0)
        assert np.all(data["negativity"] >= 0)
        assert np.all(data["M_av"] <= data["M_opt"] + 1e-9)


@pytest.mark.slow
class TestFrames:
    """Lab and rotating frame give the same records."""

    def test_fig1_frames_agree(self, tmp_path):
        common = {"t_final": 2000.0, "n_fock": 40, "snapshot_times": []}
        _, lab = preset_run(tmp_path / "lab", "fig1", **common)
        _, rotating = preset_run(tmp_path / "rotating", "fig1", frame="rotating", **common)
        assert lab["t"].tolist() == rotating["t"].tolist()
        for column in SCALAR_COLUMNS:
            assert np.allclose(lab[column], rotating[column], atol=1e-6, rtol=0, equal_nan=True), column
        assert np.allclose(lab["F_ph"], rotating["F_ph"], atol=1e-4, rtol=0)


@pytest.mark.slow
class TestTwoPhoton:
    """Two-photon generation with the qubit modulated near 2ν."""

    def test_reduced_run(self, tmp_path):
        _, data = preset_run(tmp_path, "fig1", t_final=1e4, n_fock=80, snapshot_times=[])
        check_hygiene(data)
        assert np.all(data["P_e"] <= 0.25)
        assert np.all(1 - data["S_L"] >= 0.6)
        assert data["n_mean"][-1] > data["n_mean"][0]

    def test_reduced_run_is_converged_in_n_fock(self, tmp_path):
        config = resolve_config(
            {},
            [("preset", "fig1"), ("t_final", 1e4), ("snapshot_times", []), ("plot_script", False), ("progress", False)],
        )
        outcomes = sweep(config, "n_fock", [120, 140], tmp_path, workers=2)
        assert [o.exit_code for o in outcomes] == [0, 0]
        _, _, d_n, d_f = (tmp_path / CONVERGENCE_NAME).read_text().splitlines()[1].split()
        assert float(d_n) < 1e-3
        assert float(d_f) < 1e-3

    def test_fig1_full_run(self, tmp_path):
        _, data = preset_run(tmp_path, "fig1")
        check_hygiene(data)
        assert data["n_mean"][-1] >= 5
        assert np.all(data["P_e"] <= 0.25)
        assert np.all(1 - data["S_L"] >= 0.6)
        assert data["F_ph"][-1] > data["n_mean"][-1]
        assert data["M_av"][-1] > 1
        assert 0.4 <= np.nanmax(data["r"]) <= 1.0

    def test_fig2_unitary_exceeds_squeezed_vacuum(self, tmp_path):
        _, data = preset_run(tmp_path, "fig2", dissipation_on=False)
        assert np.nanmax(data["r"]) > 1


@pytest.mark.slow
class TestFourPhoton:
    """Four-photon generation with the qubit modulated near 4ν."""

    def test_fig4_full_run(self, tmp_path):
        config, data = preset_run(tmp_path, "fig4")
        check_hygiene(data)
        assert np.max(data["P_e"]) >= 0.4
        assert np.max(data["M_av"]) > 10

        def peaks(probabilities):
            p = np.asarray(probabilities)
            return sum(1 for k in range(1, (len(p) - 2) // 4 + 1) if p[4 * k] > max(p[4 * k - 1], p[4 * k + 1]))

        counts = [
            peaks(read_snapshot(snapshot_path(tmp_path, t)).probabilities) for t in config.analysis.snapshot_times
        ]
        assert max(counts) >= 2
