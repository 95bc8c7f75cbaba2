import csv
import json
import math

import numpy as np
import pytest

from grazesim import cli
from grazesim.config import ConfigError, RunConfig, config_from_dict, load_config

SMALL = """
seed = 5
[sweep]
phi_min = -0.004
phi_max = 0.004
phi_step = 0.004
n_trajectories = 12
[quantum]
points_per_wavelength = 20.0
"""


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_defaults_and_grid():
    cfg = load_config(None)
    grid = cfg.sweep.grid()
    assert len(grid) == 61 and grid[0] == -0.06 and grid[30] == 0.0 and grid[-1] == 0.06
    assert cfg.spectrum.phis == [0.0, 0.01, 0.02, 0.04]
    e = cfg.scan.grid()
    assert e[0] == pytest.approx(1e4) and e[-1] == pytest.approx(1e6) and len(e) == 9


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError, match="sweep.phi_stop"):
        load_config(_write(tmp_path, "[sweep]\nphi_stop = 1.0\n"))
    with pytest.raises(ConfigError, match="'colour'"):
        config_from_dict({"colour": 1})


def test_type_errors_are_named():
    with pytest.raises(ConfigError, match="sweep.n_trajectories"):
        config_from_dict({"sweep": {"n_trajectories": 1.5}})
    with pytest.raises(ConfigError, match="potential"):
        config_from_dict({"potential": 3})
    with pytest.raises(ConfigError):
        config_from_dict({"potential": {"well_depth": -1.0}})


def test_echo_roundtrip(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    again = load_config(_write(tmp_path, cfg.echo(), "echo.json"))
    assert again == cfg
    assert isinstance(again, RunConfig)


def test_threads_resolution(monkeypatch):
    cfg = load_config(None)
    monkeypatch.setenv("GRAZESIM_THREADS", "3")
    assert cli.resolve_threads(None, cfg) == 3
    assert cli.resolve_threads(2, cfg) == 2
    monkeypatch.setenv("GRAZESIM_THREADS", "x")
    with pytest.raises(cli.UsageError):
        cli.resolve_threads(None, cfg)


def test_sweep_is_reproducible(tmp_path):
    cfg = _write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep-azimuth", "--config", cfg, "--out-dir", str(a), "--threads", "1",
                     "--svg"]) == 0
    assert cli.main(["sweep-azimuth", "--config", cfg, "--out-dir", str(b), "--threads", "3"]) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    assert (a / "scatter.csv").read_bytes() == (b / "scatter.csv").read_bytes()
    rows = _rows(a / "sweep.csv")
    assert [float(r["phi"]) for r in rows] == [-0.004, 0.0, 0.004]
    assert all(int(r["n_open"]) == 11 for r in rows)
    assert (a / "sweep.svg").read_text().startswith("<svg")
    echo = json.loads((a / "config.json").read_text())
    assert echo["seed"] == 5 and echo["sweep"]["n_trajectories"] == 12


def test_empty_grid_is_usage_error(tmp_path, capsys):
    cfg = _write(tmp_path, "[sweep]\nphis = []\n")
    assert cli.main(["sweep-azimuth", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2
    assert "empty" in capsys.readouterr().err


def test_malformed_key_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "[scan]\nenergy_list = [1.0]\n")
    assert cli.main(["width-scan", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2
    assert "scan.energy_list" in capsys.readouterr().err


def test_bad_flags_exit_code(tmp_path):
    assert cli.main(["no-such-command"]) == 2
    assert cli.main(["sweep-azimuth", "--threads", "0", "--out-dir", str(tmp_path)]) == 2


def test_runtime_failure_exit_code(tmp_path):
    cfg = _write(tmp_path, SMALL + "[incidence]\nz_start = 5.0\n")
    assert cli.main(["sweep-azimuth", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 1


def test_spectrum_outputs(tmp_path):
    cfg = _write(tmp_path, "[spectrum]\nn_trajectories = 50\n[quantum]\n"
                           "points_per_wavelength = 30.0\n")
    out = tmp_path / "s"
    assert cli.main(["spectrum", "--config", cfg, "--out-dir", str(out), "--svg"]) == 0
    for i in range(4):
        q = _rows(out / f"spectrum_{i:02d}_quantum.csv")
        assert abs(sum(float(r["P"]) for r in q) - 1.0) < 1e-6
        c = _rows(out / f"spectrum_{i:02d}_classical.csv")
        assert abs(sum(float(r["P"]) for r in c) - 1.0) < 1e-12
        meta = json.loads((out / f"spectrum_{i:02d}.json").read_text())
        assert meta["quantum_settings"]["points_per_wavelength"] == 30.0
    assert json.loads((out / "spectrum_03.json").read_text())["phi"] == 0.04
    curves = _rows(out / "spectrum_00_curves.csv")
    assert len(curves) == 801


def test_flat_surface_spectrum_is_single_stick(tmp_path):
    cfg = _write(tmp_path, "[potential]\ncorrugation = 0.0\n[spectrum]\nn_trajectories = 10\n"
                           "[quantum]\npoints_per_wavelength = 20.0\n")
    out = tmp_path / "f"
    assert cli.main(["spectrum", "--config", cfg, "--out-dir", str(out), "--phi", "0.0",
                     "--phi", "0.03", "--gamma", "0.1"]) == 0
    for i in range(2):
        for kind in ("quantum", "classical"):
            rows = _rows(out / f"spectrum_{i:02d}_{kind}.csv")
            nonzero = [r for r in rows if float(r["P"]) > 1e-12]
            assert len(nonzero) == 1 and int(nonzero[0]["n"]) == 0


def test_width_scan_rows(tmp_path):
    cfg = _write(tmp_path, "[scan]\nenergies = [2.0e5, 5.0e5]\nclassical = false\n"
                           "n_phi = 8\npoints_per_wavelength = 20.0\n")
    out = tmp_path / "w"
    assert cli.main(["width-scan", "--config", cfg, "--out-dir", str(out)]) == 0
    rows = _rows(out / "width_scan.csv")
    assert [float(r["E"]) for r in rows] == [2e5, 5e5]
    assert list(rows[0])[:5] == ["E", "W_phi_analytic", "W_phi_classical", "W_phi_quantum",
                                 "W_ky_analytic"]
    # hand evaluation: s = (2 + sqrt(4 + 4 (1 - b) E_n / D)) / (2 (1 - b)),
    # W_ky = 2 sqrt(2 m 2 b D / HBAR2) s, W_phi = 2 asin(W_ky / (2 k sin theta))
    assert float(rows[0]["W_ky_analytic"]) == pytest.approx(11.7052391475620989, rel=1e-10)
    assert float(rows[0]["W_phi_analytic"]) == pytest.approx(0.0189178489653487036, rel=1e-10)
    assert math.isnan(float(rows[0]["W_phi_classical"]))
    assert float(rows[0]["W_phi_quantum"]) > 0


def test_trajectory_and_table(tmp_path):
    out = tmp_path / "t"
    assert cli.main(["trajectory", "--out-dir", str(out), "--phi", "0.002", "--x0", "0.3",
                     "--y0", "0.7", "--svg"]) == 0
    summary = json.loads((out / "trajectory.json").read_text())
    assert summary["status"] == "completed" and summary["energy_drift"] <= 1e-8
    assert summary["initial"][:2] == [0.3, 0.7]
    path = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    assert path.shape[1] == 7 and path[:, 3].min() < 0.0
    tab_cfg = _write(tmp_path, "[table]\nn_y = 3\nn_z = 4\n")
    out = tmp_path / "p"
    assert cli.main(["potential-table", "--config", tab_cfg, "--out-dir", str(out), "--svg"]) == 0
    rows = _rows(out / "potential_table.csv")
    assert len(rows) == 12 and list(rows[0]) == ["y", "z", "V", "V_av"]
