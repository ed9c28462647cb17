import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from bandgap_qed import cli
from bandgap_qed.config import load_config, loads_config, dumps_config
from bandgap_qed.io import MAP_COLUMNS, content_hash, read_csv, write_csv
from bandgap_qed.errors import DomainError


def run(*argv):
    return cli.main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_bands(tmp_path, capsys):
    assert run("bands", "--out", tmp_path, "--grid", "1x801") == 0
    assert "lower edge: 7.7000" in capsys.readouterr().out
    edges = rows(tmp_path / "band_edges.csv")
    assert [e["band_index"] for e in edges] == ["1", "2", "2", "3"]
    assert {r["band_index"] for r in rows(tmp_path / "bloch_modes.csv")} == {"1", "2"}
    meta = json.loads((tmp_path / "bands.json").read_text())
    assert meta["command"] == "bands"
    assert meta["content_hash"] == content_hash((tmp_path / "bands.csv").read_text())


def test_bands_uniform(tmp_path):
    assert run("bands", "--uniform", "--out", tmp_path, "--grid", "1x401") == 0
    assert rows(tmp_path / "band_edges.csv") == []
    assert not (tmp_path / "bloch_modes.csv").exists()


def test_boundstate_resonance(tmp_path, capsys):
    assert run("boundstate", "--omega-q", "7.7000009774", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "qubit weight    0.666667" in out
    assert "edge detuning   250.000000 MHz" in out


def test_boundstate_sweep(tmp_path):
    assert run("boundstate", "--sweep", "7.0:8.0:11", "--out", tmp_path) == 0
    table = rows(tmp_path / "boundstate.csv")
    assert len(table) == 11
    omega_b = [float(r["omega_b_GHz"]) for r in table]
    assert np.all(np.diff(omega_b) > 0)


def test_sweep_schema_and_ridges(tmp_path):
    assert run("sweep", "--out", tmp_path, "--grid", "13x241") == 0
    table = rows(tmp_path / "sweep.csv")
    assert tuple(table[0]) == MAP_COLUMNS
    assert len(table) == 13 * 241
    data = read_csv(tmp_path / "sweep.csv", ("control", "probe_GHz", "abs_t_dB"))
    db = data["abs_t_dB"].reshape(13, 241)
    probe = data["probe_GHz"][:241]
    control = data["control"][::241]
    # in-gap peak ridge for qubits in the gap, in-band dip ridge above the edge
    gap = (control > 7.1) & (control < 7.6)
    assert np.all(db[gap].max(axis=1) > -1.0)
    above = np.nonzero(control > 7.8)[0]
    for i in above:
        j = np.argmin(np.abs(probe - control[i]))
        assert db[i, j] < db[i].max() - 20
    meta = json.loads((tmp_path / "sweep.json").read_text())
    assert meta["grid"] == [13, 241] and meta["failed_points"] == 0


def test_pumpprobe_outputs(tmp_path):
    assert run("pumpprobe", "--out", tmp_path, "--grid", "8x401") == 0
    overlay = rows(tmp_path / "pumpprobe_01_overlay.csv")
    assert tuple(overlay[0]) == ("control", "line_freq_GHz", "weight")
    assert run("pumpprobe", "--pump-at", "12", "--out", tmp_path, "--grid", "8x401",
               "--rabi-max", "0.035") == 0
    last = [r for r in rows(tmp_path / "pumpprobe_12_overlay.csv") if float(r["control"]) == 0.035]
    assert len(last) == 2


def test_cool_negative_range(tmp_path):
    assert run("cool", "--out", tmp_path, "--detuning", "-0.1:0.1:5", "--rabi", "0.1:0.2:3") == 0
    table = rows(tmp_path / "cool.csv")
    assert len(table) == 15
    assert all(r["status"] == "ok" for r in table)
    for r in table:
        assert float(r["rho_minus"]) == pytest.approx(float(r["rho_minus_lindblad"]), abs=1e-6)
    assert max(float(r["rho_minus"]) for r in table) > 0.9


def test_fit_length_synthetic(tmp_path):
    assert run("fit-length", "--synthetic", "12", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "fit_length.json").read_text())
    assert report["d_fit_mm"] == pytest.approx(126.0, rel=1e-6)


def test_fit_length_seeded_noise_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("fit-length", "--synthetic", "20", "--noise", "0.1", "--seed", "7",
                   "--out", tmp_path / name) == 0
    a = (tmp_path / "a" / "fit_length.json").read_bytes()
    assert a == (tmp_path / "b" / "fit_length.json").read_bytes()
    assert run("fit-length", "--synthetic", "20", "--noise", "0.1", "--seed", "8",
               "--out", tmp_path / "c") == 0
    assert a != (tmp_path / "c" / "fit_length.json").read_bytes()


def test_fit_length_from_csv(tmp_path):
    inv_l = np.linspace(0.01, 0.05, 6)
    write_csv(tmp_path / "lw.csv", ("gamma_GHz", "L_mm"),
              zip(0.3 * np.exp(-50 * inv_l), 1 / inv_l))
    assert run("fit-length", tmp_path / "lw.csv", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "fit_length.json").read_text())
    assert report["d_fit_mm"] == pytest.approx(100.0, rel=1e-6)


def test_fit_length_bad_csv(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("gamma_GHz,inv_L_per_mm\n0.1,0.01\nnope,0.02\n")
    assert run("fit-length", tmp_path / "bad.csv", "--out", tmp_path) == 2
    err = capsys.readouterr().err
    assert "row 3" in err and "gamma_GHz" in err


def test_calibrate_round_trip(tmp_path):
    out = tmp_path / "dev.cfg"
    assert run("calibrate", "--out", tmp_path, "--output", out) == 0
    fresh, shipped = load_config(out), load_config()
    assert fresh.device.band.omega0 == pytest.approx(shipped.device.band.omega0, abs=1e-9)
    assert fresh.device.qubit.g == pytest.approx(shipped.device.qubit.g, rel=1e-9)
    assert loads_config(dumps_config(fresh)) == fresh


def test_calibrate_failure_names_stage(tmp_path, capsys):
    assert run("calibrate", "--omega0", "100", "--out", tmp_path) == 2
    assert "phase_velocity" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["sweep", "--grid", "10by10"],
    ["sweep", "--format", "xml"],
    ["fit-length"],
    ["nonsense"],
    ["sweep", "--config", "/nonexistent.cfg"],
])
def test_usage_errors(tmp_path, argv):
    assert run(*argv, "--out", tmp_path) == 2


def test_grid_failure_exit_code(tmp_path):
    cfg = tmp_path / "lossless.cfg"
    text = dumps_config(load_config()).replace("gamma_nr = 1e-05", "gamma_nr = 0")
    assert "gamma_nr = 0\n" in text
    cfg.write_text(text)
    # every qubit frequency lies on the probe grid, so every column hits the pole
    assert run("sweep", "--config", cfg, "--control", "7.8:8.0:3", "--probe", "7.8:8.0:21",
               "--out", tmp_path) == 1


def test_global_flags_before_command(tmp_path):
    assert run("--out", tmp_path, "--grid", "3x21", "sweep") == 0
    assert (tmp_path / "sweep.csv").exists()


def test_byte_identical_reruns(tmp_path):
    for name in ("a", "b"):
        assert run("sweep", "--grid", "5x61", "--format", "csv,json,svg",
                   "--out", tmp_path / name) == 0
        assert run("pumpprobe", "--grid", "4x61", "--format", "csv,json,svg",
                   "--out", tmp_path / name) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "sweep.svg" in files and "pumpprobe_01.svg" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_read_csv_reports_missing_column(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DomainError, match="missing column"):
        read_csv(tmp_path / "x.csv", ("c",))


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bandgap_qed", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
