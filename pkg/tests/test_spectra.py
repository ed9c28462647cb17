import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandgap_qed.bound_state import solve_bound_state
from bandgap_qed.driven_qubit import DriveConfig
from bandgap_qed.errors import DomainError, ExtractionError
from bandgap_qed.spectra import (
    TransmissionMap, bare_crystal_s21, bound_state_linewidth, effective_coupling,
    extract_peaks, fit_pipeline_length, flux_to_frequency, linewidth_samples, lorentzian,
    mirror_matrices, polariton_admittance, pump_probe_ladder, pump_probe_map, qubit_s21,
    qubit_sweep_s21, subtract_background_db, to_db,
)
from bandgap_qed.transfer_matrix import atom_matrix, reflection_coefficient

OMEGA01, OMEGA12 = 7.206, 7.008


def _peaks(f, t, **kw):
    return [p for p in extract_peaks(f, np.abs(t) ** 2, **kw) if p.converged]


# -- undriven device -------------------------------------------------------------

@pytest.mark.parametrize("omega_q", [7.0, 7.4, 7.9])
def test_in_gap_peak_and_in_band_dip(device, omega_q):
    sol = solve_bound_state(device.qubit.with_frequency(omega_q), device.band)
    t = qubit_s21(device, np.array([sol.omega_b, omega_q]), omega_q)
    assert abs(t[0]) ** 2 > 0.99
    if omega_q > device.band.omega0:
        assert abs(t[1]) ** 2 < 1e-6


def test_peak_follows_bound_state(device):
    f = np.linspace(6.9, 7.69, 4001)
    tmap = qubit_sweep_s21(device, [7.2, 7.3, 7.6, 7.9], f)
    centres = [_peaks(f, tmap.values[i])[0].center for i in range(4)]
    expected = [solve_bound_state(device.qubit.with_frequency(w), device.band).omega_b
                for w in tmap.control_axis]
    assert np.allclose(centres, expected, atol=1e-3)
    assert np.all(np.diff(centres) > 0)


def test_decoupled_device_is_bare_crystal(device):
    bare = device.with_qubit(g=0.0)
    f = np.linspace(6.9, 8.1, 301)
    tmap = qubit_sweep_s21(bare, [7.2, 7.9], f)
    assert np.allclose(tmap.values, bare_crystal_s21(device, f)[None, :], atol=1e-12)
    assert effective_coupling(bare) == 0.0


def test_lossless_device_is_unitary(device):
    lossless = replace(device, gamma_nr=0.0)
    f = np.linspace(6.9, 8.1, 1201) + 1e-5  # keep clear of the atom pole
    for omega_q in (7.3, 7.9):
        left, right = mirror_matrices(lossless, f)
        atom = atom_matrix(effective_coupling(lossless, omega_q), omega_q, f, 50.0)
        m = left @ atom @ right
        t = qubit_s21(lossless, f, omega_q)
        r = reflection_coefficient(m, 50.0)
        assert np.max(np.abs(np.abs(t) ** 2 + np.abs(r) ** 2 - 1)) < 1e-9


def test_undriven_map_is_passive(device):
    tmap = qubit_sweep_s21(device, np.linspace(6.9, 8.1, 25), np.linspace(6.9, 8.1, 801))
    assert np.max(np.abs(tmap.values)) <= 1 + 1e-6


def test_failed_columns_are_flagged(device):
    lossless = replace(device, gamma_nr=0.0)
    f = np.linspace(7.8, 8.0, 21)
    tmap = qubit_sweep_s21(lossless, [7.9, 7.935, 7.3], f)  # 7.9 lies on the grid
    assert tmap.failed[0].all() and not tmap.failed[2].any()
    assert "PoleError" in tmap.messages[0]
    assert np.all(tmap.values[0] == 0)
    assert tmap.failure_fraction == pytest.approx(1 / 3)


def test_linewidth_grows_towards_edge(device):
    widths = [bound_state_linewidth(device, w) for w in np.linspace(7.3, 8.1, 9)]
    assert np.all(np.diff(widths) > 0)


def test_crystal_linewidth_matches_peak_fit(device):
    (gamma, inv_l), = linewidth_samples(device, [7.8])
    assert gamma == pytest.approx(bound_state_linewidth(device, 7.8), rel=0.02)
    sol = solve_bound_state(device.qubit.with_frequency(7.8), device.band)
    assert inv_l == pytest.approx(1 / sol.loc_length)


def test_pipeline_recovers_device_length(device):
    (d_fit, gamma_ext, r2), samples = fit_pipeline_length(device, np.linspace(7.5, 8.1, 13))
    assert abs(d_fit - device.d0) < 0.25 * device.d0
    assert d_fit == pytest.approx(device.d_eff, rel=1e-4)
    assert r2 > 0.99
    assert len(samples) == 13


def test_pipeline_needs_three_peaks(device):
    with pytest.raises(ExtractionError):
        fit_pipeline_length(device, [7.5, 7.6])


# -- pump-probe ------------------------------------------------------------------

@pytest.fixture(scope="module")
def probe():
    return np.linspace(6.9, 7.3, 4001)


def test_undriven_column_matches_sweep(pp_device, probe):
    driven = pump_probe_map(pp_device, OMEGA01, [0.0], probe).values[0]
    sweep = qubit_sweep_s21(pp_device, [pp_device.qubit.omega_q], probe).values[0]
    a, b = _peaks(probe, driven)[0], _peaks(probe, sweep)[0]
    assert a.center == pytest.approx(b.center, abs=1e-3)
    assert a.amplitude == pytest.approx(b.amplitude, abs=0.02)
    assert a.fwhm == pytest.approx(b.fwhm, rel=0.1)


def test_saturation_suppresses_peak(pp_device):
    f = np.array([OMEGA01])
    tmap = pump_probe_map(pp_device, OMEGA01, [0.0, 0.2], f)
    undriven, saturated = to_db(tmap.values[:, 0])
    assert undriven > -1.0
    assert undriven - saturated >= 10.0


def test_pump_at_01_features(pp_device, probe):
    rabi0 = 0.035
    t = pump_probe_map(pp_device, OMEGA01, [rabi0], probe).values[0]
    peaks = _peaks(probe, t, max_peaks=10)
    doublet = [p for p in peaks if abs(p.center - OMEGA12) < 0.05 and p.amplitude > 0]
    assert len(doublet) == 2
    assert min(p.center for p in doublet) < OMEGA12 < max(p.center for p in doublet)
    sidebands = [p for p in peaks if 0.5 * rabi0 < abs(p.center - OMEGA01) < 1.5 * rabi0
                 and p.amplitude > 0]
    assert sidebands
    assert max(p.amplitude for p in sidebands) < max(p.amplitude for p in doublet)
    # the undriven bound-state peak is gone
    assert abs(t[np.argmin(np.abs(probe - OMEGA01))]) ** 2 < 0.01


def test_pump_at_12_features(pp_device, probe):
    t = pump_probe_map(pp_device, OMEGA12, [0.035], probe).values[0]
    strong = [p for p in _peaks(probe, t) if p.amplitude > 0.05]
    assert len(strong) == 2
    assert all(abs(p.center - OMEGA01) < 0.05 for p in strong)
    assert min(p.center for p in strong) < OMEGA01 < max(p.center for p in strong)


def test_pump_probe_decoupled_limit(pp_device, probe):
    bare = pp_device.with_qubit(g=0.0, omega_q=7.1)
    tmap = pump_probe_map(bare, 7.1, [0.0, 0.03], probe)
    assert np.allclose(tmap.values, bare_crystal_s21(bare, probe)[None, :], atol=1e-12)


def test_pump_probe_columns_are_continuous(pp_device, probe):
    tmap = pump_probe_map(pp_device, OMEGA01, [0.0, 1e-6], probe)
    assert np.max(np.abs(tmap.values[1] - tmap.values[0])) < 1e-3


def test_pump_probe_overlay(pp_device, probe):
    tmap = pump_probe_map(pp_device, OMEGA01, [0.0, 0.035], probe)
    rows = [r for r in tmap.overlay if r[0] == 0.035]
    assert len(rows) == 5
    assert tmap.control_name == "omega_rabi0_GHz"
    assert tmap.metadata["linewidth_01"] > 0


def test_pump_probe_ladder(pp_device):
    ladder = pump_probe_ladder(pp_device)
    assert ladder.transition_freqs == pytest.approx([OMEGA01, OMEGA12, 6.81], abs=1e-9)
    assert ladder.decay_rates[0] == pytest.approx(
        bound_state_linewidth(pp_device) + pp_device.gamma_nr)


def test_polariton_admittance_transmits_response():
    r = np.array([0.2 + 0.1j, 0.5, 0.9 - 0.2j])
    y = polariton_admittance(r)
    # a series element 2y between matched ports transmits 2y/(1 + 2y)... in X form
    x = 2 * y
    assert np.allclose(x / (1 + x), r)


@pytest.mark.parametrize("axes", [([], [7.0]), ([0.0], [])])
def test_pump_probe_empty_axes(pp_device, axes):
    with pytest.raises(DomainError):
        pump_probe_map(pp_device, OMEGA01, *axes)


# -- peak extraction and helpers ---------------------------------------------------

def test_extract_single_lorentzian():
    f = np.linspace(7.0, 7.2, 2001)
    y = lorentzian(f, 7.1234, 0.0035, 0.9, 0.01)
    (p,) = extract_peaks(f, y)
    assert (p.center, p.fwhm, p.amplitude, p.baseline) == pytest.approx(
        (7.1234, 0.0035, 0.9, 0.01), rel=1e-6)
    assert p.converged


def test_extract_two_peaks_sorted_by_amplitude():
    f = np.linspace(6.9, 7.3, 4001)
    y = lorentzian(f, 7.0, 0.005, 0.3) + lorentzian(f, 7.2, 0.004, 0.8)
    peaks = extract_peaks(f, y)
    assert [round(p.center, 3) for p in peaks] == [7.2, 7.0]


def test_extract_noisy_peak(rng):
    f = np.linspace(7.0, 7.2, 2001)
    y = lorentzian(f, 7.1, 0.01, 1.0) + 0.01 * rng.standard_normal(f.size)
    peaks = extract_peaks(f, y)
    assert len(peaks) == 1
    assert peaks[0].center == pytest.approx(7.1, abs=1e-3)
    assert peaks[0].fwhm == pytest.approx(0.01, rel=0.05)


def test_extract_edge_cases():
    f = np.linspace(0, 1, 50)
    assert extract_peaks(f, np.ones_like(f)) == []
    assert extract_peaks(f, f) == []
    with pytest.raises(DomainError):
        extract_peaks(f[:3], f[:3])


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 10.0))
def test_flux_tuning_is_periodic_and_even(phi, omega_max):
    f = flux_to_frequency(phi, omega_max)
    assert flux_to_frequency(phi + 1, omega_max) == pytest.approx(f, abs=1e-7 * omega_max)
    assert flux_to_frequency(-phi, omega_max) == pytest.approx(f)
    assert 0 <= f <= omega_max


def test_flux_tuning_values():
    assert flux_to_frequency(0.0, 8.0) == 8.0
    assert flux_to_frequency(0.5, 8.0) == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(DomainError):
        flux_to_frequency(0.0, 0.0)


def test_db_helpers():
    assert to_db(0.1) == pytest.approx(-20.0)
    assert to_db(0.0) == pytest.approx(-300.0)
    assert subtract_background_db(0.1, 0.01) == pytest.approx(20.0)


def test_transmission_map_validation():
    with pytest.raises(DomainError):
        TransmissionMap([0.0], [1.0, 2.0], np.zeros((1, 3)))
    with pytest.raises(DomainError):
        TransmissionMap([0.0], [1.0], np.array([[np.nan]]))
    m = TransmissionMap([0.0, 1.0], [5.0], np.array([[1.0], [2.0]]))
    assert m.column(0.9)[0] == 2.0
    assert m.failure_fraction == 0.0
