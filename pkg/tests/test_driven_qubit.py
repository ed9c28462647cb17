import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandgap_qed.band_structure import BandModel
from bandgap_qed.driven_qubit import (
    CoolingRates, DriveConfig, TransmonLadder, cooling_rates, dressed_bound_state,
    dressed_hamiltonian, dressed_lindblad_terms, dressed_populations, dressed_spectrum,
    dressed_steady_state, driven_transmission_factor, ladder_steady_state, lindblad_steady_state,
    liouvillian, lowering_operator, mixing_angle, overlay_lines, probe_response,
)
from bandgap_qed.errors import DomainError, SteadyStateError
from bandgap_qed.spectra import pump_probe_ladder

OMEGA01, OMEGA12 = 7.206, 7.008  # pump-probe operating point


def _two_level(f0=7.0, gamma=0.0):
    return TransmonLadder.from_transitions([f0], gamma)


# -- dressed spectra -----------------------------------------------------------

@pytest.mark.parametrize("rabi", [0.01, 0.1, 0.37])
def test_resonant_mollow_frequencies(rabi):
    spec = dressed_spectrum(_two_level(), DriveConfig(7.0, rabi))
    freqs = sorted({round(t.freq, 12) for t in spec.transitions})
    assert np.allclose(freqs, [7.0 - rabi, 7.0, 7.0 + rabi], atol=1e-10, rtol=0)


@pytest.mark.parametrize("delta", [-0.05, 0.02, 0.1])
def test_detuned_mollow_uses_generalized_rabi(delta):
    rabi = 0.04
    spec = dressed_spectrum(_two_level(), DriveConfig(7.0 - delta, rabi))
    split = spec.eigenvalues[1] - spec.eigenvalues[0]
    theta, omega = mixing_angle(delta, rabi)
    assert split == pytest.approx(math.hypot(delta, rabi), abs=1e-12)
    assert omega == pytest.approx(split)


def test_mixing_angle_limits():
    assert mixing_angle(0.0, 0.1)[0] == pytest.approx(math.pi / 4)
    assert mixing_angle(1.0, 1e-9)[0] == pytest.approx(0.0, abs=1e-8)
    assert mixing_angle(-1.0, 1e-9)[0] == pytest.approx(math.pi / 2, abs=1e-8)
    with pytest.raises(DomainError):
        mixing_angle(0.0, 0.0)


def test_weights_are_matrix_elements():
    ladder = TransmonLadder.from_transitions([7.2, 6.8, 6.4])
    spec = dressed_spectrum(ladder, DriveConfig(7.2, 0.0), weight_floor=0.0)
    bare = np.argmax(np.abs(spec.eigenvectors), axis=0)  # dressed index -> bare level
    weights = {(bare[t.lower], bare[t.upper]): t.weight
               for t in spec.transitions if t.weight > 0}
    assert weights == pytest.approx({(0, 1): 1.0, (1, 2): 2.0, (2, 3): 3.0})


def test_hamiltonian_in_drive_frame():
    ladder = TransmonLadder.from_transitions([7.2, 6.8])
    h = dressed_hamiltonian(ladder, DriveConfig(7.0, 0.1))
    assert np.allclose(np.diag(h), [0.0, 0.2, 0.0])
    assert h[0, 1] == pytest.approx(0.05)
    assert h[1, 2] == pytest.approx(math.sqrt(2) * 0.05)


@pytest.mark.parametrize("frac", [0.02, 0.1, 0.2])
def test_autler_townes_spacing(frac):
    ladder = TransmonLadder.from_transitions([OMEGA01, OMEGA01 - 0.385])
    rabi0 = frac * 0.385
    spec = dressed_spectrum(ladder, DriveConfig(ladder.transition_freqs[1], rabi0))
    near = sorted(t.freq for t in spec.transitions
                  if abs(t.freq - OMEGA01) < 2 * rabi0 and t.weight > 0.2)
    assert len(near) == 2
    assert near[1] - near[0] == pytest.approx(math.sqrt(2) * rabi0, rel=0.01)


def _overlay(pp_device, omega_d, rabi0):
    ladder = pump_probe_ladder(pp_device)
    drive = DriveConfig(omega_d, rabi0)
    spec = dressed_spectrum(ladder, drive)
    pops = dressed_populations(ladder_steady_state(ladder, drive), spec)
    return [f for f, _ in overlay_lines(spec, pops)]


def test_overlay_five_lines_pumping_01(pp_device):
    lines = _overlay(pp_device, OMEGA01, 0.035)
    assert len(lines) == 5
    # central line and Rabi sidebands at omega01, AT doublet straddling omega12
    assert sum(abs(f - OMEGA01) < 1e-6 for f in lines) == 1
    assert sum(abs(f - OMEGA01) < 0.05 for f in lines) == 3
    doublet = [f for f in lines if abs(f - OMEGA12) < 0.05]
    assert len(doublet) == 2 and doublet[0] < OMEGA12 < doublet[1]


def test_overlay_doublet_pumping_12(pp_device):
    lines = _overlay(pp_device, OMEGA12, 0.035)
    assert len(lines) == 2
    assert lines[0] < OMEGA01 < lines[1]


# -- master equations ----------------------------------------------------------

def _random_system(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = a + a.conj().T
    ops = [(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), rng.uniform(0.1, 1))
           for _ in range(2)]
    return h, ops


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_liouvillian_preserves_trace_and_hermiticity(n, seed):
    rng = np.random.default_rng(seed)
    h, ops = _random_system(rng, n)
    sup = liouvillian(h, ops)
    assert np.allclose(np.eye(n).reshape(-1) @ sup, 0, atol=1e-10)
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = b @ b.conj().T
    drho = (sup @ rho.reshape(-1)).reshape(n, n)
    assert np.allclose(drho, drho.conj().T, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_steady_state_is_a_density_matrix(n, seed):
    rng = np.random.default_rng(seed)
    h, ops = _random_system(rng, n)
    rho = lindblad_steady_state(h, ops)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(rho, rho.conj().T)
    assert np.linalg.eigvalsh(rho).min() > -1e-10
    assert np.linalg.norm(liouvillian(h, ops) @ rho.reshape(-1)) < 1e-8


def test_steady_state_errors():
    with pytest.raises(SteadyStateError):
        lindblad_steady_state(np.diag([0.0, 1.0]), [])
    with pytest.raises(DomainError):
        lindblad_steady_state(np.array([[0, 1], [0, 0]]), [])


def test_driven_two_level_steady_state():
    # resonant drive: rho_ee = s/(2(1+s)) with s = 2 Omega^2 / gamma^2
    gamma, rabi = 0.01, 0.02
    rho = ladder_steady_state(_two_level(gamma=gamma), DriveConfig(7.0, rabi))
    s = 2 * rabi ** 2 / gamma ** 2
    assert rho[1, 1].real == pytest.approx(s / (2 * (1 + s)), rel=1e-9)


# -- cooling -------------------------------------------------------------------

rates_st = st.builds(CoolingRates, st.floats(0, 1), st.floats(1e-4, 1), st.floats(1e-4, 1),
                     st.floats(0.05, math.pi / 2 - 0.05), st.just(0.0), st.floats(0.01, 1.0))


@settings(max_examples=200, deadline=None)
@given(rates_st)
def test_cooling_closed_form_matches_lindblad(rates):
    rho_mm, rho_pp = dressed_steady_state(rates)
    h, ops = dressed_lindblad_terms(rates)
    rho = lindblad_steady_state(h, ops)
    assert rho[1, 1].real == pytest.approx(rho_mm, abs=1e-6)
    assert rho[0, 0].real == pytest.approx(rho_pp, abs=1e-6)
    assert rho_mm + rho_pp == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 1), st.floats(1e-4, 1))
def test_cooling_symmetric_point(g_minus, g_plus):
    rho_mm, _ = dressed_steady_state(CoolingRates(0.1, g_minus, g_plus))
    assert rho_mm == pytest.approx(g_plus / (g_minus + g_plus), rel=1e-12)


def test_dephasing_pulls_towards_equal_populations():
    base = CoolingRates(0.1, 0.01, 1.0)
    noisy = CoolingRates(0.1, 0.01, 1.0, gamma_phi=10.0)
    assert dressed_steady_state(noisy)[0] < dressed_steady_state(base)[0]
    assert dressed_steady_state(noisy)[0] == pytest.approx(0.5, abs=0.05)


def test_band_edge_cooling(device, run):
    rates = cooling_rates(device.band, run.cooling["omega_l"], run.cooling["omega"],
                          device.qubit.g)
    assert rates.gamma_plus > 10 * rates.gamma_minus
    rho_mm, _ = dressed_steady_state(rates)
    assert rho_mm > 0.9
    rho = lindblad_steady_state(*dressed_lindblad_terms(rates))
    assert rho[1, 1].real == pytest.approx(rho_mm, abs=1e-9)


def test_cooling_validation(band):
    with pytest.raises(DomainError):
        cooling_rates(band, 7.6, 0.0, 1.0)
    with pytest.raises(DomainError):
        cooling_rates(band, 7.6, 0.1, 1.0, delta_a=0.2)
    with pytest.raises(DomainError):
        CoolingRates(-1.0, 0.1, 0.1)


# -- probe response --------------------------------------------------------------

def test_undriven_probe_response_is_lorentzian():
    gamma, extra = 0.004, 0.001
    ladder = TransmonLadder.from_transitions([7.0], decay_rates=[gamma + extra])
    f = np.linspace(6.95, 7.05, 101)
    r = probe_response(ladder, DriveConfig(7.0, 0.0), f, gamma)
    expected = 0.5 * gamma / (1j * (f - 7.0) + 0.5 * (gamma + extra))
    assert np.allclose(r, expected, atol=1e-12)


def test_probe_response_is_continuous_in_drive():
    ladder = TransmonLadder.from_transitions([7.2, 7.0, 6.8], decay_rates=[0.004, 0.008, 0.012])
    f = np.linspace(6.9, 7.3, 401)
    r0 = probe_response(ladder, DriveConfig(7.2, 0.0), f, 0.004)
    r1 = probe_response(ladder, DriveConfig(7.2, 1e-6), f, 0.004)
    assert np.max(np.abs(r1 - r0)) < 1e-6


def test_undriven_probe_response_is_passive():
    ladder = TransmonLadder.from_transitions([7.2, 7.0, 6.8], decay_rates=[0.004, 0.009, 0.013])
    f = np.linspace(6.5, 7.5, 2001)
    r = probe_response(ladder, DriveConfig(7.2, 0.0), f, lambda x: 0.004 + 0 * x)
    assert np.all(np.abs(r - 0.5) <= 0.5 + 1e-12)


def test_transmission_factor_limits():
    ladder = _two_level()
    spec = dressed_spectrum(ladder, DriveConfig(7.0, 0.0))
    f = np.array([7.0, 7.01])
    t = driven_transmission_factor([1.0, 0.0], spec, f, 0.01, gamma_nr=0.0)
    assert t[0] == pytest.approx(0.0, abs=1e-12)
    assert t[1] == pytest.approx(1 - 0.005 / (0.01j + 0.005))
    saturated = driven_transmission_factor([0.5, 0.5], spec, f, 0.01, gamma_nr=0.0)
    assert np.allclose(saturated, 1.0)
    inverted = driven_transmission_factor([0.0, 1.0], spec, 7.0, 0.01, gamma_nr=0.001)
    assert abs(inverted) > 1
    with pytest.raises(DomainError):
        driven_transmission_factor([0.5, 0.4], spec, f, 0.01, gamma_nr=0.0)


def test_lowering_operator():
    a = lowering_operator(4)
    assert np.allclose(np.diag(a.T @ a), [0, 1, 2, 3])


@pytest.mark.parametrize("kwargs", [
    dict(level_freqs=(0.0,), decay_rates=()),
    dict(level_freqs=(1.0, 7.0), decay_rates=(0.0,)),
    dict(level_freqs=(0.0, 7.0, 14.5), decay_rates=(0.0, 0.0)),
    dict(level_freqs=(0.0, 7.0), decay_rates=(-1.0,)),
    dict(level_freqs=(0.0, 7.0), decay_rates=(0.0, 0.0)),
])
def test_ladder_validation(kwargs):
    with pytest.raises(DomainError):
        TransmonLadder(**kwargs)


def test_negative_rabi_rejected():
    with pytest.raises(DomainError):
        DriveConfig(7.0, -0.1)


# -- doubly dressed bound state ----------------------------------------------------

def test_dressed_bound_state_scale(device):
    split = dressed_bound_state(device.band, device.qubit.g, math.pi / 4, device.band.omega0)
    assert 0.080 <= split <= 0.110
    # coupling g cos^2(theta) -> shift (1/4)^(2/3) of the bare one
    assert split == pytest.approx(0.25 * 0.25 ** (2 / 3), rel=1e-6)


def test_dressed_bound_state_decouples_at_right_angle(band):
    assert dressed_bound_state(band, 4.85, math.pi / 2, 7.5) == pytest.approx(band.omega0 - 7.5)
