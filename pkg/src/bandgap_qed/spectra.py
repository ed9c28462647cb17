"""
Device-level transmission: crystal plus embedded qubit.

The qubit sits between two mirrors, ``M_L = U**i`` and ``M_R = U**(N - i)``,
where ``U`` is the symmetric unit cell. It is modelled as a shunt two-port
whose radiative coupling is fixed per bare frequency ``omega_q`` so that the
crystal resonance of the combined structure falls on the bound-state
frequency ``omega_b``. With the mirror admittance ``Y_m = 1/Z_L + 1/Z_R``
seen from the qubit plane, the resonance condition
``Im(Y_atom + Y_m) = 0`` at ``f = omega_b`` gives

    gamma_eff = z0 * |Im Y_m(omega_b)| * (omega_q - omega_b).

The atom pole itself stays at ``omega_q``, which produces the in-band
reflection dip there.

Under a pump the bound state itself is treated as the atom. Its weak-probe
response, computed from the driven ladder master equation, forms a
resonant path in parallel with the bare crystal.
"""

from __future__ import annotations

import datetime as _dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import optimize, signal

from .band_structure import BandModel, CrystalGeometry, crystal_matrix, unit_cell_matrix
from .bound_state import QubitParams, fit_effective_length, linewidth_model, solve_bound_state
from .driven_qubit import (
    DriveConfig, TransmonLadder, dressed_populations, dressed_spectrum,
    ladder_steady_state, overlay_lines, probe_response,
)
from .errors import BandgapQEDError, DomainError, ExtractionError, SingularityError
from .transfer_matrix import (
    TWO_PI, TwoPortMatrix, atom_matrix, input_impedance, matrix_power, output_impedance,
    transmission_coefficient,
)

__all__ = [
    "DeviceConfig", "TransmissionMap", "PeakFit", "bare_crystal_s21", "mirror_matrices",
    "mirror_admittance", "effective_coupling", "qubit_s21", "qubit_sweep_s21",
    "pump_probe_ladder", "pump_probe_map", "bound_state_linewidth", "polariton_admittance",
    "fit_pipeline_length", "extract_peaks", "lorentzian",
    "flux_to_frequency", "linewidth_samples", "subtract_background_db", "to_db",
]


@dataclass(frozen=True)
class DeviceConfig:
    """Everything needed to simulate the device.

    ``gamma_waveguide`` is the coupling (GHz) used where the mirror
    admittance gives no usable reference, ``gamma_nr`` a non-radiative
    broadening floor (GHz). ``d0`` is the physical device length; ``d_eff`` and
    ``gamma_ext`` parametrize the leakage linewidth model
    ``gamma_ext*exp(-d_eff/(2L))``. The ladder fields configure the driven transmon:
    ``omega12``/``omega23`` override the anharmonic defaults.
    """

    geometry: CrystalGeometry
    qubit: QubitParams
    band: BandModel
    port_impedance: float = 50.0
    qubit_cell_index: int | None = None
    gamma_waveguide: float = 0.1
    gamma_nr: float = 1e-4
    d0: float = 126.0
    d_eff: float = 126.0
    gamma_ext: float = 1.0
    omega12: float | None = None
    omega23: float | None = None
    gamma_phi: float = 0.0

    def __post_init__(self):
        if self.qubit_cell_index is None:
            object.__setattr__(self, "qubit_cell_index", self.geometry.n_cells // 2)
        if not 0 <= self.qubit_cell_index <= self.geometry.n_cells - 1:
            raise DomainError("qubit_cell_index must lie in [0, n_cells - 1]")
        if not self.port_impedance > 0:
            raise DomainError("port_impedance must be positive")
        if self.gamma_waveguide < 0 or self.gamma_nr < 0:
            raise DomainError("rates must be non-negative")

    def with_qubit(self, **changes) -> "DeviceConfig":
        q = self.qubit
        fields_ = dict(omega_q=q.omega_q, g=q.g, e_c=q.e_c, n_levels=q.n_levels,
                       position=q.position)
        fields_.update(changes)
        return _replace(self, qubit=QubitParams(**fields_))


def _replace(obj, **changes):
    from dataclasses import replace
    return replace(obj, **changes)


@dataclass
class TransmissionMap:
    """Complex transmission on a (control x probe) grid.

    ``values[i, j]`` is ``t`` at ``control_axis[i]`` and ``probe_axis[j]``.
    Points that failed carry ``0`` and are flagged in ``failed``.
    """

    control_axis: np.ndarray
    probe_axis: np.ndarray
    values: np.ndarray
    control_name: str = "omega_q_GHz"
    metadata: dict = field(default_factory=dict)
    failed: np.ndarray | None = None
    messages: list = field(default_factory=list)
    overlay: list = field(default_factory=list)
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    def __post_init__(self):
        self.control_axis = np.asarray(self.control_axis, dtype=float)
        self.probe_axis = np.asarray(self.probe_axis, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        shape = (self.control_axis.size, self.probe_axis.size)
        if self.values.shape != shape:
            raise DomainError(f"values have shape {self.values.shape}, axes imply {shape}")
        if self.failed is None:
            self.failed = np.zeros(shape, dtype=bool)
        if not np.all(np.isfinite(self.values)):
            raise DomainError("transmission values must be finite")

    @property
    def failure_fraction(self) -> float:
        return float(np.mean(self.failed)) if self.failed.size else 0.0

    def column(self, control) -> np.ndarray:
        """Spectrum at the control value closest to ``control``."""
        return self.values[int(np.argmin(np.abs(self.control_axis - control)))]


class PeakFit(NamedTuple):
    """Lorentzian fit of one spectral peak (all frequencies GHz)."""

    center: float
    fwhm: float
    amplitude: float
    residual: float
    baseline: float = 0.0
    converged: bool = True


def to_db(t):
    """``20*log10|t|`` with a floor at -300 dB."""
    return 20.0 * np.log10(np.maximum(np.abs(t), 1e-15))


def subtract_background_db(values, background):
    """Subtract a reference spectrum in dB (``20 log10|t| - 20 log10|t_ref|``)."""
    return to_db(values) - to_db(background)


def bare_crystal_s21(cfg: DeviceConfig, probe_axis):
    """Complex S21 of the crystal without the qubit."""
    return transmission_coefficient(crystal_matrix(cfg.geometry, probe_axis), cfg.port_impedance)


def mirror_matrices(cfg: DeviceConfig, f) -> tuple[TwoPortMatrix, TwoPortMatrix]:
    """ABCD matrices of the crystal on either side of the qubit plane."""
    cell = unit_cell_matrix(cfg.geometry, f)
    i = cfg.qubit_cell_index
    return matrix_power(cell, i), matrix_power(cell, cfg.geometry.n_cells - i)


def mirror_admittance(cfg: DeviceConfig, f, mirrors=None):
    """Admittance (S) loading the qubit plane: both mirrors terminated in the ports."""
    left, right = mirror_matrices(cfg, f) if mirrors is None else mirrors
    z0 = cfg.port_impedance
    return 1.0 / output_impedance(left, z0) + 1.0 / input_impedance(right, z0)


def effective_coupling(cfg: DeviceConfig, omega_q: float | None = None) -> float:
    """Radiative coupling (GHz) that places the crystal resonance at ``omega_b``.

    Falls back to ``cfg.gamma_waveguide`` where the mirror susceptance at
    ``omega_b`` is not capacitive-like (``Im Y_m >= 0``), which happens only
    next to the lower edge of the gap. Returns 0 for an uncoupled qubit.
    """
    q = cfg.qubit if omega_q is None else cfg.qubit.with_frequency(omega_q)
    if q.g == 0:
        return 0.0
    sol = solve_bound_state(q, cfg.band)
    susceptance = float(np.imag(mirror_admittance(cfg, sol.omega_b)))
    if susceptance >= 0 or sol.omega_q <= sol.omega_b:
        return cfg.gamma_waveguide
    return cfg.port_impedance * abs(susceptance) * (sol.omega_q - sol.omega_b)


def _embed(cfg, mirrors, shunt: TwoPortMatrix):
    left, right = mirrors
    return transmission_coefficient(left @ shunt @ right, cfg.port_impedance)


def qubit_s21(cfg: DeviceConfig, probe_axis, omega_q: float | None = None, mirrors=None):
    """Complex S21 of the device with the undriven qubit at ``omega_q``."""
    f = np.asarray(probe_axis, dtype=float)
    omega_q = cfg.qubit.omega_q if omega_q is None else omega_q
    mirrors = mirror_matrices(cfg, f) if mirrors is None else mirrors
    gamma = effective_coupling(cfg, omega_q)
    atom = atom_matrix(gamma, omega_q, f, cfg.port_impedance, gamma_nr=cfg.gamma_nr)
    return _embed(cfg, mirrors, atom)


def _run_columns(func: Callable, controls, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, controls))
    return [func(c) for c in controls]


def _collect(controls, probe, results, **kwargs) -> TransmissionMap:
    values = np.zeros((len(controls), len(probe)), dtype=complex)
    failed = np.zeros(values.shape, dtype=bool)
    messages = []
    for i, (column, message) in enumerate(results):
        if message is not None:
            failed[i] = True
            messages.append(f"control[{i}]={controls[i]:.9g}: {message}")
            continue
        bad = ~np.isfinite(column)
        failed[i] = bad
        values[i] = np.where(bad, 0.0, column)
    return TransmissionMap(controls, probe, values, failed=failed, messages=messages, **kwargs)


def qubit_sweep_s21(cfg: DeviceConfig, control, probe_axis, workers: int = 1,
                    metadata: dict | None = None) -> TransmissionMap:
    """Transmission map versus bare qubit frequency (one column per ``omega_q``)."""
    controls = np.atleast_1d(np.asarray(control, dtype=float))
    probe = np.atleast_1d(np.asarray(probe_axis, dtype=float))
    if controls.size == 0 or probe.size == 0:
        raise DomainError("control and probe axes must be non-empty")
    mirrors = mirror_matrices(cfg, probe)

    def column(omega_q):
        try:
            with np.errstate(all="ignore"):
                return qubit_s21(cfg, probe, omega_q, mirrors), None
        except BandgapQEDError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    results = _run_columns(column, controls, workers)
    return _collect(controls, probe, results, control_name="omega_q_GHz",
                    metadata=dict(metadata or {}))


def pump_probe_ladder(cfg: DeviceConfig, n_levels: int = 4,
                      ref_width: float | None = None) -> TransmonLadder:
    """Transmon ladder whose ``0 -> 1`` line is the bound state of ``cfg.qubit``.

    The ``n+1 -> n`` decay rate is ``(n+1)`` times the bound-state radiative
    width at that transition frequency plus ``cfg.gamma_nr``.
    """
    omega01 = solve_bound_state(cfg.qubit, cfg.band).omega_b
    e_c = cfg.qubit.e_c
    steps = [omega01, omega01 - e_c if cfg.omega12 is None else cfg.omega12]
    if n_levels >= 4:
        steps.append(steps[1] - e_c if cfg.omega23 is None else cfg.omega23)
    while len(steps) < n_levels - 1:
        steps.append(steps[-1] - e_c)
    steps = np.array(steps[:n_levels - 1])
    if ref_width is None:
        ref_width = bound_state_linewidth(cfg) if cfg.qubit.g > 0 else 0.0
    radiative = _line_widths(cfg, steps, omega01, ref_width)
    rates = np.arange(1, steps.size + 1) * radiative + cfg.gamma_nr
    return TransmonLadder.from_transitions(steps, decay_rates=rates)


def bound_state_linewidth(cfg: DeviceConfig, omega_q: float | None = None,
                          search: float = 0.2) -> float:
    """FWHM (GHz) of the undriven bound-state peak of the device.

    The half-power points of ``|t|**2`` on either side of ``omega_b`` are
    located by root finding, so no probe grid is involved. Falls back to the
    leakage linewidth model when the peak is not resolvable.
    """
    q = cfg.qubit if omega_q is None else cfg.qubit.with_frequency(omega_q)
    sol = solve_bound_state(q, cfg.band)

    def power(f):
        return float(np.abs(qubit_s21(cfg, np.array([f]), q.omega_q)[0]) ** 2)

    half = 0.5 * power(sol.omega_b)
    lo_edge = sol.omega_b - search
    hi_edge = min(sol.omega_b + search, cfg.band.omega0 - 1e-9)
    try:
        lo = optimize.brentq(lambda f: power(f) - half, lo_edge, sol.omega_b, xtol=1e-12)
        hi = optimize.brentq(lambda f: power(f) - half, sol.omega_b, hi_edge, xtol=1e-12)
        return float(hi - lo)
    except ValueError:
        return float(linewidth_model(sol, cfg.d_eff, cfg.gamma_ext))


def _line_widths(cfg, freqs, ref_freq, ref_width):
    """Bound-state linewidth at each line frequency, scaled so the model
    reproduces ``ref_width`` at ``ref_freq``."""
    def model(f):
        detuning = cfg.band.omega0 - np.asarray(f, dtype=float)
        safe = np.where(detuning > 0, detuning, 1.0)
        loc = np.where(detuning > 0, np.sqrt(cfg.band.alpha / (TWO_PI * safe)), np.inf)
        return linewidth_model(loc, cfg.d_eff, cfg.gamma_ext)
    return ref_width * model(freqs) / model(ref_freq)


def polariton_admittance(response):
    """Normalized series admittance ``X/2`` with ``X = R/(1 - R)``.

    ``R`` is the reflection amplitude ``1 - t_q`` of the bound state seen as
    a point scatterer, so the element alone transmits ``R``. ``Re X >= 0``
    exactly when ``|R - 1/2| <= 1/2``, the passivity condition of a
    symmetric point scatterer.
    """
    r = np.asarray(response, dtype=complex)
    with np.errstate(all="ignore"):
        return 0.5 * r / (1.0 - r)


def _parallel_s21(crystal: TwoPortMatrix, y_series, z0: float):
    """S21 of the crystal in parallel with a series admittance (normalized)."""
    b = crystal.b / z0
    if np.any(b == 0):
        raise SingularityError("crystal admittance parameters are undefined (B = 0)")
    y11 = crystal.d / b + y_series
    y22 = crystal.a / b + y_series
    y21 = -crystal.det() / b - y_series
    y12 = -1.0 / b - y_series
    return -2.0 * y21 / ((1.0 + y11) * (1.0 + y22) - y12 * y21)


def pump_probe_map(cfg: DeviceConfig, drive: DriveConfig | float, power_axis, probe_axis,
                   ladder: TransmonLadder | None = None, workers: int = 1,
                   overlay_floor: float = 0.02, metadata: dict | None = None) -> TransmissionMap:
    """Probe transmission of the driven device versus bare Rabi rate.

    The driven bound state is treated as the atom: a ladder whose ``0 -> 1``
    frequency is ``omega_b``, decaying at the bound-state radiative width.
    For each ``Omega0`` the weak-probe response of the ladder
    (:func:`~bandgap_qed.driven_qubit.probe_response`) gives a resonant path
    that is placed in parallel with the bare crystal. The undriven width is
    taken from the device peak itself, so the ``Omega0 = 0`` column
    reproduces the position, height and width of the bound-state peak of
    :func:`qubit_sweep_s21`.

    The secular dressed-line overlay is attached as
    ``(Omega0, freq, visibility)`` rows.
    """
    omega_d = drive.omega_d if isinstance(drive, DriveConfig) else float(drive)
    controls = np.atleast_1d(np.asarray(power_axis, dtype=float))
    probe = np.atleast_1d(np.asarray(probe_axis, dtype=float))
    if controls.size == 0 or probe.size == 0:
        raise DomainError("power and probe axes must be non-empty")
    ref_width = bound_state_linewidth(cfg) if cfg.qubit.g > 0 else 0.0
    ladder = pump_probe_ladder(cfg, ref_width=ref_width) if ladder is None else ladder
    crystal = crystal_matrix(cfg.geometry, probe)
    omega01 = float(ladder.transition_freqs[0])
    overlay: list[tuple[float, float, float]] = []

    def radiative(f):
        return _line_widths(cfg, f, omega01, ref_width)

    def column(rabi0):
        try:
            d = DriveConfig(omega_d, rabi0)
            rho = ladder_steady_state(ladder, d, cfg.gamma_phi)
            response = probe_response(ladder, d, probe, radiative, cfg.gamma_phi, rho=rho)
            y = polariton_admittance(response)
            with np.errstate(all="ignore"):
                t = _parallel_s21(crystal, y, cfg.port_impedance)
            spec = dressed_spectrum(ladder, d)
            pops = dressed_populations(rho, spec)
            return (t, [(rabi0, f, v) for f, v in overlay_lines(spec, pops, overlay_floor)]), None
        except BandgapQEDError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    raw = _run_columns(column, controls, workers)
    results = []
    for payload, message in raw:
        if payload is None:
            results.append((None, message))
        else:
            results.append((payload[0], None))
            overlay.extend(payload[1])
    meta = dict(metadata or {})
    meta.update(omega_d=omega_d, levels=list(ladder.level_freqs),
                decay_rates=list(ladder.decay_rates), linewidth_01=ref_width)
    return _collect(controls, probe, results, control_name="omega_rabi0_GHz",
                    metadata=meta, overlay=overlay)


def lorentzian(f, center, fwhm, amplitude, baseline=0.0):
    half = 0.5 * fwhm
    return baseline + amplitude * half ** 2 / ((f - center) ** 2 + half ** 2)


def _noise_level(y):
    # robust white-noise estimate from first differences
    return 1.4826 * np.median(np.abs(np.diff(y) - np.median(np.diff(y)))) / math.sqrt(2.0)


def extract_peaks(f, y, max_peaks: int = 5, prominence: float | None = None,
                  window: float = 3.0) -> list[PeakFit]:
    """Locate peaks in ``y(f)`` and fit each with a Lorentzian plus baseline.

    Peaks are found with :func:`scipy.signal.find_peaks`. The default
    prominence threshold is ten times the noise level estimated from the
    first differences, with a floor of 1e-6 of the data range. Each peak is
    refit by least squares on ``center +- window*FWHM``. Peaks whose fit
    fails to converge are returned with ``converged=False`` and the initial
    estimates. Results are sorted by amplitude, largest first.
    """
    f = np.asarray(f, dtype=float)
    y = np.asarray(y, dtype=float)
    if f.shape != y.shape or f.ndim != 1 or f.size < 5:
        raise DomainError("need matching one-dimensional arrays of at least 5 samples")
    span = float(np.ptp(y))
    if span == 0:
        return []
    if prominence is None:
        prominence = max(10.0 * _noise_level(y), 1e-6 * span)
    idx, props = signal.find_peaks(y, prominence=prominence)
    if idx.size == 0:
        return []
    widths = signal.peak_widths(y, idx, rel_height=0.5, prominence_data=(
        props["prominences"], props["left_bases"], props["right_bases"]))[0]
    step = float(np.mean(np.diff(f)))
    fits = []
    for i, w in zip(idx, widths):
        fwhm0 = max(w * step, step)
        base0 = y[i] - props["prominences"][list(idx).index(i)]
        p0 = (f[i], fwhm0, y[i] - base0, base0)
        sel = np.abs(f - f[i]) <= window * fwhm0 + step
        try:
            popt, _ = optimize.curve_fit(lorentzian, f[sel], y[sel], p0=p0, maxfev=5000)
            model = lorentzian(f[sel], *popt)
            res = float(np.sqrt(np.mean((model - y[sel]) ** 2)))
            if not (popt[1] != 0 and np.all(np.isfinite(popt))):
                raise RuntimeError("degenerate fit")
            fits.append(PeakFit(float(popt[0]), float(abs(popt[1])), float(popt[2]), res,
                                float(popt[3])))
        except (RuntimeError, optimize.OptimizeWarning, ValueError):
            fits.append(PeakFit(float(f[i]), float(fwhm0), float(p0[2]), math.nan,
                                float(base0), converged=False))
    fits.sort(key=lambda p: -p.amplitude)
    return fits[:max_peaks]


def flux_to_frequency(phi_over_phi0, omega_max: float):
    """Symmetric-SQUID tuning curve ``omega_max*sqrt(|cos(pi*phi/phi0)|)``."""
    if not omega_max > 0:
        raise DomainError("omega_max must be positive")
    out = omega_max * np.sqrt(np.abs(np.cos(np.pi * np.asarray(phi_over_phi0, dtype=float))))
    return out.item() if np.ndim(out) == 0 else out


def linewidth_samples(cfg: DeviceConfig, omega_q_values: Sequence[float],
                      half_window: float = 0.15, n_probe: int = 3001) -> np.ndarray:
    """``(gamma, 1/L)`` pairs from the crystal bound-state peaks.

    For each bare frequency the device transmission ``|t|**2`` is sampled
    around the predicted ``omega_b`` and the dominant peak is fitted with a
    Lorentzian; its FWHM is the linewidth. ``L`` comes from the bound-state
    solution. Points where no peak is found are skipped.
    """
    rows = []
    for omega_q in omega_q_values:
        sol = solve_bound_state(cfg.qubit.with_frequency(float(omega_q)), cfg.band)
        hi = min(sol.omega_b + half_window, cfg.band.omega0)
        probe = np.linspace(sol.omega_b - half_window, hi, n_probe)
        power = np.abs(qubit_s21(cfg, probe, float(omega_q))) ** 2
        peaks = [p for p in extract_peaks(probe, power, max_peaks=3) if p.converged]
        if not peaks:
            continue
        best = min(peaks, key=lambda p: abs(p.center - sol.omega_b))
        rows.append((best.fwhm, 1.0 / sol.loc_length))
    return np.array(rows, dtype=float).reshape(-1, 2)


def fit_pipeline_length(cfg: DeviceConfig, omega_q_values: Sequence[float]):
    """Effective length fitted to the crystal peak linewidths; see
    :func:`linewidth_samples` and :func:`fit_effective_length`."""
    samples = linewidth_samples(cfg, omega_q_values)
    if len(samples) < 3:
        raise ExtractionError("fewer than three usable linewidths")
    return fit_effective_length(samples), samples
