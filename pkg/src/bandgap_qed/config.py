"""
Device configuration files and calibration.

Files are INI-style (``[section]`` headers, ``key = value``) read with
:mod:`configparser`. Frequencies are in GHz, lengths in mm, impedances in
ohm, angles in rad.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .band_structure import (
    BELOW, BandModel, CrystalGeometry, band_edge_steepness, calibrate_phase_velocity,
    find_edge, fit_quadratic_band,
)
from .bound_state import QubitParams, calibrate_g
from .errors import BandgapQEDError, CalibrationError
from .spectra import DeviceConfig, fit_pipeline_length
from .transfer_matrix import WaveguideSegment

__all__ = [
    "ConfigError", "RunConfig", "PAPER_CONFIG", "load_config", "loads_config", "dumps_config",
    "save_config", "paper_geometry", "calibrate_device", "config_dict",
]

PAPER_CONFIG = "device_paper.cfg"

# ladder window used for the effective-length fit; see calibrate_device
PIPELINE_OMEGA_Q = (7.5, 8.1, 13)


class ConfigError(BandgapQEDError, ValueError):
    """Missing or malformed configuration entry."""


@dataclass(frozen=True)
class RunConfig:
    """A device plus the operating points used by the sweep commands."""

    device: DeviceConfig
    pumpprobe: dict = field(default_factory=dict)
    cooling: dict = field(default_factory=dict)
    targets: dict = field(default_factory=dict)
    provenance: str = ""


def paper_geometry(phase_velocity: float = 125.0, n_cells: int = 14) -> CrystalGeometry:
    """Shipped crystal: 0.45 mm of 28 ohm and 8 mm of 125 ohm per cell."""
    lo = WaveguideSegment(0.45, 28.0, phase_velocity)
    hi = WaveguideSegment(8.0, 125.0, phase_velocity)
    return CrystalGeometry(lo, hi, n_cells)


def _get(parser, section, key, cast=float, default=None):
    try:
        raw = parser.get(section, key)
    except (configparser.NoSectionError, configparser.NoOptionError):
        if default is not None:
            return default
        raise ConfigError(f"missing [{section}] {key}") from None
    if cast is None:
        return raw
    if raw.strip().lower() in ("", "none") and default is not None:
        return default
    try:
        value = cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {cast.__name__}") from None
    if cast is float and not math.isfinite(value):
        raise ConfigError(f"[{section}] {key} must be finite")
    return value


def _optional_float(parser, section, key):
    raw = parser.get(section, key, fallback="none").strip().lower()
    if raw in ("", "none"):
        return None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None


def _section_floats(parser, section) -> dict:
    if not parser.has_section(section):
        return {}
    out = {}
    for key, raw in parser.items(section):
        try:
            out[key] = float(raw)
        except ValueError:
            out[key] = raw.strip()
    return out


def loads_config(text: str) -> RunConfig:
    """Parse configuration text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    try:
        v_p = _get(parser, "geometry", "phase_velocity")
        geometry = CrystalGeometry(
            WaveguideSegment(_get(parser, "geometry", "lo_length"),
                             _get(parser, "geometry", "lo_impedance"), v_p),
            WaveguideSegment(_get(parser, "geometry", "hi_length"),
                             _get(parser, "geometry", "hi_impedance"), v_p),
            _get(parser, "geometry", "n_cells", int),
        )
        band = BandModel(
            omega0=_get(parser, "band", "omega0"),
            alpha=_get(parser, "band", "alpha"),
            kappa=_get(parser, "band", "kappa"),
            k0=_get(parser, "band", "k0", default=0.0),
            band_index=_get(parser, "band", "band_index", int, default=2),
            edge_side=_get(parser, "band", "edge_side", None, default=BELOW),
            fit_rms=_get(parser, "band", "fit_rms", default=0.0),
        )
        qubit = QubitParams(
            omega_q=_get(parser, "qubit", "omega_q"),
            g=_get(parser, "qubit", "g"),
            e_c=_get(parser, "qubit", "e_c", default=0.385),
            n_levels=_get(parser, "qubit", "n_levels", int, default=4),
            position=(_get(parser, "qubit", "cell_index", int, default=geometry.n_cells // 2),
                      _get(parser, "qubit", "offset", default=0.0)),
        )
        device = DeviceConfig(
            geometry=geometry, qubit=qubit, band=band,
            port_impedance=_get(parser, "device", "port_impedance", default=50.0),
            qubit_cell_index=qubit.position[0],
            gamma_waveguide=_get(parser, "device", "gamma_waveguide", default=0.1),
            gamma_nr=_get(parser, "device", "gamma_nr", default=1e-5),
            d0=_get(parser, "device", "d0", default=126.0),
            d_eff=_get(parser, "device", "d_eff", default=126.0),
            gamma_ext=_get(parser, "device", "gamma_ext", default=1.0),
            omega12=_optional_float(parser, "device", "omega12"),
            omega23=_optional_float(parser, "device", "omega23"),
            gamma_phi=_get(parser, "device", "gamma_phi", default=0.0),
        )
    except ConfigError:
        raise
    except (ValueError, BandgapQEDError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    provenance = "\n".join(line for line in text.splitlines() if line.startswith("#"))
    return RunConfig(device, _section_floats(parser, "pumpprobe"),
                     _section_floats(parser, "cooling"), _section_floats(parser, "targets"),
                     provenance)


def load_config(path=None) -> RunConfig:
    """Read a configuration file; ``None`` loads the shipped paper device."""
    if path is None:
        text = resources.files("bandgap_qed.data").joinpath(PAPER_CONFIG).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads_config(text)


def config_dict(run: RunConfig) -> dict:
    """Nested plain dictionary of every resolved setting (for metadata echo)."""
    d = run.device
    geo = d.geometry
    out = {
        "geometry": {
            "lo_length": geo.lo.length, "lo_impedance": geo.lo.impedance,
            "hi_length": geo.hi.length, "hi_impedance": geo.hi.impedance,
            "n_cells": geo.n_cells, "phase_velocity": geo.phase_velocity,
        },
        "band": {
            "omega0": d.band.omega0, "alpha": d.band.alpha, "kappa": d.band.kappa,
            "k0": d.band.k0, "band_index": d.band.band_index, "edge_side": d.band.edge_side,
            "fit_rms": d.band.fit_rms,
        },
        "qubit": {
            "omega_q": d.qubit.omega_q, "g": d.qubit.g, "e_c": d.qubit.e_c,
            "n_levels": d.qubit.n_levels, "cell_index": d.qubit_cell_index,
            "offset": d.qubit.position[1],
        },
        "device": {
            "port_impedance": d.port_impedance, "gamma_waveguide": d.gamma_waveguide,
            "gamma_nr": d.gamma_nr, "d0": d.d0, "d_eff": d.d_eff, "gamma_ext": d.gamma_ext,
            "omega12": "none" if d.omega12 is None else d.omega12,
            "omega23": "none" if d.omega23 is None else d.omega23,
            "gamma_phi": d.gamma_phi,
        },
    }
    for name in ("pumpprobe", "cooling", "targets"):
        section = getattr(run, name)
        if section:
            out[name] = dict(section)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_config(run: RunConfig) -> str:
    parser = configparser.ConfigParser()
    for section, values in config_dict(run).items():
        parser[section] = {k: _fmt(v) for k, v in values.items()}
    buf = io.StringIO()
    parser.write(buf)
    header = run.provenance.strip()
    return (header + "\n\n" if header else "") + buf.getvalue().rstrip() + "\n"


def save_config(run: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(dumps_config(run))
    return path


def calibrate_device(omega0: float = 7.7, delta: float = 0.25, kappa: float | None = 0.026,
                     geometry: CrystalGeometry | None = None, base: RunConfig | None = None,
                     pipeline=PIPELINE_OMEGA_Q) -> RunConfig:
    """Fill phase velocity, band curvature, coupling and linewidth model.

    Stages: the phase velocity placing the second-band lower edge at
    ``omega0``; the quadratic fit of that edge; the coupling giving the
    resonant shift ``delta``; and the effective length and prefactor of the
    leakage linewidth model, fitted to device peak widths for bare
    frequencies ``numpy.linspace(*pipeline)``. ``kappa`` overrides the band
    steepness measured from the bare crystal (``None`` keeps the measured one).

    Raises
    ------
    CalibrationError
        Naming the stage that failed.
    """
    if not (omega0 > 0 and delta > 0):
        raise CalibrationError("stage targets: omega0 and delta must be positive")
    geometry = paper_geometry() if geometry is None else geometry
    try:
        v_p = calibrate_phase_velocity(geometry, omega0)
    except BandgapQEDError as exc:
        raise CalibrationError(f"stage phase_velocity: {exc}") from None
    geometry = geometry.with_phase_velocity(v_p)
    try:
        edge = find_edge(geometry, 2, BELOW)
        steepness = band_edge_steepness(geometry, edge=edge)
        band = fit_quadratic_band(geometry, edge, kappa=steepness if kappa is None else kappa)
    except BandgapQEDError as exc:
        raise CalibrationError(f"stage band_fit: {exc}") from None
    g = calibrate_g(delta, band.alpha)
    prev = base.device if base is not None else None
    qubit = QubitParams(omega_q=edge.frequency, g=g,
                        e_c=prev.qubit.e_c if prev else 0.385,
                        n_levels=prev.qubit.n_levels if prev else 4,
                        position=(geometry.n_cells // 2, 0.0))
    device = DeviceConfig(geometry=geometry, qubit=qubit, band=band)
    if prev is not None:
        device = replace(device, port_impedance=prev.port_impedance,
                         gamma_waveguide=prev.gamma_waveguide, gamma_nr=prev.gamma_nr,
                         d0=prev.d0, omega12=prev.omega12,
                         omega23=prev.omega23, gamma_phi=prev.gamma_phi)
    else:
        device = replace(device, gamma_nr=1e-5, omega12=7.008, omega23=6.81)
    try:
        (d_eff, gamma_ext, r2), _ = fit_pipeline_length(device, np.linspace(*pipeline))
    except BandgapQEDError as exc:
        raise CalibrationError(f"stage linewidth_fit: {exc}") from None
    device = replace(device, d_eff=float(d_eff), gamma_ext=float(gamma_ext))
    pumpprobe = dict(base.pumpprobe) if base else {"omega01": 7.206, "rabi_max": 0.06}
    cooling = dict(base.cooling) if base else {"omega_l": 7.6, "omega": 0.15}
    targets = {"omega0": omega0, "delta": delta, "kappa": "measured" if kappa is None else kappa}
    provenance = "\n".join([
        "# Calibrated device configuration.",
        f"# targets: omega0 = {omega0!r} GHz, delta = {delta!r} GHz",
        f"# phase_velocity from the second-band lower edge ({edge.frequency:.9f} GHz)",
        f"# alpha from a quadratic fit, rms {band.fit_rms:.3e} GHz;"
        f" bare-crystal 10-90% steepness {steepness:.6f} GHz",
        f"# g = {g:.9f} GHz from the resonant shift",
        f"# d_eff, gamma_ext from device peak widths, omega_q in {pipeline}, r2 = {r2:.6f}",
    ])
    return RunConfig(device, pumpprobe, cooling, targets, provenance)
