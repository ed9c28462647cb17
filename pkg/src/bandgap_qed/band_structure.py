"""
Band structure of a two-section periodic transmission line.

The infinite crystal is solved two ways: the closed-form Bloch condition for
a bilayer unit cell, and a plane-wave expansion of the telegrapher wave
equation with a piecewise-constant inverse impedance. The finite crystal is
evaluated with ABCD matrices from :mod:`bandgap_qed.transfer_matrix`.

Frequencies are ordinary frequencies in GHz. Band curvature ``alpha`` follows
``omega = omega0 + alpha*(k - k0)**2`` with ``omega`` in rad/ns and ``k`` in
rad/mm, so ``alpha`` carries (rad/ns)*mm**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize

from .errors import CalibrationError, DomainError, ExtractionError, TruncationError
from .transfer_matrix import (
    TWO_PI, TwoPortMatrix, WaveguideSegment, matrix_power, segment_matrix,
    transmission_coefficient,
)

BELOW = "below"
ABOVE = "above"


@dataclass(frozen=True)
class CrystalGeometry:
    """Finite bilayer crystal of ``n_cells`` periods.

    The unit cell used for finite-crystal cascades is the symmetric
    ``hi/2 | lo | hi/2`` cell, so the junction between cells ``N/2 - 1`` and
    ``N/2`` is the centre of a high-impedance section, where the qubit sits.
    """

    lo: WaveguideSegment
    hi: WaveguideSegment
    n_cells: int = 14

    def __post_init__(self):
        if self.n_cells < 1 or int(self.n_cells) != self.n_cells:
            raise DomainError(f"n_cells must be a positive integer, got {self.n_cells}")

    @property
    def period(self) -> float:
        return self.lo.length + self.hi.length

    @property
    def impedance_ratio(self) -> float:
        return self.hi.impedance / self.lo.impedance

    @property
    def phase_velocity(self) -> float:
        return self.hi.phase_velocity

    @property
    def length(self) -> float:
        return self.n_cells * self.period

    def with_phase_velocity(self, v_p: float) -> "CrystalGeometry":
        return replace(
            self,
            lo=WaveguideSegment(self.lo.length, self.lo.impedance, v_p),
            hi=WaveguideSegment(self.hi.length, self.hi.impedance, v_p),
        )

    def with_cells(self, n_cells: int) -> "CrystalGeometry":
        return replace(self, n_cells=n_cells)

    def scaled(self, factor: float) -> "CrystalGeometry":
        return replace(self, lo=self.lo.scaled(factor), hi=self.hi.scaled(factor))

    def uniform(self) -> "CrystalGeometry":
        """Same lengths with both sections at the high impedance."""
        return replace(self, lo=WaveguideSegment(
            self.lo.length, self.hi.impedance, self.lo.phase_velocity))


class BandEdge(NamedTuple):
    frequency: float
    edge_side: str  # side of the edge on which the gap lies
    band_index: int


@dataclass(frozen=True)
class BandModel:
    """Quadratic band ``omega = omega0 + alpha*(k - k0)**2`` near one edge.

    ``omega0`` and ``kappa`` are in GHz, ``alpha`` in (rad/ns)*mm**2 and
    ``k0`` in rad/mm. ``edge_side`` is the side of ``omega0`` on which the
    gap lies: ``"below"`` for the bottom of a band.
    """

    omega0: float
    alpha: float
    kappa: float
    k0: float = 0.0
    band_index: int = 2
    edge_side: str = BELOW
    fit_rms: float = 0.0
    poor_fit: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if self.kappa < 0:
            raise DomainError(f"kappa must be non-negative, got {self.kappa}")
        if self.edge_side not in (BELOW, ABOVE):
            raise DomainError(f"edge_side must be 'below' or 'above', got {self.edge_side!r}")

    def frequency(self, k):
        """Band frequency (GHz) at wavevector ``k`` (rad/mm)."""
        sign = 1.0 if self.edge_side == BELOW else -1.0
        return self.omega0 + sign * self.alpha * (np.asarray(k) - self.k0) ** 2 / TWO_PI


@dataclass(frozen=True)
class BlochMode:
    k: float
    band_index: int
    frequency: float
    coefficients: np.ndarray = field(repr=False)
    orders: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)
    period: float = 0.0

    def evaluate(self, x):
        """Bloch field ``sum_n C_n exp(i(k + 2 pi n / d) x)`` at ``x`` (mm)."""
        x = np.asarray(x, dtype=float)
        g = self.k + TWO_PI * self.orders / self.period
        return np.exp(1j * np.multiply.outer(x, g)) @ self.coefficients


def bloch_cosine(geom: CrystalGeometry, f):
    """``cos(k d)`` from the bilayer Bloch condition at frequency ``f`` (GHz).

    Magnitudes above one mark band gaps.
    """
    f = np.asarray(f, dtype=float)
    p_lo = geom.lo.electrical_length(f)
    p_hi = geom.hi.electrical_length(f)
    r = geom.impedance_ratio
    out = np.cos(p_lo) * np.cos(p_hi) - 0.5 * (r + 1.0 / r) * np.sin(p_lo) * np.sin(p_hi)
    return out.item() if out.ndim == 0 else out


def dispersion(geom: CrystalGeometry, f):
    """Complex Bloch wavevector (rad/mm) folded into ``[0, pi/d]``.

    In a band ``k`` is real. In a gap the real part sits at the zone centre
    or boundary and ``Im k = arccosh|cos kd| / d`` is the evanescent decay
    rate of the field amplitude.
    """
    c = np.asarray(bloch_cosine(geom, f), dtype=float)
    d = geom.period
    k = np.empty(c.shape, dtype=complex)
    inband = np.abs(c) <= 1.0
    k[inband] = np.arccos(c[inband]) / d
    gap = ~inband
    decay = np.arccosh(np.abs(c[gap])) / d
    k[gap] = np.where(c[gap] > 0, 0.0, math.pi / d) + 1j * decay
    return k.item() if k.ndim == 0 else k


def _edge_candidates(geom, f_hi, n_scan):
    grid = np.linspace(0.0, f_hi, n_scan)
    c = bloch_cosine(geom, grid)
    found = []
    for level in (1.0, -1.0):
        g = c - level
        idx = np.nonzero(g[:-1] * g[1:] < 0)[0]
        for i in idx:
            found.append((grid[i], grid[i + 1], level))
    return found


def band_edges(geom: CrystalGeometry, f_window=(4.0, 10.0), n_scan: int = 10_000,
               tol: float = 1e-6) -> list[BandEdge]:
    """All band edges in ``f_window`` (GHz), sorted ascending.

    Edges are bracketed by sign changes of ``cos kd -/+ 1`` on a uniform scan
    from zero (so bands can be numbered) and refined by bisection to ``tol``.
    ``n_scan`` is the number of scan points that fall inside the window.
    """
    f_lo, f_hi = map(float, f_window)
    if not f_hi > f_lo or f_lo < 0:
        raise DomainError(f"window must be ordered and non-negative, got {f_window}")
    n_total = max(int(math.ceil(n_scan * f_hi / (f_hi - f_lo))), n_scan)
    edges = []
    for a, b, level in _edge_candidates(geom, f_hi, n_total):
        root = optimize.bisect(lambda x: bloch_cosine(geom, x) - level, a, b, xtol=tol)
        gap_below = abs(bloch_cosine(geom, a)) > 1.0
        edges.append((root, BELOW if gap_below else ABOVE))
    edges.sort()
    band = 1
    out = []
    for freq, side in edges:
        if side == BELOW:
            band += 1
        if f_lo <= freq <= f_hi:
            out.append(BandEdge(float(freq), side, band))
    return out


def find_edge(geom: CrystalGeometry, band_index: int = 2, edge_side: str = BELOW,
              f_max: float | None = None) -> BandEdge:
    """Locate one band edge by band number and side."""
    if f_max is None:
        # bilayer edges scale with v_p / d; 4 half-wave resonances is plenty
        f_max = 2.0 * band_index * geom.phase_velocity / (2.0 * geom.period)
    for edge in band_edges(geom, (0.0, f_max)):
        if edge.band_index == band_index and edge.edge_side == edge_side:
            return edge
    raise ExtractionError(f"no {edge_side} edge of band {band_index} below {f_max:.4g} GHz")


def fit_quadratic_dispersion(q, omega, omega0: float | None = None):
    """Least-squares ``omega = omega0 + alpha*q**2``.

    With ``omega0`` given only ``alpha`` is fitted. Returns
    ``(omega0, alpha, rms)`` in the units of the inputs.
    """
    q2 = np.asarray(q, dtype=float) ** 2
    omega = np.asarray(omega, dtype=float)
    if omega0 is None:
        design = np.column_stack([np.ones_like(q2), q2])
        (omega0, alpha), *_ = np.linalg.lstsq(design, omega, rcond=None)
    else:
        alpha = np.dot(q2, omega - omega0) / np.dot(q2, q2)
    rms = float(np.sqrt(np.mean((omega0 + alpha * q2 - omega) ** 2)))
    return float(omega0), float(alpha), rms


def _band_frequency(geom, edge: BandEdge, kd, span):
    """Frequency inside the band adjacent to ``edge`` where ``cos kd`` matches."""
    target = math.cos(kd)
    if abs(abs(target) - 1.0) < 1e-15:
        return edge.frequency
    sign = 1.0 if edge.edge_side == BELOW else -1.0
    # start slightly inside the gap so roots closer to the edge than its
    # location tolerance are still bracketed
    grid = edge.frequency + sign * np.linspace(-1e-3, span, 2001)
    g = bloch_cosine(geom, grid) - target
    idx = np.nonzero(g[:-1] * g[1:] <= 0)[0]
    if len(idx) == 0:
        raise ExtractionError("band does not reach the requested wavevector")
    i = idx[0]
    a, b = sorted((grid[i], grid[i + 1]))
    if g[i] == 0:
        return grid[i]
    return optimize.bisect(lambda x: bloch_cosine(geom, x) - target, a, b, xtol=1e-12)


def fit_quadratic_band(geom: CrystalGeometry, edge: BandEdge, kappa: float | None = None,
                       k_range: float = 0.02, n_samples: int = 50,
                       z0: float = 50.0) -> BandModel:
    """Quadratic band model fitted to the exact dispersion next to ``edge``.

    ``omega(k)`` is sampled for ``|k - k0| <= k_range*pi/d`` by inverting the
    Bloch condition and ``alpha`` is fitted with ``omega0`` pinned at the
    located edge. A residual RMS above 1 % of the sampled frequency span sets
    ``poor_fit``. When ``kappa`` is None it is measured with
    :func:`band_edge_steepness`.
    """
    d = geom.period
    k0 = math.pi / d if bloch_cosine(geom, edge.frequency) < 0 else 0.0
    q = np.linspace(0.0, k_range * math.pi / d, n_samples)
    # band width bound used only for bracketing
    span = 0.5 * geom.phase_velocity / d
    f = np.array([_band_frequency(geom, edge, (k0 + s) * d, span) for s in q])
    sign = 1.0 if edge.edge_side == BELOW else -1.0
    w0, alpha, rms = fit_quadratic_dispersion(q, sign * TWO_PI * f,
                                              omega0=sign * TWO_PI * edge.frequency)
    spread = np.ptp(TWO_PI * f)
    if kappa is None:
        kappa = band_edge_steepness(geom, z0=z0, edge=edge)
    return BandModel(
        omega0=edge.frequency, alpha=alpha, kappa=kappa, k0=k0,
        band_index=edge.band_index, edge_side=edge.edge_side, fit_rms=rms,
        poor_fit=bool(rms > 0.01 * spread),
    )


def _cell_fourier(geom: CrystalGeometry, value_lo, value_hi, orders):
    """Fourier coefficients of a quantity piecewise constant on the cell
    ``lo/2 | hi | lo/2``."""
    m = np.asarray(orders)
    w = geom.hi.length / geom.period
    # hi section centred at d/2 contributes a phase (-1)^m
    coeff = (value_hi - value_lo) * w * np.sinc(m * w) * np.where(m % 2 == 0, 1.0, -1.0)
    return np.where(m == 0, value_lo + coeff, coeff).astype(complex)


def inverse_impedance_fourier(geom: CrystalGeometry, orders):
    """Fourier coefficients ``eta_m`` of ``1/Z(x)``."""
    return _cell_fourier(geom, 1.0 / geom.lo.impedance, 1.0 / geom.hi.impedance, orders)


def _toeplitz(coeffs, half):
    orders = np.arange(-half, half + 1)
    return coeffs[np.subtract.outer(orders, orders) + 2 * half]


def _pwe_solve(geom, k, n_waves):
    half = n_waves // 2
    orders = np.arange(-half, half + 1)
    all_orders = np.arange(-2 * half, 2 * half + 1)
    mass = _toeplitz(inverse_impedance_fourier(geom, all_orders), half)
    # eta*dV/dx is continuous across interfaces while both factors jump, so the
    # product is expanded through the inverse Toeplitz matrix of Z itself
    z_matrix = _toeplitz(
        _cell_fourier(geom, geom.lo.impedance, geom.hi.impedance, all_orders), half)
    kg = k + TWO_PI * orders / geom.period
    stiffness = kg[:, None] * np.linalg.inv(z_matrix) * kg[None, :]
    stiffness = 0.5 * (stiffness + stiffness.conj().T)
    lam, vecs = linalg.eigh(stiffness, mass)
    freqs = geom.phase_velocity * np.sqrt(np.clip(lam, 0.0, None)) / TWO_PI
    return orders, freqs, vecs


def bloch_modes(geom: CrystalGeometry, k: float, band_index: int, n_waves: int = 41,
                n_samples: int = 201, convergence_tol: float = 0.01) -> BlochMode:
    """Bloch mode of band ``band_index`` (1-based) at wavevector ``k``.

    Solves the generalized Hermitian eigenproblem obtained by expanding the
    voltage in plane waves ``exp(i(k + 2 pi n/d) x)`` and the inverse
    impedance in its Fourier series. Coefficients are normalised to unit
    norm with the largest one real and positive. The profile is sampled on
    one period with the high-impedance section centred at ``x = d/2``.

    Raises
    ------
    TruncationError
        If the band frequency moves by more than ``convergence_tol``
        (relative) when ``n_waves`` grows by 10.
    """
    if n_waves < 11 or n_waves % 2 == 0:
        raise DomainError(f"n_waves must be odd and >= 11, got {n_waves}")
    if band_index < 1 or band_index > n_waves:
        raise DomainError(f"band_index out of range: {band_index}")
    try:
        orders, freqs, vecs = _pwe_solve(geom, k, n_waves)
        _, freqs_more, _ = _pwe_solve(geom, k, n_waves + 10)
    except linalg.LinAlgError as exc:
        raise TruncationError(f"plane-wave eigenproblem failed: {exc}") from exc
    f = freqs[band_index - 1]
    f_more = freqs_more[band_index - 1]
    if abs(f_more - f) > convergence_tol * max(abs(f_more), 1e-12):
        raise TruncationError(
            f"band {band_index} frequency changed {f:.6g} -> {f_more:.6g} GHz "
            f"between {n_waves} and {n_waves + 10} plane waves")
    c = vecs[:, band_index - 1].astype(complex)
    c /= np.linalg.norm(c)
    big = np.argmax(np.abs(c))
    c *= np.exp(-1j * np.angle(c[big]))
    x = np.linspace(0.0, geom.period, n_samples)
    mode = BlochMode(k=float(k), band_index=band_index, frequency=float(f), coefficients=c,
                     orders=orders, x=x, profile=np.empty(0), period=geom.period)
    return replace(mode, profile=mode.evaluate(x))


def density_of_states(band: BandModel, f):
    """Photonic density of states of the quadratic band, per GHz.

    The bare density ``1/(alpha*sqrt(omega - omega0))`` (angular units, the
    same convention as the bound-state equation) is convolved with a
    unit-area Lorentzian of FWHM ``kappa``, which has the closed form
    ``Im[1/sqrt(omega0 - omega - i*kappa/2)]/alpha``. The result is scaled to
    ordinary frequency so that a golden-rule rate reads
    ``gamma = 2*pi*g**2*rho`` with ``gamma`` and ``g`` in GHz.
    """
    f = np.asarray(f, dtype=float)
    detuning = TWO_PI * (f - band.omega0)
    if band.edge_side == ABOVE:
        detuning = -detuning
    if band.kappa == 0:
        safe = np.where(detuning > 0, detuning, 1.0)
        rho = np.where(detuning > 0, 1.0 / np.sqrt(safe), 0.0)
    else:
        rho = np.imag(1.0 / np.sqrt(-detuning - 0.5j * TWO_PI * band.kappa))
    out = TWO_PI * rho / band.alpha
    return out.item() if out.ndim == 0 else out


def unit_cell_matrix(geom: CrystalGeometry, f) -> TwoPortMatrix:
    """Symmetric cell ``hi/2 | lo | hi/2``."""
    half = segment_matrix(geom.hi.scaled(0.5), f)
    return half @ segment_matrix(geom.lo, f) @ half


def crystal_matrix(geom: CrystalGeometry, f) -> TwoPortMatrix:
    return matrix_power(unit_cell_matrix(geom, f), geom.n_cells)


def bare_transmission(geom: CrystalGeometry, f, z0: float = 50.0):
    """Complex S21 of the bare finite crystal between ``z0`` ports."""
    return transmission_coefficient(crystal_matrix(geom, f), z0)


def band_edge_steepness(geom: CrystalGeometry, z0: float = 50.0, edge: BandEdge | None = None,
                        window: float = 0.5, resolution: float = 1e-4) -> float:
    """Width (GHz) over which bare-crystal ``|t|**2`` rises from 10 % to 90 %
    of its first in-band maximum next to ``edge``.

    The default edge is the bottom of the second band.
    """
    if edge is None:
        try:
            edge = find_edge(geom, 2, BELOW)
        except ExtractionError as exc:
            raise ExtractionError(f"no band edge to measure: {exc}") from exc
    sign = 1.0 if edge.edge_side == BELOW else -1.0
    n = int(round(2 * window / resolution)) + 1
    # walk from deep in the gap towards the band
    grid = edge.frequency + sign * np.linspace(-window, window, n)
    power = np.abs(bare_transmission(geom, grid, z0)) ** 2
    start = n // 2
    rising = np.nonzero(np.diff(power[start:]) < 0)[0]
    if len(rising) == 0:
        raise ExtractionError("no in-band transmission maximum within the window")
    peak = start + rising[0]
    plateau = power[peak]

    def crossing(level):
        below = np.nonzero(power[:peak + 1] < level * plateau)[0]
        if len(below) == 0:
            raise ExtractionError(f"transmission never drops below {level:.0%} of plateau")
        i = below[-1]
        frac = (level * plateau - power[i]) / (power[i + 1] - power[i])
        return grid[i] + frac * (grid[i + 1] - grid[i]), i

    f10, i10 = crossing(0.1)
    f90, i90 = crossing(0.9)
    if np.any(np.diff(power[i10:i90 + 2]) < -1e-9 * plateau):
        raise ExtractionError("transmission rise at the band edge is not monotone")
    return float(abs(f90 - f10))


def calibrate_phase_velocity(geom: CrystalGeometry, target_edge: float, band_index: int = 2,
                             edge_side: str = BELOW, bracket=(50.0, 300.0),
                             tol: float = 1e-4) -> float:
    """Phase velocity (mm/ns) that puts the chosen band edge at ``target_edge``.

    Bisection over ``bracket``; the edge frequency is monotone in ``v_p``.
    ``tol`` is the tolerance on the resulting edge frequency in GHz.
    """
    if not target_edge > 0:
        raise CalibrationError(f"target edge must be positive, got {target_edge}")
    f_max = 2.0 * target_edge

    def mismatch(v_p):
        trial = geom.with_phase_velocity(v_p)
        for edge in band_edges(trial, (0.0, f_max), tol=tol * 1e-2):
            if edge.band_index == band_index and edge.edge_side == edge_side:
                return edge.frequency - target_edge
        # the edge scales with v_p; absent below f_max means it lies above
        return f_max

    lo, hi = bracket
    m_lo, m_hi = mismatch(lo), mismatch(hi)
    if m_lo * m_hi > 0:
        raise CalibrationError(
            f"no phase velocity in [{lo}, {hi}] mm/ns places band {band_index} "
            f"edge at {target_edge} GHz")
    xtol = 0.1 * tol * lo / target_edge
    return float(optimize.bisect(mismatch, lo, hi, xtol=xtol))


def band_table(geom: CrystalGeometry, f_max: float, n: int = 2001):
    """Sampled dispersion for plotting: ``(k, band_index, f)`` for in-band
    frequencies in ``(0, f_max]``."""
    f = np.linspace(0.0, f_max, n)[1:]
    k = dispersion(geom, f)
    inband = np.imag(k) == 0
    starts = [e.frequency for e in band_edges(geom, (0.0, f_max)) if e.edge_side == BELOW]
    index = 1 + np.searchsorted(np.array(starts), f, side="right")
    return np.real(k[inband]), index[inband], f[inband]
