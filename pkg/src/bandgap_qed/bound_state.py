"""
Single-photon bound state of a qubit tuned near a band edge.

Near the edge the photonic band is quadratic, ``omega = omega0 + alpha*k**2``,
and a qubit of bare frequency ``omega_q`` coupled with strength ``g`` dresses
into a state at ``omega_b < omega0`` satisfying

    (omega_q - omega_b) * sqrt(omega0 - omega_b) = pi * g**2 / alpha

in angular units. The photonic part of that state decays away from the qubit
over the localization length ``L = sqrt(alpha / (omega0 - omega_b))``.

Public frequencies are in GHz and lengths in mm. Internally the equation is
solved in the reduced form ``(f_q - f_b)*sqrt(f0 - f_b) = delta**1.5`` where
``delta`` is the resonant shift in GHz; the factors of 2*pi cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .band_structure import BandModel
from .errors import DomainError, FitError, NoBoundStateError
from .transfer_matrix import TWO_PI

__all__ = [
    "QubitParams", "BoundStateSolution", "solve_bound_state", "qubit_weight",
    "mixing_tan2", "photon_envelope", "linewidth_model", "fit_effective_length",
    "resonant_shift", "calibrate_g", "bare_frequency", "fit_resonant_shift",
    "bound_state_sweep",
]


@dataclass(frozen=True)
class QubitParams:
    """Transmon-like qubit coupled to the crystal.

    Parameters
    ----------
    omega_q : float
        Bare 0-1 transition frequency, GHz.
    g : float
        Coupling to the band, GHz. Taken independent of ``k``.
    e_c : float
        Anharmonicity, GHz.
    n_levels : int
        Number of transmon levels kept in driven calculations.
    position : tuple
        ``(cell_index, offset_mm)`` of the qubit along the crystal.
    """

    omega_q: float
    g: float
    e_c: float = 0.385
    n_levels: int = 3
    position: tuple = (7, 0.0)

    def __post_init__(self):
        if not math.isfinite(self.omega_q):
            raise DomainError("omega_q must be finite")
        if not (self.g >= 0 and math.isfinite(self.g)):
            raise DomainError(f"g must be a finite non-negative number, got {self.g}")
        if not self.e_c > 0:
            raise DomainError(f"e_c must be positive, got {self.e_c}")
        if int(self.n_levels) != self.n_levels or not 2 <= self.n_levels <= 6:
            raise DomainError(f"n_levels must be an integer in [2, 6], got {self.n_levels}")

    def with_frequency(self, omega_q: float) -> "QubitParams":
        return QubitParams(omega_q, self.g, self.e_c, self.n_levels, self.position)


@dataclass(frozen=True)
class BoundStateSolution:
    """Root of the bound-state equation and the quantities derived from it.

    ``detuning_edge`` is ``omega0 - omega_b`` (positive, GHz), ``loc_length``
    the photon localization length in mm, ``qubit_weight`` the probability of
    finding the excitation in the qubit and ``linewidth`` the leakage rate
    (GHz), which is NaN unless a device length was supplied.
    """

    omega_q: float
    omega_b: float
    omega0: float
    alpha: float
    detuning_edge: float
    loc_length: float
    qubit_weight: float
    tan2_theta: float
    linewidth: float = math.nan
    residual: float = 0.0


def resonant_shift(g, alpha):
    """Shift ``omega0 - omega_b`` (GHz) of a qubit sitting exactly on the edge.

    Evaluates ``(pi*g**2/alpha)**(2/3)`` with ``g`` converted to rad/ns and
    ``alpha`` in (rad/ns)*mm**2, then converts back to GHz.
    """
    if np.any(np.asarray(g) < 0) or np.any(np.asarray(alpha) <= 0):
        raise DomainError("g must be non-negative and alpha positive")
    g_ang = TWO_PI * np.asarray(g, dtype=float)
    shift = (math.pi * g_ang ** 2 / alpha) ** (2.0 / 3.0) / TWO_PI
    return shift.item() if np.ndim(shift) == 0 else shift


def calibrate_g(target_delta, alpha):
    """Coupling (GHz) that produces a resonant shift ``target_delta`` (GHz)."""
    if np.any(np.asarray(target_delta) < 0) or np.any(np.asarray(alpha) <= 0):
        raise DomainError("target_delta must be non-negative and alpha positive")
    delta_ang = TWO_PI * np.asarray(target_delta, dtype=float)
    g = np.sqrt(alpha * delta_ang ** 1.5 / math.pi) / TWO_PI
    return g.item() if np.ndim(g) == 0 else g


def mixing_tan2(omega_q, omega_b, omega0):
    """``tan^2(theta) = (omega_q - omega_b) / (2*(omega0 - omega_b))``."""
    den = 2.0 * (np.asarray(omega0, dtype=float) - omega_b)
    if np.any(den <= 0):
        raise DomainError("omega_b must lie below omega0")
    return (np.asarray(omega_q, dtype=float) - omega_b) / den


def qubit_weight(omega_q, omega_b, omega0):
    """Qubit fraction ``P_q = 2(omega_b - omega0) / (3 omega_b - omega_q - 2 omega0)``.

    Raises
    ------
    DomainError
        If ``omega_b`` is not below both ``omega_q`` and ``omega0`` (the
        decoupled point ``omega_b == omega_q < omega0`` is allowed and gives 1).
    """
    omega_q, omega_b, omega0 = (np.asarray(v, dtype=float) for v in (omega_q, omega_b, omega0))
    if np.any(omega_b >= omega0) or np.any(omega_b > omega_q):
        raise DomainError("qubit_weight needs omega_b < omega0 and omega_b <= omega_q")
    den = 3.0 * omega_b - omega_q - 2.0 * omega0
    if np.any(den == 0):
        raise DomainError("degenerate denominator in qubit_weight")
    p = 2.0 * (omega_b - omega0) / den
    return p.item() if p.ndim == 0 else p


def _reduced_residual(omega_b, omega_q, omega0, shift):
    return (omega_q - omega_b) * math.sqrt(omega0 - omega_b) - shift ** 1.5


def solve_bound_state(q: QubitParams, band: BandModel, d0: float | None = None,
                      gamma_ext: float | None = None) -> BoundStateSolution:
    """Solve for the in-gap bound state of ``q`` below the edge of ``band``.

    With ``u = sqrt(f0 - f_b)`` the residual ``(f_q - f_b) sqrt(f0 - f_b) - delta**1.5``
    becomes the cubic ``u**3 + (f_q - f0) u - delta**1.5``, which has exactly
    one positive root. It is bracketed between the cubic's minimum and
    ``sqrt(max(f0 - f_q, 0)) + 1.5*delta**0.5`` and located by bisection in ``u``.
    Working in ``u`` keeps the root well conditioned when the bound state
    hugs the edge.

    Parameters
    ----------
    q : QubitParams
    band : BandModel
        Quadratic model of the edge. Only ``omega0`` and ``alpha`` are used.
    d0, gamma_ext : float, optional
        Device length (mm) and linewidth prefactor (GHz). When both are given
        the leakage linewidth is filled in.

    Raises
    ------
    NoBoundStateError
        If ``g == 0`` and the qubit is not inside the gap.
    """
    omega0, alpha = band.omega0, band.alpha
    shift = resonant_shift(q.g, alpha)
    if q.g == 0:
        if q.omega_q >= omega0:
            raise NoBoundStateError(
                f"uncoupled qubit at {q.omega_q} GHz is not below the edge at {omega0} GHz")
        omega_b = float(q.omega_q)
        residual = 0.0
    else:
        c = q.omega_q - omega0
        k = shift ** 1.5
        lo = math.sqrt(max(-c, 0.0) / 3.0)
        hi = math.sqrt(max(-c, 0.0)) + 1.5 * math.sqrt(shift)
        u = optimize.bisect(lambda x: x * (x * x + c) - k, lo, hi,
                            xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)
        omega_b = omega0 - u * u
        residual = _reduced_residual(omega_b, q.omega_q, omega0, shift)
    detuning = omega0 - omega_b
    tan2 = float(mixing_tan2(q.omega_q, omega_b, omega0))
    loc = math.sqrt(alpha / (TWO_PI * detuning))
    linewidth = math.nan
    if d0 is not None and gamma_ext is not None:
        linewidth = float(linewidth_model(loc, d0, gamma_ext))
    return BoundStateSolution(
        omega_q=float(q.omega_q), omega_b=float(omega_b), omega0=float(omega0),
        alpha=float(alpha), detuning_edge=float(detuning), loc_length=loc,
        qubit_weight=1.0 / (1.0 + tan2), tan2_theta=tan2, linewidth=linewidth,
        residual=float(residual),
    )


def bare_frequency(omega_b, g, band: BandModel):
    """Bare qubit frequency that places the bound state at ``omega_b``.

    Closed-form inverse of the bound-state equation.
    """
    omega_b = np.asarray(omega_b, dtype=float)
    if np.any(omega_b >= band.omega0):
        raise DomainError("omega_b must lie below the band edge")
    shift = resonant_shift(g, band.alpha)
    f = omega_b + shift ** 1.5 / np.sqrt(band.omega0 - omega_b)
    return f.item() if f.ndim == 0 else f


def photon_envelope(sol: BoundStateSolution | float, x):
    """Photon amplitude envelope ``exp(-|x|/L)`` around the qubit (``x`` in mm)."""
    loc = sol.loc_length if isinstance(sol, BoundStateSolution) else float(sol)
    return np.exp(-np.abs(np.asarray(x, dtype=float)) / loc)


def linewidth_model(sol: BoundStateSolution | float, d0: float, gamma_ext: float):
    """Leakage linewidth ``gamma_ext * exp(-d0 / (2 L))`` in GHz.

    ``sol`` may be a solution or a localization length in mm; ``L = inf``
    returns ``gamma_ext``.
    """
    if not d0 > 0:
        raise DomainError(f"d0 must be positive, got {d0}")
    loc = sol.loc_length if isinstance(sol, BoundStateSolution) else np.asarray(sol, dtype=float)
    return gamma_ext * np.exp(-d0 / (2.0 * loc))


def fit_effective_length(samples):
    """Fit ``ln gamma = ln gamma_ext - (d/2) / L`` by ordinary least squares.

    Parameters
    ----------
    samples : array_like, shape (n, 2)
        Rows of ``(gamma_GHz, inv_L_per_mm)``.

    Returns
    -------
    d_fit : float
        Effective length in mm.
    gamma_ext : float
        Prefactor in GHz.
    r2 : float
        Coefficient of determination of the log-linear fit.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
        raise FitError("need at least three (gamma, inv_L) samples")
    gamma, inv_l = data[:, 0], data[:, 1]
    if np.any(~np.isfinite(data)) or np.any(gamma <= 0):
        raise FitError("linewidths must be finite and positive")
    if np.ptp(inv_l) == 0:
        raise FitError("all inverse localization lengths are equal; slope is undefined")
    res = stats.linregress(inv_l, np.log(gamma))
    return -2.0 * res.slope, math.exp(res.intercept), res.rvalue ** 2


def fit_resonant_shift(omega_q, omega_b, omega0: float) -> float:
    """Least-squares resonant shift (GHz) from measured ``(omega_q, omega_b)`` pairs.

    The bound-state equation is linear in ``delta**1.5`` once both frequencies
    are known, so the estimate is closed form.
    """
    omega_q, omega_b = np.asarray(omega_q, dtype=float), np.asarray(omega_b, dtype=float)
    if omega_q.shape != omega_b.shape or omega_q.size == 0:
        raise FitError("omega_q and omega_b must be non-empty and of equal length")
    if np.any(omega_b >= omega0):
        raise FitError("bound-state frequencies must lie below the edge")
    y = (omega_q - omega_b) * np.sqrt(omega0 - omega_b)
    c = float(np.mean(y))
    if c <= 0:
        raise FitError("data imply a non-positive shift")
    return c ** (2.0 / 3.0)


def bound_state_sweep(omega_q, g: float, band: BandModel, d0: float, gamma_ext: float):
    """Rows ``(omega_q, omega_b, L, P_q, gamma)`` for each bare frequency."""
    rows = []
    for f in np.atleast_1d(omega_q):
        sol = solve_bound_state(QubitParams(float(f), g), band, d0=d0, gamma_ext=gamma_ext)
        rows.append((sol.omega_q, sol.omega_b, sol.loc_length, sol.qubit_weight, sol.linewidth))
    return np.array(rows, dtype=float).reshape(-1, 5)
