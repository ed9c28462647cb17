"""
Driven multilevel transmon: dressed states, steady states and probe response.

The transmon is a ladder of levels ``|n>`` with cumulative energies
``omega_n`` (GHz, ``omega_0 = 0``). A coherent drive at ``omega_d`` with bare
Rabi rate ``Omega0`` couples ``|n> <-> |n+1>`` with ``Omega_n = sqrt(n+1)*Omega0``.
In the frame rotating at the drive the Hamiltonian is time independent;
its eigenstates are the dressed states and a weak probe sees lines at
``E_j - E_i + omega_d`` between them.

Master equations here take the Hamiltonian and all rates in the same
frequency unit (GHz). Converting both to angular units multiplies the
Liouvillian by ``2*pi`` and leaves the steady state unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg

from .band_structure import BandModel, density_of_states
from .bound_state import QubitParams, solve_bound_state
from .errors import DomainError, SteadyStateError

__all__ = [
    "TransmonLadder", "DriveConfig", "Transition", "DressedSpectrum", "CoolingRates",
    "lowering_operator", "dressed_hamiltonian", "dressed_spectrum", "dressed_transitions",
    "dressed_populations", "overlay_lines", "mixing_angle", "cooling_rates",
    "dressed_steady_state", "dressed_lindblad_terms", "liouvillian",
    "lindblad_steady_state", "ladder_collapse_ops", "ladder_steady_state", "probe_response", "driven_transmission_factor",
    "dressed_bound_state",
]


@dataclass(frozen=True)
class TransmonLadder:
    """Levels and decay rates of a truncated transmon.

    Parameters
    ----------
    level_freqs : sequence of float
        Cumulative level energies in GHz, starting with 0 for the ground state.
    decay_rates : sequence of float
        Radiative rate of each ``n+1 -> n`` transition in GHz, one per
        transition.
    """

    level_freqs: tuple
    decay_rates: tuple

    def __post_init__(self):
        levels = tuple(float(x) for x in self.level_freqs)
        rates = tuple(float(x) for x in self.decay_rates)
        object.__setattr__(self, "level_freqs", levels)
        object.__setattr__(self, "decay_rates", rates)
        if len(levels) < 2:
            raise DomainError("a ladder needs at least two levels")
        if levels[0] != 0.0:
            raise DomainError("level_freqs must start at 0 for the ground state")
        if len(rates) != len(levels) - 1:
            raise DomainError("need one decay rate per adjacent transition")
        if any(r < 0 for r in rates):
            raise DomainError("decay rates must be non-negative")
        steps = np.diff(levels)
        if np.any(steps <= 0) or np.any(np.diff(steps) >= 0):
            raise DomainError("transition frequencies must be positive and strictly decreasing")

    @classmethod
    def from_transitions(cls, transitions: Sequence[float], gamma: float = 0.0,
                         decay_rates: Sequence[float] | None = None) -> "TransmonLadder":
        """Build from ``(omega01, omega12, ...)``. Without explicit rates the
        ``n+1 -> n`` rate is ``(n+1)*gamma``, the harmonic-oscillator scaling."""
        levels = np.concatenate([[0.0], np.cumsum(transitions)])
        if decay_rates is None:
            decay_rates = [gamma * (n + 1) for n in range(len(transitions))]
        return cls(tuple(levels), tuple(decay_rates))

    @classmethod
    def from_qubit(cls, q: QubitParams, omega01: float | None = None, gamma: float = 0.0,
                   correction: float = 0.0) -> "TransmonLadder":
        """Ladder with ``omega12 = omega01 - E_c`` and
        ``omega_{n,n+1} = omega01 - n*E_c - (n-1)*correction`` above that."""
        f01 = q.omega_q if omega01 is None else omega01
        steps = [f01 - n * q.e_c - max(n - 1, 0) * correction for n in range(q.n_levels - 1)]
        return cls.from_transitions(steps, gamma)

    @property
    def n_levels(self) -> int:
        return len(self.level_freqs)

    @property
    def transition_freqs(self) -> np.ndarray:
        return np.diff(self.level_freqs)


@dataclass(frozen=True)
class DriveConfig:
    """Coherent drive at ``omega_d`` (GHz) with bare Rabi rate ``omega_rabi0`` (GHz)."""

    omega_d: float
    omega_rabi0: float

    def __post_init__(self):
        if not self.omega_rabi0 >= 0:
            raise DomainError(f"omega_rabi0 must be non-negative, got {self.omega_rabi0}")

    def rabi(self, n: int) -> float:
        """``Omega_n = sqrt(n+1)*Omega0`` for the ``n <-> n+1`` transition."""
        return math.sqrt(n + 1) * self.omega_rabi0


class Transition(NamedTuple):
    """Probe line between dressed states ``lower -> upper`` (absorption)."""

    freq: float
    weight: float
    lower: int
    upper: int


@dataclass(frozen=True)
class DressedSpectrum:
    """Eigen-decomposition of the rotating-frame Hamiltonian.

    Columns of ``eigenvectors`` are the dressed states in the bare basis,
    ordered by ascending eigenvalue.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    omega_d: float
    transitions: tuple = field(default=())


@dataclass(frozen=True)
class CoolingRates:
    """Golden-rule rates (GHz) into the reservoir at the three Mollow lines."""

    gamma_0: float
    gamma_minus: float
    gamma_plus: float
    theta: float = math.pi / 4
    gamma_phi: float = 0.0
    omega: float = math.nan

    def __post_init__(self):
        for name in ("gamma_0", "gamma_minus", "gamma_plus", "gamma_phi"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative")
        if not 0.0 <= self.theta <= math.pi / 2 + 1e-15:
            raise DomainError(f"theta must lie in [0, pi/2], got {self.theta}")


def lowering_operator(n_levels: int) -> np.ndarray:
    """``sum_n sqrt(n+1) |n><n+1|``."""
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), k=1)


def dressed_hamiltonian(ladder: TransmonLadder, drive: DriveConfig) -> np.ndarray:
    """Real symmetric tridiagonal Hamiltonian in the drive frame (GHz).

    Diagonal ``omega_n - n*omega_d``, off-diagonal ``sqrt(n+1)*Omega0/2``.
    """
    n = np.arange(ladder.n_levels)
    h = np.diag(np.asarray(ladder.level_freqs) - n * drive.omega_d)
    off = np.sqrt(n[1:]) * drive.omega_rabi0 / 2.0
    return h + np.diag(off, 1) + np.diag(off, -1)


def dressed_transitions(spec: DressedSpectrum, ladder: TransmonLadder | None = None,
                        drive: DriveConfig | None = None,
                        weight_floor: float = 1e-4) -> list[Transition]:
    """Probe lines ``E_j - E_i + omega_d`` weighted by ``|<j|a^dag|i>|**2``.

    A probe photon raises the excitation number by one, which in the lab
    frame adds one drive quantum to the rotating-frame energy difference.
    Every ordered pair ``(i, j)`` is considered, including ``i == j`` (the
    line at the drive frequency). Lines weaker than ``weight_floor`` are
    dropped. ``ladder`` and ``drive`` are accepted for symmetry with
    :func:`dressed_spectrum` and only ``drive.omega_d`` is consulted.
    """
    omega_d = spec.omega_d if drive is None else drive.omega_d
    vecs = spec.eigenvectors
    raise_dressed = vecs.conj().T @ lowering_operator(len(spec.eigenvalues)).T @ vecs
    weights = np.abs(raise_dressed) ** 2  # [j, i] = |<j|a^dag|i>|^2
    lines = []
    for i in range(len(spec.eigenvalues)):
        for j in range(len(spec.eigenvalues)):
            w = weights[j, i]
            if w >= weight_floor:
                freq = spec.eigenvalues[j] - spec.eigenvalues[i] + omega_d
                lines.append(Transition(float(freq), float(w), i, j))
    lines.sort(key=lambda t: (t.freq, t.lower, t.upper))
    return lines


def dressed_spectrum(ladder: TransmonLadder, drive: DriveConfig,
                     weight_floor: float = 1e-4) -> DressedSpectrum:
    """Diagonalize :func:`dressed_hamiltonian` and list its probe lines."""
    vals, vecs = linalg.eigh(dressed_hamiltonian(ladder, drive))
    # fix the sign of each eigenvector so outputs are reproducible
    signs = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])])
    vecs = vecs * signs
    spec = DressedSpectrum(vals, vecs, drive.omega_d)
    return DressedSpectrum(vals, vecs, drive.omega_d,
                           tuple(dressed_transitions(spec, weight_floor=weight_floor)))


def dressed_populations(rho: np.ndarray, spec: DressedSpectrum) -> np.ndarray:
    """Diagonal of ``rho`` in the dressed basis."""
    u = spec.eigenvectors
    return np.real(np.einsum("ji,jk,ki->i", u.conj(), rho, u))


def overlay_lines(spec: DressedSpectrum, populations, floor: float = 0.02,
                  merge_tol: float = 1e-6) -> list[tuple[float, float]]:
    """Visible lines ``(freq, visibility)`` for figure overlays.

    Visibility is ``rho_ii * weight`` for absorption out of dressed state
    ``i``. Lines closer than ``merge_tol`` GHz are merged by summing their
    visibility, and merged lines below ``floor`` are dropped.
    """
    populations = np.asarray(populations, dtype=float)
    merged: list[list[float]] = []
    for t in sorted(spec.transitions, key=lambda t: t.freq):
        vis = populations[t.lower] * t.weight
        if merged and abs(t.freq - merged[-1][0]) <= merge_tol:
            merged[-1][1] += vis
        else:
            merged.append([t.freq, vis])
    return [(f, v) for f, v in merged if v >= floor]


def mixing_angle(delta_a: float, omega_rabi0: float) -> tuple[float, float]:
    """Dressed-state mixing angle and generalized Rabi frequency.

    ``cos^2(theta) = 1/2 + delta_a/(2*Omega)`` with
    ``Omega = sqrt(omega_rabi0**2 + delta_a**2)``.
    """
    omega = math.hypot(omega_rabi0, delta_a)
    if omega == 0:
        raise DomainError("mixing angle is undefined for zero drive and zero detuning")
    cos2 = min(max(0.5 + delta_a / (2.0 * omega), 0.0), 1.0)
    return math.acos(math.sqrt(cos2)), omega


def cooling_rates(band: BandModel, omega_L: float, Omega: float, g: float,
                  gamma_phi: float = 0.0, theta: float | None = None,
                  delta_a: float | None = None) -> CoolingRates:
    """Golden-rule rates ``2*pi*g**2*rho`` at ``omega_L`` and ``omega_L -+ Omega``.

    ``theta`` defaults to ``pi/4`` (resonant drive) unless ``delta_a`` is
    given, in which case it follows from :func:`mixing_angle` with the bare
    Rabi rate implied by ``Omega`` and ``delta_a``.
    """
    if not Omega > 0:
        raise DomainError(f"Omega must be positive, got {Omega}")
    if theta is None:
        if delta_a is None:
            theta = math.pi / 4
        else:
            if abs(delta_a) > Omega:
                raise DomainError("|delta_a| cannot exceed the generalized Rabi frequency")
            theta, _ = mixing_angle(delta_a, math.sqrt(Omega ** 2 - delta_a ** 2))
    freqs = np.array([omega_L, omega_L - Omega, omega_L + Omega])
    rates = 2.0 * math.pi * g ** 2 * np.asarray(density_of_states(band, freqs))
    return CoolingRates(float(rates[0]), float(rates[1]), float(rates[2]),
                        float(theta), float(gamma_phi), float(Omega))


def _cooling_weights(rates: CoolingRates):
    s2, c2 = math.sin(rates.theta) ** 2, math.cos(rates.theta) ** 2
    up = rates.gamma_minus * s2 ** 2
    down = rates.gamma_plus * c2 ** 2
    dephase = rates.gamma_phi * math.sin(2.0 * rates.theta) ** 2
    return up, down, dephase


def dressed_steady_state(rates: CoolingRates) -> tuple[float, float]:
    """Closed-form dressed populations ``(rho_minus_minus, rho_plus_plus)``.

    ``rho_++ = (g_- sin^4 + g_p sin^2 2t) / D`` and
    ``rho_-- = (g_+ cos^4 + g_p sin^2 2t) / D`` with
    ``D = g_- sin^4 + g_+ cos^4 + 2 g_p sin^2 2t``.
    """
    up, down, dephase = _cooling_weights(rates)
    den = up + down + 2.0 * dephase
    if den <= 0:
        raise SteadyStateError("all transfer rates vanish; dressed steady state is undefined")
    return (down + dephase) / den, (up + dephase) / den


def dressed_lindblad_terms(rates: CoolingRates):
    """Hamiltonian and collapse operators of the two-level dressed master equation.

    The basis is ``(|+>, |->)``. The Hamiltonian is ``Omega/2 * sigma_z``;
    the collapse operators are ``sigma_z`` at ``gamma_0 sin^2 cos^2``,
    ``sigma_+`` at ``gamma_- sin^4``, ``sigma_-`` at ``gamma_+ cos^4`` and
    both ``sigma_+-`` at ``gamma_p sin^2 2theta``.
    """
    s2, c2 = math.sin(rates.theta) ** 2, math.cos(rates.theta) ** 2
    up, down, dephase = _cooling_weights(rates)
    sz = np.diag([1.0, -1.0]).astype(complex)
    sp = np.array([[0, 1], [0, 0]], dtype=complex)  # |+><-|
    omega = 0.0 if math.isnan(rates.omega) else rates.omega
    ops = [(sz, rates.gamma_0 * s2 * c2), (sp, up), (sp.T.copy(), down),
           (sp, dephase), (sp.T.copy(), dephase)]
    return 0.5 * omega * sz, [(op, r) for op, r in ops if r > 0]


def liouvillian(hamiltonian, collapse_ops) -> np.ndarray:
    """Superoperator acting on row-major ``vec(rho)``.

    ``drho/dt = -i[H, rho] + sum_k r_k (L rho L^dag - {L^dag L, rho}/2)``.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    n = h.shape[0]
    eye = np.eye(n)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in collapse_ops:
        op = np.asarray(op, dtype=complex)
        ldl = op.conj().T @ op
        sup += rate * (np.kron(op, op.conj())
                       - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T))
    return sup


def lindblad_steady_state(hamiltonian, collapse_ops, tol: float = 1e-10) -> np.ndarray:
    """Unique steady state of a Lindblad master equation.

    The Liouvillian null space is located from its singular values. A
    single null vector is required; the state is then obtained from the
    linear system with the trace condition appended as an extra row.

    Raises
    ------
    SteadyStateError
        If the null space is not one dimensional or the result violates the
        density-matrix invariants.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    n = h.shape[0]
    if h.shape != (n, n) or n > 16:
        raise DomainError("hamiltonian must be square with dimension <= 16")
    if not np.allclose(h, h.conj().T, atol=1e-12):
        raise DomainError("hamiltonian must be Hermitian")
    sup = liouvillian(h, collapse_ops)
    scale = max(np.linalg.norm(sup, 2), 1e-300)
    sv = linalg.svdvals(sup)
    null_dim = int(np.sum(sv <= tol * scale))
    if null_dim == 0:
        raise SteadyStateError(f"no null vector within tolerance (smallest singular value "
                               f"{sv[-1] / scale:.3e} relative)")
    if null_dim > 1:
        raise SteadyStateError(f"steady state is not unique (null space dimension {null_dim})")
    trace_row = np.eye(n).reshape(1, -1).astype(complex)
    lhs = np.vstack([sup, trace_row])
    rhs = np.zeros(n * n + 1, dtype=complex)
    rhs[-1] = 1.0
    vec = linalg.lstsq(lhs, rhs)[0]
    rho = vec.reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    if np.linalg.norm(sup @ rho.reshape(-1)) > 1e-8 * scale:
        raise SteadyStateError("steady-state residual exceeds tolerance")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise SteadyStateError("steady state is not positive semidefinite")
    return rho


def ladder_collapse_ops(ladder: TransmonLadder, gamma_phi: float = 0.0):
    """Decay ``|n><n+1|`` at each ladder rate plus optional dephasing
    ``sum_n n|n><n|`` at ``gamma_phi``."""
    n = ladder.n_levels
    ops = []
    for k, rate in enumerate(ladder.decay_rates):
        if rate > 0:
            op = np.zeros((n, n))
            op[k, k + 1] = 1.0
            ops.append((op, rate))
    if gamma_phi > 0:
        ops.append((np.diag(np.arange(n, dtype=float)), gamma_phi))
    return ops


def ladder_steady_state(ladder: TransmonLadder, drive: DriveConfig,
                        gamma_phi: float = 0.0) -> np.ndarray:
    """Steady state of the driven ladder with radiative decay on each step
    and optional pure dephasing ``gamma_phi`` (rate of ``sum_n n|n><n|``)."""
    return lindblad_steady_state(dressed_hamiltonian(ladder, drive),
                                 ladder_collapse_ops(ladder, gamma_phi))


def probe_response(ladder: TransmonLadder, drive: DriveConfig, f, radiative,
                   gamma_phi: float = 0.0, rho=None):
    """Weak-probe reflection amplitude of the driven ladder, ``1 - t_q``.

    The probe couples to ``A = sum_n sqrt((n+1) G_n) |n><n+1|``, where ``G_n``
    is the radiative width at the bare transition frequency ``omega_{n,n+1}``.
    Linear response gives

        R(f) = conj( Tr[A (-L - i(f - omega_d))^-1 [A^dag, rho_ss]] ) / 2,

    conjugated to the ``exp(+j omega t)`` convention. An undriven two-level
    atom gives ``(G/2) / (j(f - f0) + G_tot/2)``, where ``G_tot`` is the decay
    rate used in the master equation. The resolvent is evaluated by direct
    solves with the projector ``|rho_ss><1|`` added, which leaves the
    traceless solution unchanged and keeps ``f = omega_d`` regular.

    Parameters
    ----------
    radiative : callable or float
        Radiative width (GHz) as a function of transition frequency.
    rho : array_like, optional
        Precomputed steady state.
    """
    h = dressed_hamiltonian(ladder, drive)
    ops = ladder_collapse_ops(ladder, gamma_phi)
    if rho is None:
        rho = lindblad_steady_state(h, ops)
    n = ladder.n_levels
    steps = ladder.transition_freqs
    widths = np.asarray(radiative(steps) if callable(radiative) else np.full(steps.shape,
                        float(radiative)), dtype=float)
    if np.any(widths < 0):
        raise DomainError("radiative widths must be non-negative")
    coupling = np.diag(np.sqrt(np.arange(1, n) * widths), k=1)
    x0 = (coupling.T @ rho - rho @ coupling.T).reshape(-1)
    sup = liouvillian(h, ops)
    proj = np.outer(np.asarray(rho).reshape(-1), np.eye(n).reshape(-1))
    delta = np.atleast_1d(np.asarray(f, dtype=float)) - drive.omega_d
    mats = (proj - sup)[None, :, :] - 1j * delta[:, None, None] * np.eye(n * n)[None]
    rhs = np.broadcast_to(x0, (delta.size, n * n))[..., None]
    try:
        y = np.linalg.solve(mats, rhs)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SteadyStateError(f"probe resolvent is singular: {exc}") from None
    out = 0.5 * np.conj(y @ coupling.T.reshape(-1))  # Tr(A M) = vec(A^T) . vec(M)
    return out.reshape(np.shape(f)) if np.ndim(f) else out.item()


def driven_transmission_factor(populations, spectrum: DressedSpectrum | Sequence[Transition],
                               f, linewidths, gamma_nr: float = 0.0):
    """Transmission of a waveguide past the driven atom.

    ``t_q(f) = 1 - sum_i drho_i (G_i/2) / (j (f - f_i) + (G_i + G_nr)/2)``,
    where ``drho_i`` is the population difference of line ``i`` between its
    lower and upper dressed state and ``G_i`` its radiative width. An
    unsaturated resonant two-level atom gives ``t_q = 0``, equal
    populations give ``t_q = 1`` and inversion gives ``|t_q| > 1``.

    Parameters
    ----------
    populations : array_like
        Dressed-state populations, or a full density matrix in the bare basis
        (converted with the spectrum's eigenvectors).
    spectrum : DressedSpectrum or sequence of Transition
    f : float or array_like
        Probe frequency, GHz.
    linewidths : float or array_like
        Either one radiative width per line, or a scalar ``gamma`` in which
        case line ``i`` gets ``weight_i * gamma``.
    gamma_nr : float
        Extra non-radiative broadening (FWHM), GHz.
    """
    lines = spectrum.transitions if isinstance(spectrum, DressedSpectrum) else tuple(spectrum)
    pops = np.asarray(populations)
    if pops.ndim == 2:
        if not isinstance(spectrum, DressedSpectrum):
            raise DomainError("a density matrix needs the DressedSpectrum for its basis")
        pops = dressed_populations(pops, spectrum)
    pops = np.real(pops).astype(float)
    if abs(pops.sum() - 1.0) > 1e-8:
        raise DomainError("populations must sum to one")
    widths = np.asarray(linewidths, dtype=float)
    if widths.ndim == 0:
        widths = widths * np.array([t.weight for t in lines])
    elif widths.shape != (len(lines),):
        raise DomainError("need one linewidth per transition")
    f = np.asarray(f, dtype=float)
    t = np.ones(f.shape, dtype=complex)
    for line, width in zip(lines, widths):
        drho = pops[line.lower] - pops[line.upper]
        if drho == 0 or width == 0:
            continue
        t = t - drho * (0.5 * width) / (1j * (f - line.freq) + 0.5 * (width + gamma_nr))
    return t.item() if t.ndim == 0 else t


def dressed_bound_state(band: BandModel, g: float, theta: float, sideband_freq: float) -> float:
    """Splitting (GHz) between the band edge and the bound state of a Mollow
    sideband near the edge.

    The sideband is treated as a bare emitter coupled with
    ``g*cos(theta)**2``. This keeps the Markovian bound-state picture for a
    problem that is not Markovian, so it only sets the scale of the effect.
    """
    c = math.cos(theta)
    g_eff = 0.0 if abs(c) < 1e-12 else g * c * c
    sol = solve_bound_state(QubitParams(sideband_freq, g_eff), band)
    return sol.detuning_edge
