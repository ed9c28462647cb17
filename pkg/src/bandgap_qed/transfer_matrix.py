"""
Two-port (ABCD) matrix algebra for transmission-line sections and a shunt atom.

Matrix entries may be complex scalars or numpy arrays of a common shape, in
which case every operation acts elementwise over that shape. This is how
frequency sweeps are evaluated: build one matrix whose entries are arrays over
the probe axis and cascade it like a scalar matrix.

Conventions
-----------
Frequencies are ordinary frequencies in GHz, lengths in mm, phase velocities in
mm/ns, impedances in ohm. The electrical length of a section is
``2*pi*f*length/v_p`` radians. Time dependence is ``exp(+j*omega*t)``, so a
passive (lossy) element has a shunt admittance with positive real part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable

import numpy as np

from .errors import DomainError, PoleError, SingularityError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TwoPortMatrix:
    """Complex 2x2 ABCD matrix ``[[a, b], [c, d]]``.

    ``b`` carries ohm and ``c`` siemens; ``a`` and ``d`` are dimensionless.
    """

    a: complex | np.ndarray
    b: complex | np.ndarray
    c: complex | np.ndarray
    d: complex | np.ndarray

    @classmethod
    def identity(cls, shape: tuple[int, ...] = ()) -> "TwoPortMatrix":
        one = np.ones(shape, dtype=complex) if shape else 1.0 + 0j
        zero = np.zeros(shape, dtype=complex) if shape else 0j
        return cls(one, zero, zero, one)

    @classmethod
    def from_array(cls, m) -> "TwoPortMatrix":
        m = np.asarray(m, dtype=complex)
        if m.shape[:2] != (2, 2):
            raise DomainError(f"expected a (2, 2, ...) array, got shape {m.shape}")
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    def to_array(self) -> np.ndarray:
        """Stack into an array of shape ``(2, 2) + entry_shape``."""
        a, b, c, d = np.broadcast_arrays(*(np.asarray(x, dtype=complex) for x in self))
        return np.array([[a, b], [c, d]])

    def __iter__(self):
        return iter((self.a, self.b, self.c, self.d))

    def __matmul__(self, other: "TwoPortMatrix") -> "TwoPortMatrix":
        return TwoPortMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def det(self):
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "TwoPortMatrix":
        det = self.det()
        return TwoPortMatrix(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def allclose(self, other: "TwoPortMatrix", atol: float = 1e-12) -> bool:
        return all(np.allclose(x, y, rtol=0.0, atol=atol) for x, y in zip(self, other))


@dataclass(frozen=True)
class WaveguideSegment:
    """Uniform section of transmission line.

    Parameters
    ----------
    length : float
        Physical length in mm. Zero is accepted for convenience (identity).
    impedance : float
        Characteristic impedance in ohm.
    phase_velocity : float
        Phase velocity in mm/ns.
    """

    length: float
    impedance: float
    phase_velocity: float

    def __post_init__(self):
        for name in ("length", "impedance", "phase_velocity"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if self.length < 0:
            raise DomainError(f"length must be non-negative, got {self.length}")
        if self.impedance <= 0 or self.phase_velocity <= 0:
            raise DomainError("impedance and phase_velocity must be positive")

    def electrical_length(self, f):
        """Phase ``2*pi*f*length/v_p`` in radians."""
        return TWO_PI * np.asarray(f, dtype=float) * self.length / self.phase_velocity

    def scaled(self, factor: float) -> "WaveguideSegment":
        return WaveguideSegment(self.length * factor, self.impedance, self.phase_velocity)


def _check_frequency(f):
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise DomainError("frequency must be finite")
    if np.any(f < 0):
        raise DomainError("frequency must be non-negative")
    return f


def _maybe_scalar(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def segment_matrix(seg: WaveguideSegment, f) -> TwoPortMatrix:
    """ABCD matrix of a lossless line section at frequency ``f`` (GHz).

    Returns ``[[cos p, jZ sin p], [j sin p / Z, cos p]]`` with
    ``p = 2*pi*f*length/v_p``; the determinant is exactly one.
    """
    f = _check_frequency(f)
    phase = seg.electrical_length(f)
    cos, sin = np.cos(phase), np.sin(phase)
    z = seg.impedance
    return TwoPortMatrix(
        _maybe_scalar(cos + 0j),
        _maybe_scalar(1j * z * sin),
        _maybe_scalar(1j * sin / z),
        _maybe_scalar(cos + 0j),
    )


def shunt_matrix(admittance) -> TwoPortMatrix:
    """ABCD matrix ``[[1, 0], [Y, 1]]`` of a shunt admittance ``Y`` (siemens)."""
    y = np.asarray(admittance, dtype=complex)
    return TwoPortMatrix(
        _maybe_scalar(np.ones_like(y)), _maybe_scalar(np.zeros_like(y)),
        _maybe_scalar(y), _maybe_scalar(np.ones_like(y)),
    )


def atom_matrix(gamma, omega_a, f, z0, gamma_nr: float = 0.0,
                pole_floor: float = 1e-9) -> TwoPortMatrix:
    """Shunt two-port of a two-level atom side-coupled to a line.

    The shunt admittance is ``-j*gamma / (f - omega_a - j*gamma_nr/2) / z0``.
    With ``gamma_nr = 0`` this is the lossless single-photon form and has a
    pole at ``f == omega_a``; a positive ``gamma_nr`` adds non-radiative
    damping and keeps the matrix finite on resonance.

    Parameters
    ----------
    gamma : float
        Radiative decay rate into the line, GHz.
    omega_a : float
        Atom transition frequency, GHz.
    f : float or array_like
        Probe frequency, GHz.
    z0 : float
        Line impedance the decay rate refers to, ohm.
    gamma_nr : float, optional
        Non-radiative broadening (FWHM), GHz.
    pole_floor : float, optional
        Smallest ``|f - omega_a - j*gamma_nr/2|`` accepted.

    Raises
    ------
    PoleError
        If ``f`` is within ``pole_floor`` of the (damped) pole.
    """
    if gamma < 0 or gamma_nr < 0:
        raise DomainError("gamma and gamma_nr must be non-negative")
    if z0 <= 0:
        raise DomainError("z0 must be positive")
    f = _check_frequency(f)
    if gamma == 0:
        return TwoPortMatrix.identity(f.shape)
    den = (f - omega_a) - 0.5j * gamma_nr
    if np.any(np.abs(den) < pole_floor):
        raise PoleError(
            f"probe within {pole_floor:g} GHz of the atom pole at {omega_a} GHz; "
            "pass gamma_nr > 0 to regularize"
        )
    y = -1j * gamma / den / z0
    return shunt_matrix(y)


def cascade(matrices: Iterable[TwoPortMatrix]) -> TwoPortMatrix:
    """Ordered product ``M1 @ M2 @ ... @ Mn`` (signal enters at M1)."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("cascade needs at least one matrix")
    return reduce(lambda x, y: x @ y, matrices)


def matrix_power(m: TwoPortMatrix, n: int) -> TwoPortMatrix:
    """``m`` multiplied by itself ``n`` times, by repeated squaring."""
    if int(n) != n or n < 0:
        raise DomainError(f"exponent must be a non-negative integer, got {n!r}")
    n = int(n)
    shape = np.shape(np.broadcast(*(np.asarray(x) for x in m)))
    result = TwoPortMatrix.identity(shape)
    base = m
    while n:
        if n & 1:
            result = result @ base
        n >>= 1
        if n:
            base = base @ base
    return result


def _denominator(m: TwoPortMatrix, z0: float):
    if z0 <= 0:
        raise DomainError("z0 must be positive")
    den = m.a + m.b / z0 + m.c * z0 + m.d
    scale = np.abs(m.a) + np.abs(m.b / z0) + np.abs(m.c * z0) + np.abs(m.d)
    if np.any(np.abs(den) <= 1e-14 * scale):
        raise SingularityError("ABCD to S conversion is singular (a + b/z0 + c*z0 + d = 0)")
    return den


def transmission_coefficient(m: TwoPortMatrix, z0: float):
    """S21 of the two-port between matched ports of impedance ``z0``."""
    return 2.0 / _denominator(m, z0)


def reflection_coefficient(m: TwoPortMatrix, z0: float):
    """S11 of the two-port between matched ports of impedance ``z0``."""
    return (m.a + m.b / z0 - m.c * z0 - m.d) / _denominator(m, z0)


def input_impedance(m: TwoPortMatrix, load: float):
    """Impedance seen at the input with the output terminated in ``load``."""
    return (m.a * load + m.b) / (m.c * load + m.d)


def output_impedance(m: TwoPortMatrix, source: float):
    """Impedance seen looking back into the output with the input terminated
    in ``source``."""
    return (m.d * source + m.b) / (m.c * source + m.a)
