"""Harmonic-domain algebra.

Periodic signals are stored as complex Fourier coefficients over the
harmonic orders ``p = -N .. N``; position ``i`` (0-based) of a
coefficient vector holds order ``p = i - N``.  Linear elements become
diagonal operators on these vectors, and the periodically switched
resistance becomes a Toeplitz operator.

Besides the element stamps this module provides the exact harmonic
transfer matrix of a switch shunted by a capacitor (see
:func:`switched_shunt_impedance`), which the network assembly uses by
default.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NotRealSignalError

__all__ = [
    "SwitchProfile",
    "HarmonicSpectrum",
    "HarmonicOperator",
    "orders",
    "stamp_resistor",
    "stamp_inductor",
    "stamp_capacitor",
    "capacitor_admittance",
    "switch_coefficient",
    "switch_conductance_coefficient",
    "stamp_switch",
    "stamp_switch_conductance",
    "switched_shunt_impedance",
    "switched_shunt_voltage",
    "dc_source_vector",
    "to_time_samples",
    "from_time_samples",
]

#: Relative tolerance used when checking conjugate symmetry.
SYMMETRY_RTOL = 1e-9


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _check_order(N):
    if int(N) != N or N < 1:
        raise ValueError(f"harmonic order limit must be an integer >= 1, got {N!r}")
    return int(N)


def orders(N: int) -> np.ndarray:
    """Harmonic orders ``-N..N`` in storage order."""
    N = _check_order(N)
    return np.arange(-N, N + 1)


@dataclass(frozen=True)
class SwitchProfile:
    """Two-level resistance model of the active switch.

    The switch is ON for ``0 <= wt < 2*pi*duty`` and OFF for the rest of
    the period.

    Parameters
    ----------
    r_on, r_off : float
        ON and OFF resistances in ohm, ``0 < r_on <= r_off``.  Equality
        is allowed so that a constant resistor can be expressed.
    duty : float
        ON fraction of the period, in (0, 1).
    """

    r_on: float = 0.05
    r_off: float = 1e6
    duty: float = 0.5

    def __post_init__(self):
        if not (np.isfinite(self.r_on) and self.r_on > 0):
            raise ValueError(f"r_on must be positive, got {self.r_on!r}")
        if not (np.isfinite(self.r_off) and self.r_off >= self.r_on):
            raise ValueError(f"r_off must be >= r_on, got {self.r_off!r}")
        if not (0.0 < self.duty < 1.0):
            raise ValueError(f"duty must lie in (0, 1), got {self.duty!r}")

    def resistance(self, theta):
        """Switch resistance at phase ``theta`` (rad, taken modulo 2*pi)."""
        th = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
        return np.where(th < 2 * np.pi * self.duty, self.r_on, self.r_off)


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Fourier coefficients of one periodic signal.

    Attributes
    ----------
    order_limit : int
        Highest harmonic order N.
    coeffs : ndarray of complex, shape (2N+1,)
        Coefficient of order ``p`` sits at index ``p + N``.
    base_frequency : float
        Fundamental frequency in Hz (informational).
    """

    order_limit: int
    coeffs: np.ndarray = field(repr=False)
    base_frequency: float = 1.0

    def __post_init__(self):
        N = _check_order(self.order_limit)
        c = _frozen(self.coeffs)
        if c.shape != (2 * N + 1,):
            raise ValueError(f"expected {2 * N + 1} coefficients, got shape {c.shape}")
        object.__setattr__(self, "order_limit", N)
        object.__setattr__(self, "coeffs", c)

    @property
    def orders(self) -> np.ndarray:
        return orders(self.order_limit)

    def coeff(self, p: int) -> complex:
        """Coefficient of harmonic order ``p`` (zero beyond the limit)."""
        if abs(p) > self.order_limit:
            return 0j
        return complex(self.coeffs[p + self.order_limit])

    def symmetry_defect(self) -> float:
        """Largest ``|c(-p) - conj(c(p))|`` relative to the spectrum norm."""
        c = self.coeffs
        scale = np.linalg.norm(c)
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(c[::-1] - np.conj(c))) / scale)

    def is_real_signal(self, rtol: float = SYMMETRY_RTOL) -> bool:
        return self.symmetry_defect() <= rtol

    def mean_square(self) -> float:
        """Time-domain mean square of the signal (Parseval)."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def rms(self) -> float:
        return float(np.sqrt(self.mean_square()))

    def scaled(self, factor) -> "HarmonicSpectrum":
        return HarmonicSpectrum(self.order_limit, self.coeffs * factor, self.base_frequency)


@dataclass(frozen=True)
class HarmonicOperator:
    """Linear map between spectra of the same order limit.

    ``entries[i, j]`` couples output order ``i - N`` to input order
    ``j - N``.
    """

    order_limit: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        N = _check_order(self.order_limit)
        e = _frozen(self.entries)
        n = 2 * N + 1
        if e.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got shape {e.shape}")
        object.__setattr__(self, "order_limit", N)
        object.__setattr__(self, "entries", e)

    @property
    def size(self) -> int:
        return 2 * self.order_limit + 1

    def entry(self, p: int, q: int) -> complex:
        """Entry coupling input order ``q`` to output order ``p``."""
        N = self.order_limit
        return complex(self.entries[p + N, q + N])

    def is_diagonal(self) -> bool:
        e = self.entries
        return bool(np.all(e[~np.eye(self.size, dtype=bool)] == 0))

    def is_toeplitz(self) -> bool:
        e = self.entries
        return bool(np.all(e[1:, 1:] == e[:-1, :-1]))

    def apply(self, s: HarmonicSpectrum) -> HarmonicSpectrum:
        if s.order_limit != self.order_limit:
            raise ValueError("order limits of operator and spectrum differ")
        return HarmonicSpectrum(self.order_limit, self.entries @ s.coeffs, s.base_frequency)

    def __matmul__(self, other):
        if isinstance(other, HarmonicSpectrum):
            return self.apply(other)
        if isinstance(other, HarmonicOperator):
            if other.order_limit != self.order_limit:
                raise ValueError("order limits differ")
            return HarmonicOperator(self.order_limit, self.entries @ other.entries)
        return NotImplemented


def _check_omega(omega):
    if not (np.isfinite(omega) and omega > 0):
        raise ValueError(f"omega must be positive, got {omega!r}")


def stamp_resistor(r: float, N: int) -> HarmonicOperator:
    """Diagonal operator of a resistor: ``r`` at every order."""
    if not r >= 0:
        raise ValueError(f"resistance must be nonnegative, got {r!r}")
    N = _check_order(N)
    return HarmonicOperator(N, np.eye(2 * N + 1) * float(r))


def stamp_inductor(l: float, omega: float, N: int) -> HarmonicOperator:
    """Diagonal operator ``j*p*omega*l``; exactly zero at DC."""
    if not l >= 0:
        raise ValueError(f"inductance must be nonnegative, got {l!r}")
    _check_omega(omega)
    p = orders(N)
    return HarmonicOperator(N, np.diag(1j * p * omega * l))


def stamp_capacitor(c: float, omega: float, N: int) -> HarmonicOperator:
    """Diagonal impedance operator ``1/(j*p*omega*c)``.

    The DC entry is the open-circuit sentinel ``inf``.  The operator is
    meant for inspection; assembled systems use
    :func:`capacitor_admittance`, where DC is an exact zero.
    """
    if not (np.isfinite(c) and c > 0):
        raise ValueError(f"capacitance must be positive, got {c!r}")
    _check_omega(omega)
    p = orders(N)
    d = np.full(p.size, complex(np.inf, 0.0))
    nz = p != 0
    d[nz] = 1.0 / (1j * p[nz] * omega * c)
    e = np.zeros((p.size, p.size), dtype=complex)
    e[np.diag_indices(p.size)] = d
    return HarmonicOperator(N, e)


def capacitor_admittance(c: float, omega: float, N: int) -> np.ndarray:
    """Diagonal of the capacitor admittance ``j*p*omega*c`` (zero at DC)."""
    if not (np.isfinite(c) and c > 0):
        raise ValueError(f"capacitance must be positive, got {c!r}")
    _check_omega(omega)
    return _frozen(1j * orders(N) * omega * c)


def _two_level(on_value, off_value, duty, p):
    # Fourier coefficients of a waveform equal to on_value on [0, 2*pi*D)
    # and off_value elsewhere.
    p = np.asarray(p)
    pf = p.astype(float)
    safe = np.where(p == 0, 1.0, pf)
    ac = (on_value - off_value) * np.sin(safe * np.pi * duty) / (safe * np.pi) \
        * np.exp(-1j * safe * np.pi * duty)
    dc = on_value * duty + off_value * (1.0 - duty)
    return np.where(p == 0, dc + 0j, ac)


def switch_coefficient(p: int, profile: SwitchProfile) -> complex:
    """Order-``p`` Fourier coefficient of the switch resistance.

    ``R_on*D + R_off*(1-D)`` at DC and
    ``(R_on - R_off) * sin(p*pi*D)/(p*pi) * exp(-j*p*pi*D)`` otherwise.
    """
    return complex(_two_level(profile.r_on, profile.r_off, profile.duty, int(p)))


def switch_conductance_coefficient(p: int, profile: SwitchProfile) -> complex:
    """Order-``p`` Fourier coefficient of the switch conductance."""
    return complex(_two_level(1.0 / profile.r_on, 1.0 / profile.r_off, profile.duty, int(p)))


def _toeplitz(coef_fn, profile, N):
    p = orders(N)
    lag = p[:, None] - p[None, :]
    return _two_level(*coef_fn(profile), profile.duty, lag)


def stamp_switch(profile: SwitchProfile, N: int) -> HarmonicOperator:
    """Toeplitz impedance operator of the switch, entry ``(i, j) = R_{p_i - p_j}``."""
    N = _check_order(N)
    return HarmonicOperator(N, _toeplitz(lambda s: (s.r_on, s.r_off), profile, N))


def stamp_switch_conductance(profile: SwitchProfile, N: int) -> HarmonicOperator:
    """Toeplitz admittance operator of the switch (conductance form)."""
    N = _check_order(N)
    return HarmonicOperator(N, _toeplitz(lambda s: (1.0 / s.r_on, 1.0 / s.r_off), profile, N))


# -- exact switch || capacitor element ------------------------------------

def _seg(s, length):
    """Integral of exp(s*t) for t in [0, length], elementwise in s."""
    s = np.asarray(s, dtype=complex)
    tiny = np.abs(s) * length < 1e-12
    safe = np.where(tiny, 1.0, s)
    return np.where(tiny, length + 0.5 * s * length ** 2, np.expm1(safe * length) / safe)


def _shunt_modes(profile, c, omega, N):
    """Per-input-harmonic solution of the periodic switched RC equation.

    For a unit current ``exp(j*q*t)`` into the pair, the capacitor
    voltage is ``c_on*exp(-a_on*t) + k_on*exp(j*q*t)`` while ON and
    ``c_off*exp(-a_off*(t - t_D)) + k_off*exp(j*q*t)`` while OFF.
    """
    q = orders(N).astype(float)
    t_d = 2 * np.pi * profile.duty
    t_off = 2 * np.pi - t_d
    a_on = 1.0 / (omega * profile.r_on * c)
    a_off = 1.0 / (omega * profile.r_off * c)
    k_on = 1.0 / (omega * c * (a_on + 1j * q))
    k_off = 1.0 / (omega * c * (a_off + 1j * q))
    e_on = np.exp(-a_on * t_d)
    e_off = np.exp(-a_off * t_off)
    # continuity at t_D and periodicity at 2*pi
    b0 = (k_off - k_on) * np.exp(1j * q * t_d)
    b1 = k_on - k_off
    det = e_on * e_off - 1.0
    c_on = (e_off * b0 + b1) / det
    c_off = (b0 + e_on * b1) / det
    return q, t_d, t_off, a_on, a_off, k_on, k_off, c_on, c_off


@lru_cache(maxsize=64)
def _shunt_matrix(r_on, r_off, duty, c, omega, N):
    prof = SwitchProfile(r_on, r_off, duty)
    q, t_d, t_off, a_on, a_off, k_on, k_off, c_on, c_off = _shunt_modes(prof, c, omega, N)
    p = q[:, None]
    d = q[None, :] - p
    z = (c_on[None, :] * _seg(-a_on - 1j * p, t_d)
         + k_on[None, :] * _seg(1j * d, t_d)
         + c_off[None, :] * np.exp(-1j * p * t_d) * _seg(-a_off - 1j * p, t_off)
         + k_off[None, :] * np.exp(1j * d * t_d) * _seg(1j * d, t_off)) / (2 * np.pi)
    return _frozen(z)


def switched_shunt_impedance(profile: SwitchProfile, c: float, omega: float,
                             N: int) -> HarmonicOperator:
    """Exact harmonic transfer matrix of the switch in parallel with ``c``.

    Maps the spectrum of the current driven into the parallel pair onto
    the spectrum of the voltage across it.  Each column solves the
    periodic, piecewise-constant RC equation
    ``omega*c*dv/dt + v/R(t) = exp(j*q*t)`` in closed form and projects
    the result onto the retained orders.  Unlike the truncated Toeplitz
    product, the time-domain solution behind each column is exact, so
    the element has no truncation error of its own.
    """
    N = _check_order(N)
    if not (np.isfinite(c) and c > 0):
        raise ValueError(f"capacitance must be positive, got {c!r}")
    _check_omega(omega)
    z = _shunt_matrix(float(profile.r_on), float(profile.r_off), float(profile.duty),
                      float(c), float(omega), N)
    return HarmonicOperator(N, z)


def switched_shunt_voltage(profile: SwitchProfile, c: float, omega: float,
                           current: HarmonicSpectrum, theta) -> np.ndarray:
    """Voltage across the switch/capacitor pair at the phases ``theta``.

    The waveform is evaluated from the closed-form modes rather than by
    Fourier synthesis, so it carries no Gibbs ripple at the switching
    instants.  ``theta = 2*pi`` returns the left limit at turn-on.
    """
    N = current.order_limit
    q, t_d, _, a_on, a_off, k_on, k_off, c_on, c_off = _shunt_modes(profile, c, omega, N)
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    wrapped = np.where(th == 2 * np.pi, th, np.mod(th, 2 * np.pi))
    on = wrapped < t_d
    t = wrapped[:, None]
    drive = np.exp(1j * q[None, :] * t)
    v_on = c_on[None, :] * np.exp(-a_on * t) + k_on[None, :] * drive
    v_off = c_off[None, :] * np.exp(-a_off * (t - t_d)) + k_off[None, :] * drive
    modes = np.where(on[:, None], v_on, v_off)
    v = modes @ current.coeffs
    return v.real.reshape(np.shape(theta)) if np.ndim(theta) else float(v.real[0])


# -- sources and time/frequency conversion -------------------------------

def dc_source_vector(v_in: float, N: int, base_frequency: float = 1.0) -> HarmonicSpectrum:
    """Spectrum of a constant source: ``v_in`` at DC, zero elsewhere."""
    N = _check_order(N)
    c = np.zeros(2 * N + 1, dtype=complex)
    c[N] = v_in
    return HarmonicSpectrum(N, c, base_frequency)


def to_time_samples(s: HarmonicSpectrum, m: int) -> np.ndarray:
    """Synthesize ``m`` uniform samples over one period, starting at 0.

    Raises
    ------
    NotRealSignalError
        If the spectrum is not conjugate symmetric.
    """
    N = s.order_limit
    if m < 2 * (2 * N + 1):
        raise ValueError(f"need at least {2 * (2 * N + 1)} samples, got {m}")
    if not s.is_real_signal():
        raise NotRealSignalError(
            f"spectrum is not conjugate symmetric (defect {s.symmetry_defect():.3g})")
    buf = np.zeros(m, dtype=complex)
    buf[np.mod(s.orders, m)] = s.coeffs
    x = np.fft.ifft(buf) * m
    rms = np.sqrt(np.mean(np.abs(x) ** 2))
    if rms > 0 and np.max(np.abs(x.imag)) > SYMMETRY_RTOL * rms:
        raise NotRealSignalError("synthesized waveform has a significant imaginary part")
    return x.real.copy()


def from_time_samples(w, N: int, base_frequency: float = 1.0) -> HarmonicSpectrum:
    """Fourier coefficients of orders ``-N..N`` from uniform samples."""
    w = np.asarray(w, dtype=float)
    N = _check_order(N)
    m = w.size
    if m < 2 * (2 * N + 1):
        raise ValueError(f"need at least {2 * (2 * N + 1)} samples, got {m}")
    spec = np.fft.fft(w) / m
    c = spec[np.mod(orders(N), m)]
    # enforce exact symmetry; the input is real so this only removes rounding
    c = 0.5 * (c + np.conj(c[::-1]))
    return HarmonicSpectrum(N, c, base_frequency)
