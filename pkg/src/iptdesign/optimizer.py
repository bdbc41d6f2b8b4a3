"""Coupling sweeps, power-fluctuation ratio and detuned-secondary search."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericalError
from .network import IptNetwork, assemble
from .solver import power_balance_error, solve_steady_state

__all__ = [
    "SweepSpec",
    "KSweep",
    "DesignCandidate",
    "SearchResult",
    "k_sweep",
    "fluctuation_ratio",
    "reflected_impedance",
    "classify_reactance",
    "evaluate_candidate",
    "search",
    "default_detune_grid",
    "default_x_grid",
    "power_curve_bracket",
    "is_interior_maximum",
]


def _strictly_increasing(seq):
    return all(b > a for a, b in zip(seq, seq[1:]))


@dataclass(frozen=True)
class SweepSpec:
    """Coupling range and secondary-design grid.

    Attributes
    ----------
    k_min, k_max : float
        Coupling range, ``0 <= k_min < k_max < 1``.
    k_steps : int
        Number of equally spaced coupling points (>= 2).
    deltas : tuple of float
        Multipliers applied to the C_rx value resonant with L_rx.
    xs : tuple of float or None
        Residual TX reactances (ohm).  ``None`` keeps the network's C0.
    """

    k_min: float
    k_max: float
    k_steps: int
    deltas: tuple = (1.0,)
    xs: tuple | None = None

    def __post_init__(self):
        if not (0.0 <= self.k_min < self.k_max < 1.0):
            raise ValueError(f"need 0 <= k_min < k_max < 1, got {self.k_min}, {self.k_max}")
        if int(self.k_steps) != self.k_steps or self.k_steps < 2:
            raise ValueError(f"k_steps must be an integer >= 2, got {self.k_steps!r}")
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        if not self.deltas or not _strictly_increasing(self.deltas) or min(self.deltas) <= 0:
            raise ValueError("detune grid must be non-empty, positive and strictly increasing")
        if self.xs is not None:
            object.__setattr__(self, "xs", tuple(float(x) for x in self.xs))
            if not self.xs or not _strictly_increasing(self.xs):
                raise ValueError("X grid must be non-empty and strictly increasing")

    @property
    def ks(self) -> np.ndarray:
        return np.linspace(self.k_min, self.k_max, int(self.k_steps))

    @property
    def k_mid(self) -> float:
        return 0.5 * (self.k_min + self.k_max)


def default_detune_grid(lo=0.7, hi=1.3, n=25) -> tuple:
    return tuple(np.linspace(lo, hi, n))


def default_x_grid(x_design: float, span=0.5, n=11) -> tuple:
    """``n`` points over ``x_design * (1 -/+ span)``."""
    return tuple(np.linspace(x_design * (1 - span), x_design * (1 + span), n))


@dataclass(frozen=True)
class KSweep:
    """Steady-state results along the coupling grid."""

    ks: np.ndarray = field(repr=False)
    p_in: np.ndarray = field(repr=False)
    p_out: np.ndarray = field(repr=False)
    efficiency: np.ndarray = field(repr=False)
    zvs_residual: np.ndarray = field(repr=False)
    balance_error: np.ndarray = field(repr=False)

    @property
    def argmax_k(self) -> float:
        return float(self.ks[int(np.argmax(self.p_out))])


def k_sweep(net: IptNetwork, spec: SweepSpec | Sequence[float], delta: float | None = None,
            x: float | None = None, N: int = 30, switch_model: str = "exact") -> KSweep:
    """Solve ``net`` at every coupling of ``spec``.

    ``delta`` and ``x`` re-tune C_rx and C0 first; ``None`` keeps the
    network's own values.  ``spec`` may also be a plain sequence of
    couplings.

    Raises
    ------
    NumericalError
        Re-raised with the failing coupling in the message.
    """
    ks = spec.ks if isinstance(spec, SweepSpec) else np.asarray(spec, dtype=float)
    base = net.with_secondary(delta=delta, x=x)
    rows = []
    for k in ks:
        try:
            sol = solve_steady_state(assemble(base.with_coupling(float(k)), N, switch_model))
        except NumericalError as exc:
            raise type(exc)(f"at k={k:g}: {exc}") from exc
        rows.append((sol.p_in, sol.p_out, sol.efficiency, sol.zvs_residual,
                     power_balance_error(sol)))
    a = np.array(rows, dtype=float).reshape(-1, 5)
    return KSweep(np.asarray(ks, dtype=float), *a.T)


def fluctuation_ratio(powers) -> float:
    """Power drop ratio ``(max - min) / max`` of a power curve."""
    p = np.asarray(powers, dtype=float)
    if p.size == 0:
        raise ValueError("power curve is empty")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("power curve must be finite and nonnegative")
    top = p.max()
    if top == 0:
        raise ValueError("fluctuation ratio is undefined for an all-zero power curve")
    return float((top - p.min()) / top)


def reflected_impedance(net: IptNetwork, k: float, omega: float | None = None) -> complex:
    """Secondary loop impedance seen from the TX coil, ``(w M)^2 / Z_s``.

    ``Z_s = j w L_rx + 1/(j w C_rx) + R_L + R_rx``.
    """
    w = net.omega if omega is None else omega
    m = net.with_coupling(k).mutual
    z_s = 1j * w * net.l_rx + 1.0 / (1j * w * net.c_rx) + net.r_load + net.r_rx
    if abs(z_s) < 1e-12 * (w * net.l_rx):
        raise ZeroDivisionError("secondary loop impedance vanishes at this frequency")
    return (w * m) ** 2 / z_s


def classify_reactance(z: complex, rtol: float = 1e-9) -> str:
    """'capacitive', 'inductive' or 'resistive' from the sign of Im z."""
    if abs(z.imag) <= rtol * abs(z):
        return "resistive"
    return "capacitive" if z.imag < 0 else "inductive"


@dataclass(frozen=True)
class DesignCandidate:
    """One (delta, X) point with its coupling sweep.

    Attributes
    ----------
    delta : float
        C_rx divided by the resonant value.
    x : float
        Residual TX reactance (ohm).
    ks, power, efficiency : ndarray
    beta_fluct : float
    mean_efficiency : float
    reflected : complex
        Reflected impedance at the middle of the coupling range.
    reflected_sign : str
    """

    delta: float
    x: float
    ks: np.ndarray = field(repr=False)
    power: np.ndarray = field(repr=False)
    efficiency: np.ndarray = field(repr=False)
    beta_fluct: float
    mean_efficiency: float
    reflected: complex
    reflected_sign: str
    balance_error: float = 0.0

    def sort_key(self):
        return (self.beta_fluct, -self.mean_efficiency, abs(self.delta - 1.0))


def evaluate_candidate(net: IptNetwork, spec: SweepSpec, delta: float, x: float,
                       N: int = 30, switch_model: str = "exact") -> DesignCandidate:
    sw = k_sweep(net, spec, delta, x, N, switch_model)
    tuned = net.with_secondary(delta=delta, x=x)
    z = reflected_impedance(tuned, spec.k_mid)
    return DesignCandidate(
        delta=float(delta), x=float(x), ks=sw.ks, power=sw.p_out, efficiency=sw.efficiency,
        beta_fluct=fluctuation_ratio(sw.p_out), mean_efficiency=float(np.mean(sw.efficiency)),
        reflected=complex(z), reflected_sign=classify_reactance(z),
        balance_error=float(np.max(sw.balance_error)),
    )


def _evaluate(args):
    return evaluate_candidate(*args)


@dataclass(frozen=True)
class SearchResult:
    """Ranked candidates plus the configured network as a reference point.

    ``reference`` evaluates the network with its own C_rx and C0, so a
    configured capacitor that is not on the resonance-relative grid is
    still reported.
    """

    candidates: tuple
    reference: DesignCandidate

    @property
    def top(self) -> DesignCandidate:
        return self.candidates[0]


def search(net: IptNetwork, spec: SweepSpec, N: int = 30, switch_model: str = "exact",
           workers: int | None = None) -> SearchResult:
    """Evaluate the full (delta, X) grid and rank the candidates.

    Candidates are sorted by ascending ``beta_fluct``, then by higher
    mean efficiency, then by smaller ``|delta - 1|``.  With
    ``workers > 1`` the grid is evaluated in a process pool; results
    are gathered in grid order, so the ranking does not depend on
    scheduling.
    """
    xs = spec.xs if spec.xs is not None else (net.extra_reactance,)
    jobs = [(net, spec, d, x, N, switch_model) for d in spec.deltas for x in xs]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cands = list(pool.map(_evaluate, jobs))
    else:
        cands = [_evaluate(j) for j in jobs]
    ranked = tuple(sorted(cands, key=DesignCandidate.sort_key))
    ref = evaluate_candidate(net, spec, net.detuning, net.extra_reactance, N, switch_model)
    return SearchResult(ranked, ref)


def power_curve_bracket(ks, power) -> tuple:
    """Grid interval ``(k_lo, k_hi)`` around the sampled maximum."""
    i = int(np.argmax(power))
    lo = ks[max(i - 1, 0)]
    hi = ks[min(i + 1, len(ks) - 1)]
    return float(lo), float(hi)


def is_interior_maximum(power) -> bool:
    i = int(np.argmax(power))
    return 0 < i < len(power) - 1
