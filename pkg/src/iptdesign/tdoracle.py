"""Brute-force time-domain oracle.

The circuit is written as ``E x' = A(t) x + b`` with the switch
resistance toggling between ``R_on`` and ``R_off``, and integrated with
the trapezoidal rule from rest until consecutive periods agree.  It
shares nothing with the harmonic solver except the network description.

State ordering for the IPT networks::

    [i_in, v_ds, i_tx, i_rx, v_c0, v_crx (, i_l2, v_c2)]
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, InstabilityError
from .network import IptNetwork

__all__ = [
    "TransientRun",
    "OracleSteadyState",
    "trapezoid_matrices",
    "integrate_periodic",
    "network_state_equations",
    "transient_simulate",
    "steady_state_extract",
]

#: Consecutive-period relative L2 distance accepted as steady state.
PERIODIC_TOL = 1e-6
MAX_CYCLES = 5000
DEFAULT_STEPS = 8192
MIN_STEPS = 2048
#: Abort when a state exceeds this multiple of the input scale.
GROWTH_LIMIT = 1e6


@dataclass(frozen=True)
class TransientRun:
    """Outcome of a periodic transient simulation.

    Attributes
    ----------
    states : ndarray, shape (steps + 1, n)
        Trajectory over the last simulated period, both endpoints
        included.
    labels : tuple of str
    step : float
        Step size (s).
    period : float
    on_steps : int
        Steps spent with the switch ON at the start of each period.
    cycles : int
        Periods simulated.
    residual : float
        Relative L2 distance between the last two periods.
    history : tuple of float
        Residual after every period.
    converged : bool
    network : IptNetwork or None
    """

    states: np.ndarray = field(repr=False)
    labels: tuple
    step: float
    period: float
    on_steps: int
    cycles: int
    residual: float
    history: tuple = field(repr=False)
    converged: bool
    network: IptNetwork | None = field(default=None, repr=False)
    tolerance: float = PERIODIC_TOL

    @property
    def steps_per_cycle(self) -> int:
        return self.states.shape[0] - 1

    @property
    def theta(self) -> np.ndarray:
        """Phase at every stored sample, ``0 .. 2 pi``."""
        return np.linspace(0.0, 2 * math.pi, self.steps_per_cycle + 1)

    def state(self, label: str) -> np.ndarray:
        return self.states[:, self.labels.index(label)]


def trapezoid_matrices(e, a, b, h):
    """Step matrices of the trapezoidal rule for ``E x' = A x + b``.

    Returns ``(M, c)`` with ``x[n+1] = M x[n] + c``.
    """
    lhs = e - 0.5 * h * a
    m = np.linalg.solve(lhs, e + 0.5 * h * a)
    c = np.linalg.solve(lhs, h * b)
    return m, c


def integrate_periodic(e, a_on, a_off, b, period, duty, steps_per_cycle=DEFAULT_STEPS,
                       max_cycles=MAX_CYCLES, tol=PERIODIC_TOL, x0=None, labels=None,
                       scale=1.0, backend=None, min_cycles=1) -> TransientRun:
    """Integrate a periodically switched linear system to steady state.

    Parameters
    ----------
    e, a_on, a_off : ndarray
        Descriptor and state matrices in each switch state.
    b : ndarray
        Constant forcing.
    period : float
        Switching period (s); the ON state spans ``[0, duty * period)``.
    duty : float
        ON fraction, rounded onto the step grid.
    steps_per_cycle : int
        Uniform steps per period (>= 2048).
    max_cycles : int
        Periods simulated before giving up.
    tol : float
        Relative L2 distance between consecutive periods that counts as
        periodic.
    x0 : ndarray, optional
        Initial state; zero by default.
    scale : float
        Input magnitude for the instability guard.
    min_cycles : int
        Periods simulated before convergence may be declared.

    Returns
    -------
    TransientRun
        ``converged`` is False when ``max_cycles`` ran out.

    Raises
    ------
    InstabilityError
        If the state grows beyond ``GROWTH_LIMIT * scale``.
    """
    if steps_per_cycle < MIN_STEPS:
        raise ValueError(f"steps_per_cycle must be >= {MIN_STEPS}, got {steps_per_cycle}")
    n_on = int(round(duty * steps_per_cycle))
    n_on = min(max(n_on, 0), steps_per_cycle)
    h = period / steps_per_cycle
    m_on, c_on = trapezoid_matrices(e, a_on, b, h)
    m_off, c_off = trapezoid_matrices(e, a_off, b, h)
    stepper = _kernels.CycleStepper(m_on, c_on, m_off, c_off, n_on, steps_per_cycle - n_on,
                                    backend=backend)
    n = e.shape[0]
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    prev = np.broadcast_to(x, (steps_per_cycle + 1, n)).copy()
    cur = np.empty_like(prev)
    history = []
    limit = GROWTH_LIMIT * max(scale, 1e-30)
    converged = False
    cycles = 0
    while cycles < max_cycles:
        stepper.run(prev[-1], cur)
        cycles += 1
        peak = np.max(np.abs(cur))
        if not np.isfinite(peak) or peak > limit:
            raise InstabilityError(f"state magnitude {peak:.3g} exceeded guard after {cycles} cycles")
        num = np.linalg.norm(cur - prev)
        den = np.linalg.norm(cur)
        res = 0.0 if num == 0.0 else float(num / den) if den > 0 else float("inf")
        history.append(res)
        prev, cur = cur, prev
        if res < tol and cycles >= min_cycles:
            converged = True
            break
    labels = tuple(labels) if labels is not None else tuple(f"x{i}" for i in range(n))
    traj = prev.copy()
    traj.setflags(write=False)
    return TransientRun(traj, labels, h, period, n_on, cycles, history[-1], tuple(history),
                        converged, None, tol)


def network_state_equations(net: IptNetwork):
    """Descriptor form ``(E, A_on, A_off, b, labels)`` of an IPT network."""
    ef = net.variant == "class_ef"
    labels = ["i_in", "v_ds", "i_tx", "i_rx", "v_c0", "v_crx"] + (["i_l2", "v_c2"] if ef else [])
    ix = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    e = np.zeros((n, n))
    a = np.zeros((n, n))
    m = net.mutual
    e[0, 0] = net.l1
    e[1, 1] = net.c1
    e[2, 2], e[2, 3], e[3, 2], e[3, 3] = net.l_tx, m, m, net.l_rx
    e[4, 4], e[5, 5] = net.c0, net.c_rx
    # L1 di_in/dt = V_in - v_ds
    a[0, 1] = -1.0
    # C1 dv/dt = i_in - i_tx (- i_l2) - v/R
    a[1, 0], a[1, 2] = 1.0, -1.0
    # coupled coils
    a[2, 1], a[2, 2], a[2, 4] = 1.0, -net.r_tx, -1.0
    a[3, 3], a[3, 5] = -(net.r_rx + net.r_load), -1.0
    a[4, 2] = 1.0
    a[5, 3] = 1.0
    if ef:
        e[ix["i_l2"], ix["i_l2"]] = net.l2
        e[ix["v_c2"], ix["v_c2"]] = net.c2
        a[1, ix["i_l2"]] = -1.0
        a[ix["i_l2"], 1] = 1.0
        a[ix["i_l2"], ix["v_c2"]] = -1.0
        a[ix["v_c2"], ix["i_l2"]] = 1.0
    a_on, a_off = a.copy(), a.copy()
    a_on[1, 1] = -1.0 / net.switch.r_on
    a_off[1, 1] = -1.0 / net.switch.r_off
    b = np.zeros(n)
    b[0] = net.v_in
    return e, a_on, a_off, b, tuple(labels)


def transient_simulate(net: IptNetwork, cycles: int = MAX_CYCLES,
                       steps_per_cycle: int = DEFAULT_STEPS, tol: float = PERIODIC_TOL,
                       backend: str | None = None) -> TransientRun:
    """Integrate ``net`` from rest until consecutive periods agree.

    ``cycles`` caps the number of periods.  The switching instants
    ``0`` and ``2 pi D`` fall on step boundaries; ``D`` is rounded to
    the nearest multiple of ``1/steps_per_cycle``.
    """
    e, a_on, a_off, b, labels = network_state_equations(net)
    scale = max(net.v_in, 1.0)
    run = integrate_periodic(e, a_on, a_off, b, 1.0 / net.f_s, net.switch.duty,
                             steps_per_cycle, cycles, tol, labels=labels, scale=scale,
                             backend=backend)
    object.__setattr__(run, "network", net)
    return run


@dataclass(frozen=True)
class OracleSteadyState:
    """Final-period waveforms and powers of a converged run.

    Waveform arrays hold ``steps_per_cycle`` samples at
    ``theta = 2 pi n / steps``.  Powers use step-midpoint values, for
    which the trapezoidal rule conserves energy exactly.
    """

    theta: np.ndarray = field(repr=False)
    v_ds: np.ndarray = field(repr=False)
    i_in: np.ndarray = field(repr=False)
    i_o: np.ndarray = field(repr=False)
    v_load: np.ndarray = field(repr=False)
    p_in: float
    p_out: float
    efficiency: float
    losses: dict
    v_ds_turn_on: float
    v_ds_rms: float
    residual: float
    cycles: int

    def balance_error(self) -> float:
        gap = self.p_in - self.p_out - sum(self.losses.values())
        return abs(gap) / self.p_in if self.p_in > 0 else abs(gap)

    def as_columns(self) -> dict:
        """Columns for CSV export, matching the solver waveform export."""
        return {"theta_rad": self.theta, "v_ds_V": self.v_ds,
                "i_o_A": self.i_o, "v_load_V": self.v_load}


def steady_state_extract(run: TransientRun) -> OracleSteadyState:
    """Waveforms and powers over the final period of ``run``.

    Raises
    ------
    ConvergenceError
        If the run did not reach the periodicity tolerance; the residual
        history is attached.
    """
    if not run.converged or run.residual >= run.tolerance:
        raise ConvergenceError(
            f"transient run not periodic after {run.cycles} cycles "
            f"(residual {run.residual:.3g})", run.history)
    net = run.network
    if net is None:
        raise ValueError("run carries no network; extract powers manually")
    x = run.states
    mid = 0.5 * (x[1:] + x[:-1])
    lab = run.labels.index
    v_mid = mid[:, lab("v_ds")]
    r_sw = np.where(np.arange(mid.shape[0]) < run.on_steps, net.switch.r_on, net.switch.r_off)
    i_tx, i_rx = mid[:, lab("i_tx")], mid[:, lab("i_rx")]
    p_in = float(np.mean(net.v_in * mid[:, lab("i_in")]))
    p_out = float(np.mean(net.r_load * i_rx ** 2))
    losses = {
        "switch": float(np.mean(v_mid ** 2 / r_sw)),
        "tx_coil": float(np.mean(net.r_tx * i_tx ** 2)),
        "rx_coil": float(np.mean(net.r_rx * i_rx ** 2)),
    }
    v = x[:-1, lab("v_ds")]
    return OracleSteadyState(
        theta=run.theta[:-1], v_ds=v.copy(), i_in=x[:-1, lab("i_in")].copy(),
        i_o=x[:-1, lab("i_tx")].copy(), v_load=net.r_load * x[:-1, lab("i_rx")],
        p_in=p_in, p_out=p_out, efficiency=p_out / p_in if p_in > 0 else 0.0,
        losses=losses, v_ds_turn_on=float(x[-1, lab("v_ds")]),
        v_ds_rms=float(np.sqrt(np.mean(v ** 2))), residual=run.residual, cycles=run.cycles,
    )
