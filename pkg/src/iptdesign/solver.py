"""Periodic steady state from the assembled harmonic system."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import ResidualError, SingularSystemError
from .harmonic import HarmonicSpectrum, switched_shunt_voltage, to_time_samples
from .network import AssembledSystem, IptNetwork, assemble

__all__ = [
    "SteadyStateSolution",
    "solve_steady_state",
    "solve_network",
    "input_power",
    "output_power",
    "loss_breakdown",
    "power_balance_error",
    "zvs_residual",
    "switch_voltage",
    "waveforms",
]

#: Relative residual every solve must meet.
RESIDUAL_TOL = 1e-10
#: Maximum iterative-refinement steps after the LU solve.
REFINE_STEPS = 3
#: Default number of samples per period for reconstructed waveforms.
WAVEFORM_SAMPLES = 4096


@dataclass(frozen=True)
class SteadyStateSolution:
    """Solved spectra and derived scalars.

    Attributes
    ----------
    system : AssembledSystem
    spectra : mapping of str to HarmonicSpectrum
        One spectrum per unknown label, plus ``'v_load'`` (voltage over
        R_L) and ``'i_switch'`` (current into the switch/C1 pair).
    p_in, p_out : float
        Input and load power (W).
    efficiency : float
    zvs_residual : float
        Drain voltage just before turn-on (V).
    i0_amplitude : float
        Amplitude of the fundamental TX current (A).
    losses : mapping of str to float
        Dissipation in ``switch`` (R_on/R_off), ``tx_coil``, ``rx_coil``.
    residual : float
        ``||A x - b|| / ||b||`` of the reported solution.
    condition_estimate : float
        1-norm condition number estimate of the system matrix.
    """

    system: AssembledSystem = field(repr=False)
    spectra: Mapping = field(repr=False)
    p_in: float
    p_out: float
    efficiency: float
    zvs_residual: float
    i0_amplitude: float
    losses: Mapping
    residual: float
    condition_estimate: float

    @property
    def network(self) -> IptNetwork:
        return self.system.network

    @property
    def order_limit(self) -> int:
        return self.system.order_limit

    @property
    def v_ds(self) -> HarmonicSpectrum:
        return self.spectra["v_ds"]

    @property
    def v_load(self) -> HarmonicSpectrum:
        return self.spectra["v_load"]

    @property
    def i_o(self) -> HarmonicSpectrum:
        return self.spectra["i_tx"]


def _symmetrize(c, n):
    # the exact solution is conjugate symmetric; remove rounding asymmetry
    blocks = c.reshape(-1, n)
    return (0.5 * (blocks + np.conj(blocks[:, ::-1]))).ravel()


def solve_steady_state(sys: AssembledSystem, residual_tol: float = RESIDUAL_TOL,
                       zvs_samples: int = WAVEFORM_SAMPLES) -> SteadyStateSolution:
    """Solve ``sys`` with a dense LU factorization.

    Raises
    ------
    SingularSystemError
        When the reciprocal condition estimate underflows machine
        precision.
    ResidualError
        When the relative residual exceeds ``residual_tol``.
    """
    A, b = sys.matrix, sys.source
    anorm = np.linalg.norm(A, 1)
    with warnings.catch_warnings():
        # exact singularity is reported below through the condition estimate
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    cond = float("inf") if rcond == 0 else 1.0 / rcond
    if info != 0 or not np.isfinite(cond) or rcond < np.finfo(float).eps:
        raise SingularSystemError(
            f"harmonic system is singular to working precision (cond ~ {cond:.3g})", cond)
    n = sys.block_size
    bnorm = np.linalg.norm(b)
    scale = bnorm if bnorm > 0 else 1.0
    x = _symmetrize(sla.lu_solve((lu, piv), b), n)
    res = np.linalg.norm(A @ x - b) / scale
    # a few steps of iterative refinement for poorly scaled systems
    for _ in range(REFINE_STEPS):
        if res <= 0.01 * residual_tol:
            break
        x_new = _symmetrize(x + sla.lu_solve((lu, piv), b - A @ x), n)
        res_new = np.linalg.norm(A @ x_new - b) / scale
        if res_new >= res:
            break
        x, res = x_new, res_new
    res = float(res)
    if res > residual_tol:
        raise ResidualError(f"relative residual {res:.3g} exceeds {residual_tol:.3g}")

    net = sys.network
    N = sys.order_limit
    spec = {lab: HarmonicSpectrum(N, x[sys.block(lab)], net.f_s) for lab in sys.labels}
    ib = x[sys.block("i_in")] - x[sys.block("i_tx")]
    if "i_l2" in sys.labels:
        ib = ib - x[sys.block("i_l2")]
    spec["i_switch"] = HarmonicSpectrum(N, ib, net.f_s)
    spec["v_load"] = spec["i_rx"].scaled(net.r_load)
    spec = MappingProxyType(spec)

    p_in = float(net.v_in * spec["i_in"].coeff(0).real)
    p_out = float(net.r_load * spec["i_rx"].mean_square())
    losses = MappingProxyType(_losses(spec, net))
    sol = SteadyStateSolution(
        system=sys, spectra=spec, p_in=p_in, p_out=p_out,
        efficiency=p_out / p_in if p_in > 0 else 0.0,
        zvs_residual=float("nan"), i0_amplitude=2.0 * abs(spec["i_tx"].coeff(1)),
        losses=losses, residual=res, condition_estimate=cond,
    )
    object.__setattr__(sol, "zvs_residual", zvs_residual(sol, samples=zvs_samples))
    return sol


def solve_network(net: IptNetwork, N: int = 30, switch_model: str = "exact",
                  **kw) -> SteadyStateSolution:
    """Assemble and solve ``net`` in one call."""
    return solve_steady_state(assemble(net, N, switch_model), **kw)


def _losses(spec, net):
    v, ib = spec["v_ds"].coeffs, spec["i_switch"].coeffs
    return {
        "switch": float(np.real(np.vdot(ib, v))),
        "tx_coil": float(net.r_tx * spec["i_tx"].mean_square()),
        "rx_coil": float(net.r_rx * spec["i_rx"].mean_square()),
    }


def input_power(sol: SteadyStateSolution) -> float:
    """Mean supply power, the real inner product of source and input current."""
    src = sol.system.source[sol.system.block("i_in")]
    return float(np.real(np.vdot(sol.spectra["i_in"].coeffs, src)))


def output_power(sol: SteadyStateSolution) -> float:
    """Mean power in the load resistor from the load-voltage spectrum."""
    return float(sol.v_load.mean_square() / sol.network.r_load)


def loss_breakdown(sol: SteadyStateSolution) -> dict:
    return dict(sol.losses)


def power_balance_error(sol: SteadyStateSolution) -> float:
    """``|P_in - P_out - losses| / P_in`` (absolute when ``P_in`` is zero)."""
    gap = sol.p_in - sol.p_out - sum(sol.losses.values())
    return abs(gap) / sol.p_in if sol.p_in > 0 else abs(gap)


def switch_voltage(sol: SteadyStateSolution, theta) -> np.ndarray:
    """Drain voltage at phases ``theta``.

    With the exact switch model the waveform comes from the element's
    closed-form time response to the solved drain current, which is free
    of Gibbs ripple.  Other models fall back to Fourier synthesis.
    """
    sys = sol.system
    net = sys.network
    if sys.switch_model == "exact":
        return switched_shunt_voltage(net.switch, net.c1, net.omega,
                                      sol.spectra["i_switch"], theta)
    th = np.asarray(theta, dtype=float)
    c = sol.v_ds.coeffs
    p = sol.v_ds.orders
    return np.real(np.exp(1j * np.multiply.outer(th, p)) @ c)


def zvs_residual(sol: SteadyStateSolution, duty: float | None = None,
                 samples: int = WAVEFORM_SAMPLES) -> float:
    """Drain voltage at turn-on, the end of the OFF interval.

    The exact switch model is evaluated at the left limit ``wt -> 2*pi``.
    For the truncated models the waveform is synthesized on ``samples``
    points and the sample nearest ``2*pi`` from the left is used.
    ``duty`` only matters for a switch held permanently ON (``duty >= 1``),
    where the drain is tied low and the residual is zero.
    """
    if duty is not None and duty >= 1.0:
        return 0.0
    if sol.system.switch_model == "exact":
        return float(switch_voltage(sol, 2 * np.pi))
    w = to_time_samples(sol.v_ds, samples)
    return float(w[-1])


def waveforms(sol: SteadyStateSolution, samples: int = WAVEFORM_SAMPLES) -> dict:
    """Uniformly sampled drain voltage, output current and load voltage.

    Returns a dict with ``theta_rad``, ``v_ds_V``, ``i_o_A`` and
    ``v_load_V`` arrays of length ``samples``.
    """
    theta = 2 * np.pi * np.arange(samples) / samples
    return {
        "theta_rad": theta,
        "v_ds_V": np.asarray(switch_voltage(sol, theta), dtype=float),
        "i_o_A": to_time_samples(sol.i_o, samples),
        "v_load_V": to_time_samples(sol.v_load, samples),
    }
