"""Load-independent Class E and Class EF design equations.

Both inverters are idealized as a lossless switching cell driving a
sinusoidal output current ``i_o = I_m sin(wt + phi)``.  Over one period
the cell is linear and piecewise constant, so each interval is
propagated with an exact matrix exponential of an augmented state that
carries the sinusoid along (``s' = c``, ``c' = -s``).  This gives the
switch-capacitor charge ``beta`` in closed form at any phase, and the
Fourier projections ``psi1``/``psi2`` are Gauss-Legendre sums over
those exact values.

Class E, time ``t = wt``, normalized by ``V_in`` and ``V_in/(w L1)``::

    ON :  u' = 1,        w = 0
    OFF:  u' = 1 - w,    w' = q^2 (u - p sin(t + phi))

with ``u = w L1 i_L1 / V_in``, ``w = v_ds / V_in`` and
``beta = w / (q^2 p)``.

Class EF, normalized by the choke current ``I_in`` and ``m = I_m/I_in =
p (k + 1)``::

    ON :  beta = 0,                     j' = -q1^2 c / k,  c' = k j
    OFF:  beta' = 1 - j - m sin(t+phi), j' = q1^2 (beta - c) / k,  c' = k j

with ``j = i_L2 / I_in`` and ``c = w C1 v_C2 / I_in``.  Every quantity is
affine in the loading (p or m), which the root finder exploits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import DesignError

__all__ = [
    "ClassEDesignState",
    "ClassEFDesignState",
    "DesignConstants",
    "class_e_waveforms",
    "class_ef_waveforms",
    "fourier_projections",
    "solve_class_e",
    "solve_class_ef",
    "class_ef_operating_point",
    "DEFAULT_K_RATIO",
    "CLASS_E_P_DOMAIN",
    "CLASS_EF_P_DOMAIN",
]

TWO_PI = 2.0 * math.pi
#: Capacitor ratio C1/C2 used for Class EF unless overridden.
DEFAULT_K_RATIO = 0.2735
#: Loading range over which the design conditions are imposed.
CLASS_E_P_DOMAIN = (0.2, 1.0)
CLASS_EF_P_DOMAIN = (0.2, 1.0)
#: Root-finder tolerance on the residual norm.
NEWTON_TOL = 1e-8
#: Allowed undershoot of v_ds/V_in below zero for a physical design.
VDS_FLOOR = -1e-3
#: Allowed slope of the constant-output quantity, relative to max|psi1|.
FLATNESS_TOL = 1e-4


# -- Class E --------------------------------------------------------------

def _ce_generators(q):
    # state [u, w, one, p*sin(t+phi), p*cos(t+phi)]
    a_on = np.zeros((5, 5))
    a_on[0, 2] = 1.0
    a_on[3, 4], a_on[4, 3] = 1.0, -1.0
    a_off = a_on.copy()
    a_off[0, 1] = -1.0
    a_off[1, 0], a_off[1, 3] = q * q, -q * q
    return a_on, a_off


def _ce_start(q, D, p, phi):
    """Periodic state at t = 0 and at t = 2*pi*D (columns per (p, phi))."""
    p, phi = np.broadcast_arrays(np.atleast_1d(p).astype(float), np.atleast_1d(phi).astype(float))
    a_on, a_off = _ce_generators(q)
    t_d = TWO_PI * D
    f_on = expm(a_on * t_d)
    f_off = expm(a_off * (TWO_PI - t_d))
    cyc = f_off @ f_on
    rest = np.vstack([np.ones_like(p), p * np.sin(phi), p * np.cos(phi)])
    gain = cyc[0, 0]
    if abs(1.0 - gain) < 1e-12:
        raise DesignError(f"input inductor current has no periodic solution at q={q}")
    u0 = (cyc[0, 2:] @ rest) / (1.0 - gain)
    z0 = np.vstack([u0, np.zeros_like(u0), rest])
    zd = f_on @ z0
    return z0, zd, a_on, a_off, f_off


def _ce_end_voltage(q, D, p, phi):
    z0, zd, _, _, f_off = _ce_start(q, D, p, phi)
    return (f_off @ zd)[1]


@dataclass(frozen=True)
class ClassEDesignState:
    """Normalized Class E waveforms at one (q, p, phi, D).

    Attributes
    ----------
    theta : ndarray
        Phase grid over one period, ``0 .. 2*pi`` inclusive.
    i_l1 : ndarray
        Input inductor current, ``w L1 i_L1 / V_in``.
    i_c1 : ndarray
        Shunt capacitor current in the same units (zero while ON).
    v_ds : ndarray
        Drain voltage ``v_ds / V_in``.
    """

    q: float
    p: float
    phi: float
    duty: float
    theta: np.ndarray = field(repr=False)
    i_l1: np.ndarray = field(repr=False)
    i_c1: np.ndarray = field(repr=False)
    v_ds: np.ndarray = field(repr=False)
    _off_start: np.ndarray = field(repr=False, default=None)
    _off_gen: np.ndarray = field(repr=False, default=None)

    def _need_load(self):
        if self.p == 0:
            raise ValueError("beta and I_m-normalized currents are undefined for p = 0")

    @property
    def beta(self) -> np.ndarray:
        """Capacitor charge ``v_ds / (q^2 p V_in)``."""
        self._need_load()
        return self.v_ds / (self.q ** 2 * self.p)

    @property
    def i_c1_over_im(self) -> np.ndarray:
        self._need_load()
        return self.i_c1 / self.p

    def beta_at(self, theta) -> np.ndarray:
        """Exact ``beta`` at OFF-interval phases ``theta``."""
        self._need_load()
        z = _propagate(self._off_gen, self._off_start, np.asarray(theta) - TWO_PI * self.duty)
        return z[..., 1] / (self.q ** 2 * self.p)


def _propagate(gen, z, dt):
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    return np.einsum("nij,j->ni", expm(gen[None] * dt[:, None, None]), z)


def _phase_grid(grid, D):
    if grid < 1024:
        raise ValueError(f"grid must have at least 1024 points, got {grid}")
    theta = np.linspace(0.0, TWO_PI, grid + 1)
    return theta, theta < TWO_PI * D


def class_e_waveforms(q: float, p: float, phi: float, D: float,
                      grid: int = 4096) -> ClassEDesignState:
    """Periodic Class E switching-cell waveforms.

    Parameters
    ----------
    q : float
        ``1 / (w sqrt(L1 C1))``.
    p : float
        Loading ``w L1 I_m / V_in`` (>= 0).
    phi : float
        Output current phase (rad).
    D : float
        Duty ratio.
    grid : int
        Number of intervals of the returned phase grid.
    """
    if not q > 0:
        raise ValueError(f"q must be positive, got {q!r}")
    if not 0 < D < 1:
        raise ValueError(f"duty must lie in (0, 1), got {D!r}")
    if p < 0:
        raise ValueError(f"p must be nonnegative, got {p!r}")
    theta, on = _phase_grid(grid, D)
    z0, zd, a_on, a_off, _ = _ce_start(q, D, p, phi)
    z0, zd = z0[:, 0], zd[:, 0]
    z = np.empty((theta.size, 5))
    z[on] = _propagate(a_on, z0, theta[on])
    z[~on] = _propagate(a_off, zd, theta[~on] - TWO_PI * D)
    z[on, 1] = 0.0
    i_c1 = np.where(on, 0.0, z[:, 0] - z[:, 3])
    return ClassEDesignState(float(q), float(p), float(phi), float(D), theta,
                             z[:, 0].copy(), i_c1, z[:, 1].copy(), zd, a_off)


# -- Class EF -------------------------------------------------------------

def _ef_generators(q1, k):
    # state [beta, j, c, one, m*sin(t+phi), m*cos(t+phi)]
    g = q1 * q1 / k
    a_on = np.zeros((6, 6))
    a_on[1, 2] = -g
    a_on[2, 1] = k
    a_on[4, 5], a_on[5, 4] = 1.0, -1.0
    a_off = a_on.copy()
    a_off[0, 3], a_off[0, 1], a_off[0, 4] = 1.0, -1.0, -1.0
    a_off[1, 0] = g
    return a_on, a_off


def _ef_start(q1, k, D, m, phi):
    m, phi = np.broadcast_arrays(np.atleast_1d(m).astype(float), np.atleast_1d(phi).astype(float))
    a_on, a_off = _ef_generators(q1, k)
    t_d = TWO_PI * D
    f_on = expm(a_on * t_d)
    f_off = expm(a_off * (TWO_PI - t_d))
    cyc = f_off @ f_on
    rest = np.vstack([np.ones_like(m), m * np.sin(phi), m * np.cos(phi)])
    lhs = np.eye(2) - cyc[1:3, 1:3]
    if abs(np.linalg.det(lhs)) < 1e-12:
        raise DesignError(f"L2-C2 branch has no periodic solution at q1={q1}, k_ratio={k}")
    jc = np.linalg.solve(lhs, cyc[1:3, 3:] @ rest)
    z0 = np.vstack([np.zeros_like(m), jc, rest])
    zd = f_on @ z0
    return z0, zd, a_on, a_off, f_off


def _ef_end_charge(q1, k, D, m, phi):
    z0, zd, _, _, f_off = _ef_start(q1, k, D, m, phi)
    return (f_off @ zd)[0]


def _gauss_off(D, n):
    x, wts = np.polynomial.legendre.leggauss(n)
    a, b = TWO_PI * D, TWO_PI
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * wts


@dataclass(frozen=True)
class ClassEFDesignState:
    """Normalized Class EF waveforms at one (q1, k_ratio, p, phi, D).

    Currents are normalized by the choke current ``I_in``; ``beta`` is
    ``w C1 v_ds / I_in`` and ``v_ds`` is ``v_ds / V_in = 2 pi beta / alpha``.
    """

    q1: float
    k_ratio: float
    p: float
    phi: float
    duty: float
    alpha: float
    theta: np.ndarray = field(repr=False)
    i_l2: np.ndarray = field(repr=False)
    i_c1: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    v_ds: np.ndarray = field(repr=False)
    _off_start: np.ndarray = field(repr=False, default=None)
    _off_gen: np.ndarray = field(repr=False, default=None)

    @property
    def q2(self) -> float:
        return self.q1 * math.sqrt((self.k_ratio + 1.0) / self.k_ratio)

    @property
    def m(self) -> float:
        """``I_m / I_in``."""
        return self.p * (self.k_ratio + 1.0)

    def beta_at(self, theta) -> np.ndarray:
        z = _propagate(self._off_gen, self._off_start, np.asarray(theta) - TWO_PI * self.duty)
        return z[..., 0]


def _ef_alpha(zd, a_off, D, n=64):
    th, wts = _gauss_off(D, n)
    return float(wts @ _propagate(a_off, zd, th - TWO_PI * D)[:, 0])


def class_ef_waveforms(q1: float, k_ratio: float, p: float, phi: float, D: float,
                       grid: int = 4096) -> ClassEFDesignState:
    """Periodic Class EF switching-cell waveforms.

    The L2 current is a sinusoid at ``q1`` while the switch conducts and
    at ``q2 = q1 sqrt((k+1)/k)`` while it is open; its constants follow
    from continuity at ``wt = 2 pi D`` and periodicity.

    Raises
    ------
    DesignError
        If the L2 branch is degenerate (``q2 = 1``) or ``alpha <= 0``.
    """
    if not (q1 > 0 and k_ratio > 0):
        raise ValueError("q1 and k_ratio must be positive")
    if not 0 < D < 1:
        raise ValueError(f"duty must lie in (0, 1), got {D!r}")
    q2 = q1 * math.sqrt((k_ratio + 1.0) / k_ratio)
    if abs(q2 - 1.0) < 1e-9:
        raise DesignError("q2 = 1 puts the L2 branch in resonance with the drive")
    theta, on = _phase_grid(grid, D)
    m = p * (k_ratio + 1.0)
    z0, zd, a_on, a_off, _ = _ef_start(q1, k_ratio, D, m, phi)
    z0, zd = z0[:, 0], zd[:, 0]
    z = np.empty((theta.size, 6))
    z[on] = _propagate(a_on, z0, theta[on])
    z[~on] = _propagate(a_off, zd, theta[~on] - TWO_PI * D)
    alpha = _ef_alpha(zd, a_off, D)
    if not alpha > 0:
        raise DesignError(f"alpha = {alpha:.6g} is not positive; drain voltage average would be <= 0")
    i_c1 = np.where(on, 0.0, 1.0 - z[:, 1] - z[:, 4])
    beta = np.where(on, 0.0, z[:, 0])
    return ClassEFDesignState(float(q1), float(k_ratio), float(p), float(phi), float(D), alpha,
                              theta, z[:, 1].copy(), i_c1, beta, TWO_PI * beta / alpha, zd, a_off)


# -- projections ----------------------------------------------------------

def fourier_projections(state, tol: float = 1e-10, max_nodes: int = 4096) -> tuple:
    """Sine and cosine projections of ``beta`` over the OFF interval.

    ``psi1 = int beta sin(t + phi)``, ``psi2 = int beta cos(t + phi)``
    over ``[2 pi D, 2 pi]``.  Gauss-Legendre rules are doubled until two
    successive estimates agree to ``tol`` (absolute).
    """
    D, phi = state.duty, state.phi
    prev = None
    n = 32
    while n <= max_nodes:
        th, wts = _gauss_off(D, n)
        b = state.beta_at(th)
        est = np.array([wts @ (b * np.sin(th + phi)), wts @ (b * np.cos(th + phi))])
        if prev is not None and np.max(np.abs(est - prev)) < tol:
            return float(est[0]), float(est[1])
        prev = est
        n *= 2
    raise DesignError("Fourier projections did not converge")


# -- root finding ---------------------------------------------------------

@dataclass(frozen=True)
class DesignConstants:
    """Solution of the load-independent design equations.

    Attributes
    ----------
    variant : str
    duty : float
    q : float
        ``q`` (Class E) or ``q1`` (Class EF).
    phi : float
        Output current phase (rad).
    x_over_wl1 : float
        Normalized series reactance.  ``X / (w L1)`` for Class E; for
        Class EF the tabulated constant is the capacitor-normalized
        ``w X C1``, which is what this field carries.
    zvs_residual : float
        Largest ``|beta(2 pi)|`` over the check grid of loadings.
    flatness_residual : float
        Largest slope of the constant-output quantity over the loading
        grid, relative to ``max |psi1|``.
    output_constant : float
        ``p psi1`` (Class E) or ``p psi1 / alpha`` (Class EF).
    min_vds : float
        Lowest ``v_ds / V_in`` over the OFF interval and loading grid.
    p_domain : tuple of float
    q2, k_ratio : float or None
        Class EF only.
    """

    variant: str
    duty: float
    q: float
    phi: float
    x_over_wl1: float
    zvs_residual: float
    flatness_residual: float
    output_constant: float
    min_vds: float
    p_domain: tuple
    q2: float | None = None
    k_ratio: float | None = None

    @property
    def x_label(self) -> str:
        return "X/(w*L1)" if self.variant == "class_e" else "w*X*C1"

    @property
    def physical(self) -> bool:
        """True when the drain voltage stays nonnegative over the domain."""
        return self.min_vds >= VDS_FLOOR

    def as_dict(self) -> dict:
        d = {
            "variant": self.variant, "duty": self.duty, "q": self.q, "phi": self.phi,
            "x_norm": self.x_over_wl1, "x_norm_label": self.x_label,
            "zvs_residual": self.zvs_residual, "flatness_residual": self.flatness_residual,
            "output_constant": self.output_constant, "min_vds_over_vin": self.min_vds,
            "physical": self.physical, "p_domain": list(self.p_domain),
        }
        if self.variant == "class_ef":
            d.update(q2=self.q2, k_ratio=self.k_ratio)
        return d


def _wrap(phi):
    w = math.remainder(phi, TWO_PI)
    return math.pi if w == -math.pi else w


def _scan_seeds(resid, q_range, n_q=61, n_phi=72):
    qs = np.linspace(q_range[0], q_range[1], n_q)
    phis = np.linspace(-math.pi, math.pi, n_phi, endpoint=False)
    norm = np.full((n_q, n_phi), np.inf)
    for i, q in enumerate(qs):
        try:
            norm[i] = np.linalg.norm(resid(q, phis), axis=0)
        except DesignError:
            continue
    seeds = []
    for i in range(n_q):
        for j in range(n_phi):
            v = norm[i, j]
            if not np.isfinite(v):
                continue
            nb = [norm[ii, (j + dj) % n_phi] for ii in (i - 1, i, i + 1) if 0 <= ii < n_q
                  for dj in (-1, 0, 1) if (ii, dj) != (i, 0)]
            if all(v <= x for x in nb):
                seeds.append((v, qs[i], phis[j]))
    seeds.sort()
    return seeds


def _newton(resid, q, phi, tol=NEWTON_TOL, max_iter=60):
    """Damped Newton on (q, phi) with a finite-difference Jacobian."""
    x = np.array([q, phi], dtype=float)

    def f(v):
        return resid(v[0], np.array([v[1]]))[:, 0]

    r = f(x)
    for _ in range(max_iter):
        nr = np.linalg.norm(r)
        if nr < 1e-13:
            break
        jac = np.empty((2, 2))
        for c in range(2):
            h = 1e-7 * max(1.0, abs(x[c]))
            e = np.zeros(2)
            e[c] = h
            jac[:, c] = (f(x + e) - f(x - e)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-6:
            xn = x + lam * step
            try:
                rn = f(xn)
            except DesignError:
                rn = np.array([np.inf, np.inf])
            if np.linalg.norm(rn) < nr:
                break
            lam *= 0.5
        else:
            break
        x, r = xn, rn
        if np.max(np.abs(lam * step)) < 1e-15:
            break
    return x[0], _wrap(x[1]), float(np.linalg.norm(r))


def _find_root(resid, accept, q_range, what):
    roots = []
    for _, q0, phi0 in _scan_seeds(resid, q_range)[:12]:
        q, phi, nr = _newton(resid, q0, phi0)
        if nr > NEWTON_TOL or not (q_range[0] <= q <= q_range[1]):
            continue
        if any(abs(q - rq) < 1e-7 and abs(math.remainder(phi - rp, TWO_PI)) < 1e-6
               for rq, rp, _ in roots):
            continue
        if accept(q, phi):
            roots.append((q, phi, nr))
    if not roots:
        raise DesignError(f"no {what} design root found for q in {q_range}")
    roots.sort(key=lambda t: t[0])
    return roots[0]


def _check_grid(p_domain, n=5):
    return np.linspace(p_domain[0], p_domain[1], n)


def solve_class_e(D: float = 0.5, p_domain: tuple = CLASS_E_P_DOMAIN,
                  q_range: tuple = (1.0, 1.6)) -> DesignConstants:
    """Solve the load-independent Class E conditions for (q, phi).

    Zero-voltage switching at two loadings spanning ``p_domain`` fixes
    both unknowns, because the end-of-cycle drain voltage is affine in
    p.  The constant-output condition (flat ``p psi1``) is then checked
    over five loadings; it follows from the energy balance of the
    lossless cell rather than being imposed.

    Raises
    ------
    DesignError
        If no root exists in ``q_range`` or a postcondition fails.
    """
    if not 0 < D < 1:
        raise ValueError(f"duty must lie in (0, 1), got {D!r}")
    pa, pb = p_domain

    def resid(q, phis):
        return np.vstack([_ce_end_voltage(q, D, pa, phis), _ce_end_voltage(q, D, pb, phis)])

    def accept(q, phi):
        st = class_e_waveforms(q, pb, phi, D, grid=1024)
        return fourier_projections(st)[0] > 0

    q, phi, _ = _find_root(resid, accept, q_range, "Class E")
    ps = _check_grid(p_domain)
    zvs, out, x, vmin, psi1s = [], [], [], np.inf, []
    for p in ps:
        st = class_e_waveforms(q, p, phi, D)
        psi1, psi2 = fourier_projections(st)
        zvs.append(abs(st.beta[-1]))
        psi1s.append(psi1)
        out.append(p * psi1)
        x.append(q * q * psi2 / math.pi)
        vmin = min(vmin, float(st.v_ds.min()))
    flat = float(np.max(np.abs(np.gradient(out, ps))) / np.max(np.abs(psi1s)))
    if flat > FLATNESS_TOL:
        raise DesignError(f"constant-output condition violated: slope {flat:.3g}")
    return DesignConstants("class_e", float(D), float(q), float(phi), float(np.mean(x)),
                           float(max(zvs)), flat, float(np.mean(out)), vmin, tuple(p_domain))


def solve_class_ef(D: float = 0.5, k_ratio: float = DEFAULT_K_RATIO,
                   p_domain: tuple = CLASS_EF_P_DOMAIN,
                   q_range: tuple = (1.0, 1.6)) -> DesignConstants:
    """Solve the load-independent Class EF conditions for (q1, phi).

    As for Class E, zero-voltage switching at two loadings fixes the
    unknowns.  The root with ``alpha > 0`` (positive mean drain
    voltage) is kept; ties go to the smallest ``q1``.  The reported
    reactance is ``w X C1 = psi2 / (pi p (k+1))``.
    """
    if not 0 < D < 1:
        raise ValueError(f"duty must lie in (0, 1), got {D!r}")
    if not k_ratio > 0:
        raise ValueError(f"k_ratio must be positive, got {k_ratio!r}")
    ma, mb = (p * (k_ratio + 1.0) for p in p_domain)

    def resid(q1, phis):
        return np.vstack([_ef_end_charge(q1, k_ratio, D, ma, phis),
                          _ef_end_charge(q1, k_ratio, D, mb, phis)])

    def accept(q1, phi):
        _, zd, _, a_off, _ = _ef_start(q1, k_ratio, D, mb, phi)
        return _ef_alpha(zd[:, 0], a_off, D) > 0

    q1, phi, _ = _find_root(resid, accept, q_range, "Class EF")
    ps = _check_grid(p_domain)
    zvs, out, x, vmin, psi1s = [], [], [], np.inf, []
    for p in ps:
        st = class_ef_waveforms(q1, k_ratio, p, phi, D)
        psi1, psi2 = fourier_projections(st)
        zvs.append(abs(st.beta[-1]))
        psi1s.append(psi1)
        out.append(p * psi1 / st.alpha)
        x.append(psi2 / (math.pi * st.m))
        vmin = min(vmin, float(st.v_ds.min()))
    flat = float(np.max(np.abs(np.gradient(out, ps))) / np.max(np.abs(psi1s)))
    if flat > FLATNESS_TOL:
        raise DesignError(f"constant-output condition violated: slope {flat:.3g}")
    q2 = q1 * math.sqrt((k_ratio + 1.0) / k_ratio)
    return DesignConstants("class_ef", float(D), float(q1), float(phi), float(np.mean(x)),
                           float(max(zvs)), flat, float(np.mean(out)), vmin, tuple(p_domain),
                           q2=float(q2), k_ratio=float(k_ratio))


def class_ef_operating_point(design: DesignConstants, p: float) -> dict:
    """Load relations of a Class EF design at loading ``p``.

    Returns ``alpha``, ``psi1``, ``psi2``, ``inv_wrc1`` (``1/(w R C1)``
    from ``pi p^2 (k+1)^2 / alpha``) and ``im_r_over_vin``
    (``I_m R / V_in = 2 psi1 / alpha``).
    """
    if design.variant != "class_ef":
        raise ValueError("operating point relations apply to Class EF designs")
    k = design.k_ratio
    st = class_ef_waveforms(design.q, k, p, design.phi, design.duty)
    psi1, psi2 = fourier_projections(st)
    return {
        "alpha": st.alpha, "psi1": psi1, "psi2": psi2,
        "inv_wrc1": math.pi * p * p * (k + 1.0) ** 2 / st.alpha,
        "im_r_over_vin": 2.0 * psi1 / st.alpha,
    }
