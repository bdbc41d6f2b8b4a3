"""Class E / Class EF inductive power transfer circuits.

Topology (Class E)::

    V_in ──L1──┬────────────── C0 ── L_tx ── R_tx ──┐
               │                                    │   k
             S ║ C1                          TX coil ) ( RX coil ── C_rx ── R_rx ── R_L
               │                                    │
    GND ───────┴────────────────────────────────────┘

Class EF adds a series L2-C2 branch across the switch and uses a
choke L_f in place of L1.

The harmonic system is written over branch currents and capacitor
voltages rather than pure mesh currents, which keeps capacitors in
admittance form (their DC entry is an exact zero).  The switch and C1
are folded into one element acting on the drain current.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import NetworkValidationError, SingularSystemError
from .harmonic import (
    HarmonicOperator,
    SwitchProfile,
    capacitor_admittance,
    dc_source_vector,
    orders,
    stamp_switch,
    stamp_switch_conductance,
    switched_shunt_impedance,
)

__all__ = [
    "VARIANTS",
    "SWITCH_MODELS",
    "IptNetwork",
    "AssembledSystem",
    "mutual_from_k",
    "series_loss_resistance",
    "tuned_c0",
    "resonant_capacitance",
    "build",
    "assemble",
    "shunt_impedance",
    "shunt_operator",
]

VARIANTS = ("class_e", "class_ef")
SWITCH_MODELS = ("exact", "toeplitz", "conductance")


def mutual_from_k(k: float, l_tx: float, l_rx: float) -> float:
    """Mutual inductance ``k*sqrt(l_tx*l_rx)``."""
    if not (0.0 <= k < 1.0):
        raise ValueError(f"coupling must satisfy 0 <= k < 1, got {k!r}")
    return k * math.sqrt(l_tx * l_rx)


def series_loss_resistance(l: float, q: float, omega: float) -> float:
    """Series loss resistance ``omega*l/q`` of a coil with quality factor q."""
    if not q > 0:
        raise ValueError(f"quality factor must be positive, got {q!r}")
    return omega * l / q


def tuned_c0(l_tx: float, omega: float, x: float) -> float:
    """Series capacitor leaving a residual reactance ``x`` in the TX loop."""
    xl = omega * l_tx
    if not x < xl:
        raise ValueError(f"residual reactance {x!r} ohm needs x < omega*l_tx = {xl:.6g} ohm")
    return 1.0 / (omega * (xl - x))


def resonant_capacitance(l: float, omega: float) -> float:
    """Capacitance resonating with ``l`` at ``omega``."""
    return 1.0 / (omega * omega * l)


@dataclass(frozen=True)
class IptNetwork:
    """Validated description of one IPT circuit.

    Attributes
    ----------
    variant : {'class_e', 'class_ef'}
    v_in : float
        DC supply voltage (V).
    f_s : float
        Switching frequency (Hz).
    switch : SwitchProfile
    l1 : float
        Input inductor: resonant L1 for Class E, choke L_f for Class EF.
    c1 : float
        Total shunt capacitance across the switch, junction included.
    l_tx, l_rx, c0, c_rx : float
        Coil inductances and series compensation capacitors.
    q_tx, q_rx : float
        Coil quality factors at ``f_s``.
    r_load : float
        Load resistance (ohm).
    k : float
        Coupling coefficient in [0, 1).
    l2, c2 : float or None
        Series branch across the switch (Class EF only).
    c_junction : float
        Device junction capacitance contained in ``c1``.
    """

    variant: str
    v_in: float
    f_s: float
    switch: SwitchProfile
    l1: float
    c1: float
    l_tx: float
    l_rx: float
    c0: float
    q_tx: float
    q_rx: float
    c_rx: float
    r_load: float
    k: float
    l2: float | None = None
    c2: float | None = None
    c_junction: float = 0.0

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.f_s

    @property
    def extra_reactance(self) -> float:
        """Residual TX-loop reactance ``omega*L_tx - 1/(omega*C0)``."""
        w = self.omega
        return w * self.l_tx - 1.0 / (w * self.c0)

    @property
    def mutual(self) -> float:
        return mutual_from_k(self.k, self.l_tx, self.l_rx)

    @property
    def r_tx(self) -> float:
        return series_loss_resistance(self.l_tx, self.q_tx, self.omega)

    @property
    def r_rx(self) -> float:
        return series_loss_resistance(self.l_rx, self.q_rx, self.omega)

    @property
    def c1_external(self) -> float:
        """Capacitor to fit externally once the junction is accounted for."""
        return self.c1 - self.c_junction

    @property
    def resonant_c_rx(self) -> float:
        return resonant_capacitance(self.l_rx, self.omega)

    @property
    def detuning(self) -> float:
        """``c_rx`` relative to the value resonating with ``l_rx``."""
        return self.c_rx / self.resonant_c_rx

    @property
    def f2(self) -> float | None:
        """Resonant frequency of the L2-C2 branch (Class EF)."""
        if self.variant != "class_ef":
            return None
        return 1.0 / (2 * math.pi * math.sqrt(self.l2 * self.c2))

    def with_coupling(self, k: float) -> "IptNetwork":
        mutual_from_k(k, self.l_tx, self.l_rx)
        return replace(self, k=float(k))

    def with_secondary(self, delta: float | None = None, x: float | None = None) -> "IptNetwork":
        """Copy with C_rx set to ``delta`` times resonance and/or C0 set by ``x``."""
        kw = {}
        if delta is not None:
            if not delta > 0:
                raise ValueError(f"detuning factor must be positive, got {delta!r}")
            kw["c_rx"] = delta * self.resonant_c_rx
        if x is not None:
            kw["c0"] = tuned_c0(self.l_tx, self.omega, x)
        return replace(self, **kw)

    def with_supply(self, v_in: float) -> "IptNetwork":
        return replace(self, v_in=float(v_in))


_REQUIRED = ("v_in", "f_s", "c1", "l_tx", "l_rx", "q_tx", "q_rx", "c_rx", "r_load", "k")
_OPTIONAL = ("r_on", "r_off", "duty", "c0", "x", "l1", "l_f", "l2", "c2",
             "c_junction", "c1_includes_junction")
KNOWN_PARAMETERS = frozenset(_REQUIRED + _OPTIONAL)


def build(variant: str, parameters: Mapping) -> IptNetwork:
    """Validate ``parameters`` and construct an :class:`IptNetwork`.

    Parameters
    ----------
    variant : {'class_e', 'class_ef'}
    parameters : mapping
        SI values keyed by ``v_in, f_s, c1, l_tx, l_rx, q_tx, q_rx, c_rx,
        r_load, k`` plus ``l1`` (Class E) or ``l_f`` (Class EF), ``l2``
        and ``c2`` (Class EF), and exactly one of ``c0`` or ``x`` (the
        residual TX reactance, converted through :func:`tuned_c0`).
        Optional: ``r_on``, ``r_off``, ``duty``, ``c_junction`` and
        ``c1_includes_junction`` (default True; when False the junction
        capacitance is added to ``c1``).

    Raises
    ------
    NetworkValidationError
        Lists every offending field at once.
    """
    errs = {}
    P = dict(parameters)
    if variant not in VARIANTS:
        raise NetworkValidationError({"variant": f"must be one of {VARIANTS}, got {variant!r}"})
    for key in sorted(set(P) - KNOWN_PARAMETERS):
        errs[key] = "unknown parameter"

    def num(key, *, required=True, positive=True, default=None):
        if key not in P or P[key] is None:
            if required:
                errs[key] = "missing"
            return default
        try:
            val = float(P[key])
        except (TypeError, ValueError):
            errs[key] = f"not a number: {P[key]!r}"
            return default
        if not math.isfinite(val):
            errs[key] = "must be finite"
        elif positive and val <= 0:
            errs[key] = f"must be positive, got {val:g}"
        return val

    v_in = num("v_in", positive=False)
    if v_in is not None and v_in < 0:
        errs["v_in"] = f"must be nonnegative, got {v_in:g}"
    f_s = num("f_s")
    c1 = num("c1")
    l_tx, l_rx = num("l_tx"), num("l_rx")
    q_tx, q_rx = num("q_tx"), num("q_rx")
    c_rx, r_load = num("c_rx"), num("r_load")
    k = num("k", positive=False)
    if k is not None and not (0.0 <= k < 1.0):
        errs["k"] = f"must satisfy 0 <= k < 1, got {k:g}"

    if variant == "class_e":
        l1 = num("l1")
        if "l_f" in P:
            errs["l_f"] = "choke inductor belongs to class_ef; use l1 for class_e"
        for key in ("l2", "c2"):
            if P.get(key) is not None:
                errs[key] = "class_ef branch element given for class_e"
        l2 = c2 = None
    else:
        l1 = num("l_f")
        if "l1" in P:
            errs["l1"] = "class_ef uses the choke l_f instead of l1"
        l2, c2 = num("l2"), num("c2")

    c_j = num("c_junction", required=False, positive=False, default=0.0)
    if c_j is not None and c_j < 0:
        errs["c_junction"] = "must be nonnegative"
    includes = P.get("c1_includes_junction", True)
    if not isinstance(includes, (bool, np.bool_)):
        errs["c1_includes_junction"] = "must be a boolean"
    if c1 is not None and c_j is not None and "c1" not in errs:
        if not includes:
            c1 = c1 + c_j
        elif c_j >= c1:
            errs["c_junction"] = "junction capacitance exceeds the configured c1"

    try:
        switch = SwitchProfile(
            r_on=num("r_on", required=False, default=0.05) or 0.05,
            r_off=num("r_off", required=False, default=1e6) or 1e6,
            duty=num("duty", required=False, default=0.5) or 0.5,
        )
    except ValueError as exc:
        errs["switch"] = str(exc)
        switch = None

    has_c0 = P.get("c0") is not None
    has_x = P.get("x") is not None
    c0 = None
    if has_c0 == has_x:
        errs["c0"] = "give exactly one of c0 or x"
    elif has_c0:
        c0 = num("c0")
    else:
        x = num("x", positive=False)
        if x is not None and f_s and l_tx and "f_s" not in errs and "l_tx" not in errs:
            try:
                c0 = tuned_c0(l_tx, 2 * math.pi * f_s, x)
            except ValueError as exc:
                errs["x"] = str(exc)

    if errs:
        raise NetworkValidationError(errs)
    return IptNetwork(
        variant=variant, v_in=v_in, f_s=f_s, switch=switch, l1=l1, c1=c1,
        l_tx=l_tx, l_rx=l_rx, c0=c0, q_tx=q_tx, q_rx=q_rx, c_rx=c_rx,
        r_load=r_load, k=k, l2=l2, c2=c2, c_junction=c_j,
    )


def shunt_operator(net: IptNetwork, N: int, model: str = "exact") -> tuple:
    """Harmonic operator of the switch in parallel with C1.

    Returns ``(form, matrix)``:

    ``'exact'``
        closed-form transfer impedance, ``form='impedance'``
    ``'toeplitz'``
        truncated resistance operator ``Z_S``, ``form='branch'``; the
        assembly keeps the switch current as a separate unknown so that
        ``Z_S`` is never inverted
    ``'conductance'``
        ``G_S + Y_C1`` from the truncated conductance operator,
        ``form='admittance'``
    """
    if model == "exact":
        return "impedance", switched_shunt_impedance(net.switch, net.c1, net.omega, N).entries
    if model == "toeplitz":
        return "branch", stamp_switch(net.switch, N).entries
    if model == "conductance":
        y_c = np.diag(capacitor_admittance(net.c1, net.omega, N))
        return "admittance", stamp_switch_conductance(net.switch, N).entries + y_c
    raise ValueError(f"unknown switch model {model!r}; choose from {SWITCH_MODELS}")


def shunt_impedance(net: IptNetwork, N: int, model: str = "exact") -> np.ndarray:
    """Impedance of the pair, combining branch operators in parallel."""
    form, m = shunt_operator(net, N, model)
    if form == "impedance":
        return m
    if form == "branch":
        y_c = np.diag(capacitor_admittance(net.c1, net.omega, N))
        m = np.linalg.inv(m) + y_c
    return np.linalg.inv(m)


@dataclass(frozen=True)
class AssembledSystem:
    """Block linear system ``matrix @ x = source`` over all harmonics.

    Block ``b`` of ``x`` holds the spectrum of unknown ``labels[b]``:

    ``i_in``
        input inductor current (L1 or L_f)
    ``v_ds``
        switch-node voltage; its row is the switch/C1 element
    ``i_tx``
        TX loop current (C0, X, L_tx, R_tx)
    ``i_rx``
        RX loop current, which is also the load-branch current
    ``v_c0``, ``v_crx``
        compensation capacitor voltages
    ``i_l2``, ``v_c2``
        L2-C2 branch current and capacitor voltage (Class EF)
    ``i_sw``
        resistive switch-branch current (Toeplitz switch model only)
    """

    network: IptNetwork
    order_limit: int
    labels: tuple
    matrix: np.ndarray = field(repr=False)
    source: np.ndarray = field(repr=False)
    shunt: np.ndarray = field(repr=False)
    switch_model: str = "exact"
    shunt_form: str = "impedance"

    @property
    def block_size(self) -> int:
        return 2 * self.order_limit + 1

    def block(self, label: str) -> slice:
        n = self.block_size
        b = self.labels.index(label)
        return slice(b * n, (b + 1) * n)

    def operator(self, row: str, col: str) -> HarmonicOperator:
        """Sub-block coupling unknown ``col`` into equation ``row``."""
        return HarmonicOperator(self.order_limit, self.matrix[self.block(row), self.block(col)])


def assemble(net: IptNetwork, N: int = 30, switch_model: str = "exact") -> AssembledSystem:
    """Assemble the harmonic steady-state system of ``net``.

    Equations, one block row per unknown:

    * input loop   ``Z_L1 i_in + v_ds = V_in``
    * switch node  ``v_ds - Z_p (i_in - i_tx - i_l2) = 0`` for the exact
      element, ``Y_p v_ds - (i_in - i_tx - i_l2) = 0`` for the conductance
      model, and ``Y_C1 v_ds + i_sw - (...) = 0`` with the extra row
      ``Z_S i_sw - v_ds = 0`` for the Toeplitz model
    * TX loop      ``-v_ds + (Z_Ltx + R_tx) i_tx + Z_M i_rx + v_c0 = 0``
    * RX loop      ``Z_M i_tx + (Z_Lrx + R_rx + R_L) i_rx + v_crx = 0``
    * capacitors   ``Y_C v_c - i = 0``
    * L2 branch    ``-v_ds + Z_L2 i_l2 + v_c2 = 0`` (Class EF)

    with ``Z_M = j p omega M`` appearing symmetrically.
    """
    if not (0.0 <= net.k < 1.0):
        raise SingularSystemError(f"coupling k={net.k} makes the coupled coils degenerate")
    if switch_model not in SWITCH_MODELS:
        raise ValueError(f"unknown switch model {switch_model!r}; choose from {SWITCH_MODELS}")
    w = net.omega
    p = orders(N)
    n = p.size
    jw = 1j * p * w
    labels = ["i_in", "v_ds", "i_tx", "i_rx", "v_c0", "v_crx"]
    if net.variant == "class_ef":
        labels += ["i_l2", "v_c2"]
    if switch_model == "toeplitz":
        labels.insert(2, "i_sw")
    B = len(labels)
    idx = {lab: b for b, lab in enumerate(labels)}
    A = np.zeros((B * n, B * n), dtype=complex)
    eye = np.eye(n)

    def put(row, col, blk):
        r, c = idx[row], idx[col]
        A[r * n:(r + 1) * n, c * n:(c + 1) * n] += blk

    def diag(d):
        return np.diag(np.broadcast_to(d, (n,)).astype(complex))

    form, zp = shunt_operator(net, N, switch_model)
    if form == "impedance":
        own, feed = eye, zp
    elif form == "admittance":
        own, feed = zp, eye
    else:
        own, feed = np.diag(capacitor_admittance(net.c1, w, N)), eye
    zm = diag(jw * net.mutual)

    put("i_in", "i_in", diag(jw * net.l1))
    put("i_in", "v_ds", eye)

    put("v_ds", "v_ds", own)
    put("v_ds", "i_in", -feed)
    put("v_ds", "i_tx", feed)

    if form == "branch":
        put("v_ds", "i_sw", eye)
        put("i_sw", "i_sw", zp)
        put("i_sw", "v_ds", -eye)

    put("i_tx", "v_ds", -eye)
    put("i_tx", "i_tx", diag(jw * net.l_tx + net.r_tx))
    put("i_tx", "i_rx", zm)
    put("i_tx", "v_c0", eye)

    put("i_rx", "i_tx", zm)
    put("i_rx", "i_rx", diag(jw * net.l_rx + net.r_rx + net.r_load))
    put("i_rx", "v_crx", eye)

    put("v_c0", "v_c0", diag(capacitor_admittance(net.c0, w, N)))
    put("v_c0", "i_tx", -eye)
    put("v_crx", "v_crx", diag(capacitor_admittance(net.c_rx, w, N)))
    put("v_crx", "i_rx", -eye)

    if net.variant == "class_ef":
        put("v_ds", "i_l2", feed)
        put("i_l2", "v_ds", -eye)
        put("i_l2", "i_l2", diag(jw * net.l2))
        put("i_l2", "v_c2", eye)
        put("v_c2", "v_c2", diag(capacitor_admittance(net.c2, w, N)))
        put("v_c2", "i_l2", -eye)

    b = np.zeros(B * n, dtype=complex)
    b[:n] = dc_source_vector(net.v_in, N).coeffs
    A.setflags(write=False)
    b.setflags(write=False)
    zp = np.array(zp)
    zp.setflags(write=False)
    return AssembledSystem(net, N, tuple(labels), A, b, zp, switch_model, form)


def parameter_view(net: IptNetwork) -> Mapping:
    """Flat read-only view of the network values, for reports."""
    d = {
        "variant": net.variant, "v_in": net.v_in, "f_s": net.f_s,
        "r_on": net.switch.r_on, "r_off": net.switch.r_off, "duty": net.switch.duty,
        "l1" if net.variant == "class_e" else "l_f": net.l1,
        "c1": net.c1, "c1_external": net.c1_external, "c_junction": net.c_junction,
        "l_tx": net.l_tx, "l_rx": net.l_rx, "c0": net.c0,
        "extra_reactance": net.extra_reactance, "q_tx": net.q_tx, "q_rx": net.q_rx,
        "c_rx": net.c_rx, "detuning": net.detuning, "r_load": net.r_load, "k": net.k,
    }
    if net.variant == "class_ef":
        d.update(l2=net.l2, c2=net.c2, f2=net.f2)
    return MappingProxyType(d)
