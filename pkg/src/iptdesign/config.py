"""Run configuration files.

Grammar (one assignment per line)::

    line    := blank | comment | key '=' value [comment]
    comment := '#' anything
    key     := section '.' name          e.g. topology.l_tx
    value   := quantity | boolean | word
    quantity:= number [prefix unit]      e.g. 140uH, 1.15nF, 1MOhm, 0.05
    prefix  := p | n | u | µ | m | k | M | G   (optional)

A dimensional key accepts either a bare number in SI base units or a
number followed by its own unit symbol (with optional prefix).  A
prefix without a unit is rejected as ambiguous.  Unknown keys,
repeated keys and wrong units are errors reported with the line number.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .network import IptNetwork, build

__all__ = ["SCHEMA", "RunConfig", "parse_config", "load_config", "parse_quantity"]

_PREFIX = {"p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3, "k": 1e3, "M": 1e6, "G": 1e9}
_QUANTITY = re.compile(
    r"^(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*"
    r"(?P<prefix>[pnuµmkMG])?(?P<unit>Ohm|ohm|Ω|Hz|H|F|V|A|W|s)?$")
_UNIT_ALIASES = {"ohm": "Ohm", "Ω": "Ohm"}
_BOOL = {"true": True, "yes": True, "on": True, "false": False, "no": False, "off": False}


@dataclass(frozen=True)
class Key:
    kind: str            # 'quantity', 'int', 'bool', 'str'
    unit: str = ""       # SI unit symbol for quantities, '' when dimensionless
    default: object = None
    doc: str = ""
    choices: tuple = ()


REQUIRED = object()

SCHEMA = {
    "topology.variant": Key("str", default=REQUIRED, choices=("class_e", "class_ef"),
                            doc="inverter variant"),
    "topology.v_in": Key("quantity", "V", REQUIRED, "DC supply voltage"),
    "topology.f_s": Key("quantity", "Hz", REQUIRED, "switching frequency"),
    "topology.duty": Key("quantity", "", 0.5, "switch ON fraction"),
    "topology.r_on": Key("quantity", "Ohm", 0.05, "switch ON resistance"),
    "topology.r_off": Key("quantity", "Ohm", 1e6, "switch OFF resistance"),
    "topology.l1": Key("quantity", "H", None, "Class E input inductor"),
    "topology.l_f": Key("quantity", "H", None, "Class EF choke inductor"),
    "topology.c1": Key("quantity", "F", REQUIRED, "total shunt capacitance across the switch"),
    "topology.l2": Key("quantity", "H", None, "Class EF branch inductor"),
    "topology.c2": Key("quantity", "F", None, "Class EF branch capacitor"),
    "topology.l_tx": Key("quantity", "H", REQUIRED, "transmitter coil inductance"),
    "topology.l_rx": Key("quantity", "H", REQUIRED, "receiver coil inductance"),
    "topology.c0": Key("quantity", "F", None, "TX series capacitor (or give topology.x)"),
    "topology.x": Key("quantity", "Ohm", None, "residual TX reactance (or give topology.c0)"),
    "topology.q_tx": Key("quantity", "", REQUIRED, "TX coil quality factor"),
    "topology.q_rx": Key("quantity", "", REQUIRED, "RX coil quality factor"),
    "topology.c_rx": Key("quantity", "F", REQUIRED, "RX series capacitor"),
    "topology.r_load": Key("quantity", "Ohm", REQUIRED, "load resistance"),
    "topology.k": Key("quantity", "", 0.05, "coupling coefficient"),
    "topology.c_junction": Key("quantity", "F", 0.0, "device junction capacitance"),
    "topology.c1_includes_junction": Key("bool", default=True,
                                         doc="c1 already contains the junction capacitance"),
    "solver.harmonics": Key("int", default=30, doc="harmonic order limit N"),
    "solver.switch_model": Key("str", default="exact",
                               choices=("exact", "toeplitz", "conductance"),
                               doc="switch/C1 element model"),
    "solver.residual_tol": Key("quantity", "", 1e-10, "relative residual bound"),
    "solver.waveform_samples": Key("int", default=4096, doc="samples per period in exports"),
    "sweep.k_min": Key("quantity", "", 0.04, "lower coupling"),
    "sweep.k_max": Key("quantity", "", 0.07, "upper coupling"),
    "sweep.k_steps": Key("int", default=13, doc="coupling points"),
    "sweep.delta_min": Key("quantity", "", 0.7, "lowest C_rx multiplier"),
    "sweep.delta_max": Key("quantity", "", 1.3, "highest C_rx multiplier"),
    "sweep.delta_steps": Key("int", default=25, doc="C_rx multipliers"),
    "sweep.x_center": Key("quantity", "Ohm", None,
                          "centre of the X grid; default is the load-independent design value"),
    "sweep.x_span": Key("quantity", "", 0.5, "relative half-width of the X grid"),
    "sweep.x_steps": Key("int", default=11, doc="X grid points"),
    "sweep.workers": Key("int", default=1, doc="worker processes for the grid"),
    "sweep.verify_top": Key("int", default=1, doc="candidates re-checked by the oracle with --verify"),
    "oracle.cycles": Key("int", default=5000, doc="maximum simulated periods"),
    "oracle.steps_per_cycle": Key("int", default=8192, doc="time steps per period"),
    "oracle.tol": Key("quantity", "", 1e-6, "periodicity tolerance"),
    "output.directory": Key("str", default="out", doc="output directory"),
    "output.formats": Key("str", default="csv,json", doc="comma-separated output formats"),
}


def parse_quantity(text: str, unit: str) -> float:
    """Parse ``text`` as a number in ``unit`` (``''`` for dimensionless).

    >>> parse_quantity("140uH", "H")
    0.00014
    """
    m = _QUANTITY.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    val = float(m.group("num"))
    prefix, got = m.group("prefix"), m.group("unit")
    got = _UNIT_ALIASES.get(got, got)
    if got is None:
        if prefix:
            if not unit:
                raise ValueError(f"{text!r}: dimensionless values take no prefix")
            raise ValueError(f"{text!r}: prefix without unit; write e.g. 1{prefix}{unit}")
    elif got != unit:
        want = unit or "no unit"
        raise ValueError(f"{text!r}: unit {got} does not match expected {want}")
    if prefix:
        val *= _PREFIX[prefix]
    if not math.isfinite(val):
        raise ValueError(f"{text!r} is not finite")
    return val


def _convert(key, spec, raw):
    if spec.kind == "quantity":
        return parse_quantity(raw, spec.unit)
    if spec.kind == "int":
        if not re.fullmatch(r"[+-]?\d+", raw):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(raw)
    if spec.kind == "bool":
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ValueError(f"expected true/false, got {raw!r}") from None
    val = raw[1:-1] if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"" else raw
    if spec.choices and val not in spec.choices:
        raise ValueError(f"expected one of {', '.join(spec.choices)}, got {val!r}")
    return val


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: explicitly set values plus schema defaults."""

    values: dict
    source: str = "<string>"

    def get(self, key):
        if key not in SCHEMA:
            raise KeyError(key)
        val = self.values.get(key, SCHEMA[key].default)
        return None if val is REQUIRED else val

    def section(self, name) -> dict:
        pre = name + "."
        return {k[len(pre):]: self.get(k) for k in SCHEMA if k.startswith(pre)}

    @property
    def variant(self) -> str:
        return self.get("topology.variant")

    def network_parameters(self) -> tuple:
        """``(variant, parameters)`` ready for :func:`build`."""
        topo = self.section("topology")
        variant = topo.pop("variant")
        params = {k: v for k, v in topo.items()
                  if v is not None or f"topology.{k}" in self.values}
        return variant, params

    def network(self, k: float | None = None) -> IptNetwork:
        """Build the configured network, optionally at coupling ``k``."""
        variant, params = self.network_parameters()
        if k is not None:
            params["k"] = k
        return build(variant, params)

    def resolved(self) -> dict:
        """Every schema key with its effective value, nested by section."""
        out = {}
        for key in SCHEMA:
            sec, name = key.split(".", 1)
            out.setdefault(sec, {})[name] = self.get(key)
        return out


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse configuration ``text``.

    Raises
    ------
    ConfigError
        With ``source:line`` and the offending key.
    """
    values, seen = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'section.key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{where}: {key} already set on line {seen[key]}")
        if not raw:
            raise ConfigError(f"{where}: {key}: missing value")
        try:
            values[key] = _convert(key, SCHEMA[key], raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: {key}: {exc}") from None
        seen[key] = lineno
    missing = [k for k, s in SCHEMA.items() if s.default is REQUIRED and k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required keys: {', '.join(missing)}")
    return RunConfig(values, source)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from None
    return parse_config(text, str(p))
