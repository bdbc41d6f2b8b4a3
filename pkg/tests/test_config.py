import pytest

from iptdesign.config import SCHEMA, load_config, parse_config, parse_quantity
from iptdesign.errors import ConfigError

from conftest import TABLE1, TABLE1_PATH

MINIMAL = """\
topology.variant = class_e
topology.v_in = 30V
topology.f_s = 400kHz
topology.l1 = 10uH
topology.c1 = 9.49nF
topology.l_tx = 140uH
topology.l_rx = 50uH
topology.c0 = 1.15nF
topology.q_tx = 350
topology.q_rx = 251
topology.c_rx = 3.3nF
topology.r_load = 12.5
"""


@pytest.mark.parametrize("text, unit, expected", [
    ("140uH", "H", 140e-6), ("1.15nF", "F", 1.15e-9), ("1MOhm", "Ohm", 1e6),
    ("50mOhm", "Ohm", 0.05), ("12.5 Ω", "Ohm", 12.5), ("400kHz", "Hz", 400e3),
    ("0.05", "", 0.05), ("3.3e-9", "F", 3.3e-9), ("200pF", "F", 200e-12), ("-2V", "V", -2.0),
])
def test_parse_quantity(text, unit, expected):
    assert parse_quantity(text, unit) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("text, unit", [
    ("140u", "H"), ("1k", ""), ("3nH", "F"), ("5V", ""), ("abc", "V"), ("1e400", "V"), ("", "F"),
])
def test_parse_quantity_rejects(text, unit):
    with pytest.raises(ValueError):
        parse_quantity(text, unit)


def test_minimal_config_uses_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.get("topology.duty") == 0.5
    assert cfg.get("solver.harmonics") == 30
    assert cfg.get("topology.c1_includes_junction") is True
    assert cfg.get("topology.x") is None
    with pytest.raises(KeyError):
        cfg.get("topology.bogus")


@pytest.mark.parametrize("extra, fragment", [
    ("topology.bogus = 1", "<string>:13: unknown key 'topology.bogus'"),
    ("topology.v_in = 12V", "<string>:13: topology.v_in already set on line 2"),
    ("solver.harmonics = 3.5", "<string>:13: solver.harmonics"),
    ("solver.switch_model = ideal", "expected one of"),
    ("topology.c1_includes_junction = maybe", "true/false"),
    ("topology.k =", "missing value"),
    ("just words", "expected 'section.key = value'"),
])
def test_errors_carry_location(extra, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + extra + "\n")
    assert fragment in str(info.value)


def test_missing_required_key():
    text = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith("topology.l_tx"))
    with pytest.raises(ConfigError, match="missing required keys: topology.l_tx"):
        parse_config(text, "run.conf")


def test_comments_and_quotes():
    cfg = parse_config(MINIMAL + "# note\noutput.directory = 'res # ults'  # trailing\n")
    # '#' always opens a comment, quotes do not protect it
    assert cfg.get("output.directory") == "'res"


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "nope.conf")


def test_bundled_config_matches_reference_values(table1_config):
    for name, val in TABLE1.items():
        assert table1_config.get(f"topology.{name}") == pytest.approx(val, rel=1e-12), name
    assert table1_config.source == str(TABLE1_PATH)


def test_network_and_override(table1_config):
    net = table1_config.network()
    assert net.k == 0.05 and net.c0 == pytest.approx(1.15e-9)
    assert table1_config.network(k=0.07).k == 0.07


def test_resolved_covers_schema(table1_config):
    res = table1_config.resolved()
    assert sum(len(v) for v in res.values()) == len(SCHEMA)
    assert res["sweep"]["k_steps"] == 13
    assert res["topology"]["x"] is None
