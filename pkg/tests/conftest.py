import math
from dataclasses import replace
from importlib import resources

import pytest

from iptdesign.config import load_config
from iptdesign.network import build

TABLE1_PATH = resources.files("iptdesign") / "data" / "table1.conf"

TABLE1 = {
    "v_in": 30.0, "f_s": 400e3, "duty": 0.5, "r_on": 0.05, "r_off": 1e6,
    "l1": 10e-6, "c1": 9.49e-9, "c_junction": 200e-12, "l_tx": 140e-6, "l_rx": 50e-6,
    "c0": 1.15e-9, "q_tx": 350.0, "q_rx": 251.0, "c_rx": 3.3e-9, "r_load": 12.5, "k": 0.05,
}


@pytest.fixture(scope="session")
def table1_config():
    return load_config(TABLE1_PATH)


@pytest.fixture(scope="session")
def table1_net():
    return build("class_e", TABLE1)


@pytest.fixture(scope="session")
def designed_net(table1_net):
    """Reference coils with C1 and X taken from the Class E design constants."""
    from iptdesign.invdesign import solve_class_e
    d = solve_class_e(0.5)
    w = table1_net.omega
    net = replace(table1_net, c1=1.0 / (d.q ** 2 * w * w * table1_net.l1))
    return net.with_secondary(delta=1.0, x=d.x_over_wl1 * w * table1_net.l1)


def ef_params(**over):
    """A Class EF parameter set built on the reference coils."""
    w = 2 * math.pi * 400e3
    c1 = 2e-9
    c2 = c1 / 0.2735
    p = dict(TABLE1)
    p.pop("l1")
    p.update(l_f=200e-6, c1=c1, c2=c2, l2=1.0 / (w * w * c2 * 2.81675 ** 2),
             c_junction=0.0)
    p.update(over)
    return p


ACCEPTANCE_LOG = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
