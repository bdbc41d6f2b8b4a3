"""Compare the numba and numpy period steppers of the time-domain oracle.

Usage::

    python3 benchmarks/bench_kernels.py [--steps 8192] [--periods 200]

Times one period of the reference-configuration state recurrence with each backend
(after warm-up, so numba compilation and numpy table construction are
reported separately) and a full steady-state run at k = 0.05.
"""
import argparse
import time
from importlib import resources

import numpy as np

from iptdesign import _kernels
from iptdesign.config import load_config
from iptdesign.tdoracle import (
    network_state_equations, steady_state_extract, trapezoid_matrices, transient_simulate,
)


def _stepper(net, steps, backend):
    e, a_on, a_off, b, _ = network_state_equations(net)
    h = 1.0 / (net.f_s * steps)
    n_on = int(round(net.switch.duty * steps))
    m_on, c_on = trapezoid_matrices(e, a_on, b, h)
    m_off, c_off = trapezoid_matrices(e, a_off, b, h)
    return _kernels.CycleStepper(m_on, c_on, m_off, c_off, n_on, steps - n_on, backend)


def bench(net, steps, periods, backend):
    t0 = time.perf_counter()
    st = _stepper(net, steps, backend)
    x = np.zeros(st.m_on.shape[0])
    out = np.empty((steps + 1, x.size))
    st.run(x, out)                                  # warm-up (numba compiles here)
    setup = time.perf_counter() - t0
    t0 = time.perf_counter()
    for _ in range(periods):
        x = st.run(x, out)[-1].copy()
    per = (time.perf_counter() - t0) / periods
    t0 = time.perf_counter()
    ss = steady_state_extract(transient_simulate(net, steps_per_cycle=steps, backend=backend))
    full = time.perf_counter() - t0
    return setup, per, full, ss, x


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=8192)
    ap.add_argument("--periods", type=int, default=200)
    args = ap.parse_args()
    net = load_config(resources.files("iptdesign") / "data" / "table1.conf").network()
    backends = ["numpy"] + (["numba"] if _kernels.NUMBA_AVAILABLE else [])
    rows = {b: bench(net, args.steps, args.periods, b) for b in backends}
    print(f"{'backend':8s} {'setup s':>10s} {'period us':>12s} {'steady s':>10s} {'P_out W':>12s}")
    for b, (setup, per, full, ss, _) in rows.items():
        print(f"{b:8s} {setup:10.4f} {per * 1e6:12.1f} {full:10.4f} {ss.p_out:12.6f}")
    if len(rows) == 2:
        xa, xb = rows["numpy"][4], rows["numba"][4]
        dev = np.max(np.abs(xa - xb)) / np.max(np.abs(xb))
        print(f"speedup per period: {rows['numpy'][1] / rows['numba'][1]:.2f}x, "
              f"state deviation after {args.periods} periods: {dev:.2e}")


if __name__ == "__main__":
    main()
