"""Hot loops of the time-domain oracle.

One switching period of a trapezoidal integration is two runs of the
affine recurrence ``x[n+1] = M x[n] + b``, one with the ON-state matrices
and one with the OFF-state matrices.  Two interchangeable backends are
provided:

* ``numba``: a compiled sequential loop.
* ``numpy``: precomputed tables ``M^n`` and ``sum_{i<n} M^i b``, so a
  period becomes two batched matrix-vector products.

The numba backend is used when numba imports cleanly, unless the
environment variable ``IPTDESIGN_DISABLE_NUMBA`` is set to a non-empty
value other than ``0``.
"""
from __future__ import annotations

import os

import numpy as np

__all__ = ["BACKEND", "NUMBA_AVAILABLE", "CycleStepper", "make_stepper"]

try:  # pragma: no cover - depends on the environment
    from numba import njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False


def _numba_disabled():
    flag = os.environ.get("IPTDESIGN_DISABLE_NUMBA", "")
    return flag not in ("", "0")


BACKEND = "numba" if NUMBA_AVAILABLE and not _numba_disabled() else "numpy"


if NUMBA_AVAILABLE:
    @njit(cache=True)
    def _cycle_numba(m_on, b_on, m_off, b_off, n_on, n_off, x0, out):
        n = x0.shape[0]
        for i in range(n):
            out[0, i] = x0[i]
        for s in range(n_on + n_off):
            if s < n_on:
                m, b = m_on, b_on
            else:
                m, b = m_off, b_off
            for i in range(n):
                acc = b[i]
                for j in range(n):
                    acc += m[i, j] * out[s, j]
                out[s + 1, i] = acc
        return out


def _tables(m, b, steps):
    n = m.shape[0]
    pw = np.empty((steps + 1, n, n))
    acc = np.empty((steps + 1, n))
    pw[0] = np.eye(n)
    acc[0] = 0.0
    for s in range(steps):
        pw[s + 1] = m @ pw[s]
        acc[s + 1] = m @ acc[s] + b
    return pw, acc


class CycleStepper:
    """Propagate one period of the switched affine recurrence.

    Parameters
    ----------
    m_on, b_on, m_off, b_off : ndarray
        Step matrices and offsets of each switch state.
    n_on, n_off : int
        Number of steps spent in each state.
    backend : {'numba', 'numpy'}, optional
        Defaults to the module-level :data:`BACKEND`.
    """

    def __init__(self, m_on, b_on, m_off, b_off, n_on, n_off, backend=None):
        self.backend = backend or BACKEND
        if self.backend == "numba" and not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is not importable")
        if self.backend not in ("numba", "numpy"):
            raise ValueError(f"unknown backend {self.backend!r}")
        self.m_on = np.ascontiguousarray(m_on, dtype=float)
        self.b_on = np.ascontiguousarray(b_on, dtype=float)
        self.m_off = np.ascontiguousarray(m_off, dtype=float)
        self.b_off = np.ascontiguousarray(b_off, dtype=float)
        self.n_on, self.n_off = int(n_on), int(n_off)
        if self.backend == "numpy":
            self._on = _tables(self.m_on, self.b_on, self.n_on)
            self._off = _tables(self.m_off, self.b_off, self.n_off)

    @property
    def steps(self) -> int:
        return self.n_on + self.n_off

    def run(self, x0, out=None) -> np.ndarray:
        """Trajectory of one period, shape ``(steps + 1, n)``, from ``x0``."""
        x0 = np.ascontiguousarray(x0, dtype=float)
        if out is None:
            out = np.empty((self.steps + 1, x0.size))
        if self.backend == "numba":
            return _cycle_numba(self.m_on, self.b_on, self.m_off, self.b_off,
                                self.n_on, self.n_off, x0, out)
        pw, acc = self._on
        out[: self.n_on + 1] = pw @ x0 + acc
        pw, acc = self._off
        out[self.n_on:] = pw @ out[self.n_on] + acc
        return out


def make_stepper(*args, **kw) -> CycleStepper:
    return CycleStepper(*args, **kw)
