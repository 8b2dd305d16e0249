"""Cauchy problem for -y'' + u'y = lambda*y in quasi-derivative form.

With y1 = y' - u*y the equation becomes the bounded first-order system

    y'  = u*y + y1
    y1' = -(lambda + u^2)*y - u*y1

so only u and u^2 are ever evaluated.  The lambda-derivatives (y_lam, y1_lam)
obey the same system with the forcing term -y in the second row.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .potentials import Potential

DEFAULT_TOL = 1e-12


class StepUnderflowError(RuntimeError):
    def __init__(self, position, lam):
        super().__init__(f"step size underflow at x={position:.6g} (lambda={lam})")
        self.position = position
        self.lam = lam


@dataclass(frozen=True)
class QuasiState:
    x: float
    y: complex
    y1: complex
    y_lam: complex = 0j
    y1_lam: complex = 0j

    def as_array(self):
        return np.array([self.y, self.y1, self.y_lam, self.y1_lam], dtype=complex)

    def derivative(self, u_val, lam) -> "QuasiState":
        return QuasiState(self.x, *rhs(self.as_array(), u_val, lam))


@dataclass(frozen=True, eq=False)
class Trajectory:
    x: np.ndarray
    states: np.ndarray  # (n, 4): y, y1, y_lam, y1_lam
    lam: complex
    nsteps: int

    @property
    def y(self):
        return self.states[:, 0]

    @property
    def y1(self):
        return self.states[:, 1]

    def __len__(self):
        return self.x.size

    def __getitem__(self, i) -> QuasiState:
        s = self.states[i]
        return QuasiState(float(self.x[i]), *map(complex, s))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re_y", "im_y", "re_y1", "im_y1"])
            for xi, s in zip(self.x, self.states):
                w.writerow([repr(float(xi)), repr(s[0].real), repr(s[0].imag), repr(s[1].real), repr(s[1].imag)])


def rhs(state, u_val, lam):
    """Derivative of (y, y1, y_lam, y1_lam) for the local value u(x) = u_val."""
    return _kernels.rhs_value(state, u_val, lam)


def _check(status, fail_x, lams):
    bad = np.flatnonzero(status != _kernels.STATUS_OK)
    if bad.size:
        i = bad[0]
        raise StepUnderflowError(float(fail_x[i]), complex(lams[i]))


def integrate_batch(u: Potential, lams, tol=DEFAULT_TOL, x_out=None, backend=None):
    """Integrate from 0 to pi for each lambda; returns (end_states, samples).

    ``samples`` has shape (len(lams), len(x_out), 4).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    x_out = np.zeros(0) if x_out is None else np.asarray(x_out, dtype=float)
    if x_out.size and (np.any(np.diff(x_out) <= 0) or x_out[0] < 0 or x_out[-1] > math.pi):
        raise ValueError("x_out must be strictly increasing inside [0, pi]")
    breaks, offsets, slope, coeffs = u.segments()
    ends, out, status, fail_x, _ = _kernels.integrate_batch(
        lams, breaks, offsets, slope, coeffs, x_out, tol, tol, backend=backend
    )
    _check(status, fail_x, lams)
    return ends, out


def integrate_cauchy(u: Potential, lam, tol=DEFAULT_TOL, x_out=None, backend=None) -> Trajectory:
    """Solution with y(0)=0, y1(0)=1 sampled at ``x_out`` (default: 1025 uniform nodes)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if x_out is None:
        x_out = np.linspace(0.0, math.pi, 1025)
    x_out = np.asarray(x_out, dtype=float)
    breaks, offsets, slope, coeffs = u.segments()
    lams = np.array([lam], dtype=complex)
    ends, out, status, fail_x, nsteps = _kernels.integrate_batch(
        lams, breaks, offsets, slope, coeffs, x_out, tol, tol, backend=backend
    )
    _check(status, fail_x, lams)
    return Trajectory(x_out, out[0], complex(lam), int(nsteps[0]))


def char_values(u: Potential, lams, tol=DEFAULT_TOL, backend=None):
    """omega(pi, lambda) and d omega/d lambda (pi, lambda) for each lambda."""
    ends, _ = integrate_batch(u, lams, tol, backend=backend)
    return ends[:, 0], ends[:, 2]


def char_value(u: Potential, lam, tol=DEFAULT_TOL, backend=None):
    w, wl = char_values(u, [lam], tol, backend)
    return complex(w[0]), complex(wl[0])
