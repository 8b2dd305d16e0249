"""Remainders of the eigenfunction asymptotics and their sequence norms.

    y_n  = sqrt(2/pi) sin nx + phi_n
    w_n  = sqrt(2/pi) sin nx + psi_n
    y_n' = n (sqrt(2/pi) cos nx + eta_n) + u y_n
    psi_n = alpha_n sin nx + beta_n cos nx - kappa * V_n + psi1_n

with V_n(x) = int_0^x u(t) sin n(x - 2t) dt.  See ``CONV_WEIGHT`` for kappa.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .potentials import SQRT_2_OVER_PI, Grid
from .spectrum import Spectrum

# kappa: the convolution term enters w_n with the same sqrt(2/pi) factor as
# the leading sine; with kappa = 1 an O(1/n) piece of V_n is left in psi1_n.
CONV_WEIGHT = SQRT_2_OVER_PI


@dataclass(frozen=True)
class RemainderRecord:
    n: int
    phi: float
    psi: float
    eta: float
    alpha: complex
    beta: complex
    psi1: float

    @property
    def gamma(self) -> float:
        return self.phi + self.psi + self.eta


def _sin_n(grid: Grid, n: int):
    return np.sin(n * grid.x)


def remainder_phi(spectrum: Spectrum, n: int):
    """(phi_n values, ||phi_n||_C)."""
    phi = spectrum.Y[n - 1] - SQRT_2_OVER_PI * _sin_n(spectrum.grid, n)
    return phi, float(np.max(np.abs(phi)))


def remainder_psi(spectrum: Spectrum, n: int):
    psi = spectrum.W[n - 1] - SQRT_2_OVER_PI * _sin_n(spectrum.grid, n)
    return psi, float(np.max(np.abs(psi)))


def remainder_eta(spectrum: Spectrum, n: int):
    """eta_n = (y_n' - u y_n)/n - sqrt(2/pi) cos nx = y1_n/n - sqrt(2/pi) cos nx."""
    eta = spectrum.Y1[n - 1] / n - SQRT_2_OVER_PI * np.cos(n * spectrum.grid.x)
    return eta, float(np.max(np.abs(eta)))


def _cumsimpson(v, x):
    # scipy's cumulative_simpson drops imaginary parts
    v = np.asarray(v)
    out = cumulative_simpson(v.real, x=x, initial=0.0)
    if np.iscomplexobj(v):
        out = out + 1j * cumulative_simpson(v.imag, x=x, initial=0.0)
    return out


def convolution_term(u_vals, grid: Grid, n: int):
    """V_n(x) = int_0^x u(t) sin n(x - 2t) dt on the grid (cumulative Simpson)."""
    x = grid.x
    ic = _cumsimpson(u_vals * np.cos(2 * n * x), x)
    is_ = _cumsimpson(u_vals * np.sin(2 * n * x), x)
    return np.sin(n * x) * ic - np.cos(n * x) * is_


def _u_for_psi(spectrum: Spectrum):
    # w_n is built from conj(y_n), so its convolution term carries conj(u)
    return np.conj(spectrum.potential(spectrum.grid.x))


def psi_decomposition(spectrum: Spectrum, n: int, u_vals=None):
    """Split psi_n into (alpha_n, beta_n, psi1_n values, V_n values).

    alpha_n, beta_n are the L2 projection of psi_n + kappa*V_n onto
    {sin nx, cos nx}; psi1_n is what is left.
    """
    grid = spectrum.grid
    if u_vals is None:
        u_vals = _u_for_psi(spectrum)
    psi, _ = remainder_psi(spectrum, n)
    V = convolution_term(u_vals, grid, n)
    g = psi + CONV_WEIGHT * V
    s, c = _sin_n(grid, n), np.cos(n * grid.x)
    A = np.array([[grid.inner(s, s), grid.inner(c, s)], [grid.inner(s, c), grid.inner(c, c)]])
    b = np.array([grid.inner(g, s), grid.inner(g, c)])
    alpha, beta = np.linalg.solve(A, b)
    psi1 = g - alpha * s - beta * c
    return complex(alpha), complex(beta), psi1, V


def remainder_records(spectrum: Spectrum, n_range=None):
    if n_range is None:
        n_range = range(1, spectrum.n_max + 1)
    u_vals = _u_for_psi(spectrum)
    out = []
    for n in n_range:
        _, phi = remainder_phi(spectrum, n)
        _, psi = remainder_psi(spectrum, n)
        _, eta = remainder_eta(spectrum, n)
        a, b, psi1, _ = psi_decomposition(spectrum, n, u_vals)
        out.append(RemainderRecord(n, phi, psi, eta, a, b, float(np.max(np.abs(psi1)))))
    return out


def weighted_partial_sums(values, n, theta: float, power: int = 2):
    """Partial sums of |v_n|^power * n^(2 theta) (power=2) or |v_n| (power=1, theta ignored)."""
    v = np.abs(np.asarray(values, dtype=complex))
    n = np.asarray(n, dtype=float)
    terms = v**2 * n ** (2 * theta) if power == 2 else v
    return np.cumsum(terms)


def saturation_growth(partial, n, lo: int, hi: int) -> float:
    """Relative growth of partial sums over the last half of [lo, hi]."""
    n = np.asarray(n)
    mid = lo + (hi - lo) // 2
    s_mid = partial[np.flatnonzero(n == mid)[0]]
    s_hi = partial[np.flatnonzero(n == hi)[0]]
    return float((s_hi - s_mid) / s_mid) if s_mid > 0 else 0.0


def gamma_sums(records, theta):
    n = np.array([r.n for r in records])
    return n, weighted_partial_sums([r.gamma for r in records], n, theta)


def psi1_sums(records):
    n = np.array([r.n for r in records])
    return n, weighted_partial_sums([r.psi1 for r in records], n, 0.0, power=1)


def ab_sums(records, theta):
    n = np.array([r.n for r in records])
    return n, weighted_partial_sums([abs(r.alpha) + abs(r.beta) for r in records], n, theta)


CSV_FIELDS = ["n", "phi_C", "psi_C", "eta_C", "gamma", "re_alpha", "im_alpha", "re_beta", "im_beta", "psi1_C"]


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([
                r.n, repr(r.phi), repr(r.psi), repr(r.eta), repr(r.gamma),
                repr(r.alpha.real), repr(r.alpha.imag), repr(r.beta.real), repr(r.beta.imag), repr(r.psi1),
            ])


def read_csv(path):
    recs = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            recs.append(RemainderRecord(
                int(row["n"]), float(row["phi_C"]), float(row["psi_C"]), float(row["eta_C"]),
                complex(float(row["re_alpha"]), float(row["im_alpha"])),
                complex(float(row["re_beta"]), float(row["im_beta"])),
                float(row["psi1_C"]),
            ))
    return recs
