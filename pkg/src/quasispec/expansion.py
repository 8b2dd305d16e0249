"""Spectral vs. sine partial sums, the defect B_m f, the rate bound and the
projections P_n."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .potentials import SQRT_2_OVER_PI, Grid, GridFunction, sine_basis
from .spectrum import Spectrum

# M_emp: first m whose trailing window of ratios satisfies max/min - 1 < MEMP_SPREAD
MEMP_WINDOW = 10
MEMP_SPREAD = 0.5


class RangeError(ValueError):
    pass


@dataclass(eq=False)
class ExpansionCoeffs:
    """c_n = (f, w_n) for n <= m_max and c_{n,0} = sqrt(2/pi)(f, sin n.) up to G/4."""

    c: np.ndarray
    c0: np.ndarray
    f_norm: float
    f_norm_exact: float | None = None

    @property
    def m_max(self) -> int:
        return int(self.c.size)

    def tail_cap(self) -> float:
        """Parseval bound for sum_{n > len(c0)} |c_{n,0}|^2 (needs an exact ||f||)."""
        if self.f_norm_exact is None:
            return 0.0
        return max(0.0, self.f_norm_exact**2 - float(np.sum(np.abs(self.c0) ** 2)))


def _as_values(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f)


def coefficients(f, spectrum: Spectrum, m_max: int, f_norm_exact=None) -> ExpansionCoeffs:
    grid = spectrum.grid
    if m_max > spectrum.n_max:
        raise RangeError(f"m_max={m_max} exceeds computed spectrum ({spectrum.n_max})")
    v = np.asarray(_as_values(f), dtype=complex)
    c = grid.inner(v, spectrum.W[:m_max])
    n_sine = grid.size // 4
    c0 = SQRT_2_OVER_PI * (sine_basis(grid, n_sine) * grid.weights) @ v
    return ExpansionCoeffs(c, c0, float(grid.norm(v)), f_norm_exact)


def _check_grid(grid: Grid, m: int):
    if grid.size < 16 * m + 1:
        raise RangeError(f"grid of {grid.size} nodes too coarse for m={m} (need >= {16 * m + 1})")


def defect_profile(coeffs: ExpansionCoeffs, spectrum: Spectrum, m_max: int | None = None) -> np.ndarray:
    """Delta_m = ||sum_{n<=m} c_n y_n - sum_{n<=m} sqrt(2/pi) c_{n,0} sin nx||_C, m = 1..m_max."""
    m_max = coeffs.m_max if m_max is None else m_max
    if m_max > coeffs.m_max:
        raise RangeError("m_max exceeds available coefficients")
    grid = spectrum.grid
    _check_grid(grid, m_max)
    S = sine_basis(grid, m_max)
    terms = coeffs.c[:m_max, None] * spectrum.Y[:m_max] - (SQRT_2_OVER_PI * coeffs.c0[:m_max])[:, None] * S
    return np.max(np.abs(np.cumsum(terms, axis=0)), axis=1)


def defect(f, spectrum: Spectrum, m: int) -> float:
    co = coefficients(f, spectrum, m)
    return float(defect_profile(co, spectrum, m)[-1])


def rhs_bound(coeffs: ExpansionCoeffs, m: int, theta: float, eps: float):
    """(tail, rate, tail + rate) with tail = sqrt(sum_{n >= ceil(sqrt m)} |c_{n,0}|^2)."""
    if not 0.0 < eps < theta / 2:
        raise ValueError(f"eps must lie in (0, theta/2), got eps={eps}, theta={theta}")
    k = math.isqrt(m)
    if k * k < m:
        k += 1
    tail2 = float(np.sum(np.abs(coeffs.c0[k - 1 :]) ** 2)) + coeffs.tail_cap()
    tail = math.sqrt(tail2)
    rate = coeffs.f_norm / m ** (theta / 2 - eps)
    return tail, rate, tail + rate


def m_emp(ratios, m_values) -> int:
    """First m where the last MEMP_WINDOW ratios satisfy max/min - 1 < MEMP_SPREAD."""
    r = np.asarray(ratios)
    for i in range(MEMP_WINDOW - 1, r.size):
        w = r[i - MEMP_WINDOW + 1 : i + 1]
        if w.min() > 0 and w.max() / w.min() - 1 < MEMP_SPREAD:
            return int(m_values[i])
    return int(m_values[-1])


@dataclass(eq=False)
class EquiconvReport:
    m: np.ndarray
    delta: np.ndarray
    tail: np.ndarray
    rate: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    theta: float
    eps: float
    meta: dict = field(default_factory=dict)

    @property
    def M_emp(self) -> int:
        return m_emp(self.ratio, self.m)

    def window(self, start=None):
        start = self.M_emp if start is None else start
        return self.m >= start

    def blowup_ratio(self, start=None) -> float:
        """max / median of the ratio over [M_emp, m_max]."""
        r = self.ratio[self.window(start)]
        return float(r.max() / np.median(r))

    def decay_check(self, start=1, decade=10):
        """(median of last `decade` deltas, median of first `decade`) over m >= start."""
        d = self.delta[self.m >= start]
        return float(np.median(d[-decade:])), float(np.median(d[:decade]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "delta", "tail", "rate", "rhs", "ratio"])
            for row in zip(self.m, self.delta, self.tail, self.rate, self.rhs, self.ratio):
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def equiconv_report(f, spectrum: Spectrum, theta: float, eps: float, m_max: int,
                    f_norm_exact=None, meta=None) -> EquiconvReport:
    co = coefficients(f, spectrum, m_max, f_norm_exact)
    delta = defect_profile(co, spectrum, m_max)
    ms = np.arange(1, m_max + 1)
    parts = np.array([rhs_bound(co, int(m), theta, eps) for m in ms])
    tail, rate, rhs = parts[:, 0], parts[:, 1], parts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, delta / rhs, 0.0)
    return EquiconvReport(ms, delta, tail, rate, rhs, ratio, theta, eps, dict(meta or {}))


def read_report_csv(path, theta=float("nan"), eps=float("nan")) -> EquiconvReport:
    cols = {k: [] for k in ("m", "delta", "tail", "rate", "rhs", "ratio")}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for k in cols:
                cols[k].append(float(row[k]))
    arr = {k: np.array(v) for k, v in cols.items()}
    arr["m"] = arr["m"].astype(int)
    return EquiconvReport(theta=theta, eps=eps, **arr)


def random_unit_functions(grid: Grid, degree: int, trials: int, seed: int) -> np.ndarray:
    """``trials`` sine polynomials of degree <= ``degree`` with unit L2 norm."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((trials, degree))
    a /= np.sqrt(math.pi / 2 * np.sum(a**2, axis=1, keepdims=True))
    return a @ sine_basis(grid, degree)


def empirical_bm_norm(spectrum: Spectrum, m: int, trials: int, seed: int) -> float:
    """max over random unit-L2 sine polynomials f (degree <= 2m) of Delta_m(f)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if m > spectrum.n_max:
        raise RangeError("m exceeds computed spectrum")
    grid = spectrum.grid
    _check_grid(grid, m)
    F = random_unit_functions(grid, 2 * m, trials, seed).astype(complex)
    S = sine_basis(grid, m)
    C = (F * grid.weights) @ np.conj(spectrum.W[:m]).T
    C0 = SQRT_2_OVER_PI * (F * grid.weights) @ S.T
    D = C @ spectrum.Y[:m] - SQRT_2_OVER_PI * C0 @ S
    return float(np.max(np.abs(D)))


def bm_operator_norm(spectrum: Spectrum, m: int) -> float:
    """||B_m||_{L2 -> C(grid)} exactly, as max_x ||K_x||_{L2} of the kernel of B_m.

    B_m f(x) = (f, K_x) with K_x = sum_n conj(y_n(x)) w_n - (2/pi) sum_n sin(nx) sin(n.).
    """
    grid = spectrum.grid
    W = spectrum.W[:m]
    S = sine_basis(grid, m)
    wts = grid.weights
    Gww = (np.conj(W) * wts) @ W.T  # Gww[n', n] = (w_n, w_n')
    Gws = (np.conj(S) * wts) @ W.T  # Gws[n', n] = (w_n, s_n')
    A = np.conj(spectrum.Y[:m])  # a_n(x)
    B = (2 / math.pi) * S  # b_n(x)
    q1 = np.einsum("ix,ij,jx->x", np.conj(A), Gww, A).real
    Gss = (S * wts) @ S.T
    q2 = np.einsum("ix,ij,jx->x", B, Gss, B)
    q3 = np.einsum("ix,ij,jx->x", B, Gws, A).real
    return float(np.sqrt(np.max(np.maximum(q1 + q2 - 2 * q3, 0.0))))


@dataclass(eq=False)
class Projection:
    values: np.ndarray
    derivative: np.ndarray
    grid: Grid

    def w21_norm(self) -> float:
        return float(np.sqrt(self.grid.norm(self.values) ** 2 + self.grid.norm(self.derivative) ** 2))

    def __sub__(self, other: "Projection") -> "Projection":
        return Projection(self.values - other.values, self.derivative - other.derivative, self.grid)


def projection(f, spectrum: Spectrum, n: int) -> Projection:
    """P_n f = sum_{k<=n} (f, w_k) y_k with derivative from y_k' = y1_k + u y_k."""
    if n > spectrum.n_max:
        raise RangeError("n exceeds computed spectrum")
    grid = spectrum.grid
    c = grid.inner(np.asarray(_as_values(f), dtype=complex), spectrum.W[:n])
    u_vals = spectrum.potential(grid.x)
    vals = c @ spectrum.Y[:n]
    deriv = c @ spectrum.Y1[:n] + u_vals * vals
    return Projection(vals, deriv, grid)
