"""Eigenvalues as zeros of omega(pi, lambda), normalized eigenfunctions and the
biorthogonal system."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import quasi_ode
from ._backend import backend_name
from .potentials import Grid, GridFunction, Potential, potential_from_dict

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_NEWTON = 60
SEPARATION = 1e-6  # times n
SMALL_PAIRING = 1e-4
EIGEN_CHUNK = 32


class SpectrumError(RuntimeError):
    pass


class NonConvergence(SpectrumError):
    def __init__(self, n, last):
        super().__init__(f"Newton iteration for eigenvalue {n} stalled at lambda={last}")
        self.n = n
        self.last = last


class NearDegenerate(SpectrumError):
    def __init__(self, n, m, lam_n, lam_m):
        super().__init__(
            f"eigenvalues {n} and {m} nearly coincide ({lam_n} vs {lam_m}); "
            "multiple eigenvalues are not supported"
        )
        self.pair = (n, m)


class SmallPairing(SpectrumError):
    def __init__(self, n, value):
        super().__init__(f"(y_n, conj y_n) = {value} for n={n}; eigenvalues near collision")
        self.n = n
        self.value = value


@dataclass(frozen=True, eq=False)
class Eigenpair:
    n: int
    lam: complex
    y: GridFunction
    y1: GridFunction
    w: GridFunction | None
    residual: float
    pairing: complex | None


@dataclass(eq=False)
class Spectrum:
    potential: Potential
    eigenvalues: np.ndarray
    residuals: np.ndarray
    derivatives: np.ndarray
    iterations: np.ndarray
    tol: float
    ode_tol: float
    order_by_guess: np.ndarray | None = None
    bracket_violations: list = field(default_factory=list)
    grid: Grid | None = None
    Y: np.ndarray | None = None
    Y1: np.ndarray | None = None
    W: np.ndarray | None = None
    pairings: np.ndarray | None = None
    node_counts: np.ndarray | None = None

    @property
    def n_max(self) -> int:
        return int(self.eigenvalues.size)

    def __len__(self):
        return self.n_max

    def __getitem__(self, n) -> Eigenpair:
        """1-based access, matching the eigenvalue numbering."""
        if not 1 <= n <= self.n_max:
            raise IndexError(n)
        i = n - 1
        if self.Y is None:
            raise SpectrumError("eigenfunctions have not been computed")
        return Eigenpair(
            n=n,
            lam=complex(self.eigenvalues[i]),
            y=GridFunction(self.grid, self.Y[i]),
            y1=GridFunction(self.grid, self.Y1[i]),
            w=None if self.W is None else GridFunction(self.grid, self.W[i]),
            residual=float(self.residuals[i]),
            pairing=None if self.pairings is None else complex(self.pairings[i]),
        )

    @property
    def simple_range(self) -> int:
        """Number of leading eigenvalues verified simple (all of them, or the run aborts)."""
        return self.n_max

    def to_dict(self) -> dict:
        d = {
            "potential": self.potential.to_dict(),
            "n_max": self.n_max,
            "tol": self.tol,
            "ode_tol": self.ode_tol,
            "backend": backend_name(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "residuals": [float(r) for r in self.residuals],
            "iterations": [int(i) for i in self.iterations],
            "bracket_violations": [int(n) for n in self.bracket_violations],
        }
        if self.order_by_guess is not None:
            d["order_by_guess"] = [int(i) for i in self.order_by_guess]
        if self.grid is not None:
            d["grid_size"] = self.grid.size
        if self.pairings is not None:
            d["pairings"] = [[float(z.real), float(z.imag)] for z in self.pairings]
        if self.node_counts is not None:
            d["node_counts"] = [int(c) for c in self.node_counts]
        return d

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    def save_eigenfunctions_csv(self, path) -> None:
        if self.Y is None:
            raise SpectrumError("eigenfunctions have not been computed")
        real = bool(np.all(self.Y.imag == 0))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if real:
                w.writerow(["x"] + [f"y{n}" for n in range(1, self.n_max + 1)])
                for i, x in enumerate(self.grid.x):
                    w.writerow([repr(float(x))] + [repr(float(v)) for v in self.Y[:, i].real])
            else:
                head = ["x"]
                for n in range(1, self.n_max + 1):
                    head += [f"re_y{n}", f"im_y{n}"]
                w.writerow(head)
                for i, x in enumerate(self.grid.x):
                    row = [repr(float(x))]
                    for v in self.Y[:, i]:
                        row += [repr(float(v.real)), repr(float(v.imag))]
                    w.writerow(row)


def spectrum_from_dict(d: dict, with_eigenfunctions=True, backend=None) -> Spectrum:
    """Rebuild a Spectrum from its JSON form; eigenfunctions are recomputed."""
    u = potential_from_dict(d["potential"])
    lams = np.array([complex(a, b) for a, b in d["eigenvalues"]])
    sp = Spectrum(
        potential=u,
        eigenvalues=lams,
        residuals=np.asarray(d["residuals"], dtype=float),
        derivatives=np.full(lams.size, np.nan + 0j),
        iterations=np.asarray(d.get("iterations", [0] * lams.size)),
        tol=d["tol"],
        ode_tol=d["ode_tol"],
        order_by_guess=np.asarray(d["order_by_guess"]) if "order_by_guess" in d else None,
        bracket_violations=list(d.get("bracket_violations", [])),
    )
    if with_eigenfunctions:
        grid = Grid(d.get("grid_size", Grid.for_frequency(lams.size).size))
        attach_eigenfunctions(sp, grid, backend=backend)
    return sp


def load_spectrum(path, with_eigenfunctions=True, backend=None) -> Spectrum:
    return spectrum_from_dict(json.loads(Path(path).read_text()), with_eigenfunctions, backend)


def canonical_order(lams) -> np.ndarray:
    """Indices sorting by modulus, ties broken by argument in (-pi, pi]."""
    lams = np.asarray(lams, dtype=complex)
    arg = np.angle(lams)
    arg = np.where(arg == -math.pi, math.pi, arg)
    # round modulus so that ties within rounding error defer to the argument
    mod = np.round(np.abs(lams), 12)
    return np.lexsort((arg, mod))


def _newton(u, guesses, tol, ode_tol, lo, hi, flo, backend):
    """Vectorized Newton; lo/hi/flo non-None for bracketed (real) entries."""
    lam = guesses.astype(complex).copy()
    n_tot = lam.size
    done = np.zeros(n_tot, dtype=bool)
    res = np.full(n_tot, np.inf)
    der = np.zeros(n_tot, dtype=complex)
    iters = np.zeros(n_tot, dtype=int)
    bracketed = lo is not None
    for _ in range(MAX_NEWTON):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        w, wl = quasi_ode.char_values(u, lam[act], ode_tol, backend=backend)
        iters[act] += 1
        res[act] = np.abs(w)
        der[act] = wl
        with np.errstate(divide="ignore", invalid="ignore"):
            step = w / wl
        step_tol = 1e-12 * np.maximum(1.0, np.abs(lam[act]))
        ok = (np.abs(w) < tol * np.maximum(1.0, np.abs(wl))) & (np.abs(step) <= step_tol)
        done[act[ok]] = True
        nxt = lam[act] - step
        if bracketed:
            for k, i in enumerate(act):
                if ok[k] or not np.isfinite(lo[i]):
                    continue
                fr = w[k].real
                if np.sign(fr) == np.sign(flo[i]):
                    lo[i], flo[i] = lam[i].real, fr
                else:
                    hi[i] = lam[i].real
                cand = nxt[k].real
                if not (lo[i] < cand < hi[i]) or not np.isfinite(cand):
                    cand = 0.5 * (lo[i] + hi[i])
                nxt[k] = cand
        upd = ~ok & np.isfinite(nxt)
        lam[act[upd]] = nxt[upd]
        stuck = ~ok & ~np.isfinite(nxt)
        if np.any(stuck):
            i = act[np.flatnonzero(stuck)[0]]
            raise NonConvergence(i + 1, lam[i])
    if not np.all(done):
        i = int(np.flatnonzero(~done)[0])
        # residual criterion alone is the contract; the step test only refines
        w, wl = quasi_ode.char_values(u, lam[~done], ode_tol, backend=backend)
        good = np.abs(w) < tol * np.maximum(1.0, np.abs(wl))
        if not np.all(good):
            raise NonConvergence(i + 1, lam[i])
        res[~done] = np.abs(w)
        der[~done] = wl
    return lam, res, der, iters


def find_eigenvalues(u: Potential, n_max: int, tol=DEFAULT_TOL, ode_tol=quasi_ode.DEFAULT_TOL, backend=None) -> Spectrum:
    """First ``n_max`` eigenvalues of the Dirichlet problem, Newton-seeded at n^2."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n = np.arange(1, n_max + 1)
    guesses = (n**2).astype(float)
    violations = []
    lo = hi = flo = None
    real = u.is_real
    if real:
        edges = (np.arange(0, n_max + 1) + 0.5) ** 2
        fe, _ = quasi_ode.char_values(u, edges, ode_tol, backend=backend)
        fe = fe.real
        lo, hi, flo = edges[:-1].copy(), edges[1:].copy(), fe[:-1].copy()
        sign_change = np.sign(fe[:-1]) != np.sign(fe[1:])
        for i in np.flatnonzero(~sign_change):
            violations.append(int(i + 1))
            lo[i] = hi[i] = np.inf  # disable safeguard for this index
        if violations:
            log.warning("no sign change on [(n-1/2)^2, (n+1/2)^2] for n in %s", violations)
    lam, res, der, iters = _newton(u, guesses, tol, ode_tol, lo, hi, flo, backend)
    if real:
        lam = lam.real + 0j
    order = canonical_order(lam)
    _check_separation(lam[order])
    guess_order = None if np.array_equal(order, np.arange(n_max)) else order + 1
    if guess_order is not None:
        log.warning("modulus ordering differs from index-by-guess ordering")
    return Spectrum(
        potential=u,
        eigenvalues=lam[order],
        residuals=res[order],
        derivatives=der[order],
        iterations=iters[order],
        tol=tol,
        ode_tol=ode_tol,
        order_by_guess=guess_order,
        bracket_violations=violations,
    )


def _check_separation(lams):
    n_tot = lams.size
    for i in range(n_tot):
        d = np.abs(lams[i + 1 :] - lams[i])
        j = np.flatnonzero(d < SEPARATION * (i + 1))
        if j.size:
            m = i + 1 + int(j[0])
            raise NearDegenerate(i + 1, m + 1, lams[i], lams[m])


def eigenfunctions(u: Potential, lams, grid: Grid, ode_tol=quasi_ode.DEFAULT_TOL, backend=None):
    """Normalized (y_n, y1_n) on the grid; phase fixed by y1_n(0) > 0."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    Y = np.empty((lams.size, grid.size), dtype=complex)
    Y1 = np.empty_like(Y)
    for start in range(0, lams.size, EIGEN_CHUNK):
        sl = slice(start, start + EIGEN_CHUNK)
        _, out = quasi_ode.integrate_batch(u, lams[sl], ode_tol, x_out=grid.x, backend=backend)
        Y[sl] = out[:, :, 0]
        Y1[sl] = out[:, :, 1]
    nrm = grid.norm(Y)
    if np.any(nrm == 0):
        raise SpectrumError("zero-norm eigenfunction; quadrature failure")
    Y /= nrm[:, None]
    Y1 /= nrm[:, None]
    return Y, Y1


def eigenfunction(u: Potential, lam, grid: Grid, ode_tol=quasi_ode.DEFAULT_TOL, backend=None):
    Y, Y1 = eigenfunctions(u, [lam], grid, ode_tol, backend)
    return GridFunction(grid, Y[0]), GridFunction(grid, Y1[0])


def pairing(grid: Grid, Y):
    """(y_n, conj(y_n)) = int y_n^2 dx."""
    return grid.integrate(np.asarray(Y) ** 2)


def biorthogonal(spectrum: Spectrum):
    """w_n = conj(y_n) / conj((y_n, conj y_n)), so that (y_n, w_m) = delta_nm."""
    p = pairing(spectrum.grid, spectrum.Y)
    small = np.flatnonzero(np.abs(p) < SMALL_PAIRING)
    if small.size:
        i = int(small[0])
        raise SmallPairing(i + 1, complex(p[i]))
    W = np.conj(spectrum.Y) / np.conj(p)[:, None]
    spectrum.W = W
    spectrum.pairings = p
    return W


def _count_nodes(y):
    s = np.sign(y.real[1:-1])
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def attach_eigenfunctions(spectrum: Spectrum, grid: Grid | None = None, backend=None) -> Spectrum:
    if grid is None:
        grid = Grid.for_frequency(spectrum.n_max)
    spectrum.grid = grid
    spectrum.Y, spectrum.Y1 = eigenfunctions(
        spectrum.potential, spectrum.eigenvalues, grid, spectrum.ode_tol, backend
    )
    biorthogonal(spectrum)
    if spectrum.potential.is_real:
        spectrum.node_counts = np.array([_count_nodes(y) for y in spectrum.Y])
    return spectrum


def compute_spectrum(u: Potential, n_max: int, grid: Grid | None = None, tol=DEFAULT_TOL,
                     ode_tol=quasi_ode.DEFAULT_TOL, backend=None) -> Spectrum:
    """Eigenvalues, eigenfunctions and biorthogonal system in one call."""
    sp = find_eigenvalues(u, n_max, tol, ode_tol, backend)
    return attach_eigenfunctions(sp, grid, backend)


def gram_matrix(spectrum: Spectrum, K: int) -> np.ndarray:
    Y = spectrum.Y[:K]
    return (Y * spectrum.grid.weights) @ np.conj(Y).T


def gram_condition(spectrum: Spectrum, K: int) -> float:
    """Condition number of the Hermitian Gram matrix (y_n, y_m), n, m <= K."""
    if K > spectrum.n_max:
        raise ValueError("K exceeds the computed range")
    G = gram_matrix(spectrum, K)
    ev = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    return float(ev[-1] / ev[0])
