"""Potentials ``u`` (the antiderivative of the distributional potential q = u'),
test functions on the uniform grid, and sine-coefficient machinery."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# Decay offset for sampled coefficients: u_n ~ n^-(theta + 1/2 + DECAY_DELTA).
DECAY_DELTA = 0.05


# ---------------------------------------------------------------------------
# Grid and quadrature


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid x_i = i*pi/(G-1) carrying composite Simpson weights (G odd)."""

    size: int
    x: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.size < 3 or self.size % 2 == 0:
            raise ValueError(f"grid size must be odd and >= 3, got {self.size}")
        x = np.linspace(0.0, math.pi, self.size)
        h = math.pi / (self.size - 1)
        w = np.full(self.size, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w * (h / 3.0))

    @classmethod
    def for_frequency(cls, n_max: int) -> "Grid":
        """Default grid resolving frequencies up to ``n_max`` (G = 16*n_max + 1)."""
        return cls(16 * max(int(n_max), 1) + 1)

    @property
    def spacing(self) -> float:
        return math.pi / (self.size - 1)

    def inner(self, f, g):
        """L2 inner product (f, g) = int f * conj(g); broadcasts over leading axes."""
        return np.sum(np.asarray(f) * np.conj(g) * self.weights, axis=-1)

    def norm(self, f):
        return np.sqrt(np.abs(self.inner(f, f)))

    def integrate(self, f):
        return np.sum(np.asarray(f) * self.weights, axis=-1)


@dataclass(eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape[-1] != self.grid.size:
            raise ValueError("values do not match the grid size")

    @property
    def x(self):
        return self.grid.x

    def l2_norm(self) -> float:
        return float(self.grid.norm(self.values))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def inner(self, other: "GridFunction") -> complex:
        return complex(self.grid.inner(self.values, other.values))


def sine_basis(grid: Grid, n_max: int) -> np.ndarray:
    """Rows sin(n x) for n = 1..n_max sampled on the grid."""
    n = np.arange(1, n_max + 1)
    return np.sin(np.outer(n, grid.x))


def cosine_basis(grid: Grid, n_max: int) -> np.ndarray:
    n = np.arange(1, n_max + 1)
    return np.cos(np.outer(n, grid.x))


def sine_coeffs(f: GridFunction, n_max: int) -> np.ndarray:
    """c_{n,0} = sqrt(2/pi) * (f, sin n.) for n = 1..n_max, by Simpson quadrature."""
    grid = f.grid
    if n_max > grid.size / 4:
        raise ValueError(
            f"n_max={n_max} too large for a grid of {grid.size} nodes (need n_max <= G/4)"
        )
    if n_max <= 0:
        return np.zeros(0, dtype=complex)
    basis = sine_basis(grid, n_max)
    return SQRT_2_OVER_PI * (basis * grid.weights) @ np.asarray(f.values, dtype=complex)


def l2theta_norm(coeffs, theta: float) -> float:
    """(sum |u_n|^2 n^{2 theta})^{1/2}; the working Sobolev norm of a sine series."""
    c = np.asarray(coeffs, dtype=complex)
    if c.size == 0:
        return 0.0
    n = np.arange(1, c.size + 1, dtype=float)
    return float(np.sqrt(np.sum(np.abs(c) ** 2 * n ** (2.0 * theta))))


# ---------------------------------------------------------------------------
# Potentials


class Potential:
    """Base class. ``segments()`` feeds the integration kernels."""

    kind = "abstract"

    def segments(self):
        """Return (breaks, offsets, slope, sine_coeffs) describing u piecewise."""
        raise NotImplementedError

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        breaks, offsets, slope, coeffs = self.segments()
        idx = np.clip(np.searchsorted(breaks, x, side="right") - 1, 0, offsets.size - 1)
        val = offsets[idx] + slope * x
        if coeffs.size:
            n = np.arange(1, coeffs.size + 1)
            val = val + np.sin(np.multiply.outer(x, n)) @ coeffs
        return val

    @property
    def is_real(self) -> bool:
        _, offsets, slope, coeffs = self.segments()
        return bool(
            np.all(np.imag(offsets) == 0) and np.imag(slope) == 0 and np.all(np.imag(coeffs) == 0)
        )

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(eq=False)
class SineSeries(Potential):
    """u(x) = sum_{n=1}^K u_n sin(n x)."""

    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)
    kind = "sine"

    def __post_init__(self):
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))

    @property
    def order(self) -> int:
        return int(self.coeffs.size)

    def segments(self):
        return np.array([0.0, math.pi]), np.zeros(1, dtype=complex), 0j, self.coeffs

    def __call__(self, x):
        return eval_series(self, x)

    def norm(self, theta: float) -> float:
        return l2theta_norm(self.coeffs, theta)

    def scaled(self, factor) -> "SineSeries":
        return SineSeries(self.coeffs * factor, dict(self.meta))

    def __add__(self, other):
        if not isinstance(other, SineSeries):
            return NotImplemented
        k = max(self.order, other.order)
        c = np.zeros(k, dtype=complex)
        c[: self.order] += self.coeffs
        c[: other.order] += other.coeffs
        return SineSeries(c)

    def to_dict(self):
        d = {"kind": "sine", "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs]}
        d.update(self.meta)
        return d


@dataclass(eq=False)
class StepPotential(Potential):
    """Piecewise-constant u with u(0) = 0, i.e. q = sum h_j delta(x - a_j)."""

    positions: np.ndarray
    heights: np.ndarray
    kind = "step"

    def __post_init__(self):
        self.positions = np.atleast_1d(np.asarray(self.positions, dtype=float))
        self.heights = np.atleast_1d(np.asarray(self.heights, dtype=complex))
        if self.positions.shape != self.heights.shape:
            raise ValueError("positions and heights must have equal length")
        if np.any(self.positions <= 0) or np.any(self.positions >= math.pi):
            raise ValueError("jump positions must lie strictly inside (0, pi)")
        if np.any(np.diff(self.positions) <= 0):
            raise ValueError("jump positions must be strictly increasing")

    def segments(self):
        breaks = np.concatenate([[0.0], self.positions, [math.pi]])
        offsets = np.concatenate([[0.0], np.cumsum(self.heights)]).astype(complex)
        return breaks, offsets, 0j, np.zeros(0, dtype=complex)

    def to_dict(self):
        return {
            "kind": "step",
            "jumps": [[float(a), float(h.real), float(h.imag)] for a, h in zip(self.positions, self.heights)],
        }


@dataclass(eq=False)
class AffinePotential(Potential):
    """u(x) = offset + slope * x, so q is the constant ``slope``.

    Used for the constant-potential oracle and the gauge check; a sine series
    of u(x) = x converges too slowly for those comparisons.
    """

    offset: complex = 0.0
    slope: complex = 0.0
    kind = "affine"

    def segments(self):
        return (
            np.array([0.0, math.pi]),
            np.array([complex(self.offset)]),
            complex(self.slope),
            np.zeros(0, dtype=complex),
        )

    def to_dict(self):
        o, s = complex(self.offset), complex(self.slope)
        return {"kind": "affine", "offset": [o.real, o.imag], "slope": [s.real, s.imag]}


def eval_series(s: SineSeries, x):
    """sum_n u_n sin(n x); exactly zero at x = 0 and x = pi."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xa = np.atleast_1d(x)
    if s.order == 0:
        val = np.zeros(xa.shape, dtype=complex)
    else:
        n = np.arange(1, s.order + 1)
        val = np.sin(np.multiply.outer(xa, n)) @ s.coeffs
    # sin(n*pi) is ~1e-16 in floating point, not zero
    val = np.where((xa == 0.0) | (xa == math.pi), 0.0, val)
    return complex(val[0]) if scalar else val


def random_in_ball(theta: float, R: float, K: int, seed: int, real: bool = False) -> SineSeries:
    """Random sine polynomial of order K with l2theta norm exactly R."""
    if not 0.0 < theta < 0.5:
        raise ValueError(f"theta must lie in (0, 1/2), got {theta}")
    if R < 0:
        raise ValueError(f"R must be nonnegative, got {R}")
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = np.random.default_rng(seed)
    n = np.arange(1, K + 1, dtype=float)
    if real:
        zeta = rng.uniform(-1.0, 1.0, K).astype(complex)
    else:
        r = np.sqrt(rng.uniform(0.0, 1.0, K))
        phi = rng.uniform(-math.pi, math.pi, K)
        zeta = r * np.exp(1j * phi)
    c = zeta * n ** -(theta + 0.5 + DECAY_DELTA)
    nrm = l2theta_norm(c, theta)
    c = c * (R / nrm) if R > 0 else np.zeros(K, dtype=complex)
    meta = {"theta": theta, "R": R, "seed": seed, "real": real, "norm": "l2theta"}
    return SineSeries(c, meta)


# ---------------------------------------------------------------------------
# Test functions f


def builtin_function(name: str, grid: Grid, seed: int = 0, degree: int | None = None):
    """Return (values, exact_l2_norm_or_None) for a named test function.

    ``parabola``  x(pi - x)
    ``step``      1 on [0, pi/2), 1/2 at pi/2, 0 after
    ``sine``      sin x
    ``random``    unit-norm sine polynomial, coefficients ~ n^-0.51
    """
    x = grid.x
    if name == "parabola":
        return x * (math.pi - x) + 0j, math.sqrt(math.pi**5 / 30.0)
    if name == "step":
        v = np.where(x < math.pi / 2, 1.0, 0.0)
        v[(grid.size - 1) // 2] = 0.5
        return v + 0j, math.sqrt(math.pi / 2)
    if name == "sine":
        return np.sin(x) + 0j, math.sqrt(math.pi / 2)
    if name == "random":
        deg = degree if degree is not None else (grid.size - 1) // 8
        v = random_rough_function(grid, deg, seed)
        return v, 1.0
    raise ValueError(f"unknown builtin function {name!r}")


def random_rough_function(grid: Grid, degree: int, seed: int, decay: float = 0.51) -> np.ndarray:
    """Seeded real sine polynomial with |a_n| ~ n^-decay, unit L2 norm (exact)."""
    rng = np.random.default_rng(seed)
    n = np.arange(1, degree + 1, dtype=float)
    a = rng.standard_normal(degree) * n**-decay
    a /= math.sqrt(math.pi / 2 * np.sum(a**2))
    return (a @ sine_basis(grid, degree)) + 0j


def parse_function_spec(spec: str, grid: Grid, degree: int | None = None):
    """``builtin:parabola`` / ``builtin:step`` / ``builtin:sine`` / ``random:<seed>``."""
    kind, _, arg = spec.partition(":")
    if kind == "builtin":
        return builtin_function(arg, grid)
    if kind == "random":
        return builtin_function("random", grid, seed=int(arg or 0), degree=degree)
    raise ValueError(f"cannot parse function spec {spec!r}")


# ---------------------------------------------------------------------------
# JSON


def potential_from_dict(d: dict) -> Potential:
    kind = d.get("kind")
    if kind == "sine":
        if "coeffs" in d:
            coeffs = [complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c) for c in d["coeffs"]]
            meta = {k: d[k] for k in ("theta", "R", "seed", "real", "norm") if k in d}
            return SineSeries(np.array(coeffs, dtype=complex), meta)
        return random_in_ball(d["theta"], d["R"], int(d.get("K", 64)), int(d["seed"]), bool(d.get("real", False)))
    if kind == "step":
        jumps = d["jumps"]
        pos = [j[0] for j in jumps]
        h = [complex(j[1], j[2] if len(j) > 2 else 0.0) for j in jumps]
        return StepPotential(pos, h)
    if kind == "affine":
        def _c(v):
            return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)

        return AffinePotential(_c(d.get("offset", 0.0)), _c(d.get("slope", 0.0)))
    if kind == "zero":
        return SineSeries(np.zeros(1))
    raise ValueError(f"unknown potential kind {kind!r}")


def load_potential(path) -> Potential:
    return potential_from_dict(json.loads(Path(path).read_text()))


def save_potential(u: Potential, path) -> None:
    Path(path).write_text(json.dumps(u.to_dict(), indent=2, sort_keys=True) + "\n")
