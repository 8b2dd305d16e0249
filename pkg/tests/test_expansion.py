import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quasispec import expansion
from quasispec.expansion import (
    RangeError,
    bm_operator_norm,
    coefficients,
    defect,
    defect_profile,
    empirical_bm_norm,
    equiconv_report,
    m_emp,
    projection,
    read_report_csv,
    rhs_bound,
)
from quasispec.potentials import SQRT_2_OVER_PI, Grid, SineSeries, builtin_function, random_in_ball, sine_basis
from quasispec.spectrum import compute_spectrum


@pytest.fixture(scope="module")
def free():
    return compute_spectrum(SineSeries([0.0]), 40)


@pytest.fixture(scope="module")
def ball():
    return compute_spectrum(random_in_ball(0.3, 1.0, 64, 1), 40)


def test_coefficients_free_sin2x(free):
    g = free.grid
    co = coefficients(np.sin(2 * g.x), free, 10)
    e = np.zeros(10)
    e[1] = math.sqrt(math.pi / 2)
    assert np.max(np.abs(co.c - e)) < 1e-10
    assert abs(co.c0[1] - math.sqrt(math.pi / 2)) < 1e-10


def test_coefficients_of_eigenfunction(ball):
    co = coefficients(ball.Y[4], ball, 20)
    e = np.zeros(20)
    e[4] = 1
    assert np.max(np.abs(co.c - e)) < 1e-6


def test_parseval(ball):
    v, exact = builtin_function("parabola", ball.grid)
    co = coefficients(v, ball, 40, exact)
    assert np.sum(np.abs(co.c0) ** 2) <= exact**2 * (1 + 1e-9)
    assert co.tail_cap() >= 0


def test_coefficients_range(ball):
    with pytest.raises(RangeError):
        coefficients(np.zeros(ball.grid.size), ball, 41)


@pytest.mark.parametrize("name", ["parabola", "step", "random"])
def test_free_defect_vanishes(free, name):
    v, _ = builtin_function(name, free.grid, seed=2, degree=80)
    d = defect_profile(coefficients(v, free, 40), free)
    assert np.max(d) < 1e-7


def test_defect_of_eigenfunction_decays(ball):
    k = 5
    f = ball.Y[k - 1]
    assert defect(f, ball, 4 * k) < defect(f, ball, k)


def test_defect_grid_check():
    sp = compute_spectrum(SineSeries([0.0]), 10, grid=Grid(101))
    with pytest.raises(RangeError):
        defect(np.zeros(101), sp, 10)


def test_defect_profile_matches_direct(ball):
    g = ball.grid
    v, _ = builtin_function("step", g)
    co = coefficients(v, ball, 15)
    d = defect_profile(co, ball, 15)
    m = 9
    direct = co.c[:m] @ ball.Y[:m] - SQRT_2_OVER_PI * co.c0[:m] @ sine_basis(g, m)
    assert d[m - 1] == pytest.approx(np.max(np.abs(direct)), rel=1e-12)


@given(st.integers(0, 1000), st.integers(0, 1000), st.integers(1, 40))
def test_defect_subadditive(ball, s1, s2, m):
    g = ball.grid
    f = expansion.random_unit_functions(g, 30, 1, s1)[0]
    h = expansion.random_unit_functions(g, 30, 1, s2)[0]
    assert defect(f + h, ball, m) <= defect(f, ball, m) + defect(h, ball, m) + 1e-9


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3), st.integers(1, 40))
def test_defect_scale_equivariant(ball, c, m):
    f, _ = builtin_function("parabola", ball.grid)
    assert defect(c * f, ball, m) == pytest.approx(abs(c) * defect(f, ball, m), rel=1e-10)


def test_rhs_bound_single_harmonic(free):
    g = free.grid
    co = coefficients(np.sin(g.x), free, 40, math.sqrt(math.pi / 2))
    tail, rate, total = rhs_bound(co, 100, 0.3, 0.05)
    assert tail < 1e-6
    assert rate == pytest.approx(math.sqrt(math.pi / 2) / 100**0.1, rel=1e-9)


def test_rhs_bound_zero(free):
    co = coefficients(np.zeros(free.grid.size), free, 10, 0.0)
    assert rhs_bound(co, 50, 0.3, 0.05) == (0.0, 0.0, 0.0)


def test_rhs_bound_parabola_tail_closed_form():
    g = Grid(3201)
    sp = compute_spectrum(SineSeries([0.0]), 1, grid=g)
    v, exact = builtin_function("parabola", g)
    co = coefficients(v, sp, 1, exact)
    tail, _, _ = rhs_bound(co, 100, 0.3, 0.05)
    # |c_{n,0}|^2 = (2/pi) * 16/n^6 for odd n; sum from n = 10 to infinity
    n = np.arange(11, 2_000_001, 2, dtype=float)
    ref = math.sqrt(np.sum(2 / math.pi * 16 / n**6))
    assert abs(tail - ref) < 1e-10


@pytest.mark.parametrize("eps", [0.0, 0.15, -0.1])
def test_rhs_bound_invalid_eps(free, eps):
    co = coefficients(np.zeros(free.grid.size), free, 10)
    with pytest.raises(ValueError):
        rhs_bound(co, 10, 0.3, eps)


def test_m_emp():
    r = np.r_[np.linspace(10, 1, 20), np.ones(30)]
    # r[18] = 1.47 is the first window head within 50% of the floor value 1
    assert m_emp(r, np.arange(1, 51)) == 28
    assert m_emp(np.arange(1, 6), np.arange(1, 6)) == 5


def test_report_csv_round_trip(ball, tmp_path):
    v, exact = builtin_function("parabola", ball.grid)
    rep = equiconv_report(v, ball, 0.3, 0.05, 40, exact)
    p = tmp_path / "r.csv"
    rep.to_csv(p)
    back = read_report_csv(p)
    assert np.array_equal(back.ratio, rep.ratio) and np.array_equal(back.m, rep.m)
    assert np.all(rep.ratio >= 0) and np.all(np.isfinite(rep.ratio))


def test_empirical_bm_free(free):
    assert empirical_bm_norm(free, 10, 5, 0) < 1e-7


def test_empirical_below_operator_norm(ball):
    for m in (5, 10, 20):
        assert empirical_bm_norm(ball, m, 10, 3) <= bm_operator_norm(ball, m) * (1 + 1e-9)


def test_operator_norm_attained(ball):
    # the maximizing f is the kernel K_x itself; check that norm against a direct defect
    m = 8
    g = ball.grid
    S = sine_basis(g, m)
    q = []
    for i in range(0, g.size, 7):
        K = np.conj(ball.Y[:m, i]) @ ball.W[:m] - (2 / math.pi) * S[:, i] @ S
        q.append(g.norm(K))
    assert max(q) <= bm_operator_norm(ball, m) * (1 + 1e-9)


def test_random_unit_functions_unit_norm():
    g = Grid(801)
    F = expansion.random_unit_functions(g, 40, 3, 0)
    assert np.allclose(g.norm(F), 1, atol=1e-10)


def test_empirical_bm_trials():
    sp = compute_spectrum(SineSeries([0.0]), 2)
    with pytest.raises(ValueError):
        empirical_bm_norm(sp, 1, 0, 0)


def test_projection_free_is_fourier(free):
    g = free.grid
    v, _ = builtin_function("parabola", g)
    P = projection(v, free, 15)
    n = np.arange(1, 16)
    c0 = (2 / math.pi) * (np.sin(np.outer(n, g.x)) * g.weights) @ v
    assert np.max(np.abs(P.values - c0 @ np.sin(np.outer(n, g.x)))) < 1e-8


def test_projection_reproduces_y_polynomial(ball):
    f = 2 * ball.Y[0] - 1j * ball.Y[6]
    P = projection(f, ball, 10)
    assert np.max(np.abs(P.values - f)) < 1e-6


def test_projection_derivative_free(free):
    g = free.grid
    P = projection(np.sin(3 * g.x), free, 5)
    assert np.max(np.abs(P.derivative - 3 * np.cos(3 * g.x))) < 1e-7
    assert P.w21_norm() == pytest.approx(math.sqrt(math.pi / 2 * 10), rel=1e-8)
