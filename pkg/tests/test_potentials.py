import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quasispec.potentials import (
    SQRT_2_OVER_PI,
    AffinePotential,
    Grid,
    GridFunction,
    SineSeries,
    StepPotential,
    builtin_function,
    eval_series,
    l2theta_norm,
    load_potential,
    parse_function_spec,
    potential_from_dict,
    random_in_ball,
    save_potential,
    sine_basis,
    sine_coeffs,
)

coeff_lists = st.lists(
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=1, max_size=30
)


# --- grid / quadrature -----------------------------------------------------

def test_grid_rejects_even_size():
    with pytest.raises(ValueError):
        Grid(100)


def test_simpson_weights_integrate_cubic_exactly():
    g = Grid(9)
    assert g.integrate(g.x**3) == pytest.approx(math.pi**4 / 4, rel=1e-14)


def test_grid_for_frequency():
    assert Grid.for_frequency(100).size == 1601


def test_gridfunction_shape_check():
    with pytest.raises(ValueError):
        GridFunction(Grid(5), np.zeros(4))


# --- eval_series -----------------------------------------------------------

def test_eval_series_single_harmonic():
    assert eval_series(SineSeries([1.0]), math.pi / 2) == pytest.approx(1.0)


def test_eval_series_two_harmonics():
    s = SineSeries([1.0, 0.5])
    assert eval_series(s, math.pi / 4) == pytest.approx(math.sqrt(2) / 2 + 0.5, abs=1e-15)


@given(coeff_lists)
def test_eval_series_vanishes_at_endpoints(c):
    s = SineSeries(c)
    assert eval_series(s, 0.0) == 0
    assert eval_series(s, math.pi) == 0


def test_eval_series_vectorized():
    s = SineSeries([1.0, 2.0])
    x = np.array([0.3, 1.1])
    expect = np.sin(x) + 2 * np.sin(2 * x)
    assert np.allclose(eval_series(s, x), expect, atol=1e-15)


# --- l2theta ---------------------------------------------------------------

def test_l2theta_unit():
    assert l2theta_norm([1.0], 0.3) == 1.0


def test_l2theta_empty():
    assert l2theta_norm([], 0.3) == 0.0


def test_l2theta_two_terms():
    assert l2theta_norm([1.0, 1.0], 0.5) == pytest.approx(math.sqrt(3), rel=1e-15)


@given(coeff_lists, st.floats(0.0, 0.99))
def test_l2theta_zero_theta_is_l2(c, theta):
    assert l2theta_norm(c, 0.0) == pytest.approx(np.linalg.norm(np.asarray(c)), rel=1e-12, abs=1e-300)


@given(coeff_lists, st.floats(0.0, 0.9), st.floats(0.0, 0.09))
def test_l2theta_monotone_in_theta(c, theta, dt):
    c = [0] + list(c)  # supported on n >= 2
    assert l2theta_norm(c, theta) <= l2theta_norm(c, theta + dt) * (1 + 1e-12)


# --- random_in_ball --------------------------------------------------------

def test_random_in_ball_norm():
    s = random_in_ball(0.3, 1.0, 64, 7)
    assert abs(s.norm(0.3) - 1.0) < 1e-12


def test_random_in_ball_zero_radius():
    s = random_in_ball(0.3, 0.0, 64, 7)
    assert np.all(s.coeffs == 0)


def test_random_in_ball_deterministic():
    a = random_in_ball(0.3, 1.0, 64, 7)
    b = random_in_ball(0.3, 1.0, 64, 7)
    assert np.array_equal(a.coeffs, b.coeffs)


def test_random_in_ball_real_mode():
    s = random_in_ball(0.3, 1.0, 32, 3, real=True)
    assert s.is_real
    assert np.all(s.coeffs.imag == 0)


@pytest.mark.parametrize("theta,R", [(0.0, 1.0), (0.5, 1.0), (0.3, -1.0)])
def test_random_in_ball_rejects(theta, R):
    with pytest.raises(ValueError):
        random_in_ball(theta, R, 8, 0)


@given(st.integers(0, 10_000), st.floats(0.01, 0.29))
def test_random_in_ball_in_smaller_balls(seed, theta_lo):
    s = random_in_ball(0.3, 1.0, 64, seed)
    assert s.norm(theta_lo) <= 1.0 + 1e-12


# --- sine coefficients -----------------------------------------------------

def test_sine_coeffs_of_sin_x():
    g = Grid(2049)
    c = sine_coeffs(GridFunction(g, np.sin(g.x)), 20)
    assert abs(c[0] - math.sqrt(math.pi / 2)) < 1e-8
    assert np.max(np.abs(c[1:])) < 1e-8


def test_sine_coeffs_of_zero():
    g = Grid(257)
    assert np.all(sine_coeffs(GridFunction(g, np.zeros(g.size)), 30) == 0)


def test_sine_coeffs_parabola_closed_form():
    # int_0^pi x(pi - x) sin nx dx = 2(1 - (-1)^n)/n^3 (checked with mpmath quadrature)
    g = Grid(4097)
    c = sine_coeffs(GridFunction(g, g.x * (math.pi - g.x)), 100)
    n = np.arange(1, 101)
    exact = SQRT_2_OVER_PI * 2 * (1 - (-1.0) ** n) / n**3
    assert np.max(np.abs(c - exact)) < 1e-6


def test_sine_coeffs_too_fine():
    with pytest.raises(ValueError):
        sine_coeffs(GridFunction(Grid(101), np.zeros(101)), 26)


def test_parabola_resynthesis_converges():
    g = Grid(1601)
    f = g.x * (math.pi - g.x)
    c = sine_coeffs(GridFunction(g, f), 100)
    approx = SQRT_2_OVER_PI * c @ sine_basis(g, 100)
    assert g.norm(f - approx) < 1e-4


# --- step / affine potentials ------------------------------------------------

def test_step_potential_values():
    u = StepPotential([1.0, 2.0], [1.0, -0.5])
    assert np.allclose(u(np.array([0.5, 1.5, 2.5])), [0.0, 1.0, 0.5])


@pytest.mark.parametrize("pos,h", [([0.0], [1.0]), ([math.pi], [1.0]), ([2.0, 1.0], [1, 1]), ([1.0], [1, 2])])
def test_step_potential_validation(pos, h):
    with pytest.raises(ValueError):
        StepPotential(pos, h)


def test_affine_potential():
    u = AffinePotential(0.5, 2.0)
    assert u(1.0) == pytest.approx(2.5)


# --- JSON round trips ---------------------------------------------------------

@pytest.mark.parametrize(
    "u",
    [
        SineSeries([1 + 2j, 0.5]),
        StepPotential([math.pi / 2], [1.0]),
        AffinePotential(0.0, 1.0),
        random_in_ball(0.3, 1.0, 16, 5),
    ],
)
def test_potential_json_round_trip(u, tmp_path):
    p = tmp_path / "u.json"
    save_potential(u, p)
    v = load_potential(p)
    x = np.linspace(0.1, 3.0, 7)
    assert np.allclose(u(x), v(x), atol=0, rtol=0)


def test_potential_from_parameters():
    u = potential_from_dict({"kind": "sine", "theta": 0.3, "R": 1.0, "K": 64, "seed": 7})
    assert np.array_equal(u.coeffs, random_in_ball(0.3, 1.0, 64, 7).coeffs)


def test_potential_unknown_kind():
    with pytest.raises(ValueError):
        potential_from_dict(json.loads('{"kind": "spline"}'))


# --- test functions ---------------------------------------------------------------

@pytest.mark.parametrize("name", ["parabola", "step", "sine", "random"])
def test_builtin_norms(name):
    g = Grid(3201)
    v, exact = builtin_function(name, g, seed=3, degree=200)
    assert g.norm(v) == pytest.approx(exact, rel=2e-3)


def test_function_spec_parse():
    g = Grid(161)
    v, _ = parse_function_spec("random:4", g, degree=10)
    w, _ = parse_function_spec("random:4", g, degree=10)
    assert np.array_equal(v, w)
    with pytest.raises(ValueError):
        parse_function_spec("nope", g)
