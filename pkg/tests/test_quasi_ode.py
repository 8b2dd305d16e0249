import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quasispec import _kernels
from quasispec._backend import HAS_NUMBA
from quasispec.potentials import AffinePotential, SineSeries, StepPotential, random_in_ball
from quasispec.quasi_ode import QuasiState, StepUnderflowError, char_value, char_values, integrate_cauchy, rhs

ZERO = SineSeries([0.0])
backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])


# --- right-hand side -------------------------------------------------------

def test_rhs_free_at_origin():
    d = rhs(np.array([0, 1, 0, 0], dtype=complex), 0.0, 1.0)
    assert np.allclose(d[:2], [1, 0])


@given(st.complex_numbers(max_magnitude=100), st.complex_numbers(max_magnitude=100))
def test_rhs_slope_at_origin_ignores_u(c, lam):
    d = rhs(np.array([0, 1, 0, 0], dtype=complex), c, lam)
    assert d[0] == 1


def test_rhs_harmonic_oscillator():
    d = rhs(np.array([1, 0, 0, 0], dtype=complex), 0.0, 4.0)
    assert np.allclose(d[:2], [0, -4])


def test_rhs_variational_rows():
    s = np.array([0.3, 0.7, 0.2, -0.1], dtype=complex)
    u, lam = 0.5, 2.0
    d = rhs(s, u, lam)
    assert d[2] == pytest.approx(u * 0.2 - 0.1)
    assert d[3] == pytest.approx(-(lam + u * u) * 0.2 - u * (-0.1) - 0.3)


def test_state_derivative():
    st0 = QuasiState(0.0, 0j, 1 + 0j)
    d = st0.derivative(0.0, 1.0)
    assert d.y == 1 and d.y1 == 0


# --- integration -------------------------------------------------------------

@pytest.mark.parametrize("backend", backends)
def test_free_solution(backend):
    tr = integrate_cauchy(ZERO, 1.0, backend=backend)
    assert np.max(np.abs(tr.y - np.sin(tr.x))) < 1e-9
    assert np.max(np.abs(tr.y1 - np.cos(tr.x))) < 1e-9
    assert abs(tr.y[-1]) < 1e-9


def test_free_solution_lambda_4():
    tr = integrate_cauchy(ZERO, 4.0)
    assert np.max(np.abs(tr.y - np.sin(2 * tr.x) / 2)) < 1e-8


@pytest.mark.parametrize("backend", backends)
def test_delta_transfer_oracle(backend):
    # mpmath: (sin(k pi) + (1/k) sin(k a) sin(k(pi - a))) / k at k = 1.3, a = pi/2
    u = StepPotential([math.pi / 2], [1.0])
    w, _ = char_value(u, 1.3**2, backend=backend)
    assert abs(w - (-0.15256181452141721)) < 1e-8


def test_initial_state():
    tr = integrate_cauchy(random_in_ball(0.3, 1.0, 16, 0), 3.0)
    s = tr[0]
    assert (s.x, s.y, s.y1, s.y_lam, s.y1_lam) == (0.0, 0, 1, 0, 0)


def test_trajectory_x_increasing():
    tr = integrate_cauchy(ZERO, 2.0)
    assert tr.x[0] == 0 and tr.x[-1] == pytest.approx(math.pi)
    assert np.all(np.diff(tr.x) > 0)


@pytest.mark.parametrize("lam", [1.0, 4.0, 9.0])
def test_gauge_invariance(lam):
    a = integrate_cauchy(ZERO, lam)
    b = integrate_cauchy(AffinePotential(5.0, 0.0), lam)
    assert np.max(np.abs(a.y - b.y)) < 1e-8
    assert np.max(np.abs((a.y1 - 5.0 * a.y) - b.y1)) < 1e-8


def test_jump_in_classical_derivative():
    a, h = 1.0, 0.7 - 0.2j
    u = StepPotential([a], [h])
    eps = 1e-9
    x = np.array([a - eps, a, a + eps])
    tr = integrate_cauchy(u, 6.0, x_out=x)
    y, y1 = tr.y, tr.y1
    # quasi-state is continuous, y' = y1 + u*y jumps by h*y(a)
    assert abs(y[2] - y[0]) < 1e-8 and abs(y1[2] - y1[0]) < 1e-8
    jump = (y1[2] + h * y[2]) - (y1[0] + 0 * y[0])
    assert abs(jump - h * y[1]) < 1e-8


def test_free_lambda_derivative_closed_form():
    # d/dlam [sin(k pi)/k] at k = 1: (pi cos(pi) - sin(pi)) / 2 = -pi/2
    _, wl = char_value(ZERO, 1.0)
    assert abs(wl - (-math.pi / 2)) < 1e-6


def test_lambda_derivative_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-5
    for i in range(10):
        u = random_in_ball(0.3, 1.0, 32, int(rng.integers(1000)))
        lam = complex(rng.uniform(0.5, 60), rng.uniform(-3, 3))
        _, wl = char_value(u, lam)
        wp, _ = char_value(u, lam + h)
        wm, _ = char_value(u, lam - h)
        fd = (wp - wm) / (2 * h)
        assert abs(wl - fd) / abs(wl) < 1e-5


def test_halving_tol():
    u = random_in_ball(0.3, 1.0, 32, 2)
    tol = 1e-9
    a, _ = char_value(u, 17.3, tol=tol)
    b, _ = char_value(u, 17.3, tol=tol / 2)
    assert abs(a - b) < 10 * tol


def test_char_values_batch_matches_scalar():
    u = random_in_ball(0.3, 1.0, 16, 4)
    lams = [1.0, 5.0 + 1j, 30.0]
    w, wl = char_values(u, lams)
    for i, lam in enumerate(lams):
        a, b = char_value(u, lam)
        assert abs(w[i] - a) < 1e-12 and abs(wl[i] - b) < 1e-12


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
def test_backends_agree():
    u = random_in_ball(0.3, 1.0, 64, 9)
    lams = np.array([1.0, 50.0 + 2j, 400.0])
    x = np.linspace(0, math.pi, 65)
    from quasispec.quasi_ode import integrate_batch

    e1, o1 = integrate_batch(u, lams, 1e-12, x, backend="numba")
    e2, o2 = integrate_batch(u, lams, 1e-12, x, backend="numpy")
    assert np.max(np.abs(e1 - e2) / (1 + np.abs(e1))) < 1e-9
    assert np.max(np.abs(o1 - o2) / (1 + np.abs(o1))) < 1e-9


def test_bad_tol():
    with pytest.raises(ValueError):
        integrate_cauchy(ZERO, 1.0, tol=0)


def test_underflow_reported():
    breaks, offsets, slope, coeffs = ZERO.segments()
    # a huge lambda with an absurd tolerance cannot be resolved within the step floor
    ends, out, status, fail_x, _ = _kernels.integrate_batch(
        np.array([1e30 + 0j]), breaks, offsets, slope, coeffs, np.zeros(0), 1e-300, 1e-300, backend="numpy"
    )
    assert status[0] != _kernels.STATUS_OK
    with pytest.raises(StepUnderflowError):
        integrate_cauchy(ZERO, 1e30, tol=1e-300)


def test_trajectory_csv(tmp_path):
    tr = integrate_cauchy(ZERO, 1.0, x_out=np.linspace(0, math.pi, 5))
    p = tmp_path / "t.csv"
    tr.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,re_y,im_y,re_y1,im_y1" and len(lines) == 6


@pytest.mark.parametrize("value,expect", [("1", "numpy"), ("0", None)])
def test_env_flag_selects_backend(value, expect):
    import os
    import subprocess
    import sys

    env = {**os.environ, "QUASISPEC_DISABLE_NUMBA": value}
    r = subprocess.run([sys.executable, "-c", "from quasispec import backend_name; print(backend_name())"],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0
    assert r.stdout.strip() == (expect or ("numba" if HAS_NUMBA else "numpy"))
