"""Hot loops: Dormand-Prince 5(4) integration of the quasi-derivative system.

State layout (complex, length 4): ``(y, y1, y_lam, y1_lam)`` where
``y1 = y' - u*y`` is the quasi-derivative and the last two entries are
derivatives with respect to the spectral parameter.

The potential enters only through ``u`` on each smooth segment::

    u(x) = offset[s] + slope * x + sum_k coeffs[k] * sin((k + 1) * x)

for ``breaks[s] <= x <= breaks[s + 1]``. Segment ends are mandatory mesh
points; the state is carried across them unchanged.

Two interchangeable implementations live here.  The numba one integrates
each spectral parameter with its own adaptive step.  The numpy one
integrates the whole batch in lock-step with a shared step, so its results
agree with the numba path to the integration tolerance, not bit-for-bit.
"""
import math

import numpy as np

from . import _backend

# Dormand-Prince 5(4) tableau.
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
MAX_STEPS = 50_000_000

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2


def rhs_value(state, u, lam):
    """Right-hand side for a single state; ``state`` may be a (..., 4) array."""
    state = np.asarray(state, dtype=complex)
    y, y1, yl, y1l = state[..., 0], state[..., 1], state[..., 2], state[..., 3]
    v = lam + u * u
    return np.stack(
        [u * y + y1, -v * y - u * y1, u * yl + y1l, -v * yl - u * y1l - y], axis=-1
    )


def _initial_step(lam):
    return min(0.05, 0.2 / math.sqrt(max(1.0, abs(lam))))


# ---------------------------------------------------------------------------
# numpy path


def _u_numpy(x, off, slope, coeffs, nvec):
    val = off + slope * x
    if coeffs.size:
        val = val + np.dot(coeffs, np.sin(nvec * x))
    return val


def _rhs_numpy(x, s, lam, off, slope, coeffs, nvec):
    u = _u_numpy(x, off, slope, coeffs, nvec)
    v = lam + u * u
    out = np.empty_like(s)
    out[:, 0] = u * s[:, 0] + s[:, 1]
    out[:, 1] = -v * s[:, 0] - u * s[:, 1]
    out[:, 2] = u * s[:, 2] + s[:, 3]
    out[:, 3] = -v * s[:, 2] - u * s[:, 3] - s[:, 0]
    return out


def _err_norm_numpy(err, s0, s1, wt, atol, rtol):
    sa = atol + rtol * np.maximum(
        np.maximum(np.abs(s0[:, 0]) * wt, np.abs(s0[:, 1])),
        np.maximum(np.abs(s1[:, 0]) * wt, np.abs(s1[:, 1])),
    )
    sb = atol + rtol * np.maximum(
        np.maximum(np.abs(s0[:, 2]) * wt, np.abs(s0[:, 3])),
        np.maximum(np.abs(s1[:, 2]) * wt, np.abs(s1[:, 3])),
    )
    e = np.maximum(
        np.maximum(np.abs(err[:, 0]) * wt, np.abs(err[:, 1])) / sa,
        np.maximum(np.abs(err[:, 2]) * wt, np.abs(err[:, 3])) / sb,
    )
    return float(e.max()) if e.size else 0.0


def integrate_batch_numpy(lams, breaks, offsets, slope, coeffs, x_out, atol, rtol):
    lams = np.asarray(lams, dtype=np.complex128)
    nb = lams.size
    n_out = x_out.size
    out = np.zeros((nb, n_out, 4), dtype=np.complex128)
    status = np.zeros(nb, dtype=np.int64)
    fail_x = np.zeros(nb)
    nsteps = np.zeros(nb, dtype=np.int64)
    s = np.zeros((nb, 4), dtype=np.complex128)
    s[:, 1] = 1.0
    if nb == 0:
        return s, out, status, fail_x, nsteps
    nvec = np.arange(1, coeffs.size + 1, dtype=float)
    wt = np.sqrt(np.maximum(1.0, np.abs(lams)))
    x = float(breaks[0])
    j = 0
    while j < n_out and x_out[j] <= x:
        out[:, j] = s
        j += 1
    h = _initial_step(float(np.max(np.abs(lams))))
    steps = 0
    lam = lams
    for seg in range(offsets.size):
        off = offsets[seg]
        x_end = float(breaks[seg + 1])
        k1 = _rhs_numpy(x, s, lam, off, slope, coeffs, nvec)
        while x < x_end:
            target = x_end if j >= n_out else min(x_end, float(x_out[j]))
            hit = h >= target - x
            ht = target - x if hit else h
            k2 = _rhs_numpy(x + C2 * ht, s + ht * (A21 * k1), lam, off, slope, coeffs, nvec)
            k3 = _rhs_numpy(x + C3 * ht, s + ht * (A31 * k1 + A32 * k2), lam, off, slope, coeffs, nvec)
            k4 = _rhs_numpy(
                x + C4 * ht, s + ht * (A41 * k1 + A42 * k2 + A43 * k3), lam, off, slope, coeffs, nvec
            )
            k5 = _rhs_numpy(
                x + C5 * ht,
                s + ht * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
                lam, off, slope, coeffs, nvec,
            )
            k6 = _rhs_numpy(
                x + ht,
                s + ht * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
                lam, off, slope, coeffs, nvec,
            )
            s_new = s + ht * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
            x_new = target if hit else x + ht
            k7 = _rhs_numpy(x_new, s_new, lam, off, slope, coeffs, nvec)
            err = ht * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            en = _err_norm_numpy(err, s, s_new, wt, atol, rtol)
            steps += 1
            if en <= 1.0:
                x, s, k1 = x_new, s_new, k7
                while j < n_out and x_out[j] <= x + 1e-14:
                    out[:, j] = s
                    j += 1
                fac = MAX_FACTOR if en == 0.0 else min(MAX_FACTOR, SAFETY * en ** -0.2)
                if not hit:
                    h = ht * fac
                elif fac < 1.0:
                    h = min(h, ht * fac)
            else:
                h = ht * max(MIN_FACTOR, SAFETY * en ** -0.2)
                if h < 1e-14 * (1.0 + abs(x)):
                    status[:] = STATUS_UNDERFLOW
                    fail_x[:] = x
                    nsteps[:] = steps
                    return s, out, status, fail_x, nsteps
    nsteps[:] = steps
    return s, out, status, fail_x, nsteps


# ---------------------------------------------------------------------------
# numba path

if _backend.HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _u_nb(x, off, slope, coeffs):
        val = off + slope * x
        k = coeffs.size
        if k > 0:
            s1 = math.sin(x)
            c2 = 2.0 * math.cos(x)
            s0 = 0.0
            for i in range(k):
                val += coeffs[i] * s1
                s0, s1 = s1, c2 * s1 - s0
        return val

    @njit(cache=True)
    def _rhs_nb(x, s, lam, off, slope, coeffs, out):
        u = _u_nb(x, off, slope, coeffs)
        v = lam + u * u
        out[0] = u * s[0] + s[1]
        out[1] = -v * s[0] - u * s[1]
        out[2] = u * s[2] + s[3]
        out[3] = -v * s[2] - u * s[3] - s[0]

    @njit(cache=True)
    def _integrate_one_nb(lam, breaks, offsets, slope, coeffs, x_out, atol, rtol, out):
        s = np.zeros(4, dtype=np.complex128)
        s[1] = 1.0
        tmp = np.empty(4, dtype=np.complex128)
        s_new = np.empty(4, dtype=np.complex128)
        k1 = np.empty(4, dtype=np.complex128)
        k2 = np.empty(4, dtype=np.complex128)
        k3 = np.empty(4, dtype=np.complex128)
        k4 = np.empty(4, dtype=np.complex128)
        k5 = np.empty(4, dtype=np.complex128)
        k6 = np.empty(4, dtype=np.complex128)
        k7 = np.empty(4, dtype=np.complex128)
        wt = math.sqrt(max(1.0, abs(lam)))
        n_out = x_out.size
        x = breaks[0]
        j = 0
        while j < n_out and x_out[j] <= x:
            for i in range(4):
                out[j, i] = s[i]
            j += 1
        h = min(0.05, 0.2 / wt)
        steps = 0
        for seg in range(offsets.size):
            off = offsets[seg]
            x_end = breaks[seg + 1]
            _rhs_nb(x, s, lam, off, slope, coeffs, k1)
            while x < x_end:
                if j < n_out and x_out[j] < x_end:
                    target = x_out[j]
                else:
                    target = x_end
                hit = h >= target - x
                ht = target - x if hit else h
                for i in range(4):
                    tmp[i] = s[i] + ht * (A21 * k1[i])
                _rhs_nb(x + C2 * ht, tmp, lam, off, slope, coeffs, k2)
                for i in range(4):
                    tmp[i] = s[i] + ht * (A31 * k1[i] + A32 * k2[i])
                _rhs_nb(x + C3 * ht, tmp, lam, off, slope, coeffs, k3)
                for i in range(4):
                    tmp[i] = s[i] + ht * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
                _rhs_nb(x + C4 * ht, tmp, lam, off, slope, coeffs, k4)
                for i in range(4):
                    tmp[i] = s[i] + ht * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
                _rhs_nb(x + C5 * ht, tmp, lam, off, slope, coeffs, k5)
                for i in range(4):
                    tmp[i] = s[i] + ht * (
                        A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]
                    )
                _rhs_nb(x + ht, tmp, lam, off, slope, coeffs, k6)
                for i in range(4):
                    s_new[i] = s[i] + ht * (
                        B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]
                    )
                x_new = target if hit else x + ht
                _rhs_nb(x_new, s_new, lam, off, slope, coeffs, k7)
                ea = 0.0
                eb = 0.0
                for i in range(4):
                    e = abs(
                        ht * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                    )
                    if i == 0 or i == 2:
                        e *= wt
                    if i < 2:
                        ea = max(ea, e)
                    else:
                        eb = max(eb, e)
                sa = atol + rtol * max(
                    max(abs(s[0]) * wt, abs(s[1])), max(abs(s_new[0]) * wt, abs(s_new[1]))
                )
                sb = atol + rtol * max(
                    max(abs(s[2]) * wt, abs(s[3])), max(abs(s_new[2]) * wt, abs(s_new[3]))
                )
                en = max(ea / sa, eb / sb)
                steps += 1
                if steps > MAX_STEPS:
                    return s, STATUS_MAX_STEPS, x, steps
                if en <= 1.0:
                    x = x_new
                    for i in range(4):
                        s[i] = s_new[i]
                        k1[i] = k7[i]
                    while j < n_out and x_out[j] <= x + 1e-14:
                        for i in range(4):
                            out[j, i] = s[i]
                        j += 1
                    if en == 0.0:
                        fac = MAX_FACTOR
                    else:
                        fac = min(MAX_FACTOR, SAFETY * en ** -0.2)
                    if not hit:
                        h = ht * fac
                    elif fac < 1.0:
                        h = min(h, ht * fac)
                else:
                    h = ht * max(MIN_FACTOR, SAFETY * en ** -0.2)
                    if h < 1e-14 * (1.0 + abs(x)):
                        return s, STATUS_UNDERFLOW, x, steps
        return s, STATUS_OK, x, steps

    @njit(cache=True)
    def _integrate_batch_nb(lams, breaks, offsets, slope, coeffs, x_out, atol, rtol):
        nb = lams.size
        n_out = x_out.size
        out = np.zeros((nb, n_out, 4), dtype=np.complex128)
        ends = np.zeros((nb, 4), dtype=np.complex128)
        status = np.zeros(nb, dtype=np.int64)
        fail_x = np.zeros(nb)
        nsteps = np.zeros(nb, dtype=np.int64)
        for b in range(nb):
            s, st, xf, ns = _integrate_one_nb(
                lams[b], breaks, offsets, slope, coeffs, x_out, atol, rtol, out[b]
            )
            for i in range(4):
                ends[b, i] = s[i]
            status[b] = st
            fail_x[b] = xf
            nsteps[b] = ns
        return ends, out, status, fail_x, nsteps


def integrate_batch(lams, breaks, offsets, slope, coeffs, x_out, atol, rtol, backend=None):
    """Integrate the Cauchy problem for every spectral parameter in ``lams``.

    Returns ``(end_states, samples, status, fail_x, nsteps)`` with
    ``end_states`` of shape (B, 4) at ``x = breaks[-1]`` and ``samples`` of
    shape (B, len(x_out), 4).
    """
    if backend is None:
        backend = _backend.backend_name()
    lams = np.ascontiguousarray(np.atleast_1d(lams), dtype=np.complex128)
    breaks = np.ascontiguousarray(breaks, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.complex128)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    x_out = np.ascontiguousarray(x_out, dtype=np.float64)
    slope = complex(slope)
    if backend == "numba":
        if not _backend.HAS_NUMBA:  # pragma: no cover
            raise RuntimeError("numba backend requested but numba is not installed")
        return _integrate_batch_nb(lams, breaks, offsets, slope, coeffs, x_out, atol, rtol)
    if backend == "numpy":
        return integrate_batch_numpy(lams, breaks, offsets, slope, coeffs, x_out, atol, rtol)
    raise ValueError(f"unknown backend {backend!r}")
