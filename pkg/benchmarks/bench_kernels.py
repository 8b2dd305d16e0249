"""Time the shooting kernels on both backends.

    python benchmarks/bench_kernels.py --n 100 --repeat 3

The numba kernel adapts its step per lambda; the numpy kernel advances the
whole batch with one shared step. Both are checked for agreement.
"""
import argparse
import statistics
import time

import numpy as np

from quasispec import _kernels
from quasispec._backend import HAS_NUMBA
from quasispec.potentials import Grid, random_in_ball
from quasispec.spectrum import find_eigenvalues


def timed(fn, repeat):
    out, ts = None, []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        ts.append(time.perf_counter() - t0)
    return out, statistics.median(ts)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=100, help="number of eigenvalues / lambdas")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--tol", type=float, default=1e-12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    u = random_in_ball(0.3, 1.0, 64, args.seed)
    lams = (np.arange(1, args.n + 1) ** 2).astype(complex)
    x_out = Grid.for_frequency(args.n).x
    seg = u.segments()
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    if HAS_NUMBA:
        # compile outside the timed region
        _kernels.integrate_batch(lams[:2], *seg, x_out[:3], args.tol, args.tol, backend="numba")

    rows, ends = [], {}
    for b in backends:
        res, t_end = timed(lambda: _kernels.integrate_batch(lams, *seg, np.zeros(0), args.tol, args.tol, backend=b),
                           args.repeat)
        ends[b] = res[0]
        _, t_grid = timed(lambda: _kernels.integrate_batch(lams, *seg, x_out, args.tol, args.tol, backend=b),
                          args.repeat)
        _, t_eig = timed(lambda: find_eigenvalues(u, args.n, backend=b), 1)
        rows.append((b, t_end, t_grid, t_eig))

    print(f"n={args.n} tol={args.tol:g} grid={x_out.size} repeat={args.repeat}")
    print(f"{'backend':8s} {'endpoint [s]':>13s} {'sampled [s]':>12s} {'eigenvalues [s]':>16s}")
    for b, t1, t2, t3 in rows:
        print(f"{b:8s} {t1:13.3f} {t2:12.3f} {t3:16.3f}")
    if len(rows) == 2:
        print(f"speedup numba/numpy: endpoint {rows[0][1] / rows[1][1]:.1f}x, "
              f"sampled {rows[0][2] / rows[1][2]:.1f}x, eigenvalues {rows[0][3] / rows[1][3]:.1f}x")
        diff = np.max(np.abs(ends["numba"] - ends["numpy"]) / (1 + np.abs(ends["numba"])))
        print(f"max relative endpoint difference: {diff:.2e}")


if __name__ == "__main__":
    main()
