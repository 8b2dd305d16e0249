"""Command line entry point.

    quasispec spectrum    --potential u.json --n-max 100 --out spectrum.json
    quasispec asymptotics --spectrum spectrum.json --out asym.csv
    quasispec equiconv    --spectrum spectrum.json --f builtin:parabola --m-max 100
    quasispec bnorm       --spectrum spectrum.json --m 25 50
    quasispec run         --config experiment.json
    quasispec summarize   out/*.csv --json verdicts.json

Every subcommand takes ``--config path.json``; its keys (option names with
underscores) become defaults that explicit flags still override. Relative
output paths are placed under $QUASISPEC_OUTPUT_DIR when it is set.
Exit status is 0 iff every verdict passes.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, asymptotics, expansion, harness
from .potentials import Grid, load_potential, parse_function_spec, random_in_ball, save_potential
from .spectrum import SpectrumError, compute_spectrum, load_spectrum

log = logging.getLogger("quasispec")


def _out_path(p) -> Path:
    p = Path(p)
    root = os.environ.get(harness.OUTPUT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _potential(args):
    if args.potential:
        return load_potential(args.potential)
    return random_in_ball(args.theta, args.R, args.K, args.seed, real=args.real)


def _spectrum(args, n_max):
    if getattr(args, "spectrum", None):
        return load_spectrum(args.spectrum)
    u = _potential(args)
    grid = Grid(args.grid) if args.grid else Grid.for_frequency(n_max)
    return compute_spectrum(u, n_max, grid, tol=args.tol, ode_tol=args.ode_tol)


def _finish(files, args, **kw) -> int:
    summary = harness.summarize(files, **kw)
    print(harness.format_summary(summary))
    if getattr(args, "json", None):
        _out_path(args.json).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0 if summary["all_pass"] else 1


def cmd_spectrum(args) -> int:
    u = _potential(args)
    if args.save_potential:
        save_potential(u, _out_path(args.save_potential))
    grid = Grid(args.grid) if args.grid else Grid.for_frequency(args.n_max)
    sp = compute_spectrum(u, args.n_max, grid, tol=args.tol, ode_tol=args.ode_tol)
    out = _out_path(args.out)
    sp.save_json(out)
    if args.eigenfunctions:
        sp.save_eigenfunctions_csv(_out_path(args.eigenfunctions))
    for n in range(1, min(sp.n_max, 10) + 1):
        print(f"lambda_{n} = {sp.eigenvalues[n - 1]:.12g}")
    if sp.bracket_violations:
        print(f"bracket violations: {sp.bracket_violations}")
    print(f"wrote {out}")
    return 0


def cmd_asymptotics(args) -> int:
    lo, hi = args.range
    sp = _spectrum(args, max(hi, args.n_max))
    recs = asymptotics.remainder_records(sp, range(1, min(sp.n_max, hi) + 1))
    out = _out_path(args.out)
    asymptotics.write_csv(recs, out)
    print(f"wrote {out}")
    return _finish([out], args, asym_range=(lo, hi), theta=args.theta)


def cmd_equiconv(args) -> int:
    if not 0 < args.eps < args.theta / 2:
        raise harness.ConfigError(f"eps must satisfy 0 < eps < theta/2 (got eps={args.eps}, theta={args.theta})")
    sp = _spectrum(args, args.m_max)
    files = []
    for spec in args.f:
        vals, exact = parse_function_spec(spec, sp.grid, degree=2 * args.m_max)
        rep = expansion.equiconv_report(vals, sp, args.theta, args.eps, args.m_max, exact)
        out = _out_path(Path(args.out_dir) / f"equiconv_{spec.replace(':', '-')}.csv")
        rep.to_csv(out)
        files.append(out)
        print(f"wrote {out} (M_emp={rep.M_emp})")
    return _finish(files, args, theta=args.theta)


def cmd_bnorm(args) -> int:
    ms = sorted(set(args.m) | {2 * m for m in args.m})
    sp = _spectrum(args, max(ms))
    rows = [
        (args.seed, m, expansion.empirical_bm_norm(sp, m, args.trials, args.seed), expansion.bm_operator_norm(sp, m))
        for m in ms
    ]
    out = _out_path(args.out)
    harness.write_bnorm_csv(rows, out)
    print(f"wrote {out}")
    return _finish([out], args)


def cmd_run(args) -> int:
    if not args.config:
        raise harness.ConfigError("run needs --config")
    cfg = harness.ExperimentConfig.load(args.config)
    if args.out_dir:
        cfg.output_dir = args.out_dir
    manifest = harness.run_experiment(cfg)
    out = harness.output_root(cfg.output_dir)
    summary = json.loads((out / "verdicts.json").read_text())
    print(harness.format_summary(summary))
    print(f"wrote {len(manifest['outputs'])} files to {out} in {manifest['wall_clock_s']} s")
    return 0 if manifest["all_pass"] else 1


def cmd_summarize(args) -> int:
    th = None
    if args.thresholds:
        th = json.loads(Path(args.thresholds).read_text())
        th = th.get("thresholds", th)
    return _finish(args.files, args, thresholds=th, asym_range=tuple(args.range), theta=args.theta)


def _add_potential_opts(p):
    p.add_argument("--potential", help="potential JSON file (default: sample from the ball)")
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--K", type=int, default=64, help="number of sine modes for sampled potentials")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--real", action="store_true", help="sample a real potential")
    p.add_argument("--grid", type=int, default=None, help="grid size (odd)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--ode-tol", type=float, default=1e-12)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasispec", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="eigenvalues and eigenfunctions")
    _add_potential_opts(p)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--out", default="spectrum.json")
    p.add_argument("--eigenfunctions", help="also write eigenfunction samples to this CSV")
    p.add_argument("--save-potential", help="write the potential JSON here")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("asymptotics", parents=[common], help="remainder norms and their partial sums")
    _add_potential_opts(p)
    p.add_argument("--spectrum", help="spectrum JSON (else computed)")
    p.add_argument("--n-max", type=int, default=100)
    p.add_argument("--range", type=int, nargs=2, default=[20, 100], metavar=("LO", "HI"))
    p.add_argument("--out", default="asym.csv")
    p.add_argument("--json", help="write verdicts JSON here")
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("equiconv", parents=[common], help="defect sweep against the rate bound")
    _add_potential_opts(p)
    p.add_argument("--spectrum", help="spectrum JSON (else computed)")
    p.add_argument("--f", nargs="+", default=["builtin:parabola", "builtin:step", "random:1"])
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--m-max", type=int, default=100)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--json", help="write verdicts JSON here")
    p.set_defaults(func=cmd_equiconv)

    p = sub.add_parser("bnorm", parents=[common], help="empirical norms of the defect operator")
    _add_potential_opts(p)
    p.add_argument("--spectrum", help="spectrum JSON (else computed)")
    p.add_argument("--m", type=int, nargs="+", default=[25, 50])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--out", default="bnorm.csv")
    p.add_argument("--json", help="write verdicts JSON here")
    p.set_defaults(func=cmd_bnorm)

    p = sub.add_parser("run", parents=[common], help="full experiment from a config file")
    p.add_argument("--out-dir", help="override output_dir from the config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", parents=[common], help="verdicts from report CSVs")
    p.add_argument("files", nargs="*")
    p.add_argument("--thresholds", help="JSON with threshold overrides (or an experiment config)")
    p.add_argument("--range", type=int, nargs=2, default=[20, 100], metavar=("LO", "HI"))
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--json", help="write verdicts JSON here")
    p.set_defaults(func=cmd_summarize)
    return ap, sub


def parse_args(argv=None):
    ap, sub = build_parser()
    args = ap.parse_args(argv)
    if args.config and args.command != "run":
        cfg = json.loads(Path(args.config).read_text())
        p = sub.choices[args.command]
        dests = {a.dest for a in p._actions}
        unknown = sorted(set(cfg) - dests)
        if unknown:
            ap.error(f"unknown keys in {args.config}: {', '.join(unknown)}")
        p.set_defaults(**cfg)
        args = ap.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (harness.ConfigError, harness.SummaryError, harness.StageError, SpectrumError,
            ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
