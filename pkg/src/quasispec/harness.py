"""File-based experiment pipeline: sample potentials, compute spectra, sweep the
equiconvergence defect, and turn the CSV outputs into pass/fail verdicts."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, asymptotics, expansion
from ._backend import backend_name
from .potentials import Grid, SineSeries, load_potential, parse_function_spec, random_in_ball, save_potential
from .spectrum import compute_spectrum

log = logging.getLogger(__name__)

OUTPUT_ENV = "QUASISPEC_OUTPUT_DIR"

DEFAULT_THRESHOLDS = {
    "ratio_blowup": 3.0,  # max ratio <= this * median ratio over [M_emp, m_max]
    "gamma_growth": 0.05,
    "psi1_growth": 0.05,
    "seed_spread_gamma": 2.0,
    "bnorm_doubling": 1.2,
    "bnorm_seed_spread": 3.0,
    "noise_floor": 1e-7,
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class ExperimentConfig:
    theta: float = 0.3
    R: float = 1.0
    eps: float = 0.05
    K: int = 64
    n_max: int = 200
    m_max: int = 200
    grid_size: int | None = None
    potential_kind: str = "ball"  # ball | zero | file
    potential_seeds: list = field(default_factory=lambda: [0])
    potential_path: str | None = None
    real: bool = False
    functions: list = field(default_factory=lambda: ["builtin:parabola", "builtin:step", "random:1"])
    tol: float = 1e-10
    ode_tol: float = 1e-12
    asym_range: list = field(default_factory=lambda: [20, 100])
    bnorm_ms: list = field(default_factory=lambda: [25, 50, 100])
    bnorm_trials: int = 20
    bnorm_seed: int = 0
    output_dir: str = "quasispec-run"
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.thresholds = {**DEFAULT_THRESHOLDS, **(self.thresholds or {})}

    @property
    def G(self) -> int:
        return self.grid_size if self.grid_size is not None else 16 * self.m_max + 1

    def validate(self) -> "ExperimentConfig":
        if not 0.0 < self.theta < 0.5:
            raise ConfigError(f"theta must satisfy 0 < theta < 1/2 (got {self.theta})")
        if not 0.0 < self.eps < self.theta / 2:
            raise ConfigError(f"eps must satisfy 0 < eps < theta/2 = {self.theta / 2} (got {self.eps})")
        if self.R < 0:
            raise ConfigError(f"R must be nonnegative (got {self.R})")
        if self.G < 16 * self.m_max + 1:
            raise ConfigError(f"grid_size must be >= 16*m_max + 1 = {16 * self.m_max + 1} (got {self.G})")
        if self.G % 2 == 0:
            raise ConfigError(f"grid_size must be odd for Simpson quadrature (got {self.G})")
        if self.n_max < self.m_max:
            raise ConfigError(f"n_max must be >= m_max (got n_max={self.n_max}, m_max={self.m_max})")
        if self.potential_kind not in ("ball", "zero", "file"):
            raise ConfigError(f"unknown potential_kind {self.potential_kind!r}")
        if self.potential_kind == "file" and not self.potential_path:
            raise ConfigError("potential_kind 'file' needs potential_path")
        if 2 * max(self.bnorm_ms, default=0) > self.m_max:
            raise ConfigError("2*max(bnorm_ms) must not exceed m_max")
        lo, hi = self.asym_range
        if not 1 <= lo < hi <= self.n_max:
            raise ConfigError(f"asym_range must satisfy 1 <= lo < hi <= n_max (got {self.asym_range})")
        if not self.potential_seeds:
            raise ConfigError("potential_seeds must not be empty")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def output_root(default) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or default)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def make_potential(cfg: ExperimentConfig, seed: int):
    if cfg.potential_kind == "zero":
        return SineSeries(np.zeros(1))
    if cfg.potential_kind == "file":
        return load_potential(cfg.potential_path)
    return random_in_ball(cfg.theta, cfg.R, cfg.K, seed, real=cfg.real)


def _fname(spec: str) -> str:
    return spec.replace(":", "-")


def write_bnorm_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "m", "empirical", "exact"])
        for seed, m, emp, ex in rows:
            w.writerow([seed, m, repr(float(emp)), repr(float(ex))])


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run every stage, write artifacts and ``manifest.json``; returns the manifest."""
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else output_root(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    status = {}
    files = []
    grid = Grid(cfg.G)
    seeds = list(cfg.potential_seeds) if cfg.potential_kind == "ball" else [cfg.potential_seeds[0]]
    merged = {}
    bnorm_rows = []
    lo, hi = cfg.asym_range

    def stage(name, fn):
        try:
            res = fn()
        except Exception as exc:
            status[name] = "failed"
            raise StageError(name, exc) from exc
        status[name] = "ok"
        return res

    for seed in seeds:
        u = stage(f"potential[{seed}]", lambda: make_potential(cfg, seed))
        p = out / f"potential_{seed}.json"
        save_potential(u, p)
        files.append(p)
        sp = stage(
            f"spectrum[{seed}]",
            lambda: compute_spectrum(u, cfg.n_max, grid, tol=cfg.tol, ode_tol=cfg.ode_tol),
        )
        p = out / f"spectrum_{seed}.json"
        sp.save_json(p)
        files.append(p)
        recs = stage(f"asymptotics[{seed}]", lambda: asymptotics.remainder_records(sp, range(1, hi + 1)))
        p = out / f"asym_{seed}.csv"
        asymptotics.write_csv(recs, p)
        files.append(p)
        for spec in cfg.functions:
            def _eq():
                vals, exact = parse_function_spec(spec, grid, degree=2 * cfg.m_max)
                return expansion.equiconv_report(vals, sp, cfg.theta, cfg.eps, cfg.m_max, exact)

            rep = stage(f"equiconv[{seed},{spec}]", _eq)
            p = out / f"equiconv_{seed}_{_fname(spec)}.csv"
            rep.to_csv(p)
            files.append(p)
            merged[f"ratio_s{seed}_{_fname(spec)}"] = rep.ratio
            merged[f"delta_s{seed}_{_fname(spec)}"] = rep.delta
        if cfg.bnorm_ms:
            def _bn():
                ms = sorted({m for m0 in cfg.bnorm_ms for m in (m0, 2 * m0)})
                return [
                    (seed, m, expansion.empirical_bm_norm(sp, m, cfg.bnorm_trials, cfg.bnorm_seed),
                     expansion.bm_operator_norm(sp, m))
                    for m in ms
                ]

            bnorm_rows += stage(f"bnorm[{seed}]", _bn)

    p = out / "equiconv_merged.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = sorted(merged)
        w.writerow(["m"] + keys)
        for i in range(cfg.m_max):
            w.writerow([i + 1] + [repr(float(merged[k][i])) for k in keys])
    files.append(p)
    if bnorm_rows:
        p = out / "bnorm.csv"
        write_bnorm_csv(bnorm_rows, p)
        files.append(p)

    verdicts = summarize(files, cfg.thresholds, asym_range=tuple(cfg.asym_range), theta=cfg.theta)
    p = out / "verdicts.json"
    p.write_text(json.dumps(verdicts, indent=2, sort_keys=True) + "\n")
    files.append(p)
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")

    manifest = {
        "config_hash": cfg.digest(),
        "version": __version__,
        "backend": backend_name(),
        "wall_clock_s": round(time.time() - t0, 3),
        "stages": status,
        "outputs": {f.name: _sha256(f) for f in files},
        "all_pass": verdicts["all_pass"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# summaries


class SummaryError(ValueError):
    pass


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _classify(path: Path):
    try:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
    except (StopIteration, UnicodeDecodeError) as exc:
        raise SummaryError(f"{path}: empty or unreadable") from exc
    if header[:6] == ["m", "delta", "tail", "rate", "rhs", "ratio"]:
        return "equiconv"
    if header == asymptotics.CSV_FIELDS:
        return "asym"
    if header == ["seed", "m", "empirical", "exact"]:
        return "bnorm"
    return None


def _verdict(name, measured, threshold, ok, note=""):
    d = {"criterion": name, "measured": measured, "threshold": threshold, "pass": bool(ok)}
    if note:
        d["note"] = note
    return d


def summarize(paths, thresholds=None, asym_range=(20, 100), theta=0.3) -> dict:
    """Aggregate report CSVs into verdicts; JSON/other files are ignored."""
    th = {**DEFAULT_THRESHOLDS, **(thresholds or {})}
    floor = th["noise_floor"]
    groups = {"equiconv": [], "asym": [], "bnorm": []}
    for p in map(Path, paths):
        if p.suffix != ".csv":
            continue
        if not p.exists():
            raise SummaryError(f"{p}: no such file")
        kind = _classify(p)
        if kind is not None:
            groups[kind].append(p)
    if not any(groups.values()):
        raise SummaryError("no report files to summarize")
    verdicts = []
    table = []

    for p in groups["equiconv"]:
        try:
            rep = expansion.read_report_csv(p)
        except (KeyError, ValueError) as exc:
            raise SummaryError(f"{p}: malformed equiconvergence report") from exc
        if rep.delta.max() < floor:
            verdicts.append(_verdict(f"{p.stem}: ratio bounded", float(rep.delta.max()), floor, True,
                                     "defect at noise floor"))
            verdicts.append(_verdict(f"{p.stem}: defect decays", float(rep.delta.max()), floor, True,
                                     "defect at noise floor"))
            table.append((p.stem, "-", 0.0, float(rep.delta.max())))
            continue
        start = rep.M_emp
        blow = rep.blowup_ratio(start)
        last, first = rep.decay_check()
        verdicts.append(_verdict(f"{p.stem}: ratio max/median over [M_emp={start}, {int(rep.m[-1])}]",
                                 blow, th["ratio_blowup"], blow <= th["ratio_blowup"]))
        verdicts.append(_verdict(f"{p.stem}: last-decade median delta < first-decade median",
                                 [last, first], None, last < first))
        table.append((p.stem, start, blow, float(np.median(rep.ratio[rep.window(start)]))))

    lo, hi = asym_range
    sat = []
    for p in groups["asym"]:
        try:
            recs = asymptotics.read_csv(p)
        except (KeyError, ValueError) as exc:
            raise SummaryError(f"{p}: malformed asymptotics file") from exc
        n, g = asymptotics.gamma_sums(recs, theta)
        _, s1 = asymptotics.psi1_sums(recs)
        if n[-1] < hi:
            raise SummaryError(f"{p}: needs n up to {hi}")
        for label, partial, key in (("gamma^2 n^2theta", g, "gamma_growth"), ("||psi1||_C", s1, "psi1_growth")):
            top = float(partial[np.flatnonzero(n == hi)[0]])
            if top < floor:
                verdicts.append(_verdict(f"{p.stem}: {label} partial sums saturate", top, floor, True,
                                         "at noise floor"))
                continue
            gr = asymptotics.saturation_growth(partial, n, lo, hi)
            verdicts.append(_verdict(f"{p.stem}: {label} partial-sum growth over last half of [{lo},{hi}]",
                                     gr, th[key], gr < th[key]))
        sat.append(float(g[np.flatnonzero(n == hi)[0]]))
        table.append((p.stem, "S_gamma", sat[-1], float(s1[np.flatnonzero(n == hi)[0]])))
    if len(sat) > 1 and min(sat) > floor:
        spread = max(sat) / min(sat)
        verdicts.append(_verdict("gamma partial sums agree across seeds (max/min)", spread,
                                 th["seed_spread_gamma"], spread <= th["seed_spread_gamma"]))

    for p in groups["bnorm"]:
        rows = _read_rows(p)
        if not rows:
            raise SummaryError(f"{p}: empty bnorm file")
        try:
            vals = {(int(r["seed"]), int(r["m"])): float(r["empirical"]) for r in rows}
        except (KeyError, ValueError) as exc:
            raise SummaryError(f"{p}: malformed bnorm file") from exc
        seeds = sorted({s for s, _ in vals})
        for s in seeds:
            for m in sorted(m for ss, m in vals if ss == s):
                if (s, 2 * m) not in vals:
                    continue
                a, b = vals[(s, m)], vals[(s, 2 * m)]
                if a < floor and b < floor:
                    verdicts.append(_verdict(f"bnorm seed {s}: value(2m) <= c*value(m), m={m}", b, floor, True,
                                             "at noise floor"))
                    continue
                verdicts.append(_verdict(f"bnorm seed {s}: value(2m) <= c*value(m), m={m}", b / a,
                                         th["bnorm_doubling"], b <= th["bnorm_doubling"] * a))
            table.append((f"bnorm seed {s}", "max", max(v for (ss, _), v in vals.items() if ss == s), ""))
        if len(seeds) > 1:
            per_seed = [max(v for (ss, _), v in vals.items() if ss == s) for s in seeds]
            if min(per_seed) > floor:
                spread = max(per_seed) / min(per_seed)
                verdicts.append(_verdict("bnorm agrees across seeds (max/min)", spread,
                                         th["bnorm_seed_spread"], spread < th["bnorm_seed_spread"]))

    return {
        "verdicts": verdicts,
        "all_pass": all(v["pass"] for v in verdicts),
        "table": [list(map(_jsonable, row)) for row in table],
    }


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def format_summary(summary: dict) -> str:
    lines = []
    for row in summary["table"]:
        lines.append("  ".join(f"{c:.4g}" if isinstance(c, float) else str(c) for c in row))
    lines.append("")
    for v in summary["verdicts"]:
        flag = "PASS" if v["pass"] else "FAIL"
        meas = v["measured"]
        meas = f"{meas:.4g}" if isinstance(meas, float) else str(meas)
        lines.append(f"[{flag}] {v['criterion']}: measured={meas} threshold={v['threshold']}")
    lines.append(f"all_pass={summary['all_pass']}")
    return "\n".join(lines)
