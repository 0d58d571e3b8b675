"""Experiment orchestration: configuration files, the canonical experiments and
their artifacts.

A configuration is an INI file (``key = value`` lines grouped in sections)::

    [experiment]
    name = h-theorem          ; bg-convergence | h-theorem | scattering-table |
                              ; tree-series | reversibility
    seed = 0
    output = results/h
    horizon = 1.0             ; in units of t0
    ensemble = 20             ; R
    budget_seconds = 600      ; optional wall-clock budget

    [regime]
    N = 50, 200, 800
    bg = yes                  ; eps = N^-1/2; otherwise give eps = ...
    max_packing = 0.1

    [potential]
    name = hard_sphere        ; extra keys are the builder's parameters,
                              ; name = table with path = file for a tabulated one

    [density]
    betas = 1, 4              ; mixture of Maxwellians (or table = file)
    weights = 0.5, 0.5
    means = 0 0 0; 0 0 0

    [cutoffs]
    V_min = 0.0

and an optional section named after the experiment with its own knobs (see
``EXPERIMENT_OPTIONS``).  Relative paths are resolved against the directory of
the configuration file.  Time is measured in units of ``t0 = lanford_time``
with ``K = b = 1``, the first ``N`` of the regime and the effective inverse
temperature of the initial data.

Every run writes CSV files with a header row (floats as ``%.17g``), a
``summary.txt`` of ``key = value`` lines and ``manifest.ini`` listing the
SHA-256 digest of each emitted file.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import os
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boltzmann import DsmcParams, solve_boltzmann
from .errors import BudgetExceeded, ConfigError
from .marginals import HistogramGrid, bump, chaos_defect, estimate_marginal, observable_pairing
from .md import evolve_hard_spheres, reversal_error
from .phase import DensitySpec, ScalingRegime, sample_initial
from .potentials import from_name
from .scattering import (
    Cutoffs,
    check_monotonicity,
    residence_constant,
    scattering_table,
    write_scattering_csv,
)
from .trees import eval_series_term, lanford_time, series_bound_check, write_series_csv

EXPERIMENTS = ("bg-convergence", "h-theorem", "scattering-table", "tree-series", "reversibility")
OUTPUT_ENV = "BOLTZGRAD_OUTPUT"
MAX_HORIZON = 5.0

# per-experiment knobs and their defaults (type taken from the default)
EXPERIMENT_OPTIONS = {
    "h-theorem": {"particles": 100_000, "output_every": 5, "collide": True, "cells": 1},
    "scattering-table": {"rho_points": 16, "speeds": "0.5, 1, 2, 4"},
    "tree-series": {"j": 1, "n_max": 2, "samples": 100_000, "flavor": "BBF",
                    "root_position": "0.5 0.5 0.5", "root_velocity": "0 0 0",
                    "exact_sigma": False},
    "reversibility": {"events": 50, "tolerance": 1e-6},
    "bg-convergence": {"bins": 8, "vmax": 3.0, "bump_radius": 1.5, "reference_particles": 1_000_000,
                       "reference_seeds": 4, "bootstrap": 100},
}


def fmt(x) -> str:
    """Float formatting shared by every emitted file."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


# ------------------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    N: tuple
    bg: bool
    potential: dict
    density: DensitySpec
    horizon: float
    R: int
    seed: int
    output: Path
    eps: float | None = None
    max_packing: float = 0.1
    cutoffs: Cutoffs | None = None
    options: dict = field(default_factory=dict)
    budget_seconds: float | None = None
    source: Path | None = None

    def regime(self, N: int) -> ScalingRegime:
        if self.bg:
            return ScalingRegime.boltzmann_grad(N)
        return ScalingRegime(int(N), float(self.eps))

    @property
    def beta(self) -> float:
        return self.density.effective_beta()

    @property
    def t0(self) -> float:
        r = self.regime(self.N[0])
        return lanford_time(r.N, r.eps, 1.0, self.beta)

    @property
    def t_final(self) -> float:
        return self.horizon * self.t0

    def build_potential(self):
        params = dict(self.potential)
        return from_name(params.pop("name"), **params)


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.replace(",", " ").split()]


def _read_density_table(path: Path) -> DensitySpec:
    """Density tabulated as rows ``v1, v2, v3, f`` on a uniform cube."""
    data = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, comments="#",
                      skiprows=_header_rows(path))
    axis = np.unique(data[:, 0])
    n = axis.size
    if data.shape[0] != n ** 3 or not np.allclose(np.diff(axis), axis[1] - axis[0]):
        raise ConfigError(f"{path}: expected a uniform cubic grid of n^3 rows")
    order = np.lexsort((data[:, 2], data[:, 1], data[:, 0]))
    values = data[order, 3].reshape(n, n, n)
    return DensitySpec(grid=(axis, values))


def _header_rows(path: Path) -> int:
    with path.open() as fh:
        first = fh.readline()
    try:
        _floats(first)
        return 0
    except ValueError:
        return 1


def _density(sec, base: Path) -> DensitySpec:
    if sec is None:
        return DensitySpec.maxwellian()
    if "table" in sec:
        return _read_density_table(_existing(base, sec["table"]))
    betas = _floats(sec.get("betas", sec.get("beta", "1")))
    weights = _floats(sec["weights"]) if "weights" in sec else [1.0 / len(betas)] * len(betas)
    if "means" in sec:
        means = [tuple(_floats(m)) for m in sec["means"].split(";")]
    else:
        means = [(0.0, 0.0, 0.0)] * len(betas)
    if any(len(m) != 3 for m in means):
        raise ConfigError("each mean needs three components")
    return DensitySpec(tuple(weights), tuple(betas), tuple(means),
                       amplitude=sec.getfloat("amplitude", 0.0), mode=sec.getint("mode", 1))


def _existing(base: Path, name: str) -> Path:
    p = Path(name)
    p = p if p.is_absolute() else base / p
    if not p.is_file():
        raise ConfigError(f"referenced file {p} does not exist")
    return p


def _coerce(default, raw: str):
    if isinstance(default, bool):
        if raw.lower() in ("1", "yes", "true", "on"):
            return True
        if raw.lower() in ("0", "no", "false", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int):
        return int(float(raw))
    if isinstance(default, float):
        return float(raw)
    return raw


def load_config(path) -> ExperimentConfig:
    """Parse and validate a configuration file; any problem raises ``ConfigError``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
        return _build(cp, path)
    except ConfigError:
        raise
    except (configparser.Error, ValueError, KeyError, ArithmeticError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build(cp: configparser.ConfigParser, path: Path) -> ExperimentConfig:
    base = path.resolve().parent
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    ex = cp["experiment"]
    name = ex.get("name", "").strip()
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose one of {', '.join(EXPERIMENTS)}")
    reg = cp["regime"] if cp.has_section("regime") else {}
    N = tuple(int(float(s)) for s in _floats(reg.get("N", "")))
    if not N:
        raise ConfigError("the N list is empty")
    if any(n < 1 for n in N):
        raise ConfigError("N must be positive")
    bg = cp.getboolean("regime", "bg", fallback=True)
    eps = None if bg else float(reg.get("eps", "nan"))
    if not bg and not eps > 0:
        raise ConfigError("a non-BG regime needs eps > 0")
    max_packing = float(reg.get("max_packing", 0.1))

    pot = {"name": "hard_sphere"}
    if cp.has_section("potential"):
        pot = {"name": cp["potential"].get("name", "hard_sphere")}
        for k, v in cp["potential"].items():
            if k == "name":
                continue
            pot[k] = str(_existing(base, v)) if k == "path" else float(v)
    if pot["name"] == "table" and "path" not in pot:
        raise ConfigError("a tabulated potential needs path = <file>")

    density = _density(cp["density"] if cp.has_section("density") else None, base)

    horizon = ex.getfloat("horizon", 1.0)
    if not 0 < horizon <= MAX_HORIZON:
        raise ConfigError(f"horizon must lie in (0, {MAX_HORIZON}] t0")
    R = ex.getint("ensemble", 1)
    if R < 1:
        raise ConfigError("ensemble size must be positive")
    budget = ex.getfloat("budget_seconds", fallback=None)

    cut = None
    if cp.has_section("cutoffs"):
        c = cp["cutoffs"]
        cut = Cutoffs(c.getfloat("V_min", 0.0), c.getfloat("rho_min", 0.0),
                      c.getfloat("v_max", math.inf))

    opts = dict(EXPERIMENT_OPTIONS[name])
    if cp.has_section(name):
        for k, raw in cp[name].items():
            if k not in opts:
                raise ConfigError(f"unknown option {k!r} in [{name}]")
            opts[k] = _coerce(opts[k], raw)

    out = Path(os.environ.get(OUTPUT_ENV) or ex.get("output", "output"))
    if not out.is_absolute() and not os.environ.get(OUTPUT_ENV):
        out = base / out
    cfg = ExperimentConfig(name, N, bg, pot, density, horizon, R, ex.getint("seed", 0), out, eps,
                           max_packing, cut, opts, budget, path)
    _check(cfg)
    return cfg


def _check(cfg: ExperimentConfig) -> None:
    for n in cfg.N:
        r = cfg.regime(n)
        if cfg.name in ("bg-convergence", "reversibility") and r.packing_fraction >= cfg.max_packing:
            raise ConfigError(f"N={n}: packing fraction {r.packing_fraction:.3g} >= max_packing")
    cfg.build_potential()
    o = cfg.options
    if cfg.name == "tree-series":
        if o["flavor"].upper() not in ("BBF", "IBF"):
            raise ConfigError("flavor must be BBF or IBF")
        if not 0 <= o["n_max"] <= 3:
            raise ConfigError("n_max must be between 0 and 3")
        if len(_floats(o["root_position"])) != 3 * o["j"] or len(_floats(o["root_velocity"])) != 3 * o["j"]:
            raise ConfigError("root_position and root_velocity need 3 j numbers")
    if cfg.name == "scattering-table" and (o["rho_points"] < 2 or not _floats(o["speeds"])):
        raise ConfigError("need at least two impact parameters and one speed")


# ------------------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    experiment: str
    output: Path
    files: list
    summary: dict


class _Clock:
    def __init__(self, budget):
        self.budget = budget
        self.start = _time.perf_counter()

    def remaining(self):
        if self.budget is None:
            return None
        return self.budget - (_time.perf_counter() - self.start)

    def check(self, what: str) -> None:
        if self.budget is not None and _time.perf_counter() - self.start > self.budget:
            raise BudgetExceeded(f"wall-clock budget of {self.budget:g} s exhausted during {what}")


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in r) + "\n")
    return path


def _write_summary(path: Path, summary: dict) -> Path:
    with path.open("w") as fh:
        for k, v in summary.items():
            fh.write(f"{k} = {v if isinstance(v, str) else fmt(v)}\n")
    return path


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(result: RunResult, headline: str) -> Path:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["run"] = {"experiment": result.experiment, "headline": headline}
    cp["files"] = {p.name: sha256(p) for p in result.files}
    path = result.output / "manifest.ini"
    with path.open("w") as fh:
        cp.write(fh)
    return path


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run one experiment and write its CSVs, summary and manifest.

    Outputs depend only on the configuration (and seed), never on timing,
    except that exhausting ``budget_seconds`` aborts with ``BudgetExceeded``.
    """
    cfg.output.mkdir(parents=True, exist_ok=True)
    runner, headline = _RUNNERS[cfg.name]
    clock = _Clock(cfg.budget_seconds)
    files, summary = runner(cfg, clock)
    base = {"experiment": cfg.name, "seed": cfg.seed, "t0": cfg.t0, "horizon_t0": cfg.horizon,
            "beta": cfg.beta}
    base.update(summary)
    files.append(_write_summary(cfg.output / "summary.txt", base))
    result = RunResult(cfg.name, cfg.output, files, base)
    write_manifest(result, headline)
    return result


def _h_theorem(cfg, clock):
    o = cfg.options
    runs = []
    for r in range(cfg.R):
        params = DsmcParams(M=o["particles"], seed=cfg.seed + r, collide=o["collide"],
                            output_every=o["output_every"], n_cells=o["cells"])
        runs.append(solve_boltzmann(cfg.density, cfg.t_final, params))
        clock.check("the DSMC ensemble")
    t = runs[0].times
    H = np.array([run.H for run in runs])
    if cfg.R > 1:
        mean, se = H.mean(axis=0), H.std(axis=0, ddof=1) / math.sqrt(cfg.R)
    else:
        mean, se = H[0], runs[0].H_stderr
    energy = np.mean([run.energy for run in runs], axis=0)
    fourth = np.mean([run.fourth for run in runs], axis=0)
    rows = [(t[k], t[k] / cfg.t0, mean[k], se[k], energy[k], fourth[k]) for k in range(t.size)]
    path = _write_csv(cfg.output / "h_theorem.csv",
                      ["t", "t_over_t0", "H", "H_stderr", "energy", "fourth_moment"], rows)
    rises = np.diff(mean) - 3 * np.hypot(se[1:], se[:-1])
    beta = cfg.beta
    summary = {
        "H_initial": float(mean[0]), "H_final": float(mean[-1]),
        "H_nonincreasing_3sigma": bool(np.all(rises <= 0)),
        "H_range": float(np.ptp(mean)),
        "fourth_moment_final": float(fourth[-1]),
        "fourth_moment_maxwellian": 15.0 / beta ** 2,
    }
    return [path], summary


def _scattering(cfg, clock):
    o = cfg.options
    pot = cfg.build_potential()
    rhos = np.linspace(0.0, 1.0, o["rho_points"] + 1)[:-1] + 0.5 / o["rho_points"]
    Vs = _floats(o["speeds"])
    rows, measure = scattering_table(pot, rhos, Vs, 1.0, cfg.cutoffs)
    path = write_scattering_csv(rows, cfg.output / "scattering_table.csv")
    mono = check_monotonicity(pot)
    summary = {"potential": pot.name, "monotone_structure": bool(mono.passed),
               "excluded_measure": measure}
    if not pot.is_hard_sphere:
        summary["residence_constant"] = residence_constant(pot, rhos, Vs)
    return [path], summary


def _tree_series(cfg, clock):
    o = cfg.options
    j = o["j"]
    roots = (np.reshape(_floats(o["root_position"]), (j, 3)),
             np.reshape(_floats(o["root_velocity"]), (j, 3)))
    r = cfg.regime(cfg.N[0])
    flavor = o["flavor"].upper()
    t = cfg.t_final
    ests = []
    for n in range(o["n_max"] + 1):
        rem = clock.remaining()
        e = eval_series_term(j, n, cfg.density, roots, t, o["samples"], flavor,
                             r.eps if flavor == "IBF" else None, seed=cfg.seed + n,
                             exact_sigma=o["exact_sigma"] and n <= 2, cutoffs=cfg.cutoffs,
                             time_budget=rem)
        if e.partial:
            raise BudgetExceeded(f"budget exhausted while estimating n={n}")
        ests.append(e)
    path = write_series_csv(ests, cfg.output / "tree_series.csv")
    rep = series_bound_check([(e.estimate, e.stderr) for e in ests], t, cfg.t0)
    summary = {"t": t, "envelope_C": rep.C, "envelope_holds": rep.envelope_holds}
    for n, (q, s) in enumerate(zip(rep.ratios, rep.ratio_errors), start=1):
        summary[f"ratio_{n}"] = q
        summary[f"ratio_{n}_stderr"] = s
    return [path], summary


def _reversibility(cfg, clock):
    o = cfg.options
    rows = []
    for N in cfg.N:
        regime = cfg.regime(N)
        for r in range(cfg.R):
            c = sample_initial(cfg.density, regime, seed=cfg.seed + r, max_packing=cfg.max_packing)
            err, events = reversal_error(c, o["events"])
            rows.append((N, cfg.seed + r, events, err))
            clock.check("the reversibility runs")
    path = _write_csv(cfg.output / "reversibility.csv", ["N", "seed", "events", "error"], rows)
    errs = np.array([r[3] for r in rows])
    summary = {"max_error": float(errs.max()),
               "fraction_below_tolerance": float(np.mean(errs < o["tolerance"])),
               "tolerance": o["tolerance"]}
    return [path], summary


def dsmc_reference(cfg, phi, M: int, seeds: int, clock=None):
    """``<phi, f(t)>`` from ``seeds`` independent DSMC runs of ``M`` particles each."""
    vals = []
    for s in range(seeds):
        run = solve_boltzmann(cfg.density, cfg.t_final,
                              DsmcParams(M=M, seed=10_000 + cfg.seed + s, output_every=10 ** 6))
        vals.append(observable_pairing(run.final.v, phi))
        if clock:
            clock.check("the DSMC reference")
    v = np.mean([p.value for p in vals])
    se = math.sqrt(sum(p.stderr ** 2 for p in vals)) / seeds
    return float(v), float(se)


def fitted_slope(N, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(N)`` over positive values."""
    N = np.asarray(N, dtype=float)
    y = np.asarray(values, dtype=float)
    ok = y > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(N[ok]), np.log(y[ok]), 1)[0])


def _bg_convergence(cfg, clock):
    o = cfg.options
    grid = HistogramGrid.uniform(3, o["bins"], -o["vmax"], o["vmax"])
    phi = bump(o["bump_radius"])
    ref, ref_se = dsmc_reference(cfg, phi, o["reference_particles"], o["reference_seeds"], clock)
    rows = []
    for N in cfg.N:
        regime = cfg.regime(N)
        ens = []
        for r in range(cfg.R):
            c = sample_initial(cfg.density, regime, seed=cfg.seed + r, max_packing=cfg.max_packing)
            final, _ = evolve_hard_spheres(c, cfg.t_final, check=False)
            ens.append(final.velocities)
            clock.check(f"the N={N} ensemble")
        f1 = estimate_marginal(ens, 1, grid, subsets="all")
        f2 = estimate_marginal(ens, 2, grid, subsets="all", seed=cfg.seed)
        cd = chaos_defect(f2, f1, bootstrap=o["bootstrap"], seed=cfg.seed)
        pair = observable_pairing(np.concatenate(ens), phi)
        gap = abs(pair.value - ref)
        rows.append((N, regime.eps, cfg.R, cd.value, cd.stderr, cd.floor, cd.excess, pair.value,
                     gap, math.hypot(pair.stderr, ref_se)))
    path = _write_csv(cfg.output / "bg_convergence.csv",
                      ["N", "eps", "R", "chaos_defect", "defect_stderr", "defect_floor",
                       "defect_excess", "pairing", "pairing_gap", "gap_stderr"], rows)
    d = [r[3] for r in rows]
    g = [r[8] for r in rows]
    summary = {
        "reference_pairing": ref, "reference_stderr": ref_se,
        "defect_monotone": bool(all(b < a for a, b in zip(d, d[1:]))),
        "gap_monotone": bool(all(b <= a for a, b in zip(g, g[1:]))),
        "defect_slope": fitted_slope(cfg.N, d),
        "gap_slope": fitted_slope(cfg.N, g),
    }
    return [path], summary


_RUNNERS = {
    "h-theorem": (_h_theorem, "h_theorem.csv"),
    "scattering-table": (_scattering, "scattering_table.csv"),
    "tree-series": (_tree_series, "tree_series.csv"),
    "reversibility": (_reversibility, "reversibility.csv"),
    "bg-convergence": (_bg_convergence, "bg_convergence.csv"),
}


# ------------------------------------------------------------------------------------
# plot scripts (gnuplot syntax)


def read_manifest(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest {path} not found")
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read(path)
    if not cp.has_section("run") or not cp.has_section("files"):
        raise ConfigError(f"{path} is not a manifest")
    return cp["run"]["experiment"], cp["run"]["headline"], dict(cp["files"])


def verify_manifest(path) -> list[str]:
    """Names of listed files that are missing or whose digest no longer matches."""
    path = Path(path)
    _, _, files = read_manifest(path)
    bad = []
    for name, digest in files.items():
        p = path.parent / name
        if not p.is_file() or sha256(p) != digest:
            bad.append(name)
    return bad


def _read_rows(csv_path: Path):
    lines = csv_path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    return header, rows


_PREAMBLE = """set terminal pngcairo size 900,600
set output "{png}"
set datafile separator ","
set grid
"""


def emit_plot_script(manifest) -> Path:
    """Write a self-contained gnuplot script drawing the run's headline figure.

    The script sits next to the data and produces ``<headline>.png`` when run
    with ``gnuplot`` from that directory.
    """
    manifest = Path(manifest)
    experiment, headline, files = read_manifest(manifest)
    csv_path = manifest.parent / headline
    if headline not in files or not csv_path.is_file():
        raise FileNotFoundError(f"data file {csv_path} is missing")
    header, rows = _read_rows(csv_path)
    stem = csv_path.stem
    text = _PREAMBLE.format(png=stem + ".png")
    if not rows:
        text += ('set title "%s (no data)"\nset xrange [0:1]\nset yrange [0:1]\n'
                 "plot NaN notitle\n" % experiment)
    else:
        text += _BODIES[experiment](headline, header, rows)
    out = manifest.parent / (stem + ".gp")
    out.write_text(text)
    return out


def _h_plot(name, header, rows):
    return (
        'set title "H functional"\nset xlabel "t / t0"\nset ylabel "H"\n'
        f'plot "{name}" every ::1 using 2:($3-$4):($3+$4) with filledcurves '
        'fc rgb "#b0c4ef" title "H +/- stderr", \\\n'
        f'     "{name}" every ::1 using 2:3 with lines lw 2 lc rgb "#1f3a93" title "H(t)"\n'
    )


def _bg_plot(name, header, rows):
    N = [float(r[0]) for r in rows]
    d = [float(r[3]) for r in rows]
    s = fitted_slope(N, d)
    text = ('set title "chaos defect"\nset logscale xy\nset xlabel "N"\n'
            'set ylabel "L1 defect"\nset key top right\n')
    fit = ""
    if math.isfinite(s):
        ok = [(n, v) for n, v in zip(N, d) if v > 0]
        c = math.exp(np.mean([math.log(v) - s * math.log(n) for n, v in ok]))
        text += f'set label 1 "fitted slope {s:.3f}" at graph 0.05, graph 0.1\n'
        fit = f', \\\n     {fmt(c)}*x**({fmt(s)}) with lines dt 2 title "fit"'
    return text + (
        f'plot "{name}" every ::1 using 1:4:5 with yerrorpoints pt 7 title "defect", \\\n'
        f'     "{name}" every ::1 using 1:6 with linespoints dt 3 title "noise floor"{fit}\n'
    )


def _scattering_plot(name, header, rows):
    speeds = sorted({float(r[1]) for r in rows})
    curves = ", \\\n     ".join(
        f'"{name}" every ::1 using 1:($2=={fmt(V)} ? $3 : NaN) with linespoints title "V = {V:g}"'
        for V in speeds)
    return ('set title "deflection angle"\nset xlabel "impact parameter"\n'
            'set ylabel "chi [rad]"\n' + "plot " + curves + "\n")


def _series_plot(name, header, rows):
    return ('set title "series terms"\nset logscale y\nset xlabel "n"\n'
            'set ylabel "|T(j,n)|"\nset xtics 1\n'
            f'plot "{name}" every ::1 using 2:(abs($5)):6 with yerrorpoints pt 7 title "|T|"\n')


def _reversal_plot(name, header, rows):
    return ('set title "reversal error"\nset logscale y\nset xlabel "seed"\n'
            'set ylabel "max position error"\n'
            f'plot "{name}" every ::1 using 2:($4 > 0 ? $4 : 1e-18) with points pt 7 title "error", \\\n'
            '     1e-6 with lines dt 2 title "tolerance"\n')


_BODIES = {
    "h-theorem": _h_plot,
    "bg-convergence": _bg_plot,
    "scattering-table": _scattering_plot,
    "tree-series": _series_plot,
    "reversibility": _reversal_plot,
}
