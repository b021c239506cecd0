"""Monte Carlo rate experiments and their configuration.

A rate experiment sweeps a sample-size grid, fits the estimator on
``replicates`` independent datasets per grid point with the a-priori
level rule, aggregates the p-th moment of the chosen error norm, and
fits an ordinary least-squares slope through the log-log points.  The
experiment passes when the fitted slope is within tolerance of the
theoretical exponent.

Configuration files are flat ``key = value`` text (``#`` comments).
All randomness derives from ``(seed, grid index, replicate index)``, so
results are independent of worker scheduling and reruns are
byte-identical.
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.stats

from .estimator import (
    check_qualification,
    error_norm,
    fit,
    lambda_rule,
    rate_exponent,
    truncation_floor,
)
from .problem import (
    make_differentiation_problem,
    problem_from_table,
    synthesize_source,
)
from .sampling import NOISE_MODELS, draw_dataset
from .spectral import METHODS, QualificationError, make_regularizer

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RatePoint",
    "RateReport",
    "parse_config",
    "parse_config_file",
    "config_template",
    "build_problem",
    "run_rates",
    "fit_loglog_slope",
    "write_report",
]

WORKERS_ENV = "INVLEARN_WORKERS"

# a measured error below this multiple of the truncation floor is
# dominated by representation error and excluded from the slope fit
FLOOR_FACTOR = 10.0


class ConfigError(ValueError):
    """Experiment configuration rejected."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated rate-experiment configuration."""

    problem: str = "differentiation"
    depth: int = 1000
    b: float = 2.0
    r: float = 0.5
    s: float = 0.5
    radius: float = 1.0
    sigma: float = 0.1
    noise_model: str = "gaussian"
    regularizer: str = "tikhonov"
    q: float = 1.0
    truth: str = "polynomial:0.55"
    n_grid: tuple = (250, 500, 1000, 2000, 4000, 8000)
    replicates: int = 50
    moment: float = 2.0
    seed: int = 0
    out: str = "."
    slope_tol: float = 0.08
    drop_smallest: int = 0


def _parse_grid(val: str) -> tuple:
    return tuple(int(v.strip()) for v in val.split(","))


# config-file key -> (dataclass field, value parser); "R" and "p" keep
# their short file spellings but map to descriptive field names
_KEYS = {
    "problem": ("problem", str),
    "depth": ("depth", int),
    "b": ("b", float),
    "r": ("r", float),
    "s": ("s", float),
    "R": ("radius", float),
    "sigma": ("sigma", float),
    "noise_model": ("noise_model", str),
    "regularizer": ("regularizer", str),
    "q": ("q", float),
    "truth": ("truth", str),
    "n_grid": ("n_grid", _parse_grid),
    "replicates": ("replicates", int),
    "p": ("moment", float),
    "seed": ("seed", int),
    "out": ("out", str),
    "slope_tol": ("slope_tol", float),
    "drop_smallest": ("drop_smallest", int),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a flat key-value configuration.

    Unknown keys, malformed values, and parameter combinations outside
    the theory (qualification below ``r + s``, interpolation exponent
    outside [0, 1/2], degenerate noise, non-increasing grid) are all
    rejected here rather than at run time.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = key.strip(), val.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        field_name, convert = _KEYS[key]
        if field_name in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[field_name] = convert(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc

    cfg = ExperimentConfig(**values)
    _validate_config(cfg)
    return cfg


def parse_config_file(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _validate_config(cfg: ExperimentConfig) -> None:
    kind, _, rest = cfg.problem.partition(":")
    if kind == "differentiation" and not rest:
        pass
    elif kind == "table" and rest:
        pass
    else:
        raise ConfigError(
            f"unknown problem {cfg.problem!r}; use 'differentiation' or 'table:PATH'"
        )
    if cfg.depth < 4:
        raise ConfigError("depth must be at least 4")
    if cfg.b <= 1:
        raise ConfigError("spectral decay exponent b must exceed 1")
    if cfg.r < 0:
        raise ConfigError("smoothness r must be nonnegative")
    if not 0.0 <= cfg.s <= 0.5:
        raise ConfigError("interpolation exponent s must lie in [0, 1/2]")
    if cfg.sigma <= 0:
        raise ConfigError("noise level sigma must be positive (no noiseless runs)")
    if cfg.radius <= 0:
        raise ConfigError("source radius R must be positive")
    if cfg.noise_model not in NOISE_MODELS:
        raise ConfigError(f"unknown noise model {cfg.noise_model!r}")
    if cfg.regularizer not in METHODS:
        raise ConfigError(f"unknown regularizer {cfg.regularizer!r}")
    if len(cfg.n_grid) < 2:
        raise ConfigError("n_grid needs at least two sample sizes")
    if any(n < 1 for n in cfg.n_grid) or any(
        a >= b for a, b in zip(cfg.n_grid, cfg.n_grid[1:])
    ):
        raise ConfigError("n_grid must be strictly increasing and positive")
    if cfg.replicates < 2:
        raise ConfigError("need at least two replicates per grid point")
    if cfg.moment < 1:
        raise ConfigError("moment order p must be at least 1")
    if cfg.slope_tol <= 0:
        raise ConfigError("slope tolerance must be positive")
    if not 0 <= cfg.drop_smallest <= len(cfg.n_grid) - 2:
        raise ConfigError("drop_smallest leaves fewer than two grid points")
    truth_kind = cfg.truth.partition(":")[0]
    if truth_kind not in ("single", "geometric", "polynomial"):
        raise ConfigError(f"unknown truth recipe {cfg.truth!r}")
    try:
        reg = make_regularizer(cfg.regularizer, declared_q=cfg.q)
        check_qualification(reg, cfg.r, cfg.s)
    except (QualificationError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_template() -> str:
    """Default configuration in the accepted file format."""
    cfg = ExperimentConfig()
    buf = io.StringIO()
    for key, (field_name, _) in _KEYS.items():
        val = getattr(cfg, field_name)
        if key == "n_grid":
            val = ",".join(str(v) for v in val)
        buf.write(f"{key} = {val}\n")
    return buf.getvalue()


def build_problem(cfg: ExperimentConfig):
    """Instantiate the model named by ``cfg.problem``."""
    kind, _, rest = cfg.problem.partition(":")
    if kind == "differentiation":
        return make_differentiation_problem(cfg.depth)
    return problem_from_table(rest)


@dataclass(frozen=True)
class RatePoint:
    """Aggregated error moment at one grid sample size."""

    n: int
    lam: float
    moment: float
    stderr: float
    floor: float
    excluded: bool = False


@dataclass(frozen=True)
class RateReport:
    """Slope verdict for one rate experiment."""

    config: ExperimentConfig
    points: tuple
    slope: float
    slope_ci: float
    theory: float
    passed: bool

    def used_points(self):
        return [pt for pt in self.points if not pt.excluded]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,lambda,p,moment,stderr,floor\n")
        for pt in self.points:
            buf.write(
                f"{pt.n},{pt.lam!r},{self.config.moment!r},"
                f"{pt.moment!r},{pt.stderr!r},{pt.floor!r}\n"
            )
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "slope": self.slope,
            "slope_ci": self.slope_ci,
            "theory": self.theory,
            "pass": self.passed,
            "tolerance": self.config.slope_tol,
            "points_used": len(self.used_points()),
            "excluded_n": [pt.n for pt in self.points if pt.excluded],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _one_cell(p, truth, cfg, n, n_idx, rep):
    """One (sample size, replicate) Monte Carlo cell."""
    d = draw_dataset(
        p, truth, n, cfg.sigma, cfg.noise_model, seed=(cfg.seed, n_idx, rep)
    )
    reg = make_regularizer(cfg.regularizer, declared_q=cfg.q)
    lam = lambda_rule(n, cfg.b, cfg.r, cfg.sigma, cfg.radius)
    est = fit(p, d, reg, lam)
    err = error_norm(p, truth, est, cfg.s)
    return err, truncation_floor(p, est, cfg.s)


def run_rates(cfg: ExperimentConfig, progress=None) -> RateReport:
    """Run the full Monte Carlo grid and fit the log-log slope.

    ``progress`` may be a callable taking one status string.  The
    worker count comes from the INVLEARN_WORKERS environment variable;
    results do not depend on it.
    """
    p = build_problem(cfg)
    truth = synthesize_source(p, cfg.r, cfg.radius, cfg.truth)
    reg = make_regularizer(cfg.regularizer, declared_q=cfg.q)
    check_qualification(reg, cfg.r, cfg.s)

    workers = max(1, int(os.environ.get(WORKERS_ENV, "1")))
    errs = np.empty((len(cfg.n_grid), cfg.replicates))
    floors = np.empty_like(errs)

    def run_cell(task):
        n_idx, rep = task
        n = cfg.n_grid[n_idx]
        errs[n_idx, rep], floors[n_idx, rep] = _one_cell(
            p, truth, cfg, n, n_idx, rep
        )

    tasks = [(i, rep) for i in range(len(cfg.n_grid)) for rep in range(cfg.replicates)]
    if workers == 1:
        for task in tasks:
            run_cell(task)
            if progress is not None and task[1] == cfg.replicates - 1:
                progress(f"n={cfg.n_grid[task[0]]} done")
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_cell, tasks))

    points = []
    for i, n in enumerate(cfg.n_grid):
        lam = lambda_rule(n, cfg.b, cfg.r, cfg.sigma, cfg.radius)
        pw = errs[i] ** cfg.moment
        m_p = float(pw.mean())
        moment = m_p ** (1.0 / cfg.moment)
        # delta method for the p-th root of a mean
        spread = float(pw.std(ddof=1)) / math.sqrt(cfg.replicates)
        stderr = moment / (cfg.moment * m_p) * spread if m_p > 0 else 0.0
        floor = float(floors[i].max())
        points.append(
            RatePoint(n=n, lam=lam, moment=moment, stderr=stderr, floor=floor)
        )

    points = _mark_exclusions(points, cfg.drop_smallest)
    slope, halfwidth = fit_loglog_slope(
        [(pt.n, pt.moment) for pt in points if not pt.excluded]
    )
    theory = -rate_exponent(cfg.b, cfg.r, cfg.s)
    passed = abs(slope - theory) <= cfg.slope_tol
    return RateReport(
        config=cfg,
        points=tuple(points),
        slope=slope,
        slope_ci=halfwidth,
        theory=theory,
        passed=passed,
    )


def _mark_exclusions(points, drop_smallest):
    out = []
    for i, pt in enumerate(points):
        floor_hit = pt.moment < FLOOR_FACTOR * pt.floor
        out.append(replace(pt, excluded=floor_hit or i < drop_smallest))
    if sum(1 for pt in out if not pt.excluded) < 2:
        raise RuntimeError(
            "fewer than two usable grid points after exclusions; "
            "errors sit too close to the truncation floor"
        )
    return out


def fit_loglog_slope(pairs) -> tuple[float, float]:
    """OLS slope and 95% half-width of log(moment) against log(n)."""
    if len(pairs) < 2:
        raise ValueError("need at least two points for a slope")
    x = np.log([float(n) for n, _ in pairs])
    y = np.log([float(m) for _, m in pairs])
    x_c = x - x.mean()
    sxx = float(x_c @ x_c)
    slope = float(x_c @ (y - y.mean())) / sxx
    if len(pairs) == 2:
        return slope, math.inf
    resid = y - (y.mean() + slope * x_c)
    dof = len(pairs) - 2
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    tcrit = float(scipy.stats.t.ppf(0.975, dof))
    return slope, tcrit * se


def write_report(report: RateReport, out_dir: str) -> tuple[str, str]:
    """Write rates.csv and report.json; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "rates.csv")
    json_path = os.path.join(out_dir, "report.json")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    return csv_path, json_path
