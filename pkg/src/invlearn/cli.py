"""Command-line harness for the library.

Subcommands
-----------
rates       Monte Carlo rate experiment driven by a config file.
effdim      Effective-dimension table with its floor and decay bound.
packing     Build a separated family and certify its invariants.
conc-check  Monte Carlo coverage of the concentration bounds.
qual-check  Qualification sup of a filter family on a level grid.
simulate    Draw one dataset and write it as CSV.

Every subcommand writes its CSV artifacts with a header row and prints
a short summary to stdout.  Exit codes: 0 all checks passed, 2 at
least one check failed, 1 run error, 64 usage.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .concentration import (
    check_neumann_inverse,
    check_noise_term,
    check_operator_hs_deviation,
    check_weighted_operator_deviation,
    neumann_min_n,
)
from .effdim import (
    classify_priors,
    effdim_power_law_bound,
    effective_dimension,
    effective_dimension_tail,
)
from .experiments import (
    config_template,
    parse_config_file,
    run_rates,
    write_report,
)
from .minimax import build_packing, fano_budget, recipe_n
from .problem import (
    make_differentiation_problem,
    problem_from_table,
    synthesize_source,
)
from .sampling import NOISE_MODELS, dataset_to_csv, draw_dataset
from .spectral import METHODS, make_regularizer, qualification_sup

__all__ = ["main", "run"]

_USAGE = """\
usage: invlearn <subcommand> [options]

subcommands:
  rates       run a Monte Carlo rate experiment from a config file
  effdim      tabulate the effective dimension and check its bounds
  packing     build a separated family and certify its invariants
  conc-check  Monte Carlo coverage of the concentration bounds
  qual-check  qualification sup of a filter family on a level grid
  simulate    draw one dataset and write it as CSV

run 'invlearn <subcommand> --help' for options.
"""

_CONC_PROPS = (
    "operator-hs",
    "noise-term",
    "weighted-operator",
    "inverse-comparison",
)


def _load_problem(name: str, depth: int):
    kind, _, rest = name.partition(":")
    if kind == "differentiation" and not rest:
        return make_differentiation_problem(depth)
    if kind == "table" and rest:
        return problem_from_table(rest)
    raise ValueError(f"unknown problem {name!r}; use 'differentiation' or 'table:PATH'")


def _parse_lams(text: str) -> list:
    lams = [float(v) for v in text.split(",") if v.strip()]
    if not lams:
        raise ValueError("empty level list")
    return lams


def _write_csv(out_dir: str, filename: str, header: str, rows) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return path


def _fmt(x) -> str:
    return repr(float(x))


def _problem_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--problem",
        default="differentiation",
        help="model instance: 'differentiation' or 'table:PATH'",
    )
    parser.add_argument(
        "--depth", type=int, default=1000, help="spectral truncation depth"
    )


def _rates_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invlearn rates", description="Monte Carlo rate experiment"
    )
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the config output directory")
    parser.add_argument(
        "--template",
        action="store_true",
        help="print a default config file and exit",
    )
    return parser


def _cmd_rates(ns) -> int:
    if ns.template:
        sys.stdout.write(config_template())
        return 0
    if ns.config is None:
        raise ValueError("--config is required (or use --template)")
    cfg = parse_config_file(ns.config)
    if ns.seed is not None:
        cfg = replace(cfg, seed=ns.seed)
    if ns.out is not None:
        cfg = replace(cfg, out=ns.out)
    report = run_rates(cfg, progress=lambda msg: print(f"  {msg}", flush=True))
    csv_path, json_path = write_report(report, cfg.out)
    for pt in report.points:
        tag = " (excluded)" if pt.excluded else ""
        print(
            f"n={pt.n:>6d}  lam={pt.lam:.4g}  moment={pt.moment:.4g}"
            f"  stderr={pt.stderr:.2g}  floor={pt.floor:.2g}{tag}"
        )
    print(
        f"slope {report.slope:+.4f} +- {report.slope_ci:.4f}"
        f"  theory {report.theory:+.4f}"
        f"  tol {cfg.slope_tol:g}"
        f"  -> {'pass' if report.passed else 'FAIL'}"
    )
    print(f"wrote {csv_path} and {json_path}")
    return 0 if report.passed else 2


def _effdim_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invlearn effdim", description="effective-dimension table"
    )
    _problem_args(parser)
    parser.add_argument(
        "--lams",
        default="1e-1,1e-2,1e-3,1e-4,1e-5",
        help="comma-separated levels in (0, 1]",
    )
    parser.add_argument("--b", type=float, default=2.0, help="decay exponent")
    parser.add_argument("--out", default=".", help="output directory")
    return parser


def _cmd_effdim(ns) -> int:
    p = _load_problem(ns.problem, ns.depth)
    prior = classify_priors(p, ns.b)
    mubar1 = float(p.normalized_mu(1)[0])
    if not prior.upper_established:
        print(
            f"note: decay class at b={ns.b:g} not established; "
            "no upper bound will be checked"
        )
    rows = []
    all_ok = True
    for lam in _parse_lams(ns.lams):
        val = effective_dimension(p, lam)
        tail = effective_dimension_tail(p, lam)
        if math.isfinite(tail):
            val += tail
        floor = 0.5 if lam <= mubar1 else 0.0
        if prior.upper_established:
            upper = effdim_power_law_bound(ns.b, prior.beta_fit, p.kappa_sq, lam)
        else:
            upper = math.nan
        ok = val >= floor and (not math.isfinite(upper) or val <= upper)
        all_ok &= ok
        rows.append((_fmt(lam), _fmt(val), _fmt(upper), _fmt(floor)))
        print(
            f"lam={lam:.3g}  N={val:.6g}  upper={upper:.6g}  floor={floor:g}"
            f"  -> {'ok' if ok else 'FAIL'}"
        )
    path = _write_csv(ns.out, "effdim.csv", "lambda,effdim,upper_bound,lower_floor", rows)
    print(f"wrote {path}")
    return 0 if all_ok else 2


def _packing_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invlearn packing", description="separated-family construction"
    )
    _problem_args(parser)
    parser.add_argument("--eps", type=float, required=True, help="separation scale")
    parser.add_argument("--r", type=float, default=0.5, help="source smoothness")
    parser.add_argument("--s", type=float, default=0.0, help="norm exponent")
    parser.add_argument("--R", type=float, default=1.0, help="source radius")
    parser.add_argument("--sigma", type=float, default=0.1, help="noise level")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=".", help="output directory")
    return parser


def _cmd_packing(ns) -> int:
    p = _load_problem(ns.problem, ns.depth)
    rng = np.random.default_rng(ns.seed)
    packing = build_packing(p, ns.r, ns.s, ns.R, ns.eps, ns.sigma, rng)
    n_rec = recipe_n(p, packing)
    budget = fano_budget(p, packing, n_rec)

    w = p.mu**ns.s
    scaled = packing.coeffs * w
    gram = scaled @ scaled.T
    sq = np.diag(gram)[:, None] + np.diag(gram)[None, :] - 2.0 * gram
    np.fill_diagonal(sq, np.inf)
    min_sep_sq = float(sq.min())
    max_radius = float(np.linalg.norm(packing.cert_coeffs, axis=1).max())
    kls = (
        np.sum((packing.coeffs[:, None, :] - packing.coeffs[None, :, :]) ** 2 * p.mu, axis=2)
        / (2.0 * ns.sigma**2)
    )
    np.fill_diagonal(kls, 0.0)
    max_kl = float(kls.max())

    checks = {
        "separation": min_sep_sq > ns.eps**2,
        "radius": max_radius <= ns.R * (1.0 + 1e-9),
        "information": budget.omega <= 0.125,
    }
    print(
        f"eps={ns.eps:g}  m={packing.m}  N={packing.size}"
        f"  min_sep_sq={min_sep_sq:.6g} (> eps^2={ns.eps**2:.6g})"
    )
    print(
        f"max_cert_radius={max_radius:.9g} (<= R={ns.R:g})"
        f"  max_kl={max_kl:.6g}  recipe_n={n_rec}  omega={budget.omega:.6g}"
    )
    for label, ok in checks.items():
        print(f"  {label}: {'ok' if ok else 'FAIL'}")
    row = (
        _fmt(ns.eps),
        str(packing.m),
        str(packing.size),
        _fmt(min_sep_sq),
        _fmt(max_kl),
        _fmt(budget.omega),
    )
    path = _write_csv(
        ns.out,
        "packing.csv",
        "eps,m,N,min_separation_sq,max_kl,omega_at_recipe_n",
        [row],
    )
    print(f"wrote {path}")
    return 0 if all(checks.values()) else 2


def _conc_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invlearn conc-check", description="concentration coverage checks"
    )
    _problem_args(parser)
    parser.add_argument(
        "--prop",
        default="all",
        choices=_CONC_PROPS + ("all",),
        help="which bound to exercise",
    )
    parser.add_argument(
        "--n",
        default="500",
        help="sample size, or 'auto' for the smallest admissible n",
    )
    parser.add_argument("--lam", type=float, default=0.05, help="level in (0, 1]")
    parser.add_argument("--eta", type=float, default=0.1, help="failure budget")
    parser.add_argument("--reps", type=int, default=500)
    parser.add_argument("--sigma", type=float, default=0.1, help="noise level")
    parser.add_argument(
        "--noise-model", default="gaussian", choices=sorted(NOISE_MODELS)
    )
    parser.add_argument("--truth", default="polynomial:0.55", help="source recipe")
    parser.add_argument("--r", type=float, default=0.5, help="source smoothness")
    parser.add_argument("--R", type=float, default=1.0, help="source radius")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--check-depth", type=int, default=None, help="projection depth for statistics"
    )
    parser.add_argument("--out", default=".", help="output directory")
    return parser


def _cmd_conc(ns) -> int:
    p = _load_problem(ns.problem, ns.depth)
    props = list(_CONC_PROPS) if ns.prop == "all" else [ns.prop]
    reports = []
    for prop in props:
        if prop == "inverse-comparison" and ns.n == "auto":
            n = neumann_min_n(p, ns.lam, ns.eta)
        elif ns.n == "auto":
            raise ValueError("--n auto is only defined for inverse-comparison")
        else:
            n = int(ns.n)
        if prop == "operator-hs":
            rep = check_operator_hs_deviation(
                p, n, ns.eta, ns.reps, seed=ns.seed, depth=ns.check_depth
            )
        elif prop == "noise-term":
            f = synthesize_source(p, ns.r, ns.R, ns.truth)
            rep = check_noise_term(
                p,
                f,
                ns.sigma,
                n,
                ns.lam,
                ns.eta,
                ns.reps,
                noise_model=ns.noise_model,
                seed=ns.seed,
                depth=ns.check_depth,
            )
        elif prop == "weighted-operator":
            rep = check_weighted_operator_deviation(
                p, n, ns.lam, ns.eta, ns.reps, seed=ns.seed, depth=ns.check_depth
            )
        else:
            rep = check_neumann_inverse(
                p, n, ns.lam, ns.eta, ns.reps, seed=ns.seed, depth=ns.check_depth
            )
        reports.append(rep)
        print(
            f"{rep.proposition}: n={rep.n} lam={rep.lam}"
            f" coverage={rep.coverage:.4f} (need >= {rep.threshold:.4f})"
            f" bound={rep.bound:.4g}"
            f" -> {'ok' if rep.passed else 'FAIL'}"
        )
    rows = [
        (
            rep.proposition,
            str(rep.n),
            "" if rep.lam is None else _fmt(rep.lam),
            _fmt(rep.eta),
            str(rep.replicates),
            _fmt(rep.coverage),
            _fmt(rep.threshold),
            _fmt(rep.bound),
            str(rep.passed).lower(),
        )
        for rep in reports
    ]
    path = _write_csv(
        ns.out,
        "conc.csv",
        "proposition,n,lambda,eta,replicates,coverage,threshold,bound,pass",
        rows,
    )
    print(f"wrote {path}")
    return 0 if all(rep.passed for rep in reports) else 2


def _qual_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invlearn qual-check", description="qualification sup check"
    )
    parser.add_argument("--method", required=True, choices=METHODS)
    parser.add_argument("--q", type=float, default=1.0, help="declared order")
    parser.add_argument(
        "--lams", default="1.0,0.3,0.1,0.03,0.01", help="comma-separated levels"
    )
    parser.add_argument("--grid-size", type=int, default=10_000)
    parser.add_argument("--out", default=".", help="output directory")
    return parser


def _cmd_qual(ns) -> int:
    reg = make_regularizer(ns.method, declared_q=ns.q)
    rows = []
    all_ok = True
    for lam in _parse_lams(ns.lams):
        sup = qualification_sup(reg, ns.q, lam, grid_size=ns.grid_size)
        bound = reg.qual_const * reg.effective_lambda(lam) ** ns.q
        ok = sup <= bound * (1.0 + 1e-12)
        all_ok &= ok
        rows.append((ns.method, _fmt(ns.q), _fmt(lam), _fmt(sup), _fmt(bound)))
        print(
            f"{ns.method} q={ns.q:g} lam={lam:.3g}: sup={sup:.6g}"
            f" <= {bound:.6g} -> {'ok' if ok else 'FAIL'}"
        )
    path = _write_csv(ns.out, "qual.csv", "method,q,lambda,sup,bound", rows)
    print(f"wrote {path}")
    return 0 if all_ok else 2


def _simulate_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invlearn simulate", description="draw one dataset to CSV"
    )
    _problem_args(parser)
    parser.add_argument("--n", type=int, required=True, help="sample size")
    parser.add_argument("--sigma", type=float, default=0.1)
    parser.add_argument(
        "--noise-model", default="gaussian", choices=sorted(NOISE_MODELS)
    )
    parser.add_argument("--truth", default="polynomial:0.55", help="source recipe")
    parser.add_argument("--r", type=float, default=0.5, help="source smoothness")
    parser.add_argument("--R", type=float, default=1.0, help="source radius")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="dataset.csv", help="output file")
    return parser


def _cmd_simulate(ns) -> int:
    p = _load_problem(ns.problem, ns.depth)
    f = synthesize_source(p, ns.r, ns.R, ns.truth)
    d = draw_dataset(p, f, ns.n, ns.sigma, ns.noise_model, seed=ns.seed)
    parent = os.path.dirname(os.path.abspath(ns.out))
    os.makedirs(parent, exist_ok=True)
    with open(ns.out, "w", encoding="utf-8") as fh:
        fh.write(dataset_to_csv(d))
    print(f"wrote {ns.out} (n={d.n}, sigma={d.sigma:g}, {d.noise_model})")
    return 0


_COMMANDS = {
    "rates": (_rates_parser, _cmd_rates),
    "effdim": (_effdim_parser, _cmd_effdim),
    "packing": (_packing_parser, _cmd_packing),
    "conc-check": (_conc_parser, _cmd_conc),
    "qual-check": (_qual_parser, _cmd_qual),
    "simulate": (_simulate_parser, _cmd_simulate),
}


def main(argv=None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if not args:
        sys.stderr.write(_USAGE)
        return 64
    cmd = args.pop(0)
    if cmd in ("-h", "--help"):
        sys.stdout.write(_USAGE)
        return 0
    if cmd not in _COMMANDS:
        sys.stderr.write(f"invlearn: unknown subcommand {cmd!r}\n")
        sys.stderr.write(_USAGE)
        return 64
    make_parser, handler = _COMMANDS[cmd]
    try:
        ns = make_parser().parse_args(args)
    except SystemExit as exc:
        # argparse already printed help or a usage message
        return 0 if exc.code in (0, None) else 64
    try:
        return handler(ns)
    except (ValueError, RuntimeError, ArithmeticError, OSError) as exc:
        sys.stderr.write(f"invlearn: error: {exc}\n")
        return 1


def run() -> None:
    """Console entry point."""
    sys.exit(main())
