"""Monte Carlo coverage checks for the concentration bounds.

Each check replays one probabilistic inequality many times and counts
violations.  An inequality claimed to hold with probability at least
``1 - eta`` passes when the empirical coverage stays above
``1 - eta - 3 sqrt(eta (1 - eta) / reps)`` (three binomial standard
errors of slack).

Operators are represented in the eigenbasis truncated at a working
depth; projections only shrink the deviation statistics, so truncation
never manufactures a violation.  The checked bounds, for confidence
``eta`` and ``L = log(2/eta)``:

- operator deviation:   ``||Bbar - Bbar_x||_HS <= 6 L / sqrt(n)``
- noise term:           ``||(Bbar+lam)^(-1/2)(Bbar_x f - Sbar_x* y)||
                          <= 2 L (M/(n sqrt(lam)) + sqrt(sigma^2 N(lam)/n)) / kappa``
- weighted deviation:   ``||(Bbar+lam)^-1 (Bbar - Bbar_x)||_HS
                          <= 2 L (2/(n lam) + sqrt(N(lam)/(n lam)))``
- inverse comparison:   ``||(Bbar_x+lam)^-1 (Bbar+lam)|| <= 2``,
  which is only claimed when ``sqrt(n lam) >= 8 L sqrt(max(N(lam), 1))``;
  the check refuses to run outside that regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .effdim import effective_dimension
from .problem import ProblemModel, SourceFunction, forward_value
from .sampling import draw_dataset

__all__ = [
    "CoverageReport",
    "PerturbationReport",
    "PreconditionError",
    "coverage_threshold",
    "check_operator_hs_deviation",
    "check_noise_term",
    "check_weighted_operator_deviation",
    "check_neumann_inverse",
    "neumann_min_n",
    "power_series_abs_sum",
    "power_bound_constant",
    "check_power_perturbation",
]

_DEFAULT_CHECK_DEPTH = 256


class PreconditionError(ValueError):
    """The (n, lam, eta) regime does not satisfy the bound's hypothesis."""


@dataclass(frozen=True)
class CoverageReport:
    """Outcome of one Monte Carlo coverage run."""

    proposition: str
    n: int
    lam: float | None
    eta: float
    replicates: int
    violations: int
    coverage: float
    threshold: float
    bound: float
    stat_mean: float

    @property
    def passed(self) -> bool:
        return self.coverage >= self.threshold


def coverage_threshold(eta: float, reps: int) -> float:
    """Required empirical coverage: nominal minus binomial slack."""
    return 1.0 - eta - 3.0 * math.sqrt(eta * (1.0 - eta) / reps)


def _check_depth(p: ProblemModel, depth: int | None) -> int:
    d = _DEFAULT_CHECK_DEPTH if depth is None else int(depth)
    return min(p.truncation_J, d)


def _report(name, n, lam, eta, reps, stats, bound) -> CoverageReport:
    stats = np.asarray(stats)
    violations = int(np.count_nonzero(stats > bound))
    return CoverageReport(
        proposition=name,
        n=n,
        lam=lam,
        eta=eta,
        replicates=reps,
        violations=violations,
        coverage=1.0 - violations / reps,
        threshold=coverage_threshold(eta, reps),
        bound=float(bound),
        stat_mean=float(stats.mean()),
    )


def check_operator_hs_deviation(
    p: ProblemModel,
    n: int,
    eta: float,
    reps: int,
    seed=0,
    depth: int | None = None,
) -> CoverageReport:
    """Coverage of the Hilbert-Schmidt deviation bound for ``Bbar_x``."""
    _validate(eta, reps, n)
    depth = _check_depth(p, depth)
    mubar = p.normalized_mu(depth)
    bound = 6.0 * math.log(2.0 / eta) / math.sqrt(n)
    stats = np.empty(reps)
    for rep in range(reps):
        rng = np.random.default_rng([_stream(seed), 1, rep])
        xs = p.design_sampler(rng, n)
        C = p.feature_matrix(xs, J=depth)
        Bx = (C @ C.T) / (n * p.kappa_sq)
        Bx[np.diag_indices_from(Bx)] -= mubar
        stats[rep] = np.linalg.norm(Bx)
    return _report("operator-hs-deviation", n, None, eta, reps, stats, bound)


def check_noise_term(
    p: ProblemModel,
    f: SourceFunction,
    sigma: float,
    n: int,
    lam: float,
    eta: float,
    reps: int,
    noise_model: str = "gaussian",
    seed=0,
    depth: int | None = None,
) -> CoverageReport:
    """Coverage of the weighted noise-term bound at level lam."""
    _validate(eta, reps, n, lam)
    depth = _check_depth(p, depth)
    mubar = p.normalized_mu(depth)
    weight = 1.0 / np.sqrt(mubar + lam)
    N_lam = effective_dimension(p, lam)
    kappa = math.sqrt(p.kappa_sq)
    stats = np.empty(reps)
    M = None
    for rep in range(reps):
        d = draw_dataset(p, f, n, sigma, noise_model, seed=(_stream(seed), 2, rep))
        M = d.noise_scale
        resid = forward_value(p, f, d.xs) - d.ys
        C = p.feature_matrix(d.xs, J=depth)
        v = (C @ resid) / (n * p.kappa_sq)
        stats[rep] = np.linalg.norm(weight * v)
    bound = (
        2.0
        * math.log(2.0 / eta)
        * (M / (n * math.sqrt(lam)) + math.sqrt(sigma**2 * N_lam / n))
        / kappa
    )
    return _report("noise-term", n, lam, eta, reps, stats, bound)


def check_weighted_operator_deviation(
    p: ProblemModel,
    n: int,
    lam: float,
    eta: float,
    reps: int,
    seed=0,
    depth: int | None = None,
) -> CoverageReport:
    """Coverage of the ``(Bbar+lam)^-1``-weighted deviation bound."""
    _validate(eta, reps, n, lam)
    depth = _check_depth(p, depth)
    mubar = p.normalized_mu(depth)
    weight = 1.0 / (mubar + lam)
    N_lam = effective_dimension(p, lam)
    bound = (
        2.0
        * math.log(2.0 / eta)
        * (2.0 / (n * lam) + math.sqrt(N_lam / (n * lam)))
    )
    stats = np.empty(reps)
    for rep in range(reps):
        rng = np.random.default_rng([_stream(seed), 3, rep])
        xs = p.design_sampler(rng, n)
        C = p.feature_matrix(xs, J=depth)
        Bx = (C @ C.T) / (n * p.kappa_sq)
        Bx[np.diag_indices_from(Bx)] -= mubar
        stats[rep] = np.linalg.norm(weight[:, None] * Bx)
    return _report("weighted-operator-deviation", n, lam, eta, reps, stats, bound)


def neumann_min_n(p: ProblemModel, lam: float, eta: float) -> int:
    """Smallest n satisfying the inverse-comparison hypothesis.

    The hypothesis is ``sqrt(n lam) >= 8 log(2/eta) sqrt(max(N, 1))``.
    """
    N = max(effective_dimension(p, lam), 1.0)
    return int(math.ceil(64.0 * math.log(2.0 / eta) ** 2 * N / lam))


def check_neumann_inverse(
    p: ProblemModel,
    n: int,
    lam: float,
    eta: float,
    reps: int,
    seed=0,
    depth: int | None = None,
) -> CoverageReport:
    """Coverage of ``||(Bbar_x+lam)^-1 (Bbar+lam)|| <= 2``.

    Refuses to run when the hypothesis on (n, lam, eta) fails; the
    bound is simply not claimed there.
    """
    _validate(eta, reps, n, lam)
    n_min = neumann_min_n(p, lam, eta)
    if n < n_min:
        raise PreconditionError(
            f"inverse-comparison hypothesis needs n >= {n_min} at "
            f"lam={lam:g}, eta={eta:g}; got n={n}"
        )
    depth = _check_depth(p, depth)
    mubar = p.normalized_mu(depth)
    stats = np.empty(reps)
    for rep in range(reps):
        rng = np.random.default_rng([_stream(seed), 4, rep])
        xs = p.design_sampler(rng, n)
        C = p.feature_matrix(xs, J=depth)
        Bx = (C @ C.T) / (n * p.kappa_sq)
        Bx[np.diag_indices_from(Bx)] += lam
        prod = np.linalg.solve(Bx, np.diag(mubar + lam))
        stats[rep] = np.linalg.norm(prod, ord=2)
    return _report("inverse-comparison", n, lam, eta, reps, stats, 2.0)


def _validate(eta: float, reps: int, n: int, lam: float | None = None) -> None:
    if not 0.0 < eta < 1.0:
        raise ValueError("confidence parameter must lie in (0, 1)")
    if reps < 1:
        raise ValueError("replicate count must be positive")
    if n < 1:
        raise ValueError("sample size must be positive")
    if lam is not None and not 0.0 < lam <= 1.0:
        raise ValueError("level must lie in (0, 1]")


def _stream(seed) -> int:
    return int(seed)


# ----------------------------------------------------------------------
# operator power perturbation


def power_series_abs_sum(r: float, tol: float = 1e-10) -> float:
    """Sum of absolute binomial coefficients of ``(1 - z)^(r-1)``, r > 1.

    Coefficients beyond index floor(r) share one sign and the signed
    series telescopes to ``(1-1)^(r-1) = 0``, so the absolute tail is
    the absolute value of the partial signed sum; summing a fixed block
    and adding that remainder is exact to roundoff (well inside tol).
    """
    if r <= 1:
        raise ValueError("series constant only defined for r > 1")
    block = max(int(math.ceil(r)) + 2, 64)
    c = 1.0
    abs_sum = 0.0
    signed_sum = 0.0
    for n in range(block):
        abs_sum += abs(c)
        signed_sum += c
        c *= (n - (r - 1.0)) / (n + 1.0)
    remainder = abs(signed_sum)
    if abs(c) > tol and remainder < abs(c):
        raise ArithmeticError("series block too short for the target tolerance")
    return abs_sum + remainder


def power_bound_constant(r: float) -> float:
    """Operator-norm constant for ``||B1^r - B2^r||`` on [0, 1] spectra.

    For r <= 1 the map is operator monotone and
    ``||B1^r - B2^r|| <= ||B1 - B2||^r`` holds with constant 1; for
    r > 1 a telescoped binomial expansion gives the Lipschitz constant
    ``r * sum_n |c_n|`` with the coefficients of ``(1 - z)^(r-1)``.
    """
    if r <= 0:
        raise ValueError("power must be positive")
    if r <= 1:
        return 1.0
    return r * power_series_abs_sum(r)


@dataclass(frozen=True)
class PerturbationReport:
    """Worst observed perturbation ratio against its proven constant."""

    power: float
    dim: int
    replicates: int
    max_ratio: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.bound


def check_power_perturbation(
    r: float, dim: int, reps: int, seed=0
) -> PerturbationReport:
    """Ratio test of operator-power perturbations on random PSD pairs.

    Draws pairs ``B = Q diag(u) Q^T`` with uniform spectra in [0, 1]
    and Haar-like orthogonal factors, then compares
    ``||B1^r - B2^r||`` against ``||B1 - B2||`` (power r > 1) or
    ``||B1 - B2||^r`` (power r <= 1).
    """
    if dim < 2 or reps < 1:
        raise ValueError("need dim >= 2 and at least one replicate")
    rng = np.random.default_rng([_stream(seed), 5])
    gauss = rng.standard_normal((2 * reps, dim, dim))
    q, _ = np.linalg.qr(gauss)
    u = rng.random((2 * reps, dim))
    B = np.einsum("bij,bj,bkj->bik", q, u, q)
    Br = np.einsum("bij,bj,bkj->bik", q, u**r, q)
    dB = B[0::2] - B[1::2]
    dBr = Br[0::2] - Br[1::2]
    norm_dB = np.linalg.norm(dB, ord=2, axis=(1, 2))
    norm_dBr = np.linalg.norm(dBr, ord=2, axis=(1, 2))
    denom = norm_dB if r > 1 else norm_dB**r
    ratios = norm_dBr / denom
    return PerturbationReport(
        power=float(r),
        dim=dim,
        replicates=reps,
        max_ratio=float(ratios.max()),
        bound=power_bound_constant(r),
    )
