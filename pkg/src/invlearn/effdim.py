"""Effective dimension and spectral prior classification.

The effective dimension of the normalized covariance ``Bbar = B /
kappa^2`` at level lam is ``N(lam) = trace((Bbar + lam)^-1 Bbar)``.  It
drives both the variance side of upper rate bounds and the sample-size
thresholds under which concentration arguments apply.

Prior classes describe polynomial spectral decay: the upper class asks
``mu_j <= beta j^-b``, the lower class ``mu_j >= alpha j^-b``, and the
strong lower class additionally controls dyadic ratios
``mu_2j / mu_j >= 2^-gamma`` from some index on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import ProblemModel
from .sampling import EmpiricalOperator

__all__ = [
    "PriorClassReport",
    "effective_dimension",
    "effective_dimension_tail",
    "empirical_effective_dimension",
    "effdim_power_law_bound",
    "classify_priors",
    "strong_ratio_params",
    "admissible_n",
]

# log-log trend steeper than this over the tail half marks a power-law
# fit as drifting, i.e. the constant does not hold uniformly in j
_TREND_TOL = 0.01


def effective_dimension(p: ProblemModel, lam: float) -> float:
    """Truncated effective dimension ``sum_j mubar_j / (mubar_j + lam)``.

    Uses the stored eigenvalues (depth ``truncation_J``);
    :func:`effective_dimension_tail` bounds the dropped mass, so the
    true value lies in ``[N, N + tail]``.
    """
    if lam <= 0:
        raise ValueError("level must be positive")
    mubar = p.normalized_mu()
    return float(np.sum(mubar / (mubar + lam)))


def effective_dimension_tail(p: ProblemModel, lam: float) -> float:
    """Instance bound on effective-dimension mass beyond the truncation.

    Returns NaN when the instance documents no tail bound.
    """
    if lam <= 0:
        raise ValueError("level must be positive")
    if p.effdim_tail is None:
        return math.nan
    return float(p.effdim_tail(lam))


def empirical_effective_dimension(emp: EmpiricalOperator, lam: float) -> float:
    """Diagnostic ``trace((T + lam)^-1 T)`` of the empirical operator.

    Converges to the population effective dimension as the sample
    grows; useful to sanity-check a model against data.
    """
    if lam <= 0:
        raise ValueError("level must be positive")
    vals = np.linalg.eigvalsh(emp.matrix)
    vals = np.clip(vals, 0.0, None)
    return float(np.sum(vals / (vals + lam)))


def effdim_power_law_bound(b: float, beta: float, kappa_sq: float, lam: float) -> float:
    """Effective-dimension bound under the upper prior class.

    For ``mu_j <= beta j^-b`` with b > 1, splitting the trace sum at
    the index where ``mu_j / kappa^2`` crosses lam gives

        N(lam) <= (b / (b-1)) * (beta / (kappa^2 lam))^(1/b).

    The class constant enters through its b-th root: the bound is
    invariant under the joint rescaling ``mu -> c mu``, ``lam -> c lam``,
    as the trace itself is.
    """
    if b <= 1:
        raise ValueError("spectral decay exponent must exceed 1")
    if beta <= 0 or kappa_sq <= 0 or lam <= 0:
        raise ValueError("class constant, kappa^2 and level must be positive")
    return (b / (b - 1.0)) * (beta / (kappa_sq * lam)) ** (1.0 / b)


@dataclass(frozen=True)
class PriorClassReport:
    """Fitted polynomial prior-class constants at a given exponent b."""

    b: float
    beta_fit: float                 # max_j mu_j j^b
    alpha_fit: float                # min_j mu_j j^b
    upper_established: bool         # mu_j j^b not drifting upward
    lower_established: bool         # mu_j j^b not drifting to zero
    strong_gamma: float | None      # dyadic ratio exponent, if defined
    strong_j0: int | None           # index the ratio condition holds from


def _tail_trend(values: np.ndarray) -> float:
    """Log-log slope of a positive sequence over its tail half."""
    J = values.size
    lo = max(1, J // 2)
    idx = np.arange(lo + 1, J + 1, dtype=float)
    y = np.log(values[lo:])
    x = np.log(idx)
    x = x - x.mean()
    return float((x @ (y - y.mean())) / (x @ x))


def strong_ratio_params(mu: np.ndarray) -> tuple[float, int] | None:
    """Dyadic ratio exponent ``gamma = max_j -log2(mu_2j / mu_j)``.

    Scanned for ``j <= J/2``; returns None when some scanned ratio is
    not positive (the condition then fails inside the window).
    """
    J = mu.size
    half = J // 2
    if half < 1:
        return None
    num = mu[2 * np.arange(1, half + 1) - 1]    # mu_{2j} for j = 1..half
    den = mu[:half]
    if np.any(num <= 0) or np.any(den <= 0):
        return None
    gamma = float(np.max(-np.log2(num / den)))
    return gamma, 1


def classify_priors(p: ProblemModel, b: float) -> PriorClassReport:
    """Fit prior-class constants at exponent b from stored eigenvalues.

    Constants are extremes of ``mu_j j^b``; a class counts as
    established only when that sequence shows no systematic drift over
    the tail half (drift means the constant degenerates as the depth
    grows, so no uniform constant exists at this exponent).
    """
    if b <= 0:
        raise ValueError("decay exponent must be positive")
    mu = p.mu
    if np.any(mu <= 0):
        raise ValueError("prior-class fits need strictly positive eigenvalues")
    j = np.arange(1, mu.size + 1, dtype=float)
    a = mu * j**b
    trend = _tail_trend(a)
    strong = strong_ratio_params(mu)
    return PriorClassReport(
        b=float(b),
        beta_fit=float(a.max()),
        alpha_fit=float(a.min()),
        upper_established=trend < _TREND_TOL,
        lower_established=trend > -_TREND_TOL,
        strong_gamma=None if strong is None else strong[0],
        strong_j0=None if strong is None else strong[1],
    )


def admissible_n(p: ProblemModel, lam: float, eta: float) -> int:
    """Smallest sample size the concentration regime asks for.

    ``n >= 64 lam^-1 max(N(lam), 1) log^2(8/eta)`` for lam in (0, 1]
    and confidence parameter eta in (0, 1).
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("level must lie in (0, 1]")
    if not 0.0 < eta < 1.0:
        raise ValueError("confidence parameter must lie in (0, 1)")
    N = max(effective_dimension(p, lam), 1.0)
    return int(math.ceil(64.0 / lam * N * math.log(8.0 / eta) ** 2))
