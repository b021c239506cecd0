"""Regularized estimators in the kernel-matrix representation.

The estimate solves the normal equation of the sampled forward problem
by spectral filtering: with ``T = K_n / (n kappa^2)`` the coefficient
vector is

    alpha = g_lam(T) y / (n kappa^2),        f_hat = sum_i alpha_i F_{x_i}.

This n-dimensional form equals the filtered normal equation on the
model space because ``g(S*S) S* = S* g(S S*)`` for any filter given by
a limit of polynomials (the representer identity); the equivalence is
property-tested against an explicit coefficient-space construction,
see :func:`fit_spectral`.

Per-method solvers avoid a full n x n eigendecomposition where the
filter allows it: Tikhonov by a positive-definite solve, cut-off by a
partial eigendecomposition of the retained invariant subspace,
Landweber by running its defining iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .problem import ProblemModel, SourceFunction, interpolation_norm
from .sampling import Dataset, EmpiricalOperator, build_empirical_operator
from .spectral import (
    QualificationError,
    Regularizer,
    apply_matrix_function,
    landweber_iterate,
)

__all__ = [
    "Estimate",
    "fit",
    "fit_spectral",
    "estimate_coefficients",
    "predict",
    "error_norm",
    "truncation_floor",
    "lambda_rule",
    "rate_exponent",
    "theoretical_rate",
    "check_qualification",
]

# below this size the generic eigendecomposition path is used as-is
_DENSE_CUTOFF_N = 1024


@dataclass(frozen=True)
class Estimate:
    """Fitted coefficients alpha over the design points."""

    alpha: np.ndarray
    xs: np.ndarray
    lambda_used: float
    lambda_effective: float
    method: str
    declared_q: float

    @property
    def n(self) -> int:
        return int(self.xs.shape[0])


def check_qualification(reg: Regularizer, r: float, s: float) -> None:
    """Refuse filter/smoothness combinations the theory does not cover.

    Rate guarantees need qualification at least ``r + s``; running
    outside that regime silently produces saturation artifacts, so it
    is a hard error.
    """
    need = r + s
    if reg.declared_q < need - 1e-12:
        raise QualificationError(
            f"declared qualification {reg.declared_q} is below r + s = {need}; "
            "increase the filter order or lower the target smoothness"
        )


def fit(
    p: ProblemModel,
    d: Dataset,
    reg: Regularizer,
    lam: float,
    operator: EmpiricalOperator | None = None,
) -> Estimate:
    """Fit the spectral-filter estimate on one dataset.

    ``operator`` may carry a prebuilt empirical operator for the same
    design; otherwise it is assembled (and PSD-certified) here.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"regularization level must lie in (0, 1], got {lam}")
    emp = operator if operator is not None else build_empirical_operator(p, d.xs)
    if emp.n != d.n:
        raise ValueError("operator and dataset disagree on sample size")
    T = emp.matrix
    n = emp.n
    y = np.asarray(d.ys, dtype=float)

    if reg.method == "tikhonov":
        z = scipy.linalg.solve(
            T + lam * np.eye(n), y, assume_a="pos", check_finite=False
        )
    elif reg.method == "cutoff":
        z = _cutoff_apply(T, y, lam)
    elif reg.method == "landweber":
        k = max(1, math.ceil(1.0 / lam))
        z = landweber_iterate(T, y, k)
    else:
        z = apply_matrix_function(reg, lam, T) @ y

    alpha = z / (n * p.kappa_sq)
    return Estimate(
        alpha=alpha,
        xs=emp.xs,
        lambda_used=float(lam),
        lambda_effective=reg.effective_lambda(lam),
        method=reg.method,
        declared_q=reg.declared_q,
    )


def _cutoff_apply(T: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Apply the cut-off filter: invert on eigenvalues >= lam only."""
    n = T.shape[0]
    if n <= _DENSE_CUTOFF_N:
        vals, vecs = np.linalg.eigh(T)
        keep = vals >= lam
        if not np.any(keep):
            return np.zeros_like(y)
        v = vecs[:, keep]
        return v @ ((v.T @ y) / vals[keep])
    # iterate a partial eigendecomposition until everything >= lam is in
    k = 16
    while True:
        vals, vecs = scipy.sparse.linalg.eigsh(T, k=k, which="LA")
        if vals.min() < lam or k >= n - 1:
            break
        k = min(2 * k, n - 1)
    keep = vals >= lam
    if not np.any(keep):
        return np.zeros_like(y)
    v = vecs[:, keep]
    return v @ ((v.T @ y) / vals[keep])


def fit_spectral(
    p: ProblemModel, d: Dataset, reg: Regularizer, lam: float
) -> np.ndarray:
    """Reference fit built explicitly in coefficient space.

    Assembles the truncated empirical covariance ``Bx[j,k] =
    sum_i c_i(j) c_i(k) / (n kappa^2)`` from feature coefficients,
    filters it, and applies it to the coefficient image of the data.
    Returns the eigencoefficients of the estimate.  Used as the oracle
    for the representer-identity equivalence tests; quadratic in the
    truncation depth, so only suited to small instances.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"regularization level must lie in (0, 1], got {lam}")
    C = p.feature_matrix(d.xs)                       # (J, n)
    scale = 1.0 / (d.n * p.kappa_sq)
    Bx = scale * (C @ C.T)
    v = scale * (C @ d.ys)
    return apply_matrix_function(reg, lam, Bx) @ v


def estimate_coefficients(p: ProblemModel, est: Estimate) -> np.ndarray:
    """Eigencoefficients of the estimate down to the truncation depth."""
    C = p.feature_matrix(est.xs)
    return C @ est.alpha


def predict(p: ProblemModel, est: Estimate, x) -> np.ndarray:
    """Predicted forward values ``(A f_hat)(x) = sum_i alpha_i K(x_i, x)``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.size)
    step = max(1, 2_000_000 // max(est.n, 1))
    for lo in range(0, xs.size, step):
        hi = min(lo + step, xs.size)
        out[lo:hi] = est.alpha @ p.kernel(est.xs[:, None], xs[None, lo:hi])
    return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])


def error_norm(
    p: ProblemModel, f: SourceFunction | np.ndarray, est: Estimate | np.ndarray, s: float
) -> float:
    """Interpolation-norm error ``||B^s (f - f_hat)||`` at exponent s.

    ``s = 0`` measures reconstruction in H; ``s = 1/2`` equals the
    L2 prediction error of ``A f_hat`` under the design distribution.
    Coefficients beyond the truncation depth are not represented;
    :func:`truncation_floor` bounds their possible contribution.
    """
    truth = f.coeffs if isinstance(f, SourceFunction) else np.asarray(f, dtype=float)
    fitted = (
        estimate_coefficients(p, est) if isinstance(est, Estimate) else np.asarray(est)
    )
    if truth.shape != fitted.shape:
        raise ValueError("coefficient lengths disagree")
    return interpolation_norm(p, truth - fitted, s)


def truncation_floor(p: ProblemModel, est: Estimate, s: float) -> float:
    """Scale of the error-norm mass hidden beyond the truncation.

    The estimate's coefficient at a dropped mode j is ``sum_i alpha_i
    <F_{x_i}, e_j>`` whose mean square over the design is ``||alpha||^2
    mu_j`` plus cross terms in the squared feature means, which decay
    an order faster; the fit never sees the dropped modes, so the
    weights cannot align with them.  Summing through the instance's
    documented mean-square feature tail gives the floor
    ``||alpha|| sqrt(feature_interp_tail(s))``.  This is a calibrated
    estimate of scale, not a worst-case bound; errors measured near or
    below it say nothing about the estimator.
    """
    if p.feature_interp_tail is None:
        return 0.0
    tail = p.feature_interp_tail(s)
    return float(np.linalg.norm(est.alpha)) * math.sqrt(tail)


def lambda_rule(n: int, b: float, r: float, sigma: float, radius: float) -> float:
    """A-priori regularization level balancing bias and spectral variance.

    ``lam_n = min((sigma^2 / (radius^2 n))^(b / (2 b r + b + 1)), 1)``;
    requires spectral decay exponent ``b > 1``.
    """
    if b <= 1:
        raise ValueError("spectral decay exponent must exceed 1")
    if n < 1:
        raise ValueError("sample size must be positive")
    if sigma <= 0 or radius <= 0:
        raise ValueError("noise level and source radius must be positive")
    expo = b / (2.0 * b * r + b + 1.0)
    return min((sigma**2 / (radius**2 * n)) ** expo, 1.0)


def rate_exponent(b: float, r: float, s: float) -> float:
    """Decay exponent of the convergence rate in n."""
    if b <= 1:
        raise ValueError("spectral decay exponent must exceed 1")
    return b * (r + s) / (2.0 * b * r + b + 1.0)


def theoretical_rate(
    n: int, b: float, r: float, s: float, sigma: float, radius: float
) -> float:
    """Rate sequence ``radius * (sigma^2 / (radius^2 n))^exponent``."""
    return radius * (sigma**2 / (radius**2 * n)) ** rate_exponent(b, r, s)
