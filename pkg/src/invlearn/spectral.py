"""Spectral regularization filters and their calibration constants.

A filter family ``g_lam : [0, 1] -> R`` (one function per regularization
level ``lam`` in (0, 1]) turns the ill-posed normal equation into a
stable estimate by damping small spectral values.  Each family carries
the constants used by error bounds:

- ``sup_tg``: bound on ``sup_t |t g_lam(t)|``,
- ``sup_g_scale``: bound ``E`` with ``sup_t |g_lam(t)| <= E / lam``,
- ``residual_sup``: bound on ``sup_t |r_lam(t)|`` for the residual
  ``r_lam(t) = 1 - t g_lam(t)``,
- qualification ``q`` with constant ``qual_const``:
  ``sup_t |r_lam(t)| t^q <= qual_const * lam^q``.

Cut-off and Landweber have arbitrary qualification (stored as inf);
the caller declares the finite order it relies on and the constant is
computed for that order.  Landweber's iteration count is ``k =
ceil(1/lam)``, so its calibration holds at the effective level
``1/k <= lam``, reported by :meth:`Regularizer.effective_lambda`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Regularizer",
    "UnknownMethodError",
    "QualificationError",
    "SpectrumError",
    "make_regularizer",
    "qualification_sup",
    "intermediate_gamma",
    "apply_matrix_function",
    "landweber_iterate",
]

METHODS = ("cutoff", "tikhonov", "landweber")


class UnknownMethodError(ValueError):
    """Regularization method name not recognized."""


class QualificationError(ValueError):
    """Declared qualification order not available or insufficient."""


class SpectrumError(ValueError):
    """Matrix input violates the expected spectral window [0, 1]."""


def _landweber_steps(lam: float) -> int:
    return max(1, math.ceil(1.0 / lam))


@dataclass(frozen=True)
class Regularizer:
    """One spectral filter family with its calibration constants."""

    method: str
    sup_tg: float
    sup_g_scale: float
    residual_sup: float
    qualification: float       # largest usable order (inf if unrestricted)
    declared_q: float          # order the caller relies on
    qual_const: float          # constant at declared_q

    def g(self, lam: float, t):
        """Filter value ``g_lam(t)``, vectorized over ``t``."""
        _check_level(lam)
        t = np.asarray(t, dtype=float)
        if self.method == "cutoff":
            with np.errstate(divide="ignore"):
                vals = np.where(t >= lam, np.divide(1.0, np.where(t > 0, t, 1.0)), 0.0)
            return vals
        if self.method == "tikhonov":
            return 1.0 / (lam + t)
        k = _landweber_steps(lam)
        # (1 - (1-t)^k)/t evaluated stably; the t -> 0 limit is k.
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(t > 0.0, t, 1.0)
            vals = -np.expm1(k * np.log1p(-np.minimum(safe, 1.0))) / safe
        return np.where(t > 0.0, vals, float(k))

    def residual(self, lam: float, t):
        """Residual ``r_lam(t) = 1 - t g_lam(t)``, vectorized."""
        _check_level(lam)
        t = np.asarray(t, dtype=float)
        if self.method == "cutoff":
            return np.where(t >= lam, 0.0, 1.0)
        if self.method == "tikhonov":
            return lam / (lam + t)
        k = _landweber_steps(lam)
        with np.errstate(divide="ignore"):
            return np.exp(k * np.log1p(-np.minimum(t, 1.0)))

    def effective_lambda(self, lam: float) -> float:
        """Level at which the calibration constants hold exactly."""
        _check_level(lam)
        if self.method == "landweber":
            return 1.0 / _landweber_steps(lam)
        return lam


def _check_level(lam: float) -> None:
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"regularization level must lie in (0, 1], got {lam}")


def make_regularizer(method: str, declared_q: float = 1.0) -> Regularizer:
    """Construct a filter family by name.

    ``declared_q`` is the qualification order downstream bounds may
    rely on; it must not exceed the family's intrinsic order (1 for
    Tikhonov, unrestricted for cut-off and Landweber).
    """
    if method not in METHODS:
        raise UnknownMethodError(f"unknown regularization method {method!r}")
    if declared_q <= 0:
        raise ValueError("declared qualification must be positive")
    if method == "tikhonov":
        if declared_q > 1.0 + 1e-12:
            raise QualificationError("tikhonov qualification is limited to 1")
        return Regularizer("tikhonov", 1.0, 1.0, 1.0, 1.0, declared_q, 1.0)
    if method == "cutoff":
        return Regularizer("cutoff", 1.0, 1.0, 1.0, math.inf, declared_q, 1.0)
    qual_const = 1.0 if declared_q <= 1.0 else declared_q**declared_q
    return Regularizer("landweber", 1.0, 1.0, 1.0, math.inf, declared_q, qual_const)


def qualification_sup(
    reg: Regularizer, q: float, lam: float, grid_size: int = 10_000
) -> float:
    """Grid maximum of ``|r_lam(t)| t^q`` over a log-uniform grid.

    The grid spans (1e-12, 1]; callers compare the value against
    ``qual_const * effective_lambda^q``.
    """
    if q < 0:
        raise ValueError("qualification order must be nonnegative")
    grid = np.geomspace(1e-12, 1.0, grid_size)
    return float(np.max(np.abs(reg.residual(lam, grid)) * grid**q))


def intermediate_gamma(reg: Regularizer, r: float) -> float:
    """Residual constant at intermediate order ``r <= declared_q``.

    Interpolates ``residual_sup^(1 - r/q) * qual_const^(r/q)`` at the
    declared order q.
    """
    if r < 0:
        raise ValueError("order must be nonnegative")
    q = reg.declared_q
    if r > q * (1.0 + 1e-12):
        raise QualificationError(
            f"order {r} exceeds the declared qualification {q}"
        )
    frac = min(r / q, 1.0)
    return reg.residual_sup ** (1.0 - frac) * reg.qual_const**frac


def apply_matrix_function(
    reg: Regularizer, lam: float, M: np.ndarray, spectrum_tol: float = 1e-10
) -> np.ndarray:
    """Evaluate ``g_lam`` on a symmetric PSD matrix with spectrum in [0, 1].

    Diagonalizes, clamps eigenvalues within ``spectrum_tol`` of the
    window back onto it, applies the filter to the eigenvalues, and
    reassembles.  Raises :class:`SpectrumError` for asymmetric input or
    eigenvalues outside the tolerance window.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix input must be square")
    if M.size and float(np.max(np.abs(M - M.T))) > 1e-10:
        raise SpectrumError("matrix input is not symmetric (beyond 1e-10)")
    sym = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals.size and (vals.min() < -spectrum_tol or vals.max() > 1.0 + spectrum_tol):
        raise SpectrumError(
            f"eigenvalues [{vals.min():.3e}, {vals.max():.3e}] leave [0, 1]"
        )
    vals = np.clip(vals, 0.0, 1.0)
    return (vecs * reg.g(lam, vals)) @ vecs.T


def landweber_iterate(M: np.ndarray, v: np.ndarray, k: int) -> np.ndarray:
    """Run k gradient-descent sweeps ``u <- u + (v - M u)`` from zero.

    Polynomially identical to applying the k-step Landweber filter to
    ``v``; kept separate so the spectral path can be cross-checked.
    """
    if k < 1:
        raise ValueError("iteration count must be positive")
    u = np.zeros_like(v, dtype=float)
    for _ in range(k):
        u += v - M @ u
    return u
