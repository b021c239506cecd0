"""Packing constructions behind minimax lower bounds.

The lower-bound argument builds finitely many well-separated targets
inside the source ball whose sampling distributions stay statistically
close, then applies Fano's inequality.  This module constructs those
objects explicitly in coefficient space so every step of the argument
can be checked numerically:

- a sign codebook with pairwise squared distance above m,
- targets ``f_i = B^r g_i`` supported on modes (m, 2m] whose
  certificates ``g_i`` stay inside the radius-R ball,
- exact pairwise interpolation-norm separations and Kullback-Leibler
  divergences under Gaussian noise,
- the Fano budget ``omega = n * avg KL / log(N - 1)``, which must stay
  below 1/8 for the argument to produce a lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import theoretical_rate
from .problem import ProblemModel
from .effdim import strong_ratio_params

__all__ = [
    "Codebook",
    "PackingSet",
    "FanoBudget",
    "SearchExhausted",
    "EpsilonOutOfRange",
    "build_codebook",
    "build_packing",
    "kl_divergence",
    "fano_budget",
    "recipe_n",
    "lower_rate",
]


class SearchExhausted(RuntimeError):
    """Random codebook search hit its attempt budget."""


class EpsilonOutOfRange(ValueError):
    """Separation scale incompatible with the spectrum window."""


@dataclass(frozen=True)
class Codebook:
    """Sign words of length m with pairwise squared distance > m."""

    m: int
    words: np.ndarray               # (N, m), entries +-1

    @property
    def size(self) -> int:
        return int(self.words.shape[0])


def build_codebook(
    m: int, rng: np.random.Generator, max_tries: int = 1_000_000
) -> Codebook:
    """Sample a separated sign codebook of size ``floor(e^(m/36)) + 2``.

    Rejection sampling keeps a candidate word only if its squared
    distance to every kept word strictly exceeds m (one notch above
    the >= m existence guarantee, so downstream separations are strict
    even when m is divisible by four).  Needs ``m >= 28`` so the target
    size exceeds 3 while ``log(size - 1) > m/36`` still holds.
    """
    if m < 28:
        raise ValueError("codebook length must be at least 28")
    target = int(math.floor(math.exp(m / 36.0))) + 2
    words = np.empty((target, m), dtype=np.int8)
    count = 0
    for _ in range(max_tries):
        w = rng.integers(0, 2, size=m, dtype=np.int8) * 2 - 1
        if count:
            # squared distance = 4 * Hamming
            ham = np.count_nonzero(words[:count] != w[None, :], axis=1)
            if 4 * int(ham.min()) <= m:
                continue
        words[count] = w
        count += 1
        if count == target:
            return Codebook(m=m, words=words.copy())
    raise SearchExhausted(
        f"no {target}-word codebook of length {m} in {max_tries} draws"
    )


@dataclass(frozen=True)
class PackingSet:
    """Separated targets in the source ball, plus their certificates."""

    coeffs: np.ndarray              # (N, J) eigencoefficients of each f_i
    cert_coeffs: np.ndarray         # (N, J) coefficients of each g_i
    eps: float
    m: int
    gamma: float
    smoothness: float               # r
    interp_exponent: float          # s
    radius: float
    sigma: float
    codebook: Codebook

    @property
    def size(self) -> int:
        return int(self.coeffs.shape[0])


def build_packing(
    p: ProblemModel,
    r: float,
    s: float,
    radius: float,
    eps: float,
    sigma: float,
    rng: np.random.Generator,
    max_tries: int = 1_000_000,
) -> PackingSet:
    """Construct a separated family in the source ball at scale eps.

    The support length m is the largest index with
    ``mu_m >= 2^gamma (eps/radius)^(1/(r+s))`` where gamma is the
    dyadic ratio exponent of the spectrum; targets place sign patterns
    from a codebook on modes (m, 2m].  The scan stops at half the
    truncation depth so mode 2m stays representable; eps values whose
    support falls outside [28, J/2] are rejected.
    """
    if r + s <= 0:
        raise ValueError("r + s must be positive for a packing")
    if eps <= 0 or radius <= 0 or sigma <= 0:
        raise ValueError("scale parameters must be positive")
    mu = p.mu
    J = p.truncation_J
    strong = strong_ratio_params(mu)
    if strong is None:
        raise ValueError("spectrum has no valid dyadic ratio exponent")
    gamma, j0 = strong

    threshold = 2.0**gamma * (eps / radius) ** (1.0 / (r + s))
    half = J // 2
    if mu[half - 1] >= threshold:
        raise EpsilonOutOfRange(
            f"support index exceeds the scan limit {half}; eps too small "
            "for the stored spectrum depth"
        )
    m = int(np.searchsorted(-mu, -threshold, side="right"))
    if m < max(28, j0):
        raise EpsilonOutOfRange(
            f"support length {m} below the minimum {max(28, j0)}; eps too large"
        )

    book = build_codebook(m, rng, max_tries=max_tries)
    N = book.size
    modes = np.arange(m, 2 * m)                  # 0-based indices of (m, 2m]
    weights = eps / math.sqrt(m) * mu[modes] ** (-(r + s))
    cert = np.zeros((N, J))
    cert[:, modes] = book.words * weights[None, :]
    coeffs = np.zeros((N, J))
    coeffs[:, modes] = cert[:, modes] * mu[modes] ** r

    cert_norms = np.linalg.norm(cert, axis=1)
    if cert_norms.max() > radius * (1.0 + 1e-12):
        raise EpsilonOutOfRange(
            f"certificate norm {cert_norms.max():.6g} leaves the ball {radius:.6g}"
        )
    return PackingSet(
        coeffs=coeffs,
        cert_coeffs=cert,
        eps=float(eps),
        m=m,
        gamma=gamma,
        smoothness=float(r),
        interp_exponent=float(s),
        radius=float(radius),
        sigma=float(sigma),
        codebook=book,
    )


def kl_divergence(
    p: ProblemModel, f_i: np.ndarray, f_j: np.ndarray, sigma: float
) -> float:
    """KL divergence between the sampling laws of two targets.

    Under Gaussian noise at level sigma the per-observation divergence
    is the squared prediction distance over 2 sigma^2:

        KL = ||A(f_i - f_j)||^2 / (2 sigma^2)
           = sum_j mu_j (f_i - f_j)_j^2 / (2 sigma^2).
    """
    if sigma <= 0:
        raise ValueError("noise level must be positive")
    diff = np.asarray(f_i, dtype=float) - np.asarray(f_j, dtype=float)
    return float(np.sum(p.mu[: diff.size] * diff**2)) / (2.0 * sigma**2)


@dataclass(frozen=True)
class FanoBudget:
    """Information budget of a packing at sample size n."""

    total_kl: float                 # n * average KL to the reference target
    log_term: float                 # log(N - 1)
    omega: float                    # total_kl / log_term

    @property
    def admissible(self) -> bool:
        return self.omega < 0.125


def _pairwise_kl_to_reference(p: ProblemModel, packing: PackingSet) -> np.ndarray:
    ref = packing.coeffs[-1]
    return np.array(
        [
            kl_divergence(p, packing.coeffs[i], ref, packing.sigma)
            for i in range(packing.size - 1)
        ]
    )


def fano_budget(p: ProblemModel, packing: PackingSet, n: int) -> FanoBudget:
    """Evaluate the Fano budget of a packing at sample size n.

    The last target serves as the reference law; ``omega`` must stay
    below 1/8 for the packing to certify a lower bound at this n.
    """
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    kls = _pairwise_kl_to_reference(p, packing)
    log_term = math.log(packing.size - 1)
    total = n * float(kls.mean())
    return FanoBudget(total_kl=total, log_term=log_term, omega=total / log_term)


def recipe_n(p: ProblemModel, packing: PackingSet) -> int:
    """Largest n whose Fano budget is certified below 1/8.

    Uses the worst pairwise divergence, so the average over reference
    pairs is covered for every n up to the returned value.
    """
    kls = _pairwise_kl_to_reference(p, packing)
    worst = float(kls.max())
    if worst <= 0:
        raise ValueError("degenerate packing: zero divergence")
    return int(math.floor(math.log(packing.size - 1) / (8.0 * worst)))


def lower_rate(
    sigma: float, radius: float, n: int, b: float, r: float, s: float
) -> float:
    """Minimax lower-rate sequence; matches the upper-rate sequence."""
    return theoretical_rate(n, b, r, s, sigma, radius)
