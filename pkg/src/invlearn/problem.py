"""Model spaces for random-design inverse learning.

The estimation target lives in a real separable Hilbert space H and is
observed through a forward operator ``A`` composed with random point
evaluation: samples are ``Y_i = (A f)(X_i) + noise``.  Everything the
estimators need is summarized by a feature family ``F_x`` (the Riesz
representers of ``f -> (A f)(x)``), the induced kernel
``K(x, t) = <F_x, F_t>``, and the eigensystem ``(mu_j, e_j)`` of the
population covariance ``B = E[F_X (x) F_X]`` on H.

A :class:`ProblemModel` packages those ingredients for one concrete
instance.  The built-in instance is numerical differentiation on [0, 1]
with uniform design: H is the mean-zero subspace of L2[0, 1],
``A f(x) = int_0^x f``, and everything is available in closed form

    F_x(t) = 1_{[0,x]}(t) - x
    K(x, t) = min(x, t) - x t          (sup_x K(x, x) = 1/4)
    e_j(t) = sqrt(2) cos(pi j t),      mu_j = 1 / (pi j)^2
    <F_x, e_j> = sqrt(2) sin(pi j x) / (pi j)

Spectral sequences are truncated at ``truncation_J`` everywhere; each
instance documents analytic bounds for what the truncation discards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = [
    "ProblemModel",
    "SourceFunction",
    "RadiusViolation",
    "make_differentiation_problem",
    "with_reconstructed_kernel",
    "problem_from_table",
    "problem_to_table",
    "synthesize_source",
    "verify_source_membership",
    "forward_value",
    "interpolation_norm",
    "eigensystem_consistency_check",
]


class RadiusViolation(ValueError):
    """A coefficient sequence does not fit inside the declared source ball."""


@dataclass(frozen=True)
class ProblemModel:
    """One concrete inverse-learning instance.

    Parameters
    ----------
    name:
        Short identifier, e.g. ``"differentiation"``.
    kernel:
        ``kernel(x, t)`` with numpy broadcasting; must be symmetric
        positive semidefinite.
    mu:
        Eigenvalues of the covariance ``B``, descending, ``mu[j-1]`` is
        the j-th eigenvalue.  Length defines ``truncation_J``.
    eigenfunction:
        ``eigenfunction(j, t)``, the unit eigenvector ``e_j`` of ``B``
        evaluated at ``t`` (broadcasts over ``t``).  ``None`` for
        instances that only store feature profiles (coefficient-table
        models); everything except the eigensystem consistency check
        works without it.
    feature_coeff:
        ``feature_coeff(x, j) = <F_x, e_j>`` with broadcasting over both
        arguments.
    kappa_sq:
        ``sup_x K(x, x)``; features satisfy ``||F_x||^2 <= kappa_sq``.
    design_sampler:
        ``design_sampler(rng, size)`` draws design points from the
        marginal distribution of X.
    mean_zero_space:
        Whether constants are orthogonal to H (true for the
        differentiation instance); enables the corresponding
        consistency check.
    kernel_tail_bound:
        ``kernel_tail_bound(J)`` bounds ``sup_{x,t} |K(x,t) -
        sum_{j<=J} feature_coeff(x,j) feature_coeff(t,j)|``.
    feature_interp_tail:
        ``feature_interp_tail(s)`` bounds the mean-square feature tail
        ``sum_{j>J} mu_j^{2s} E[feature_coeff(X, j)^2]`` at
        ``J = truncation_J``.  The mean square of a feature coefficient
        under the design distribution is its eigenvalue, so this equals
        ``sum_{j>J} mu_j^{2s+1}``; used for truncation floors.
    effdim_tail:
        ``effdim_tail(lam)`` bounds the effective-dimension mass beyond
        ``truncation_J``.
    """

    name: str
    kernel: Callable
    mu: np.ndarray
    eigenfunction: Callable | None
    feature_coeff: Callable
    kappa_sq: float
    design_sampler: Callable
    mean_zero_space: bool = False
    kernel_tail_bound: Callable[[int], float] | None = None
    feature_interp_tail: Callable[[float], float] | None = None
    effdim_tail: Callable[[float], float] | None = None

    @property
    def truncation_J(self) -> int:
        return int(self.mu.shape[0])

    def eig(self, j: int):
        """Return ``(mu_j, e_j)`` for 1-based index ``j``."""
        if not 1 <= j <= self.truncation_J:
            raise ValueError(f"eigenindex {j} outside 1..{self.truncation_J}")
        if self.eigenfunction is None:
            raise ValueError(f"{self.name!r} does not store model-side eigenvectors")
        mu_j = float(self.mu[j - 1])
        fn = self.eigenfunction
        return mu_j, lambda t, _j=j: fn(_j, t)

    def feature_matrix(self, xs: np.ndarray, J: int | None = None) -> np.ndarray:
        """Stack feature coefficients into a ``(J, n)`` array.

        Row ``j-1`` holds ``<F_{x_i}, e_j>`` for every design point.
        """
        xs = np.asarray(xs, dtype=float)
        J = self.truncation_J if J is None else int(J)
        if J > self.truncation_J:
            raise ValueError("requested depth exceeds stored eigensystem")
        j = np.arange(1, J + 1, dtype=float)
        return self.feature_coeff(xs[None, :], j[:, None])

    def normalized_mu(self, J: int | None = None) -> np.ndarray:
        """Eigenvalues of ``B / kappa_sq`` down to depth ``J``."""
        J = self.truncation_J if J is None else int(J)
        return self.mu[:J] / self.kappa_sq


@dataclass(frozen=True)
class SourceFunction:
    """Target with a source-condition certificate.

    ``coeffs[j-1]`` is the coefficient of ``e_j``; the certificate is
    ``f = B^smoothness h`` with ``||h|| = h_norm <= radius``.
    """

    coeffs: np.ndarray
    smoothness: float
    radius: float
    h_norm: float
    label: str = "custom"


def _uniform_sampler(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.random(size)


def make_differentiation_problem(J: int = 1000) -> ProblemModel:
    """Numerical differentiation on [0, 1] under uniform design.

    The kernel is the covariance of a Brownian bridge and the spectral
    decay is ``mu_j = (pi j)^{-2}``, i.e. polynomial decay with exponent
    two.  The tail of the truncated kernel expansion is bounded by
    ``2 / (pi^2 J)``.
    """
    if J < 4:
        raise ValueError("truncation depth must be at least 4")
    j = np.arange(1, J + 1, dtype=float)
    mu = 1.0 / (np.pi * j) ** 2

    def kernel(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.minimum(x, t) - x * t

    def eigenfunction(j, t):
        j = np.asarray(j, dtype=float)
        t = np.asarray(t, dtype=float)
        return math.sqrt(2.0) * np.cos(np.pi * j * t)

    def feature_coeff(x, j):
        x = np.asarray(x, dtype=float)
        j = np.asarray(j, dtype=float)
        return math.sqrt(2.0) * np.sin(np.pi * j * x) / (np.pi * j)

    def kernel_tail_bound(depth: int) -> float:
        # sum_{j>depth} 2/(pi j)^2 <= 2/(pi^2 depth)
        return 2.0 / (np.pi**2 * depth)

    def feature_interp_tail(s: float, depth: int = J) -> float:
        # E[feature_coeff(X, j)^2] = (pi j)^{-2} = mu_j, so the tail is
        # sum_{j>depth} (pi j)^{-2(2s+1)} <= integral bound below.
        p = 2.0 + 4.0 * s
        return np.pi ** (-p) * depth ** (1.0 - p) / (p - 1.0)

    def effdim_tail(lam: float, depth: int = J) -> float:
        # integral_depth^inf c/(c + lam t^2) dt with c = 4/pi^2
        c = 4.0 / np.pi**2
        root = math.sqrt(c / lam)
        return root * (math.pi / 2.0 - math.atan(depth / root))

    return ProblemModel(
        name="differentiation",
        kernel=kernel,
        mu=mu,
        eigenfunction=eigenfunction,
        feature_coeff=feature_coeff,
        kappa_sq=0.25,
        design_sampler=_uniform_sampler,
        mean_zero_space=True,
        kernel_tail_bound=kernel_tail_bound,
        feature_interp_tail=feature_interp_tail,
        effdim_tail=effdim_tail,
    )


def with_reconstructed_kernel(p: ProblemModel) -> ProblemModel:
    """Replace the kernel by its rank-J feature reconstruction.

    The returned model has ``K(x, t) = sum_{j<=J} <F_x,e_j><F_t,e_j>``,
    which matches the stored eigensystem exactly (finite rank, no
    tail).  Kernel-side and coefficient-side computations on this model
    describe the same operator, which is what the representer-identity
    equivalence tests need.
    """

    def kernel(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(x.shape, t.shape)
        xb = np.broadcast_to(x, shape).reshape(-1)
        tb = np.broadcast_to(t, shape).reshape(-1)
        ux, xi = np.unique(xb, return_inverse=True)
        ut, ti = np.unique(tb, return_inverse=True)
        gram = p.feature_matrix(ux).T @ p.feature_matrix(ut)
        out = gram[xi, ti]
        return out.reshape(shape) if shape else float(out[0])

    return replace(
        p,
        name=p.name + "-rank-truncated",
        kernel=kernel,
        kernel_tail_bound=lambda depth: 0.0 if depth >= p.truncation_J else p.kernel_tail_bound(depth),
    )


def synthesize_source(
    p: ProblemModel,
    r: float,
    radius: float,
    recipe: str = "polynomial:0.55",
    coeffs: np.ndarray | None = None,
) -> SourceFunction:
    """Build a target satisfying the source condition at smoothness r.

    The target is ``f = B^r h`` with ``||h|| <= radius``; concretely
    ``f_j = mu_j^r h_j``.  Recipes select the profile of ``h``:

    - ``"single:J0"``   puts all mass on mode J0,
    - ``"geometric:RHO"`` uses ``h_j`` proportional to ``RHO^(j-1)``,
    - ``"polynomial:P"`` uses ``h_j`` proportional to ``j^-P`` (P > 1/2);
      slow polynomial profiles sit near the boundary of the source ball
      on every spectral scale, which is what rate experiments need,
    - ``"coeffs"``      takes ``h`` from the ``coeffs`` argument.

    Profiles are normalized so ``||h|| = radius`` (except ``"coeffs"``,
    which is checked against the ball and rejected if outside).
    """
    if r < 0:
        raise ValueError("smoothness must be nonnegative")
    if radius <= 0:
        raise ValueError("source radius must be positive")
    J = p.truncation_J
    null = p.mu <= 0.0
    kind, _, arg = recipe.partition(":")
    if kind == "single":
        j0 = int(arg) if arg else 1
        if not 1 <= j0 <= J:
            raise ValueError(f"mode index {j0} outside 1..{J}")
        h = np.zeros(J)
        h[j0 - 1] = radius
    elif kind == "geometric":
        rho = float(arg) if arg else 0.9
        if not 0 < rho < 1:
            raise ValueError("geometric ratio must lie in (0, 1)")
        h = rho ** np.arange(J, dtype=float)
    elif kind == "polynomial":
        pw = float(arg) if arg else 0.55
        if pw <= 0.5:
            raise ValueError("polynomial profile needs exponent > 1/2")
        h = np.arange(1, J + 1, dtype=float) ** (-pw)
    elif kind == "coeffs":
        if coeffs is None:
            raise ValueError('recipe "coeffs" requires the coeffs argument')
        h = np.asarray(coeffs, dtype=float)
        if h.shape != (J,):
            raise ValueError(f"coefficient vector must have length {J}")
        if np.any(null & (h != 0.0)):
            raise RadiusViolation("nonzero coefficient on a null eigenvalue")
    else:
        raise ValueError(f"unknown source recipe {recipe!r}")

    if kind != "coeffs":
        # generated profiles stay inside the range of B^r: no null modes
        h = np.where(null, 0.0, h)
        norm = float(np.linalg.norm(h))
        if norm == 0.0:
            raise ValueError("recipe puts no mass on positive eigenvalues")
        h = h * (radius / norm)

    h_norm = float(np.linalg.norm(h))
    if h_norm > radius * (1.0 + 1e-12):
        raise RadiusViolation(
            f"||h|| = {h_norm:.6g} exceeds the source radius {radius:.6g}"
        )
    f = np.where(h != 0.0, p.mu**r * h, 0.0)
    return SourceFunction(
        coeffs=f, smoothness=r, radius=radius, h_norm=h_norm, label=recipe
    )


def verify_source_membership(
    p: ProblemModel, f: SourceFunction, r: float, radius: float
) -> float:
    """Return ``||h||`` for ``h = B^-r f``; raise if outside the ball.

    Modes with ``mu_j = 0`` are admissible only when the corresponding
    coefficient vanishes (the source ball contains nothing outside the
    closure of the range of ``B^r``).
    """
    mu = p.mu
    zero = mu <= 0.0
    if np.any(zero & (f.coeffs != 0.0)):
        raise RadiusViolation("nonzero coefficient on a null eigenvalue")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(zero, 0.0, f.coeffs / np.where(zero, 1.0, mu**r))
    h_norm = float(np.linalg.norm(h))
    if h_norm > radius * (1.0 + 1e-12):
        raise RadiusViolation(
            f"||h|| = {h_norm:.6g} exceeds the source radius {radius:.6g}"
        )
    return h_norm


def forward_value(p: ProblemModel, f: SourceFunction | np.ndarray, x) -> np.ndarray:
    """Evaluate ``(A f)(x) = <f, F_x>`` from eigencoefficients.

    Works on scalars or arrays; evaluation is chunked so large design
    vectors do not allocate a full ``J x n`` matrix at once.
    """
    coeffs = f.coeffs if isinstance(f, SourceFunction) else np.asarray(f, dtype=float)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.size)
    step = max(1, 2_000_000 // max(coeffs.size, 1))
    for lo in range(0, xs.size, step):
        hi = min(lo + step, xs.size)
        C = p.feature_matrix(xs[lo:hi], J=coeffs.size)
        out[lo:hi] = coeffs @ C
    return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])


def interpolation_norm(p: ProblemModel, coeffs: np.ndarray, s: float) -> float:
    """Interpolation norm ``||B^s u||`` of a coefficient vector.

    ``s = 0`` is the H norm and ``s = 1/2`` equals the L2 norm of
    ``A u`` under the design distribution (A is a partial isometry onto
    the reproducing-kernel space of K).
    """
    if not 0.0 <= s <= 0.5:
        raise ValueError("interpolation exponent must lie in [0, 1/2]")
    coeffs = np.asarray(coeffs, dtype=float)
    w = p.mu[: coeffs.size] ** s if s > 0 else np.ones(coeffs.size)
    return float(np.linalg.norm(w * coeffs))


def eigensystem_consistency_check(
    p: ProblemModel,
    j_list=(1, 2, 3, 4, 5),
    n_quad: int = 2048,
    depth: int | None = None,
) -> float:
    """Max quadrature residual of ``||B e_j - mu_j e_j||`` over j_list.

    The action of ``B`` is reconstructed from feature coefficients:
    ``(B e_j)(t) = int <F_x, e_j> F_x(t) dnu(x)`` with ``F_x`` expanded
    in the stored eigenbasis down to ``depth``.  Both integrals use a
    uniform trapezoid rule with ``n_quad`` intervals.  For the
    mean-zero instance the check also covers ``|int e_j| <= 1e-10``.

    Only meaningful for uniform design (the quadrature represents the
    design distribution).
    """
    if p.eigenfunction is None:
        raise ValueError(f"{p.name!r} does not store model-side eigenvectors")
    if n_quad < 2:
        raise ValueError("quadrature needs at least 2 intervals")
    depth = min(p.truncation_J, n_quad // 2) if depth is None else depth
    grid = np.linspace(0.0, 1.0, n_quad + 1)
    w = np.full(n_quad + 1, 1.0 / n_quad)
    w[0] *= 0.5
    w[-1] *= 0.5

    C = p.feature_matrix(grid, J=depth)          # feature coeffs on x-grid
    jj = np.arange(1, depth + 1, dtype=float)
    E = p.eigenfunction(jj[:, None], grid[None, :])  # e_k on t-grid

    worst = 0.0
    for j in j_list:
        mu_j, _ = p.eig(j)
        # x-integral: coefficients of B e_j in the eigenbasis
        g = C @ (w * C[j - 1])
        g[j - 1] -= mu_j
        resid_vals = g @ E                        # (B e_j - mu_j e_j)(t)
        resid = math.sqrt(float(np.sum(w * resid_vals**2)))
        worst = max(worst, resid)
        if p.mean_zero_space:
            mean_val = abs(float(np.sum(w * E[j - 1])))
            if mean_val > 1e-10:
                raise AssertionError(
                    f"eigenfunction {j} has nonzero mean {mean_val:.2e}"
                )
    return worst


def _interp_profiles(vals: np.ndarray, grid: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linearly interpolate every profile row of ``vals`` at points x."""
    x = np.clip(x, grid[0], grid[-1])
    idx = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, grid.size - 2)
    wgt = (x - grid[idx]) / (grid[idx + 1] - grid[idx])
    return vals[:, idx] * (1.0 - wgt) + vals[:, idx + 1] * wgt


def problem_from_table(path: str) -> ProblemModel:
    """Load a custom instance from a coefficient-table CSV.

    Format: optional ``# name = ...`` and ``# kappa_sq = ...`` comment
    lines, then a header row ``j,mu,<x_0>,...,<x_M-1>`` whose trailing
    column names are the quadrature grid (strictly increasing), then one
    row per mode ``j`` carrying the eigenvalue ``mu_j`` followed by the
    feature profile ``<F_x, e_j>`` sampled at the grid nodes.  Profiles
    are evaluated between nodes by linear interpolation.

    If ``kappa_sq`` is absent it is taken as the grid maximum of the
    reconstructed ``K(x, x)``, which underestimates the true supremum
    by the interpolation and truncation error.  The design distribution
    is uniform on the grid interval.  The model-side eigenvectors are
    not part of the table; operations that need them report that.
    """
    name = None
    kappa_sq = None
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line[1:].partition("=")
                key = key.strip()
                if sep and key == "name":
                    name = val.strip()
                elif sep and key == "kappa_sq":
                    kappa_sq = float(val)
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
            else:
                rows.append([float(c) for c in line.split(",")])

    if header is None or header[:2] != ["j", "mu"] or len(header) < 4:
        raise ValueError("table needs a 'j,mu,<grid...>' header with >= 2 nodes")
    grid = np.array([float(c) for c in header[2:]])
    if np.any(np.diff(grid) <= 0):
        raise ValueError("quadrature grid must be strictly increasing")
    if not rows:
        raise ValueError("table has no coefficient rows")

    data = np.array(rows)
    if data.shape[1] != 2 + grid.size:
        raise ValueError("row length does not match the grid")
    if not np.array_equal(data[:, 0], np.arange(1, data.shape[0] + 1)):
        raise ValueError("mode indices must run 1..J in order")
    mu = data[:, 1].copy()
    if np.any(mu < 0) or np.any(np.diff(mu) > 0):
        raise ValueError("eigenvalues must be nonnegative and descending")
    vals = np.ascontiguousarray(data[:, 2:])
    if not np.all(np.isfinite(vals)):
        raise ValueError("feature profiles must be finite")

    if kappa_sq is None:
        kappa_sq = float(np.max(np.sum(vals**2, axis=0)))
    if kappa_sq <= 0:
        raise ValueError("kappa_sq must be positive")

    # node-wise bound on what reconstruction below a given depth discards
    sup_sq = np.max(vals**2, axis=1)
    tail_mass = np.concatenate([np.cumsum(sup_sq[::-1])[::-1], [0.0]])

    def kernel_tail_bound(depth: int) -> float:
        return float(tail_mass[min(max(int(depth), 0), mu.size)])

    def feature_coeff(x, j):
        x = np.asarray(x, dtype=float)
        j = np.asarray(j)
        shape = np.broadcast_shapes(x.shape, j.shape)
        xb = np.broadcast_to(x, shape).reshape(-1)
        jb = np.broadcast_to(j, shape).reshape(-1).astype(int)
        ux, inv = np.unique(xb, return_inverse=True)
        full = _interp_profiles(vals, grid, ux)
        out = full[jb - 1, inv]
        return out.reshape(shape) if shape else float(out[0])

    def kernel(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(x.shape, t.shape)
        xb = np.broadcast_to(x, shape).reshape(-1)
        tb = np.broadcast_to(t, shape).reshape(-1)
        ux, xi = np.unique(xb, return_inverse=True)
        ut, ti = np.unique(tb, return_inverse=True)
        gram = _interp_profiles(vals, grid, ux).T @ _interp_profiles(vals, grid, ut)
        out = gram[xi, ti]
        return out.reshape(shape) if shape else float(out[0])

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(grid[0], grid[-1], size)

    return ProblemModel(
        name=name or "table",
        kernel=kernel,
        mu=mu,
        eigenfunction=None,
        feature_coeff=feature_coeff,
        kappa_sq=float(kappa_sq),
        design_sampler=sampler,
        kernel_tail_bound=kernel_tail_bound,
    )


def problem_to_table(p: ProblemModel, path: str, grid: np.ndarray) -> None:
    """Export a model's eigenvalues and feature profiles as a table.

    ``grid`` samples the feature profiles; loading the file back yields
    a model that agrees with ``p`` up to interpolation between nodes
    and truncation at ``p.truncation_J``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be 1-d, strictly increasing, >= 2 nodes")
    C = p.feature_matrix(grid)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# name = {p.name}\n")
        fh.write(f"# kappa_sq = {p.kappa_sq!r}\n")
        fh.write("j,mu," + ",".join(repr(float(x)) for x in grid) + "\n")
        for j in range(p.truncation_J):
            profile = ",".join(repr(float(v)) for v in C[j])
            fh.write(f"{j + 1},{float(p.mu[j])!r},{profile}\n")
