"""Random-design sampling and the empirical kernel operator.

Observations follow ``Y_i = (A f)(X_i) + eps_i`` with design points
drawn i.i.d. from the problem's marginal.  Both built-in noise models
satisfy the Bernstein moment condition
``E[|eps|^m] <= (1/2) m! sigma^2 M^(m-2)``:

- ``"gaussian"``: centered normal, variance sigma^2, moment scale
  ``M = sigma``;
- ``"bounded_uniform"``: uniform on ``[-sigma*sqrt(3), sigma*sqrt(3)]``,
  variance sigma^2, moment scale ``M = sigma*sqrt(3)``.

Noise is drawn independently of the design (conditional distributions
that vary with X are out of scope here).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .problem import ProblemModel, SourceFunction, forward_value

__all__ = [
    "Dataset",
    "EmpiricalOperator",
    "NonPositiveSemidefiniteError",
    "NOISE_MODELS",
    "noise_moment_scale",
    "draw_dataset",
    "build_empirical_operator",
    "dataset_to_csv",
    "dataset_from_csv",
]

NOISE_MODELS = ("gaussian", "bounded_uniform")


class NonPositiveSemidefiniteError(ValueError):
    """Empirical kernel matrix failed the positive-semidefiniteness check."""


def noise_moment_scale(noise_model: str, sigma: float) -> float:
    """Bernstein moment scale M for a noise model at level sigma."""
    if noise_model == "gaussian":
        return sigma
    if noise_model == "bounded_uniform":
        return sigma * math.sqrt(3.0)
    raise ValueError(f"unknown noise model {noise_model!r}")


@dataclass(frozen=True)
class Dataset:
    """One random-design sample with its generation record."""

    xs: np.ndarray
    ys: np.ndarray
    sigma: float
    noise_model: str
    noise_scale: float            # Bernstein M for this model and sigma
    seed: tuple
    truth_label: str

    @property
    def n(self) -> int:
        return int(self.xs.shape[0])


def draw_dataset(
    p: ProblemModel,
    f: SourceFunction,
    n: int,
    sigma: float,
    noise_model: str = "gaussian",
    seed=0,
) -> Dataset:
    """Draw n design points and noisy forward observations.

    ``sigma = 0`` gives noiseless observations ``g(x_i)`` exactly.
    ``seed`` may be an int or a tuple of ints; derived streams such as
    ``(master, cell, replicate)`` keep Monte Carlo grids reproducible
    and non-overlapping.
    """
    if n < 1:
        raise ValueError("sample size must be positive")
    if sigma < 0:
        raise ValueError("noise level must be nonnegative")
    scale = noise_moment_scale(noise_model, sigma)
    key = (seed,) if np.isscalar(seed) else tuple(int(v) for v in seed)
    rng = np.random.default_rng(list(key))
    xs = np.asarray(p.design_sampler(rng, n), dtype=float)
    if noise_model == "gaussian":
        eps = rng.normal(0.0, sigma, size=n)
    else:
        eps = rng.uniform(-scale, scale, size=n)
    ys = forward_value(p, f, xs) + eps
    return Dataset(
        xs=xs,
        ys=ys,
        sigma=float(sigma),
        noise_model=noise_model,
        noise_scale=float(scale),
        seed=key,
        truth_label=f.label,
    )


@dataclass(frozen=True)
class EmpiricalOperator:
    """Normalized empirical kernel matrix ``T = K_n / (n kappa^2)``.

    ``T`` represents ``kappa^-2 S_x S_x*`` in standard coordinates on
    R^n; its spectrum lies in [0, 1], so spectral filters calibrated on
    the unit interval apply directly.
    """

    matrix: np.ndarray
    xs: np.ndarray
    kappa_sq: float

    @property
    def n(self) -> int:
        return int(self.xs.shape[0])


def build_empirical_operator(
    p: ProblemModel, xs: np.ndarray, psd_tol: float = 1e-8
) -> EmpiricalOperator:
    """Assemble and certify the normalized empirical kernel matrix.

    Positive semidefiniteness is certified by a Cholesky probe of
    ``T + psd_tol*I`` (success guarantees the smallest eigenvalue is
    above ``-psd_tol``); failure raises.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.shape[0]
    if n < 1:
        raise ValueError("design must contain at least one point")
    K = np.asarray(p.kernel(xs[:, None], xs[None, :]), dtype=float)
    T = K / (n * p.kappa_sq)
    T = 0.5 * (T + T.T)
    probe = T + psd_tol * np.eye(n)
    try:
        scipy.linalg.cholesky(probe, lower=True, overwrite_a=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NonPositiveSemidefiniteError(
            f"empirical kernel matrix is not PSD within {psd_tol:g}"
        ) from exc
    return EmpiricalOperator(matrix=T, xs=xs, kappa_sq=p.kappa_sq)


def dataset_to_csv(d: Dataset) -> str:
    """Serialize a dataset to CSV with its generation record in comments."""
    buf = io.StringIO()
    buf.write(f"# n={d.n}\n")
    buf.write(f"# sigma={d.sigma!r}\n")
    buf.write(f"# noise_model={d.noise_model}\n")
    buf.write(f"# seed={','.join(str(v) for v in d.seed)}\n")
    buf.write(f"# truth={d.truth_label}\n")
    buf.write("x,y\n")
    for x, y in zip(d.xs, d.ys):
        buf.write(f"{float(x)!r},{float(y)!r}\n")
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    """Parse a dataset serialized by :func:`dataset_to_csv`."""
    meta: dict[str, str] = {}
    xs, ys = [], []
    header_seen = False
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line.lstrip("# ").partition("=")
            meta[key.strip()] = val.strip()
            continue
        if not header_seen:
            if line != "x,y":
                raise ValueError(f"unexpected CSV header {line!r}")
            header_seen = True
            continue
        a, _, b = line.partition(",")
        xs.append(float(a))
        ys.append(float(b))
    sigma = float(meta["sigma"])
    noise_model = meta["noise_model"]
    seed = tuple(int(v) for v in meta["seed"].split(",")) if meta.get("seed") else ()
    return Dataset(
        xs=np.asarray(xs),
        ys=np.asarray(ys),
        sigma=sigma,
        noise_model=noise_model,
        noise_scale=noise_moment_scale(noise_model, sigma),
        seed=seed,
        truth_label=meta.get("truth", "unknown"),
    )
