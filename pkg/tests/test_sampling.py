"""Data generation, empirical operator, CSV round trips."""

import dataclasses
import math

import numpy as np
import pytest

from invlearn import (
    NonPositiveSemidefiniteError,
    build_empirical_operator,
    dataset_from_csv,
    dataset_to_csv,
    draw_dataset,
    forward_value,
    make_differentiation_problem,
    noise_moment_scale,
    synthesize_source,
)


@pytest.fixture(scope="module")
def prob():
    return make_differentiation_problem(400)


@pytest.fixture(scope="module")
def truth(prob):
    return synthesize_source(prob, 0.5, 1.0, "polynomial:0.55")


def test_seed_reproducibility(prob, truth):
    a = draw_dataset(prob, truth, 100, 0.1, seed=(3, 1, 4))
    b = draw_dataset(prob, truth, 100, 0.1, seed=(3, 1, 4))
    c = draw_dataset(prob, truth, 100, 0.1, seed=(3, 1, 5))
    np.testing.assert_array_equal(a.xs, b.xs)
    np.testing.assert_array_equal(a.ys, b.ys)
    assert not np.array_equal(a.ys, c.ys)


def test_scalar_seed_normalized(prob, truth):
    a = draw_dataset(prob, truth, 10, 0.1, seed=7)
    b = draw_dataset(prob, truth, 10, 0.1, seed=(7,))
    np.testing.assert_array_equal(a.ys, b.ys)
    assert a.seed == (7,)


def test_signal_plus_noise_decomposition(prob, truth):
    d = draw_dataset(prob, truth, 50, 1e-12, seed=0)
    clean = forward_value(prob, truth, d.xs)
    np.testing.assert_allclose(d.ys, clean, atol=1e-10)


def test_noiseless_is_exact(prob, truth):
    d = draw_dataset(prob, truth, 50, 0.0, seed=0)
    assert np.array_equal(d.ys, forward_value(prob, truth, d.xs))
    with pytest.raises(ValueError):
        draw_dataset(prob, truth, 50, -0.1, seed=0)


def test_gaussian_noise_moments(prob, truth):
    d = draw_dataset(prob, truth, 200_000, 0.3, "gaussian", seed=1)
    eps = d.ys - forward_value(prob, truth, d.xs)
    assert abs(eps.mean()) < 0.005
    assert eps.std() == pytest.approx(0.3, rel=0.02)
    # fourth moment of a centered Gaussian is 3 sigma^4
    assert np.mean(eps**4) == pytest.approx(3 * 0.3**4, rel=0.05)


def test_bounded_uniform_noise(prob, truth):
    sigma = 0.2
    d = draw_dataset(prob, truth, 100_000, sigma, "bounded_uniform", seed=2)
    eps = d.ys - forward_value(prob, truth, d.xs)
    bound = math.sqrt(3.0) * sigma
    assert np.max(np.abs(eps)) <= bound
    assert eps.std() == pytest.approx(sigma, rel=0.02)
    assert d.noise_scale == pytest.approx(bound)


def test_moment_scale_values():
    assert noise_moment_scale("gaussian", 0.5) == 0.5
    assert noise_moment_scale("bounded_uniform", 0.5) == pytest.approx(
        0.5 * math.sqrt(3.0)
    )
    with pytest.raises(ValueError):
        noise_moment_scale("cauchy", 0.5)


def test_unknown_noise_model(prob, truth):
    with pytest.raises(ValueError):
        draw_dataset(prob, truth, 10, 0.1, "cauchy", seed=0)


def test_design_points_in_domain(prob, truth):
    d = draw_dataset(prob, truth, 1000, 0.1, seed=4)
    assert d.xs.min() >= 0.0 and d.xs.max() <= 1.0


class TestEmpiricalOperator:
    def test_spectrum_in_unit_window(self, prob):
        rng = np.random.default_rng(6)
        emp = build_empirical_operator(prob, rng.random(300))
        vals = np.linalg.eigvalsh(emp.matrix)
        assert vals.min() >= -1e-10
        assert vals.max() <= 1.0 + 1e-12

    def test_single_peak_point(self, prob):
        emp = build_empirical_operator(prob, np.array([0.5]))
        np.testing.assert_allclose(emp.matrix, [[1.0]], atol=1e-15)

    def test_rejects_indefinite_kernel(self, prob):
        fake = dataclasses.replace(
            prob, kernel=lambda x, t: -np.abs(np.asarray(x) - np.asarray(t))
        )
        xs = np.linspace(0.1, 0.9, 20)
        with pytest.raises(NonPositiveSemidefiniteError):
            build_empirical_operator(fake, xs)

    def test_matrix_is_symmetric(self, prob):
        rng = np.random.default_rng(8)
        emp = build_empirical_operator(prob, rng.random(64))
        np.testing.assert_array_equal(emp.matrix, emp.matrix.T)


class TestCsvRoundTrip:
    def test_lossless(self, prob, truth):
        d = draw_dataset(prob, truth, 37, 0.15, "bounded_uniform", seed=(1, 2))
        back = dataset_from_csv(dataset_to_csv(d))
        np.testing.assert_array_equal(back.xs, d.xs)
        np.testing.assert_array_equal(back.ys, d.ys)
        assert back.sigma == d.sigma
        assert back.noise_model == d.noise_model
        assert back.seed == d.seed
        assert back.truth_label == d.truth_label
        assert back.noise_scale == d.noise_scale

    def test_header_required(self):
        with pytest.raises(ValueError):
            dataset_from_csv("# sigma=0.1\n# noise_model=gaussian\na,b\n0.1,0.2\n")

    def test_comments_carry_generation_record(self, prob, truth):
        d = draw_dataset(prob, truth, 5, 0.1, seed=9)
        text = dataset_to_csv(d)
        head = [ln for ln in text.splitlines() if ln.startswith("#")]
        assert any(ln.startswith("# n=5") for ln in head)
        assert any("sigma=" in ln for ln in head)
        assert any("noise_model=gaussian" in ln for ln in head)
        assert any("seed=9" in ln for ln in head)
