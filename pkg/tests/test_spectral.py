"""Filter families: exact values, calibration constants, matrix calculus."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invlearn import (
    QualificationError,
    SpectrumError,
    UnknownMethodError,
    apply_matrix_function,
    intermediate_gamma,
    landweber_iterate,
    make_regularizer,
    qualification_sup,
)

LEVELS = (1.0, 0.3, 0.1, 0.01)


def random_psd(rng, n, top=1.0):
    """Symmetric matrix with spectrum inside [0, top]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    vals = rng.random(n) * top
    return (q * vals) @ q.T, vals, q


def test_unknown_method():
    with pytest.raises(UnknownMethodError):
        make_regularizer("wiener")


def test_declared_order_positive():
    with pytest.raises(ValueError):
        make_regularizer("cutoff", declared_q=0.0)


def test_tikhonov_exact_value():
    reg = make_regularizer("tikhonov")
    assert reg.g(0.1, 0.1) == pytest.approx(5.0)


def test_tikhonov_order_cap():
    with pytest.raises(QualificationError):
        make_regularizer("tikhonov", declared_q=1.5)
    # exactly one is fine
    make_regularizer("tikhonov", declared_q=1.0)


def test_cutoff_below_threshold():
    reg = make_regularizer("cutoff")
    t = np.array([0.0, 0.05, 0.0999, 0.1, 0.5])
    g = reg.g(0.1, t)
    np.testing.assert_allclose(g[:3], 0.0)
    np.testing.assert_allclose(g[3:], [10.0, 2.0])
    r = reg.residual(0.1, t)
    np.testing.assert_allclose(r, [1.0, 1.0, 1.0, 0.0, 0.0])


def test_landweber_single_step():
    reg = make_regularizer("landweber")
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(reg.g(1.0, t), 1.0)
    np.testing.assert_allclose(reg.residual(1.0, t), 1.0 - t, atol=1e-15)


def test_landweber_effective_level():
    reg = make_regularizer("landweber")
    assert reg.effective_lambda(0.3) == pytest.approx(0.25)
    assert reg.effective_lambda(0.5) == pytest.approx(0.5)
    tik = make_regularizer("tikhonov")
    assert tik.effective_lambda(0.3) == 0.3


def test_level_domain():
    reg = make_regularizer("tikhonov")
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            reg.g(bad, 0.5)


@pytest.mark.parametrize("method", ["cutoff", "tikhonov", "landweber"])
def test_calibration_constants(method):
    reg = make_regularizer(method)
    assert reg.sup_tg == 1.0
    assert reg.sup_g_scale == 1.0
    assert reg.residual_sup == 1.0
    t = np.geomspace(1e-12, 1.0, 4001)
    for lam in LEVELS:
        lam_eff = reg.effective_lambda(lam)
        g = reg.g(lam, t)
        r = reg.residual(lam, t)
        assert np.max(np.abs(t * g)) <= reg.sup_tg + 1e-12
        assert np.max(np.abs(g)) <= reg.sup_g_scale / lam_eff * (1 + 1e-12)
        assert np.max(np.abs(r)) <= reg.residual_sup + 1e-12
        # the defining algebraic identity of the residual
        np.testing.assert_allclose(r, 1.0 - t * g, atol=1e-12)


def test_landweber_declared_constant():
    assert make_regularizer("landweber", declared_q=0.7).qual_const == 1.0
    assert make_regularizer("landweber", declared_q=2.0).qual_const == 4.0
    assert make_regularizer("landweber", declared_q=3.0).qual_const == 27.0


def test_qualification_sup_tikhonov_oracle():
    # lam t/(lam+t) increases in t, so the sup sits at t = 1
    reg = make_regularizer("tikhonov")
    for lam in LEVELS:
        sup = qualification_sup(reg, 1.0, lam)
        assert sup == pytest.approx(lam / (lam + 1.0), rel=1e-9)
        assert sup <= reg.qual_const * lam


def test_qualification_sup_cutoff_oracle():
    reg = make_regularizer("cutoff", declared_q=2.0)
    for lam in LEVELS:
        sup = qualification_sup(reg, 2.0, lam, grid_size=200_001)
        assert sup <= lam**2
        assert sup >= 0.99 * lam**2


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.0])
def test_qualification_sup_landweber(q):
    reg = make_regularizer("landweber", declared_q=q)
    for lam in LEVELS:
        sup = qualification_sup(reg, q, lam, grid_size=100_001)
        bound = reg.qual_const * reg.effective_lambda(lam) ** q
        assert sup <= bound * (1.0 + 1e-9)


def test_intermediate_constants():
    tik = make_regularizer("tikhonov")
    assert intermediate_gamma(tik, 0.5) == pytest.approx(1.0)
    lw = make_regularizer("landweber", declared_q=2.0)
    assert intermediate_gamma(lw, 1.0) == pytest.approx(2.0)
    assert intermediate_gamma(lw, 2.0) == pytest.approx(4.0)
    with pytest.raises(QualificationError):
        intermediate_gamma(tik, 1.2)


@given(
    lam=st.floats(min_value=0.01, max_value=1.0),
    q=st.floats(min_value=0.25, max_value=3.0),
)
@settings(max_examples=40, deadline=None)
def test_declared_order_always_calibrated(lam, q):
    # the declared-order bound is the contract every filter must meet
    for method in ("cutoff", "landweber"):
        reg = make_regularizer(method, declared_q=q)
        sup = qualification_sup(reg, q, lam, grid_size=20_000)
        bound = reg.qual_const * reg.effective_lambda(lam) ** q
        assert sup <= bound * (1.0 + 1e-9)


class TestMatrixFunction:
    def test_conjugation(self):
        rng = np.random.default_rng(2)
        M, vals, q = random_psd(rng, 12)
        reg = make_regularizer("tikhonov")
        out = apply_matrix_function(reg, 0.05, M)
        expected = (q * reg.g(0.05, vals)) @ q.T
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_identity_matrix(self):
        reg = make_regularizer("tikhonov")
        out = apply_matrix_function(reg, 0.5, np.eye(3))
        np.testing.assert_allclose(out, np.eye(3) / 1.5, atol=1e-14)

    def test_rejects_nonsquare(self):
        reg = make_regularizer("tikhonov")
        with pytest.raises(ValueError):
            apply_matrix_function(reg, 0.5, np.ones((2, 3)))

    def test_rejects_asymmetric(self):
        reg = make_regularizer("tikhonov")
        M = np.array([[0.5, 0.2], [0.1, 0.5]])
        with pytest.raises(SpectrumError):
            apply_matrix_function(reg, 0.5, M)

    def test_rejects_spectrum_outside_window(self):
        reg = make_regularizer("tikhonov")
        with pytest.raises(SpectrumError):
            apply_matrix_function(reg, 0.5, 2.0 * np.eye(2))
        with pytest.raises(SpectrumError):
            apply_matrix_function(reg, 0.5, -0.1 * np.eye(2))

    def test_clamps_roundoff(self):
        reg = make_regularizer("cutoff")
        M = np.diag([1.0 + 5e-11, -5e-11, 0.3])
        out = apply_matrix_function(reg, 0.1, M)
        assert np.all(np.isfinite(out))

    def test_landweber_iterative_matches_spectral(self):
        rng = np.random.default_rng(9)
        M, _, _ = random_psd(rng, 20)
        v = rng.standard_normal(20)
        k = 50
        reg = make_regularizer("landweber")
        spectral = apply_matrix_function(reg, 1.0 / k, M) @ v
        iterative = landweber_iterate(M, v, k)
        np.testing.assert_allclose(iterative, spectral, atol=1e-8)

    def test_landweber_iterate_validates_count(self):
        with pytest.raises(ValueError):
            landweber_iterate(np.eye(2), np.ones(2), 0)
