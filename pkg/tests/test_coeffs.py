import math

import numpy as np
import pytest

from nuloss import coeffs as cf


def test_trivial_profile_constants():
    rep = cf.verify_assumptions(cf.catalog_profile("constant"))
    assert rep.c1 == rep.c2 == 1.0
    assert rep.c3 == 0.0
    assert rep.passed


def test_log_profile_passes_with_unit_derivative_constant():
    # |b'| = |cos(log 1/t)|/t <= nu/t once nu >= 1, i.e. t <= 1/e
    profile = cf.profile_from_expr("2+sin(log(1/t))", cf.nu_log(1 / math.e))
    rep = cf.verify_assumptions(profile)
    assert rep.passed
    assert rep.c3_k1 <= 1.0 + 1e-9
    assert 1.0 <= rep.c1 and rep.c2 <= 3.0


def test_fast_oscillation_fails_derivative_bound():
    # b = 2 + sin(1/t) has |b'| ~ 1/t^2, far above nu/t for nu = log(1/t)
    profile = cf.profile_from_expr("2+sin(1/t)", cf.nu_log(0.9))
    rep = cf.verify_assumptions(profile, grid_size=160)
    assert not rep.derivative_pass


def test_scale_consistency():
    base = cf.verify_assumptions(cf.catalog_profile("log"))
    doubled = cf.verify_assumptions(
        cf.profile_from_expr("2*(2+sin(log(1/t)))", cf.nu_log(0.9)))
    assert doubled.c1 == pytest.approx(2 * base.c1, rel=1e-10)
    assert doubled.c2 == pytest.approx(2 * base.c2, rel=1e-10)
    assert doubled.c3 == pytest.approx(2 * base.c3, rel=1e-10)


def test_catalog_monotonicity_grids():
    for kind in ("constant", "log", "log_power", "iterated_log"):
        nu = cf.catalog_profile(kind).nu
        ts = nu.T * 2.0 ** (-np.arange(0, 1000) / 100.0)
        vals = np.asarray(nu.value(ts), dtype=float)
        assert np.all(vals > 0)
        if kind != "constant":
            assert np.all(np.diff(vals) > 0)  # increasing toward t -> 0
        mus = ts / vals
        assert np.all(np.diff(mus) < 0)  # mu increasing in t


def test_mu_and_inverse():
    nu1 = cf.nu_constant(1.0, 1.0)
    assert cf.mu(nu1, 0.37) == 0.37
    assert cf.mu_inverse(nu1, 0.25) == pytest.approx(0.25, abs=1e-12)
    nul = cf.nu_log(0.9)
    assert cf.mu(nul, 1 / math.e) == pytest.approx(1 / math.e, rel=1e-14)
    for t in (0.01, 0.123, 0.7):
        assert cf.mu_inverse(nul, cf.mu(nul, t)) == pytest.approx(t, rel=1e-10)
    with pytest.raises(cf.CoeffsError):
        cf.mu_inverse(nul, 10 * cf.mu(nul, nul.T))


def test_t_lambda_examples():
    nu1 = cf.nu_constant(1.0, 1.0)
    assert cf.t_lambda(nu1, 32.0, 4) == pytest.approx(0.5, rel=1e-12)
    nul = cf.nu_log(0.9)
    assert cf.t_lambda(nul, 16 * math.e, 4) == pytest.approx(1 / math.e, rel=1e-10)
    with pytest.raises(cf.CoeffsError):
        cf.t_lambda(nu1, 4.0, 4)  # root would land beyond T


def test_t_lambda_defining_identity_and_monotonicity():
    nul = cf.nu_log(0.9)
    prev = None
    for lam in np.geomspace(2.0**8, 2.0**16, 9):
        tl = cf.t_lambda(nul, lam, 8)
        assert tl * lam == pytest.approx(2.0**8 * float(nul.value(tl)), rel=1e-10)
        assert tl == pytest.approx(cf.mu_inverse(nul, 2.0**8 / lam), rel=1e-10)
        if prev is not None:
            assert tl < prev
        prev = tl


def test_loss_weight_paths_agree():
    nul = cf.nu_log(0.9)
    lam, P, c1 = 2.0**10, 8, 0.7
    w1 = cf.loss_weight(nul, lam, P, c1)
    w2 = math.exp(c1 * float(nul.value(cf.mu_inverse(nul, 2.0**P / lam))))
    assert w1 == pytest.approx(w2, rel=1e-10)


def test_loss_weight_constant_nu_frequency_independent():
    nu1 = cf.nu_constant(1.0, 1.0)
    c1 = 0.8
    vals = [cf.loss_weight(nu1, lam, 4, c1) for lam in (64.0, 512.0, 4096.0)]
    assert all(v == pytest.approx(math.exp(c1), rel=1e-12) for v in vals)


def test_loss_weight_log_slope_fits_c1():
    # log nu: weight ~ t_lambda^{-c1}, polynomial of degree c1 in lam up to
    # log corrections, so the fitted slope approaches c1 from below
    nul = cf.nu_log(0.9)
    c1 = 0.6
    lams = np.geomspace(2.0**30, 2.0**44, 15)
    logw = [math.log(cf.loss_weight(nul, lam, 8, c1)) for lam in lams]
    slope = np.polyfit(np.log(lams), logw, 1)[0]
    assert slope == pytest.approx(c1, rel=0.10)
    assert slope < c1


def test_classification():
    assert cf.classify_loss(cf.nu_constant(1.0, 1.0)) == cf.LOSS_NONE
    assert cf.classify_loss(cf.nu_log(0.9)) == cf.LOSS_FINITE
    assert cf.classify_loss(cf.nu_log_power(0.5)) == cf.LOSS_ARBITRARILY_SMALL
    assert cf.classify_loss(cf.nu_iterated_log((1.0,))) == cf.LOSS_INFINITE
    with pytest.raises(cf.CoeffsError):
        cf.classify_loss(cf.nu_custom("1+1/(1+t)", 1.0))


def test_nu_validation():
    with pytest.raises(cf.CoeffsError):
        cf.nu_log(1.5)  # not positive up to T
    with pytest.raises(cf.CoeffsError):
        cf.nu_log_power(1.5)
    with pytest.raises(cf.CoeffsError):
        cf.nu_custom("t", 1.0)  # increasing
    with pytest.raises(cf.CoeffsError):
        cf.nu_custom("0-1", 1.0)  # negative


def test_nu_from_tag():
    nu = cf.nu_from_tag({"kind": "log_power", "gamma": 0.5}, 0.9)
    assert nu.kind == "log_power" and nu.gamma == 0.5
    nu2 = cf.nu_from_tag("2-t", 1.0)
    assert nu2.kind == "custom"
    with pytest.raises(cf.CoeffsError):
        cf.nu_from_tag({"kind": "nope"}, 1.0)
