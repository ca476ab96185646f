"""Acceptance suite: each test runs one exit criterion at its stated
tolerance and prints a single pass line (pytest -s shows them inline).

Criterion 3 note: the oscillation-window construction requires the zone
exponent to exceed the whole-period exponent by two (the window half-width
is 2^(p-P-1) pi t_k floor(nu)/nu times t_k, which must stay below t_k), so
the family here runs with P = 10 alongside the stated eps = 0.05, p = 8,
k = 1..8; p controls every asserted magnitude exp(eps 2^p pi floor(nu)).
"""

import math
import time

import numpy as np
import pytest

from nuloss import coeffs as cf, counterexample as cx, energy as en, exprlang as ex
from nuloss import modesolve as ms, spectral as sp, zones as zn

from oracles import fd_derivative_cases, fd_magnetic_eigenvalues, reference_mode_solution


def report(num, message):
    print(f"\n[acceptance] criterion {num}: PASS - {message}")


def test_criterion_1_eigenbasis():
    start = time.time()
    op = sp.make_operator(math.pi, "-1", "dirichlet")
    modes = sp.eigen_modes(op, 20)
    analytic = np.array([m.eigenvalue for m in modes])
    expect = np.array([float(n * n) for n in range(1, 21)])
    assert np.max(np.abs(analytic - expect)) <= 1e-12

    n = 2000
    h = math.pi / n
    fd = fd_magnetic_eigenvalues(lambda x: -1.0, math.pi, n, 20)
    for lam2, fd_val in zip(expect, fd):
        # second-order scheme: constant grows like lam^4 across the table
        assert abs(fd_val - lam2) <= (lam2**2 / 3.0 + 1.0) * h**2
    elapsed = time.time() - start
    assert elapsed < 5.0
    report(1, f"eigenvalues 1..400 exact, FD oracle within O(h^2), {elapsed:.2f}s")


def test_criterion_2_energy_conservation():
    start = time.time()
    worst = 0.0
    for lam in (1.0, 8.0, 64.0):
        for s in (1.0, 0.5):
            drift = en.conservation_check(lam, 0.0, 1.0, s)
            worst = max(worst, drift)
            assert drift <= 1e-8
    elapsed = time.time() - start
    assert elapsed < 5.0
    report(2, f"drift <= {worst:.2e} for lam in {{1,8,64}}, {elapsed:.2f}s")


@pytest.fixture(scope="module")
def family():
    return cx.build_family(eps=0.05, P=10, p=8, nu=cf.nu_log(0.6), T=0.6,
                           a0=1, k_count=8, c1=1.0)


def test_criterion_3_counterexample_exactness(family):
    start = time.time()
    worst = 0.0
    for k in range(1, 9):
        sol = cx.solve_family_member(family, k)
        # E_1(T) = |u_t|^2 at the right window edge, conserved afterwards;
        # rel errors are measured in log space against exp(+-eps rho lam)
        err_T = abs(math.expm1(sol.ET_log - family.eps * 4 * math.pi
                               * sol.half_periods))
        err_0 = abs(math.expm1(sol.E0_log + family.eps * 4 * math.pi
                               * sol.half_periods))
        worst = max(worst, err_T, err_0)
        assert err_T <= 1e-6
        assert err_0 <= 1e-6
    elapsed = time.time() - start
    assert elapsed < 120.0
    report(3, f"E(T), E(0) match exp(+-eps rho lam) to {worst:.2e}, {elapsed:.1f}s")


def test_criterion_4_blowup_trend(family):
    for c1 in (1.0, 3.0):
        table = cx.demonstrate_blowup(family, c1=c1)
        logs = [r.weighted_log for r in table.rows]
        assert all(b > a for a, b in zip(logs[:-1], logs[1:]))
        assert table.min_slope >= 2.0
    report(4, f"weighted energies strictly increasing, slope >= "
              f"{table.min_slope:.1f} in nu(t_k)")


def test_criterion_5_floquet_structure():
    psi = cx.calibrate_psi(2.0)
    eps = 0.05
    resid = cx.verify_ode(eps, psi, np.linspace(0.0, 4 * math.pi, 4001))
    wmax = float(np.max(np.abs(cx.w_eps(np.linspace(0, 4 * math.pi, 4001),
                                        eps, psi))))
    assert resid <= 1e-8 * wmax
    # period multiplier from an actual one-period integration
    u, v = reference_mode_solution(lambda s: cx.a_eps(s, eps, psi),
                                   0.0, 2 * math.pi, 0.0, 1.0)
    assert abs(v - math.exp(2 * math.pi * eps)) <= 1e-6 * math.exp(2 * math.pi * eps)

    from scipy.integrate import quad

    val, _ = quad(lambda tau: psi.value(tau) * math.sin(tau) ** 2,
                  0.0, 2 * math.pi, limit=400, epsabs=1e-13, epsrel=1e-13)
    assert abs(val - math.pi) <= 1e-10
    report(5, f"ODE residual {resid:.1e}, multiplier and normalization exact")


def test_criterion_6_solver_cross_validation():
    profile = cf.catalog_profile("log")
    worst = 0.0
    for k in (10, 12, 14):
        lam = 2.0**k
        tl = cf.t_lambda(profile.nu, lam, 10)
        res = ms.wkb_propagate(profile, lam, tl, profile.T,
                               state=ms.ModeState(t=tl, u=1.0 / lam, ut=1.0,
                                                  lam=lam))
        tr = ms.integrate_mode(profile, lam, tl, profile.T, (1.0 / lam, 1.0),
                               collect=False)
        fin = tr.final
        rel = max(abs(res.state.u - fin.u) / abs(fin.u),
                  abs(res.state.ut - fin.ut) / abs(fin.ut))
        worst = max(worst, rel)
        assert rel <= 1e-4

    # certified truncation bound vs observed error, 100 random low-frequency runs
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        lam = float(rng.uniform(0.5, 3.0))
        a, width = float(rng.uniform(0.05, 0.4)), float(rng.uniform(0.1, 0.5))
        c0 = float(rng.uniform(1.5, 2.5))
        amp = float(rng.uniform(0.0, 0.4))
        freq = int(rng.integers(1, 4))
        src = f"{c0}+{amp}*sin({freq}*t)"
        prof = cf.profile_from_expr(src, cf.nu_constant(1.0, 1.0))
        A = ms.system_matrix_low(prof, lam)
        K = int(rng.integers(3, 9))
        fs = ms.matrizant(A, a, a + width, K=K, tol=0.0, strict=False,
                          breaks=np.linspace(a, a + width, 33),
                          max_segment_growth=1e9)
        ref = ms.fundamental_from_integrator(prof, lam, a, a + width,
                                             micro="low", rtol=1e-12)
        err = float(np.linalg.norm(fs.matrix - ref.matrix, 2))
        assert err <= fs.remainder + 1e-8
        checked += 1
    report(6, f"WKB vs integrator <= {worst:.1e}; 100/100 truncation bounds hold")


def test_criterion_7_diagonalization_contract():
    profile = cf.catalog_profile("log")
    P = 10
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        lam = float(np.exp(rng.uniform(math.log(2.0**8), math.log(2.0**16))))
        tl = cf.t_lambda(profile.nu, lam, P)
        t = float(np.exp(rng.uniform(math.log(tl), math.log(profile.T))))
        dd = ms.diagonalize(profile, lam, t)
        assert dd.n1_deviation < 0.5
    zp = zn.ZoneParams(M=16.0, P=P)
    r1 = lambda t, lam: np.linalg.norm(ms.r1_values(profile, lam,
                                                    np.array([t]))[0], 2)
    rep = zn.symbol_class_estimate(r1, -1.0, 2.0, 0, 2, profile, zp)
    assert rep.passed
    report(7, f"||N1 - I|| < 1/2 at 10^4 points; residual symbol constant "
              f"{rep.constant():.3g} refinement-stable")


def test_criterion_8_estimate_verification():
    zp = zn.ZoneParams(M=16.0, P=10)
    results = {}
    for kind in ("constant", "log", "log_power", "iterated_log"):
        profile = cf.catalog_profile(kind)
        lam_floor = zp.scale * float(profile.nu.value(profile.T)) / profile.T
        lams = [2.0**k for k in range(10, 15) if 2.0**k >= 1.1 * lam_floor]
        rep = en.verify_with_refinement(profile, zp, lams)
        assert math.isfinite(rep.fitted_c1)
        assert rep.stable
        results[kind] = rep.fitted_c1
    assert results["constant"] <= 1e-6
    report(8, "fitted c1 per scale: " + ", ".join(
        f"{k}={v:.3f}" for k, v in results.items()))


def test_criterion_9_exact_integrality(family):
    for mb in family.members:
        assert isinstance(mb.half_periods, int)
        assert mb.half_periods == 2 ** (family.p - 2) * mb.m
        assert mb.half_periods >= 1
    report(9, f"lam rho/(4 pi) = {[mb.half_periods for mb in family.members]}, "
              "exact integers")


def test_criterion_10_expression_derivatives():
    worst = 0.0
    count = 0
    for tree, t, sym, fd in fd_derivative_cases(seed=2718, n_cases=1000):
        err = abs(sym - fd) / max(1.0, abs(sym))
        worst = max(worst, err)
        assert err <= 1e-5, ex.to_source(tree)
        count += 1
    assert count == 1000
    report(10, f"1000 random derivatives match finite differences "
               f"(worst {worst:.1e})")
