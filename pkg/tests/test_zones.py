import numpy as np
import pytest

from nuloss import coeffs as cf, modesolve as ms, zones as zn


@pytest.fixture(scope="module")
def log_profile():
    return cf.catalog_profile("log")


def test_classify_examples():
    nu1 = cf.nu_constant(1.0, 1.0)
    zp = zn.ZoneParams(M=10.0, P=4)
    assert zn.classify(0.3, 5.0, zp, nu1) is zn.ZoneKind.LOW
    assert zn.classify(0.25, 32.0, zp, nu1) is zn.ZoneKind.PD
    assert zn.classify(0.5, 32.0, zp, nu1) is zn.ZoneKind.PE  # boundary


def test_partition_and_single_crossing(log_profile):
    rng = np.random.default_rng(42)
    zp = zn.ZoneParams(M=12.0, P=6)
    nu = log_profile.nu
    ts = rng.uniform(1e-6, nu.T, 100_000)
    lams = np.exp(rng.uniform(0.0, 12.0, 100_000))
    kinds = {zn.ZoneKind.LOW: 0, zn.ZoneKind.PD: 0, zn.ZoneKind.PE: 0}
    for t, lam in zip(ts[:2000], lams[:2000]):
        kinds[zn.classify(float(t), float(lam), zp, nu)] += 1
    assert sum(kinds.values()) == 2000
    # vectorized version of the same partition for the full sample
    scale = zp.scale * np.asarray(nu.value(ts))
    low = lams <= zp.M
    pd = (~low) & (ts * lams < scale)
    pe = (~low) & (ts * lams >= scale)
    assert np.all(low.astype(int) + pd.astype(int) + pe.astype(int) == 1)
    # single crossing in t for a fixed high frequency
    lam = 3000.0
    tl = cf.t_lambda(nu, lam, zp.P)
    tgrid = np.linspace(1e-6, nu.T, 2001)
    kinds = [zn.classify(float(t), lam, zp, nu) for t in tgrid]
    flips = sum(1 for a, b in zip(kinds[:-1], kinds[1:]) if a is not b)
    assert flips == 1
    assert zn.classify(tl * 0.999, lam, zp, nu) is zn.ZoneKind.PD
    assert zn.classify(tl * 1.001, lam, zp, nu) is zn.ZoneKind.PE


def test_micro_energy_examples():
    me = zn.micro_energy(0.1, 3.0, 1.0, 0.0, zn.ZoneKind.PE, b=2.0)
    assert me.v[0] == 6.0
    assert me.magnitude == pytest.approx(6.0)
    me2 = zn.micro_energy(0.1, 3.0, 0.0, 1j, zn.ZoneKind.LOW)
    assert me2.magnitude == pytest.approx(1.0)
    # boundary: pd and pe first components differ exactly by b
    u, ut, lam, b = 0.7 + 0.2j, 0.1 - 0.4j, 50.0, 1.7
    v_pd = zn.micro_energy(0.2, lam, u, ut, zn.ZoneKind.PD)
    v_pe = zn.micro_energy(0.2, lam, u, ut, zn.ZoneKind.PE, b=b)
    assert abs(v_pe.v[0]) == pytest.approx(b * abs(v_pd.v[0]), rel=1e-14)
    assert v_pe.v[1] == v_pd.v[1]


def test_symbol_class_phase_speed_inverse_square(log_profile):
    zp = zn.ZoneParams(M=16.0, P=10)
    a = lambda t, lam: (lam * log_profile.b.value(t)) ** -2.0
    rep = zn.symbol_class_estimate(a, -2.0, 0.0, 2, 2, log_profile, zp)
    assert rep.passed


def test_symbol_class_identity_symbol(log_profile):
    zp = zn.ZoneParams(M=16.0, P=10)
    rep = zn.symbol_class_estimate(lambda t, lam: lam, 1.0, 0.0, 0, 2,
                                   log_profile, zp, refinements=2)
    assert rep.passed
    assert rep.constants[(0, 0)] == pytest.approx(1.0, rel=1e-12)
    assert rep.constants[(0, 1)] == pytest.approx(1.0, rel=1e-6)


def test_symbol_class_embedding(log_profile):
    # membership survives trading one frequency order for one time order
    zp = zn.ZoneParams(M=16.0, P=8)
    nu = log_profile.nu

    def a(t, lam):
        return (float(nu.value(t)) / t) ** 2 / lam

    rep_tight = zn.symbol_class_estimate(a, -1.0, 2.0, 1, 1, log_profile, zp,
                                         refinements=3)
    rep_embed = zn.symbol_class_estimate(a, 0.0, 1.0, 1, 1, log_profile, zp,
                                         refinements=3)
    assert rep_tight.passed and rep_embed.passed
    # inside the p-evolution region (nu/t)/lam <= 2^-P, so constants shrink
    assert rep_embed.constant() <= rep_tight.constant() * 2.0 ** -zp.P * 1.5


def test_grid_must_stay_inside_zone(log_profile):
    zp = zn.ZoneParams(M=16.0, P=10)
    with pytest.raises(zn.ZoneError):
        zn.symbol_class_estimate(lambda t, lam: lam, 1.0, 0.0, 0, 0,
                                 log_profile, zp, lam_range=(2.0, 4.0))


def test_integral_bound_constant_nu():
    profile = cf.catalog_profile("constant")
    zp = zn.ZoneParams(M=10.0, P=4)
    rows = zn.integral_bound_check(lambda tau, lam: 1.0 / (lam * tau * tau),
                                   [32.0, 64.0, 128.0], profile, zp)
    for r in rows:
        assert r.constant <= 2.0 ** -zp.P + 1e-12
        assert r.constant <= r.nu_at_sep


def test_integral_bound_log_nu(log_profile):
    zp = zn.ZoneParams(M=16.0, P=8)
    nu = log_profile.nu

    def a(tau, lam):
        return float(nu.value(tau)) ** 2 / (lam * tau * tau)

    rows = zn.integral_bound_check(a, np.geomspace(2.0**8, 2.0**16, 9),
                                   log_profile, zp)
    assert all(r.constant <= 3.0 for r in rows)


def test_integral_bound_fixed_window_halves():
    profile = cf.catalog_profile("constant")
    zp = zn.ZoneParams(M=10.0, P=4)
    anchor = cf.t_lambda(profile.nu, 64.0, zp.P)
    lams = [64.0, 128.0, 256.0, 512.0]
    rows = zn.integral_bound_check(lambda tau, lam: 1.0 / (lam * tau * tau),
                                   lams, profile, zp, anchor=anchor)
    for a, b in zip(rows[:-1], rows[1:]):
        assert b.integral == pytest.approx(0.5 * a.integral, rel=1e-9)


def test_zone_map_labels(log_profile):
    zp = zn.ZoneParams(M=12.0, P=6)
    triples = zn.zone_map(log_profile, zp, np.array([0.1, 0.5]),
                          np.array([5.0, 500.0]))
    assert {z for _, _, z in triples} <= {"low", "pd", "pe"}
    assert len(triples) == 4
