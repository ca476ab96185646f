import math

import numpy as np
import pytest

from nuloss import spectral as sp

from oracles import apply_magnetic_fd, fd_magnetic_eigenvalues

PI = math.pi


@pytest.fixture(scope="module")
def op_gauge():
    return sp.make_operator(PI, "-1", "dirichlet")


@pytest.fixture(scope="module")
def op_free():
    return sp.make_operator(PI, "0", "dirichlet")


def test_gauged_dirichlet_eigenbasis(op_gauge):
    modes = sp.eigen_modes(op_gauge, 3)
    assert [m.eigenvalue for m in modes] == [1.0, 4.0, 9.0]
    x = np.linspace(0.05, PI - 0.05, 11)
    for m in modes:
        expect = math.sqrt(2 / PI) * np.sin(m.index * x) * np.exp(-1j * x)
        got = sp.mode_values(op_gauge, m, x)
        assert np.max(np.abs(got - expect)) < 1e-10


def test_free_dirichlet_real_sines(op_free):
    modes = sp.eigen_modes(op_free, 3)
    assert [m.eigenvalue for m in modes] == [1.0, 4.0, 9.0]
    x = np.linspace(0.1, PI - 0.1, 7)
    vals = sp.mode_values(op_free, modes[1], x)
    assert np.max(np.abs(vals.imag)) < 1e-12


def test_gauge_invariance_against_fd_oracle():
    # eigenvalues of (i d/dx + x)^2 match the free ones to the oracle's O(h^2)
    n = 2000
    h = PI / n
    fd = fd_magnetic_eigenvalues(lambda x: x, PI, n, 3)
    for k, lam2 in enumerate((1.0, 4.0, 9.0)):
        assert abs(fd[k] - lam2) < 50.0 * h**2


def test_gram_identity(op_gauge):
    modes = sp.eigen_modes(op_gauge, 20)
    grid = sp.transform_grid(op_gauge, modes[-1].lam)
    G = sp.gram_matrix(op_gauge, modes, grid)
    assert np.max(np.abs(G - np.eye(20))) < 1e-8


def test_forward_transform_orthonormality(op_gauge):
    modes = sp.eigen_modes(op_gauge, 6)
    grid = sp.transform_grid(op_gauge, modes[-1].lam)
    f = sp.mode_values(op_gauge, modes[0], grid.nodes)
    c = sp.forward_transform(f, modes, op_gauge, grid)
    assert abs(c.values[0] - 1.0) < 1e-8
    assert np.max(np.abs(c.values[1:])) < 1e-8


def test_forward_transform_linearity(op_gauge):
    modes = sp.eigen_modes(op_gauge, 4)
    grid = sp.transform_grid(op_gauge, modes[-1].lam)
    f = (2.0 * sp.mode_values(op_gauge, modes[0], grid.nodes)
         + 1j * sp.mode_values(op_gauge, modes[1], grid.nodes))
    c = sp.forward_transform(f, modes, op_gauge, grid)
    assert abs(c.values[0] - 2.0) < 1e-8
    assert abs(c.values[1] - 1j) < 1e-8
    assert np.max(np.abs(c.values[2:])) < 1e-8


def test_polynomial_sine_series(op_free):
    # hat f(lam_N) for f = x(pi - x): closed-form sine integrals
    modes = sp.eigen_modes(op_free, 5)
    grid = sp.transform_grid(op_free, modes[-1].lam)
    f = grid.nodes * (PI - grid.nodes)
    c = sp.forward_transform(f, modes, op_free, grid)
    for n, val in zip((1, 2, 3, 4, 5), c.values):
        expect = math.sqrt(2 / PI) * (2.0 / n**3) * (1 - (-1) ** n)
        assert abs(val - expect) < 1e-10


def test_roundtrip_tail_energy(op_free):
    # truncation error of the inverse-forward roundtrip equals the tail energy
    K = 6
    modes = sp.eigen_modes(op_free, K)
    grid = sp.transform_grid(op_free, 40.0)
    f = grid.nodes * (PI - grid.nodes)
    c = sp.forward_transform(f, modes, op_free, grid)
    recon = sp.inverse_transform(c, modes, op_free, grid.nodes)
    err2 = float(np.sum(grid.weights * np.abs(f - recon) ** 2))
    total = PI**5 / 30.0  # ||x(pi-x)||^2 on (0, pi)
    tail = total - float(np.sum(np.abs(c.values) ** 2))
    assert err2 == pytest.approx(tail, rel=1e-8)


def test_inverse_transform_empty_and_unknown(op_free):
    modes = sp.eigen_modes(op_free, 3)
    x = np.linspace(0, PI, 5)
    zero = sp.inverse_transform(sp.make_coefficients([]), modes, op_free, x)
    assert np.all(zero == 0)
    with pytest.raises(sp.SpectralError):
        sp.inverse_transform(sp.make_coefficients([(7.5, 1.0)]), modes, op_free, x)


def test_under_resolved_grid_rejected(op_free):
    modes = sp.eigen_modes(op_free, 30)
    grid = sp.transform_grid(op_free, 5.0)  # resolves only lam <= 5
    f = np.ones_like(grid.nodes)
    with pytest.raises(sp.SpectralError, match="under-resolved"):
        sp.forward_transform(f, modes, op_free, grid)


def test_duplicate_frequency_rejected():
    op = sp.make_operator(2 * PI, "1", "periodic")
    modes = sp.eigen_modes(op, 4)  # +-1, +-2 branches share frequencies
    grid = sp.transform_grid(op, modes[-1].lam)
    with pytest.raises(sp.SpectralError, match="duplicate"):
        sp.forward_transform(np.ones_like(grid.nodes), modes, op, grid)


def test_sobolev_norms(op_free):
    c = sp.make_coefficients([(2.0, 1.0)])
    assert sp.sobolev_norm(c, 1.0) == pytest.approx(2.0, abs=1e-15)
    assert sp.sobolev_norm(c, -1.0) == pytest.approx(0.5, abs=1e-15)
    # s = 0 reproduces the quadrature L2 norm of the reconstruction
    modes = sp.eigen_modes(op_free, 4)
    grid = sp.transform_grid(op_free, modes[-1].lam)
    coeffs = sp.make_coefficients([(m.lam, 0.3 * m.lam) for m in modes])
    recon = sp.inverse_transform(coeffs, modes, op_free, grid.nodes)
    l2 = math.sqrt(float(np.sum(grid.weights * np.abs(recon) ** 2)))
    assert sp.sobolev_norm(coeffs, 0.0) == pytest.approx(l2, rel=1e-8)


def test_poincare_constant(op_gauge):
    assert sp.poincare_constant(op_gauge) == pytest.approx(1.0, abs=1e-14)
    op2 = sp.make_operator(2 * PI, "0", "dirichlet")
    assert sp.poincare_constant(op2) == pytest.approx(2.0, abs=1e-14)


def test_poincare_gauge_shift_via_oracle():
    # shifting a by a constant moves the gauge phase only; the smallest
    # eigenvalue (hence the constant) is unchanged, per the FD oracle
    w1 = fd_magnetic_eigenvalues(lambda x: x, PI, 1200, 1)[0]
    w2 = fd_magnetic_eigenvalues(lambda x: x + 2.0, PI, 1200, 1)[0]
    assert abs(w1 - w2) < 1e-4
    assert abs(w1 - 1.0) < 1e-4


def test_fd_apply_residual_second_order(op_gauge):
    mode = sp.eigen_modes(op_gauge, 3)[2]
    resids = []
    for n in (1000, 2000):
        x = np.linspace(0.0, PI, n + 1)
        phi = sp.mode_values(op_gauge, mode, x)
        phi[0] = phi[-1] = 0.0
        out = apply_magnetic_fd(lambda x: -1.0, lambda x: 0.0, x, phi)
        resids.append(float(np.max(np.abs(out - mode.eigenvalue * phi[1:-1]))))
    assert resids[1] < resids[0]
    assert resids[0] / resids[1] == pytest.approx(4.0, rel=0.15)


def test_periodic_lattice_and_flux():
    op = sp.make_operator(2 * PI, "1", "periodic")
    modes = sp.eigen_modes(op, 5)
    assert [(m.index, m.lam) for m in modes] == [
        (1, 1.0), (-1, 1.0), (2, 2.0), (-2, 2.0), (3, 3.0)]
    # eigenfunction identity: phi_M = e^{i(M + a0) x}/sqrt(L) for a == a0
    x = np.linspace(0, 2 * PI, 9)
    got = sp.mode_values(op, modes[0], x)
    expect = np.exp(2j * x) / math.sqrt(2 * PI)
    assert np.max(np.abs(got - expect)) < 1e-9
    with pytest.raises(sp.SpectralError, match="flux"):
        sp.make_operator(2 * PI, "0.5", "periodic")
