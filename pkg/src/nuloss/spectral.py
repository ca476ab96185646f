"""Eigenbasis of the 1-D magnetic operator (i d/dx + a(x))^2 and the
generalized Fourier transform built on it.

The analytic backbone is the gauge identity (i d/dx + a)(f e^{iA}) =
e^{iA} i f', with A(x) the antiderivative of a vanishing at 0.  It reduces
the eigenproblem to -f'' = lambda^2 f, so modes are trigonometric up to the
unimodular phase e^{iA(x)} and eigenvalues are independent of a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import exprlang
from ._quadrature import CumulativeGL, panel_nodes

TWO_PI = 2.0 * math.pi


class SpectralError(ValueError):
    pass


def _compile_potential(potential) -> tuple:
    if isinstance(potential, str):
        potential = exprlang.parse(potential)
    extra = exprlang.free_vars(potential) - {"x"}
    if extra:
        raise SpectralError(f"potential may only use variable x, found {sorted(extra)}")

    scalar = exprlang.compile1(potential, "x")

    def vec(xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return np.array([scalar(x) for x in xs])

    return potential, scalar, vec


@dataclass(frozen=True)
class MagneticOperator1D:
    """The operator (i d/dx + a(x))^2 on (0, L) with its gauge phase."""

    length: float
    potential: exprlang.Expr
    boundary: str  # "dirichlet" | "periodic"
    flux: float  # A(L)

    def __post_init__(self):
        if self.length <= 0:
            raise SpectralError("length must be positive")
        if self.boundary not in ("dirichlet", "periodic"):
            raise SpectralError(f"unknown boundary {self.boundary!r}")

    # gauge phase machinery is attached by the factory; dataclass stays frozen
    def gauge_phase(self, x):
        """A(x) = integral_0^x a(s) ds, vectorized."""
        return self._gauge(x)  # type: ignore[attr-defined]

    def potential_values(self, x):
        return self._avec(x)  # type: ignore[attr-defined]

    @property
    def lambda1(self) -> float:
        if self.boundary == "dirichlet":
            return math.pi / self.length
        return TWO_PI / self.length


def make_operator(length: float, potential, boundary: str = "dirichlet",
                  gauge_panels: int = 256, gauge_order: int = 12) -> MagneticOperator1D:
    expr, a_scalar, a_vec = _compile_potential(potential)
    breaks = np.linspace(0.0, length, gauge_panels + 1)
    gauge = CumulativeGL(a_vec, breaks, n=gauge_order)
    flux = float(gauge.total)
    if boundary == "periodic":
        # the gauge factor e^{iA} must be L-periodic, so the flux is pinned
        # to the 2*pi lattice; otherwise the trigonometric reduction fails
        if abs(flux / TWO_PI - round(flux / TWO_PI)) > 1e-8:
            raise SpectralError(
                f"periodic boundary needs flux in 2*pi*Z, got A(L)={flux!r}"
            )
    op = MagneticOperator1D(length=float(length), potential=expr,
                            boundary=boundary, flux=flux)
    object.__setattr__(op, "_gauge", gauge)
    object.__setattr__(op, "_ascalar", a_scalar)
    object.__setattr__(op, "_avec", a_vec)
    return op


@dataclass(frozen=True)
class EigenMode:
    """One generalized Fourier mode: frequency lam, eigenvalue lam^2.

    ``index`` is N >= 1 for dirichlet (sine modes) and a signed nonzero
    integer for periodic (complex exponentials after gauging away a).
    """

    index: int
    lam: float
    kind: str  # "sin" | "exp"
    wavenumber: float
    norm: float

    @property
    def eigenvalue(self) -> float:
        return self.lam * self.lam


def eigen_modes(op: MagneticOperator1D, count: int) -> list[EigenMode]:
    if count < 1:
        raise SpectralError("count must be >= 1")
    L = op.length
    modes = []
    if op.boundary == "dirichlet":
        for n in range(1, count + 1):
            k = n * math.pi / L
            modes.append(EigenMode(index=n, lam=k, kind="sin",
                                   wavenumber=k, norm=math.sqrt(2.0 / L)))
        return modes
    # periodic, integer flux: lattice |m| * 2*pi/L, zero mode excluded,
    # positive branch listed before negative at equal frequency
    m = 1
    while len(modes) < count:
        for sgn in (1, -1):
            if len(modes) >= count:
                break
            k = sgn * m * TWO_PI / L
            modes.append(EigenMode(index=sgn * m, lam=abs(k), kind="exp",
                                   wavenumber=k, norm=math.sqrt(1.0 / L)))
        m += 1
    return modes


def mode_values(op: MagneticOperator1D, mode: EigenMode, x) -> np.ndarray:
    """Samples of phi_lambda on x (gauge phase included)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    phase = np.exp(1j * np.asarray(op.gauge_phase(xs), dtype=float))
    if mode.kind == "sin":
        base = mode.norm * np.sin(mode.wavenumber * xs)
    else:
        base = mode.norm * np.exp(1j * mode.wavenumber * xs)
    return base * phase


# --- quadrature grid for transforms ----------------------------------------


@dataclass(frozen=True)
class XGrid:
    nodes: np.ndarray
    weights: np.ndarray
    length: float
    nodes_per_panel: int

    def points_per_wavelength(self, lam: float) -> float:
        wavelength = TWO_PI / lam
        return len(self.nodes) * wavelength / self.length


def transform_grid(op: MagneticOperator1D, max_lambda: float,
                   nodes_per_wavelength: float = 16.0, nodes_per_panel: int = 8) -> XGrid:
    """Composite GL grid resolving every mode up to max_lambda."""
    need = nodes_per_wavelength * op.length * max_lambda / TWO_PI
    panels = max(8, math.ceil(need / nodes_per_panel))
    nodes, weights = panel_nodes(np.linspace(0.0, op.length, panels + 1), nodes_per_panel)
    return XGrid(nodes=nodes, weights=weights, length=op.length,
                 nodes_per_panel=nodes_per_panel)


@dataclass(frozen=True)
class ModeCoefficients:
    """Spectral content: (lam, coefficient) pairs, lam ascending, no duplicates."""

    lams: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.lams) != len(self.values):
            raise SpectralError("lams/values length mismatch")
        if len(self.lams) > 1:
            if np.any(np.diff(self.lams) <= 0):
                raise SpectralError("mode frequencies must be strictly increasing")

    def __len__(self):
        return len(self.lams)

    def sobolev_norm(self, s: float) -> float:
        if len(self.lams) == 0:
            return 0.0
        return float(np.sqrt(np.sum(self.lams ** (2.0 * s) * np.abs(self.values) ** 2)))


def make_coefficients(pairs: Sequence[tuple]) -> ModeCoefficients:
    pairs = sorted(pairs, key=lambda p: p[0])
    lams = np.array([p[0] for p in pairs], dtype=float)
    values = np.array([p[1] for p in pairs], dtype=complex)
    return ModeCoefficients(lams=lams, values=values)


def forward_transform(f_samples, modes: Sequence[EigenMode],
                      op: MagneticOperator1D, grid: XGrid) -> ModeCoefficients:
    """hat f(lam) = integral f conj(phi_lam) by composite quadrature."""
    f_samples = np.asarray(f_samples)
    if f_samples.shape != grid.nodes.shape:
        raise SpectralError("f_samples must be sampled on grid.nodes")
    lams = [m.lam for m in modes]
    if len(set(lams)) != len(lams):
        raise SpectralError(
            "duplicate frequencies in mode set (periodic +/- branches); "
            "select a single branch per frequency for transforms"
        )
    max_lam = max(lams)
    ppw = grid.points_per_wavelength(max_lam)
    if ppw < 16.0:
        need = math.ceil(16.0 * grid.length * max_lam / TWO_PI)
        raise SpectralError(
            f"grid under-resolved: {ppw:.1f} points per shortest wavelength "
            f"(< 16); need >= {need} nodes"
        )
    pairs = []
    for m in modes:
        phi = mode_values(op, m, grid.nodes)
        pairs.append((m.lam, complex(np.sum(grid.weights * f_samples * np.conj(phi)))))
    return make_coefficients(pairs)


def inverse_transform(coeffs: ModeCoefficients, modes: Sequence[EigenMode],
                      op: MagneticOperator1D, x) -> np.ndarray:
    """Pointwise sum of hat f(lam) phi_lam(x)."""
    by_lam = {m.lam: m for m in modes}
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(len(xs), dtype=complex)
    for lam, c in zip(coeffs.lams, coeffs.values):
        mode = by_lam.get(float(lam))
        if mode is None:
            raise SpectralError(f"no mode with frequency {lam!r} in mode set")
        out += c * mode_values(op, mode, xs)
    return out


def sobolev_norm(coeffs: ModeCoefficients, s: float) -> float:
    return coeffs.sobolev_norm(s)


def poincare_constant(op: MagneticOperator1D) -> float:
    """Best constant C with ||w||_L2 <= C ||(i d/dx + a) w||_L2, i.e. 1/lambda_1."""
    return 1.0 / eigen_modes(op, 1)[0].lam


def gram_matrix(op: MagneticOperator1D, modes: Sequence[EigenMode], grid: XGrid) -> np.ndarray:
    phis = np.array([mode_values(op, m, grid.nodes) for m in modes])
    return np.einsum("j,ij,kj->ik", grid.weights, phis.conj(), phis)
