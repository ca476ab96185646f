"""Sharpness family for the loss-of-regularity bound.

A calibrated smooth bump drives a Floquet-unstable Hill window: the profile
w(t) = sin t * exp(2 eps int_0^t psi sin^2) gains the factor e^{2 pi eps}
per period and solves w'' + a_eps w = 0 for an explicit periodic a_eps > 0.
Rescaled into a shrinking interval I_k around t_k on the separating line
(t_k lam_k = 2^P nu(t_k)), the window pumps one eigenmode by
exp(eps rho_k lam_k) while the coefficient stays uniformly admissible, so
the weighted energies exp(-2 c1 nu(t_k) + eps rho_k lam_k) blow up along k.

The half-width of I_k equals an exact whole number of oscillation periods:
lam_k rho_k / (4 pi) = 2^(p-2) floor(nu(t_k)), kept in integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._quadrature import CumulativeGL
from .coeffs import CoefficientProfile, NuFunction, TimeCoefficient, bisect_root, t_lambda
from .modesolve import integrate_oscillator

TWO_PI = 2.0 * math.pi


class CounterexampleError(ValueError):
    pass


# --- calibrated bump ---------------------------------------------------------


@dataclass(frozen=True)
class BumpPsi:
    """Smooth 2*pi-periodic bump, supported on |tau - pi| < r, vanishing
    identically near 0 (mod 2*pi); kappa normalizes int psi sin^2 = pi."""

    r: float
    kappa: float

    def _reduced(self, t):
        tau = np.mod(t, TWO_PI)
        z = (tau - math.pi) / self.r
        mask = np.abs(z) < 1.0
        return z, mask

    def value(self, t):
        t = np.asarray(t, dtype=float)
        z, mask = self._reduced(t)
        out = np.zeros_like(z)
        zm = z[mask]
        out[mask] = self.kappa * np.exp(-1.0 / (1.0 - zm * zm))
        return out if out.ndim else float(out)

    def derivatives(self, t, order: int = 3):
        """(psi, psi', psi'', psi''') via the log-derivative chain."""
        t = np.asarray(t, dtype=float)
        z, mask = self._reduced(t)
        psi = np.zeros_like(z)
        d1 = np.zeros_like(z)
        d2 = np.zeros_like(z)
        d3 = np.zeros_like(z)
        zm = z[mask]
        r = self.r
        q = 1.0 - zm * zm
        p = self.kappa * np.exp(-1.0 / q)
        h1 = -2.0 * zm / (r * q**2)
        h2 = -2.0 * (1.0 + 3.0 * zm * zm) / (r * r * q**3)
        h3 = -24.0 * zm * (1.0 + zm * zm) / (r**3 * q**4)
        psi[mask] = p
        d1[mask] = p * h1
        d2[mask] = p * (h2 + h1 * h1)
        d3[mask] = p * (h3 + 3.0 * h1 * h2 + h1**3)
        if psi.ndim:
            return psi, d1, d2, d3
        return float(psi), float(d1), float(d2), float(d3)

    def d1(self, t):
        return self.derivatives(t)[1]


def calibrate_psi(r: float) -> BumpPsi:
    """Fix the amplitude so that int_0^2pi psi sin^2 = pi.

    Composite GL on the support plus an adaptive cross-check; the two rules
    must agree to 1e-11 relative before the amplitude is accepted.
    """
    from scipy.integrate import quad

    from ._quadrature import fixed_quad

    if not (0.0 < r < math.pi):
        raise CounterexampleError("bump half-width must lie in (0, pi)")
    raw = BumpPsi(r=r, kappa=1.0)
    f = lambda tau: raw.value(tau) * np.sin(tau) ** 2
    integral = fixed_quad(f, math.pi - r, math.pi + r, n_panels=256, n=12)
    check, _ = quad(lambda tau: raw.value(tau) * math.sin(tau) ** 2,
                    math.pi - r, math.pi + r, limit=400, epsabs=1e-13, epsrel=1e-13)
    if abs(integral - check) > 1e-11 * abs(integral):
        raise CounterexampleError(
            f"bump calibration rules disagree: {integral!r} vs {check!r}")
    return BumpPsi(r=r, kappa=math.pi / integral)


class _PsiCumulative:
    """Psi(t) = int_0^t psi sin^2, exact period decomposition."""

    def __init__(self, psi: BumpPsi, panels: int = 96, order: int = 12):
        self.psi = psi
        f = lambda tau: psi.value(tau) * np.sin(tau) ** 2
        self.cum = CumulativeGL(f, np.linspace(0.0, TWO_PI, panels + 1), n=order)
        self.period_integral = float(self.cum.total)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        m = np.floor(t / TWO_PI)
        tau = t - TWO_PI * m
        part = self.cum(tau)
        return m * self.period_integral + part


_PSI_CUM_CACHE: dict = {}


def _psi_cum(psi: BumpPsi) -> _PsiCumulative:
    key = (psi.r, psi.kappa)
    if key not in _PSI_CUM_CACHE:
        _PSI_CUM_CACHE[key] = _PsiCumulative(psi)
    return _PSI_CUM_CACHE[key]


# --- the Floquet window ---------------------------------------------------------


def w_eps(t, eps: float, psi: Optional[BumpPsi]):
    """w(t) = sin t * exp(2 eps int_0^t psi sin^2); psi=None means psi == 0."""
    t = np.asarray(t, dtype=float)
    if psi is None:
        out = np.sin(t)
        return out if out.ndim else float(out)
    g = 2.0 * eps * _psi_cum(psi)(t)
    out = np.sin(t) * np.exp(g)
    return out if out.ndim else float(out)


def w_eps_d1(t, eps: float, psi: Optional[BumpPsi]):
    t = np.asarray(t, dtype=float)
    if psi is None:
        out = np.cos(t)
        return out if out.ndim else float(out)
    pv = psi.value(t)
    g = 2.0 * eps * _psi_cum(psi)(t)
    out = np.exp(g) * (np.cos(t) + 2.0 * eps * pv * np.sin(t) ** 3)
    return out if out.ndim else float(out)


def w_eps_d2(t, eps: float, psi: Optional[BumpPsi]):
    """Second derivative assembled from the composition, independent of the
    defining equation (used as a residual probe)."""
    t = np.asarray(t, dtype=float)
    if psi is None:
        out = -np.sin(t)
        return out if out.ndim else float(out)
    pv, pd1, _, _ = psi.derivatives(t)
    s, c = np.sin(t), np.cos(t)
    g1 = 2.0 * eps * pv * s * s
    g2 = 2.0 * eps * (pd1 * s * s + pv * np.sin(2.0 * t))
    g = 2.0 * eps * _psi_cum(psi)(t)
    out = np.exp(g) * ((g2 + g1 * g1 - 1.0) * s + 2.0 * g1 * c)
    return out if out.ndim else float(out)


def a_eps(t, eps: float, psi: Optional[BumpPsi]):
    """Periodic Hill coefficient: 1 - 4 eps psi sin 2t - 2 eps psi' sin^2 t
    - 4 eps^2 psi^2 sin^4 t; w_eps solves w'' + a_eps w = 0."""
    t = np.asarray(t, dtype=float)
    if psi is None:
        out = np.ones_like(t)
        return out if out.ndim else float(out)
    pv, pd1, _, _ = psi.derivatives(t)
    s = np.sin(t)
    out = (1.0 - 4.0 * eps * pv * np.sin(2.0 * t) - 2.0 * eps * pd1 * s * s
           - 4.0 * eps * eps * pv * pv * s**4)
    return out if out.ndim else float(out)


def a_eps_d1(t, eps: float, psi: BumpPsi):
    t = np.asarray(t, dtype=float)
    pv, p1, p2, _ = psi.derivatives(t)
    s, c = np.sin(t), np.cos(t)
    s2, c2 = np.sin(2.0 * t), np.cos(2.0 * t)
    out = (-4.0 * eps * (p1 * s2 + 2.0 * pv * c2)
           - 2.0 * eps * (p2 * s * s + p1 * s2)
           - 4.0 * eps * eps * (2.0 * pv * p1 * s**4 + 4.0 * pv * pv * s**3 * c))
    return out if out.ndim else float(out)


def a_eps_d2(t, eps: float, psi: BumpPsi):
    t = np.asarray(t, dtype=float)
    pv, p1, p2, p3 = psi.derivatives(t)
    s, c = np.sin(t), np.cos(t)
    s2, c2 = np.sin(2.0 * t), np.cos(2.0 * t)
    out = (-4.0 * eps * (p2 * s2 + 4.0 * p1 * c2 - 4.0 * pv * s2)
           - 2.0 * eps * (p3 * s * s + 2.0 * p2 * s2 + 2.0 * p1 * c2)
           - 4.0 * eps * eps * (2.0 * p1 * p1 * s**4 + 2.0 * pv * p2 * s**4
                                + 16.0 * pv * p1 * s**3 * c
                                + 12.0 * pv * pv * s * s * c * c
                                - 4.0 * pv * pv * s**4))
    return out if out.ndim else float(out)


def verify_ode(eps: float, psi: Optional[BumpPsi], grid) -> float:
    """max |w'' + a_eps w| on the grid; raises if above 1e-8 * max|w|."""
    grid = np.asarray(grid, dtype=float)
    w = np.atleast_1d(w_eps(grid, eps, psi))
    w2 = np.atleast_1d(w_eps_d2(grid, eps, psi))
    a = np.atleast_1d(a_eps(grid, eps, psi))
    resid = float(np.max(np.abs(w2 + a * w)))
    bound = 1e-8 * float(np.max(np.abs(w)))
    if resid > bound:
        raise CounterexampleError(
            f"window ODE residual {resid:.3e} above {bound:.3e}")
    return resid


# --- the family ------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyMember:
    k: int
    m: int  # floor(nu(t_k))
    half_periods: int  # lam rho / (4 pi) = 2^(p-2) m, exact integer
    lam: int
    t_k: float
    rho_k: float
    nu_k: float

    @property
    def interval(self) -> tuple:
        return (self.t_k - 0.5 * self.rho_k, self.t_k + 0.5 * self.rho_k)

    @property
    def log_gain(self) -> float:
        """eps-free part: rho_k * lam_k = 4 pi * half_periods."""
        return 4.0 * math.pi * self.half_periods


@dataclass
class CounterexampleFamily:
    eps: float
    P: int
    p: int
    nu: NuFunction
    T: float
    a0: int
    c1: float
    psi: BumpPsi
    members: list
    a_min: float
    a_max: float
    _period_maps: Optional[tuple] = field(default=None, repr=False)

    def coefficient(self, k: int) -> "FamilyCoefficient":
        return FamilyCoefficient(self, k)

    def member(self, k: int) -> FamilyMember:
        for mb in self.members:
            if mb.k == k:
                return mb
        raise CounterexampleError(f"no member with index k={k}")

    def profile(self, k: int) -> CoefficientProfile:
        return CoefficientProfile(b=self.coefficient(k), nu=self.nu, T=self.T,
                                  label=f"family k={k}")

    def as_dict(self) -> dict:
        return {
            "eps": self.eps, "P": self.P, "p": self.p, "T": self.T,
            "a0": self.a0, "c1": self.c1,
            "psi": {"r": self.psi.r, "kappa": self.psi.kappa},
            "a_min": self.a_min, "a_max": self.a_max,
            "members": [
                {"k": mb.k, "m": mb.m, "half_periods": mb.half_periods,
                 "lam": mb.lam, "t_k": mb.t_k, "rho_k": mb.rho_k,
                 "nu_k": mb.nu_k, "interval": list(mb.interval)}
                for mb in self.members
            ],
        }


class FamilyCoefficient(TimeCoefficient):
    """b_k(t) = sqrt(b2) with b2 = a_eps(lam (t - t_k)) on I_k, else 1.

    Globally smooth: a_eps is identically 1 near whole periods, and the
    window endpoints sit exactly on whole periods.
    """

    def __init__(self, family: CounterexampleFamily, k: int):
        self.family = family
        self.mb = family.member(k)
        self.eps = family.eps
        self.psi = family.psi

    def _inside(self, t: float) -> bool:
        lo, hi = self.mb.interval
        return lo <= t <= hi

    def value(self, t):
        if not self._inside(t):
            return 1.0
        s = self.mb.lam * (t - self.mb.t_k)
        return math.sqrt(a_eps(s, self.eps, self.psi))

    def d1(self, t):
        if not self._inside(t):
            return 0.0
        lam = self.mb.lam
        s = lam * (t - self.mb.t_k)
        a = a_eps(s, self.eps, self.psi)
        return lam * a_eps_d1(s, self.eps, self.psi) / (2.0 * math.sqrt(a))

    def d2(self, t):
        if not self._inside(t):
            return 0.0
        lam = self.mb.lam
        s = lam * (t - self.mb.t_k)
        a = a_eps(s, self.eps, self.psi)
        a1 = a_eps_d1(s, self.eps, self.psi)
        a2 = a_eps_d2(s, self.eps, self.psi)
        return lam * lam * (a2 / (2.0 * math.sqrt(a)) - a1 * a1 / (4.0 * a**1.5))

    def values(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        lo, hi = self.mb.interval
        out = np.ones_like(ts)
        mask = (ts >= lo) & (ts <= hi)
        if np.any(mask):
            s = self.mb.lam * (ts[mask] - self.mb.t_k)
            out[mask] = np.sqrt(a_eps(s, self.eps, self.psi))
        return out

    def d1_values(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        lo, hi = self.mb.interval
        out = np.zeros_like(ts)
        mask = (ts >= lo) & (ts <= hi)
        if np.any(mask):
            lam = self.mb.lam
            s = lam * (ts[mask] - self.mb.t_k)
            a = a_eps(s, self.eps, self.psi)
            out[mask] = lam * a_eps_d1(s, self.eps, self.psi) / (2.0 * np.sqrt(a))
        return out

    def d2_values(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        lo, hi = self.mb.interval
        out = np.zeros_like(ts)
        mask = (ts >= lo) & (ts <= hi)
        if np.any(mask):
            lam = self.mb.lam
            s = lam * (ts[mask] - self.mb.t_k)
            a = a_eps(s, self.eps, self.psi)
            a1 = a_eps_d1(s, self.eps, self.psi)
            a2 = a_eps_d2(s, self.eps, self.psi)
            out[mask] = lam * lam * (a2 / (2.0 * np.sqrt(a)) - a1 * a1 / (4.0 * a**1.5))
        return out


def build_family(eps: float, P: int, p: int, nu: NuFunction, T: float, a0: int,
                 k_count: int, c1: float, psi_r: float = 2.0) -> CounterexampleFamily:
    """Construct the k_count-member family on Omega = (0, 2*pi), periodic,
    with constant integer potential a0 (mode lattice = positive integers).

    Frequencies target floor(nu(t_k)) = m_start + k - 1, so each member adds
    one whole unit of nu and the weighted energies grow monotonically.
    """
    if eps <= 0:
        raise CounterexampleError("eps must be positive")
    if int(p) != p or p < 2:
        raise CounterexampleError("p must be an integer >= 2 (whole-period count)")
    if int(P) != P or P < 0:
        raise CounterexampleError("P must be a nonnegative integer")
    if int(a0) != a0:
        raise CounterexampleError("a0 must be an integer (flux quantization)")
    if not nu.unbounded_at_origin:
        raise CounterexampleError("nu must be unbounded at the origin for the family")
    if not (2.0 ** (p - 1) * eps * math.pi > c1 + 1.0):
        raise CounterexampleError(
            f"need 2^(p-1) eps pi > c1 + 1, got {2.0**(p-1)*eps*math.pi:.4g} "
            f"vs {c1 + 1.0:.4g}"
        )
    if abs(T - nu.T) > 1e-12:
        raise CounterexampleError("family horizon must match nu.T")

    psi = calibrate_psi(psi_r)
    s_dense = np.linspace(0.0, TWO_PI, 100_001)
    a_dense = a_eps(s_dense, eps, psi)
    a_min, a_max = float(np.min(a_dense)), float(np.max(a_dense))
    if a_min <= 0:
        raise CounterexampleError(
            f"a_eps not positive (min {a_min:.4g}); decrease eps or widen the bump")

    nu_T = float(nu.value(T))
    m_start = max(1, math.floor(nu_T) + 1)
    members = []
    scale = 2.0**P
    for k in range(1, k_count + 1):
        m = m_start + k - 1
        # target time with nu = m, then the nearest admissible integer frequency
        lo = T
        while float(nu.value(lo)) < m:
            lo *= 0.5
            if lo < 1e-280:
                raise CounterexampleError("nu never reaches the target level")
        t_star = bisect_root(lambda t: m - float(nu.value(t)), lo, T, rtol=1e-13)
        lam = int(math.floor(scale * m / t_star)) + 1  # strictly above the target
        t_k = t_lambda(nu, float(lam), P)
        nu_k = float(nu.value(t_k))
        if math.floor(nu_k) != m:
            raise CounterexampleError(
                f"frequency rounding broke the floor target: nu(t_k)={nu_k!r}, m={m}")
        half_periods = (2 ** (p - 2)) * m  # exact integer arithmetic
        rho = 2.0 ** (p - P) * math.pi * t_k * m / nu_k
        left, right = t_k - 0.5 * rho, t_k + 0.5 * rho
        if left <= 0 or right > T:
            raise CounterexampleError(
                f"I_k escapes (0, T]: k={k}, interval=({left:.4g}, {right:.4g}); "
                f"the window fits only when 2^(p-P) pi floor(nu)/nu < 2, "
                f"i.e. P >= p + 2"
            )
        # defining relation of the separating time, relative 1e-10
        rel = abs(t_k * lam - scale * nu_k) / (scale * nu_k)
        if rel > 1e-10:
            raise CounterexampleError(f"separating-line residual {rel:.2e} too large")
        if abs(lam * rho / (4.0 * math.pi) - half_periods) > 1e-9 * half_periods:
            raise CounterexampleError("whole-period count inconsistent with rho")
        members.append(FamilyMember(k=k, m=m, half_periods=half_periods, lam=lam,
                                    t_k=t_k, rho_k=rho, nu_k=nu_k))

    for a, b in zip(members[:-1], members[1:]):
        if b.interval[1] >= a.interval[0]:
            raise CounterexampleError(
                f"oscillation windows overlap between k={a.k} and k={b.k}")

    return CounterexampleFamily(eps=eps, P=int(P), p=int(p), nu=nu, T=T,
                                a0=int(a0), c1=c1, psi=psi, members=members,
                                a_min=a_min, a_max=a_max)


# --- solving one member -----------------------------------------------------------


@dataclass
class MemberSolution:
    k: int
    lam: int
    half_periods: int
    r_plus: float  # one-period gain of dv/ds, forward
    r_minus: float  # one-period gain, backward
    period_residual: float  # |v| at the period end, should vanish
    ut_left: float  # |du/dt| at t_k - rho/2 (numeric)
    ut_right: float  # |du/dt| at t_k + rho/2 (numeric)
    ut_left_closed: float  # exp(-eps rho lam / 2)
    ut_right_closed: float
    rel_err_left: float
    rel_err_right: float
    t_side_rel_err: float  # t-variable integration vs the rescaled model
    E0_log: float  # log of the mode energy at t=0 (s=1)
    ET_log: float

    @property
    def E0(self) -> float:
        return math.exp(self.E0_log) if self.E0_log < 700 else math.inf

    @property
    def ET(self) -> float:
        return math.exp(self.ET_log) if self.ET_log < 700 else math.inf


def _period_maps(family: CounterexampleFamily, rtol: float = 1e-12):
    """One-period maps of v'' + a_eps v = 0 from (0, 1), both directions.

    The data (0, 1) spans the Floquet direction (the window solution starts
    at a zero), so the state returns to the same line after each period and
    long spans reduce to powers of the measured multiplier.  Direct
    multi-period backward integration would be exponentially ill-conditioned;
    the one-period map is benign in both directions.
    """
    if family._period_maps is not None:
        return family._period_maps
    q = lambda s: a_eps(s, family.eps, family.psi)
    _, us, vs = integrate_oscillator(q, 0.0, TWO_PI, 0.0, 1.0,
                                     rtol=rtol, atol=1e-14, collect=False)
    r_plus, resid_plus = float(np.real(vs[-1])), abs(complex(us[-1]))
    _, us, vs = integrate_oscillator(q, 0.0, -TWO_PI, 0.0, 1.0,
                                     rtol=rtol, atol=1e-14, collect=False)
    r_minus, resid_minus = float(np.real(vs[-1])), abs(complex(us[-1]))
    resid = max(resid_plus / abs(r_plus), resid_minus / abs(r_minus))
    family._period_maps = (r_plus, r_minus, resid)
    return family._period_maps


def solve_family_member(family: CounterexampleFamily, k: int,
                        rtol: float = 1e-12, cross_periods: int = 2,
                        tol: float = 1e-6) -> MemberSolution:
    """Endpoint data of the window problem u(t_k) = 0, u_t(t_k) = 1.

    In the rescaled variable the equation is v'' + a_eps(s) v = 0,
    frequency-free; whole-period spans are powers of the measured one-period
    multiplier, checked against the closed forms exp(-+ eps rho lam / 2).
    A short direct integration in t cross-checks the rescaling.
    """
    mb = family.member(k)
    eps = family.eps
    r_plus, r_minus, period_residual = _period_maps(family, rtol)
    mhp = mb.half_periods

    log_right = mhp * math.log(abs(r_plus))
    log_left = mhp * math.log(abs(r_minus))
    log_right_closed = eps * TWO_PI * mhp  # eps rho lam / 2
    log_left_closed = -log_right_closed

    rel_right = abs(math.expm1(log_right - log_right_closed))
    rel_left = abs(math.expm1(log_left - log_left_closed))
    if max(rel_right, rel_left) > tol:
        raise CounterexampleError(
            f"closed form vs numeric endpoint mismatch: {rel_right:.2e}/{rel_left:.2e}")

    # t-variable cross-check over a few periods of the actual coefficient
    prof = family.profile(k)
    t_hop = mb.t_k + cross_periods * TWO_PI / mb.lam
    from .modesolve import integrate_mode

    tr = integrate_mode(prof, float(mb.lam), mb.t_k, t_hop, (0.0, 1.0),
                        rtol=rtol, atol=1e-14, collect=False)
    fin = tr.final
    expect_ut = r_plus**cross_periods
    t_side = abs(fin.ut - expect_ut) / abs(expect_ut)

    # mode energy at s=1: u = 0 and b == 1 outside the window, so the energy
    # is conserved there and equals |u_t|^2 at the window edge
    return MemberSolution(
        k=k, lam=mb.lam, half_periods=mhp, r_plus=r_plus, r_minus=r_minus,
        period_residual=period_residual,
        ut_left=math.exp(log_left) if log_left > -700 else 0.0,
        ut_right=math.exp(log_right) if log_right < 700 else math.inf,
        ut_left_closed=math.exp(log_left_closed) if log_left_closed > -700 else 0.0,
        ut_right_closed=math.exp(log_right_closed) if log_right_closed < 700 else math.inf,
        rel_err_left=rel_left, rel_err_right=rel_right,
        t_side_rel_err=t_side,
        E0_log=2.0 * log_left, ET_log=2.0 * log_right,
    )


# --- blow-up table -----------------------------------------------------------------


@dataclass
class BlowupRow:
    k: int
    lam: int
    t_k: float
    rho_k: float
    nu_k: float
    E0: float
    ET: float
    E0_log: float
    ET_log: float
    weighted: float
    weighted_log: float

    def as_dict(self) -> dict:
        return {"k": self.k, "lambda_k": self.lam, "t_k": self.t_k,
                "rho_k": self.rho_k, "nu_k": self.nu_k, "E0": self.E0,
                "ET": self.ET, "weighted": self.weighted,
                "log_weighted": self.weighted_log}


@dataclass
class BlowupTable:
    rows: list
    c1: float
    monotone: bool
    min_slope: float  # d(log weighted)/d(nu), should be >= 2
    threshold: Optional[float] = None
    exceeds_threshold: Optional[bool] = None


def demonstrate_blowup(family: CounterexampleFamily, s: float = 1.0,
                       c1: Optional[float] = None,
                       threshold: Optional[float] = None,
                       rtol: float = 1e-12) -> BlowupTable:
    """Weighted energies exp(-2 c1 nu(t_k)) * E_s(T) per member, from the
    numerically measured multipliers (not the closed forms).

    Raises on a non-monotone weighted sequence, the signature of a
    mis-configured p/eps pair.
    """
    c1 = family.c1 if c1 is None else c1
    rows = []
    for mb in family.members:
        sol = solve_family_member(family, mb.k, rtol=rtol)
        shift = 2.0 * (s - 1.0) * math.log(mb.lam)
        e0_log = sol.E0_log + shift
        et_log = sol.ET_log + shift
        w_log = -2.0 * c1 * mb.nu_k + et_log
        rows.append(BlowupRow(
            k=mb.k, lam=mb.lam, t_k=mb.t_k, rho_k=mb.rho_k, nu_k=mb.nu_k,
            E0=math.exp(e0_log) if abs(e0_log) < 700 else (0.0 if e0_log < 0 else math.inf),
            ET=math.exp(et_log) if abs(et_log) < 700 else (0.0 if et_log < 0 else math.inf),
            E0_log=e0_log, ET_log=et_log,
            weighted=math.exp(w_log) if abs(w_log) < 700 else (0.0 if w_log < 0 else math.inf),
            weighted_log=w_log,
        ))

    diffs = [(b.weighted_log - a.weighted_log, b.nu_k - a.nu_k)
             for a, b in zip(rows[:-1], rows[1:])]
    monotone = all(d > 0 for d, _ in diffs)
    if not monotone:
        raise CounterexampleError(
            "weighted energies not strictly increasing; p/eps mis-configured "
            f"(need 2^(p-1) eps pi > c1 + 1 with margin, c1={c1})"
        )
    min_slope = min(d / dn for d, dn in diffs) if diffs else math.inf
    table = BlowupTable(rows=rows, c1=c1, monotone=monotone, min_slope=min_slope,
                        threshold=threshold)
    if threshold is not None:
        table.exceeds_threshold = rows[-1].weighted_log > math.log(threshold)
    return table
