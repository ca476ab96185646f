"""Extended-phase-space decomposition, micro-energies, and a numerical
estimator for weighted symbol classes.

The (t, lam) half-strip splits into a low-frequency band lam <= M and, above
M, two regions separated by the curve t*lam = 2^P nu(t): the
pseudodifferential side (t lam < 2^P nu) and the p-evolution side
(t lam >= 2^P nu).  The boundary belongs to the p-evolution side so the WKB
solver owns its own starting line.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .coeffs import CoefficientProfile, NuFunction


class ZoneError(ValueError):
    pass


@dataclass(frozen=True)
class ZoneParams:
    M: float
    P: int

    def __post_init__(self):
        if self.M <= 0:
            raise ZoneError("M must be positive")
        if self.P < 0 or int(self.P) != self.P:
            raise ZoneError("P must be a nonnegative integer")

    @property
    def scale(self) -> float:
        return 2.0**self.P


class ZoneKind(enum.Enum):
    LOW = "low"
    PD = "pd"
    PE = "pe"


def classify(t: float, lam: float, params: ZoneParams, nu: NuFunction) -> ZoneKind:
    if lam <= params.M:
        return ZoneKind.LOW
    if t * lam < params.scale * float(nu.value(max(t, 1e-300))):
        return ZoneKind.PD
    return ZoneKind.PE


@dataclass(frozen=True)
class MicroEnergy:
    """Zone-weighted 2-vector V = (V1, V2) with V2 = D_t u = -i du/dt."""

    v: tuple
    zone: ZoneKind

    @property
    def magnitude(self) -> float:
        return math.hypot(abs(self.v[0]), abs(self.v[1]))


def micro_energy(t: float, lam: float, u: complex, ut: complex,
                 zone: ZoneKind, b: float = 1.0) -> MicroEnergy:
    dtu = -1j * ut
    if zone is ZoneKind.LOW:
        return MicroEnergy(v=(complex(u), dtu), zone=zone)
    if zone is ZoneKind.PD:
        return MicroEnergy(v=(lam * u, dtu), zone=zone)
    return MicroEnergy(v=(lam * b * u, dtu), zone=zone)


# --- symbol class estimator -----------------------------------------------------


@dataclass
class SymbolClassReport:
    m1: float
    m2: float
    constants: dict  # (k, alpha) -> fitted C
    history: list  # per refinement level: max constant
    passed: bool

    def constant(self) -> float:
        return max(self.constants.values())


def _pe_grid(profile: CoefficientProfile, params: ZoneParams,
             lam_range: tuple, n_t: int, n_lam: int,
             t_margin: float, lam_margin: float):
    """Grid strictly inside the p-evolution region, FD stencils included."""
    from .coeffs import CoeffsError, t_lambda

    lams = np.geomspace(lam_range[0], lam_range[1], n_lam)
    pts = []
    for lam in lams:
        try:
            tl = t_lambda(profile.nu, lam, params.P)
        except CoeffsError:
            continue  # no p-evolution region for this frequency
        lo = tl * 1.05
        hi = profile.T * 0.98
        if lo >= hi:
            continue
        for t in np.geomspace(lo, hi, n_t):
            # keep the whole finite-difference stencil inside the zone
            tm = t * (1 - 2 * t_margin)
            lm = lam * (1 - 2 * lam_margin) if lam * lam_margin >= 1 else lam - 2.0
            if tm * lm < params.scale * float(profile.nu.value(tm)):
                continue
            pts.append((t, lam))
    if not pts:
        raise ZoneError("empty p-evolution grid; widen lam_range or raise T")
    return pts


def symbol_class_estimate(a: Callable[[float, float], complex], m1: float, m2: float,
                          kmax: int, amax: int, profile: CoefficientProfile,
                          params: ZoneParams, lam_range: tuple = (2.0**8, 2.0**12),
                          n_t: int = 6, n_lam: int = 4,
                          refinements: int = 4) -> SymbolClassReport:
    """Fit the constants C_{k,alpha} bounding |D_t^k D_lam^alpha a| by
    lam^(m1 - alpha) (nu/t)^(m2 + k) over the p-evolution region.

    Derivatives are central finite differences with relative steps
    h_t = t*1e-4 and h_lam = max(1, lam*1e-4).  The fit fails only when the
    running supremum keeps growing by more than 1% across three successive
    grid refinements, the same rule the assumption checks use.
    """
    rel_t = 1e-4
    rel_lam = 1e-4
    nu = profile.nu

    def deriv(t, lam, k, alpha):
        ht = t * rel_t
        hl = max(1.0, lam * rel_lam)
        t_off = {0: (0.0,), 1: (-ht, ht), 2: (-ht, 0.0, ht)}[k]
        t_w = {0: (1.0,), 1: (-0.5 / ht, 0.5 / ht),
               2: (1.0 / ht**2, -2.0 / ht**2, 1.0 / ht**2)}[k]
        l_off = {0: (0.0,), 1: (-hl, hl), 2: (-hl, 0.0, hl)}[alpha]
        l_w = {0: (1.0,), 1: (-0.5 / hl, 0.5 / hl),
               2: (1.0 / hl**2, -2.0 / hl**2, 1.0 / hl**2)}[alpha]
        acc = 0.0 + 0.0j
        for dt_, wt_ in zip(t_off, t_w):
            for dl_, wl_ in zip(l_off, l_w):
                acc += wt_ * wl_ * a(t + dt_, lam + dl_)
        return acc

    history = []
    constants = {}
    for level in range(refinements):
        f = 2**level
        pts = _pe_grid(profile, params, lam_range, n_t * f, n_lam * f,
                       2 * rel_t, 2 * rel_lam)
        level_consts = {}
        for k in range(kmax + 1):
            for alpha in range(amax + 1):
                best = 0.0
                for (t, lam) in pts:
                    scale = lam ** (m1 - alpha) * (float(nu.value(t)) / t) ** (m2 + k)
                    val = abs(deriv(t, lam, k, alpha)) / scale
                    if val > best:
                        best = val
                level_consts[(k, alpha)] = best
        constants = level_consts
        history.append(max(level_consts.values()))

    from .coeffs import unbounded_tail

    passed = not unbounded_tail(history)
    return SymbolClassReport(m1=m1, m2=m2, constants=constants,
                             history=history, passed=passed)


@dataclass
class IntegralBoundRow:
    lam: float
    t_sep: float
    integral: float
    nu_at_sep: float
    constant: float


def integral_bound_check(a: Callable[[float, float], float], lams: Sequence[float],
                         profile: CoefficientProfile, params: ZoneParams,
                         t_end: Optional[float] = None,
                         anchor: Optional[float] = None) -> list[IntegralBoundRow]:
    """|int_{t_sep}^{t_end} a(tau, lam) dtau| against nu(t_sep).

    Reports the smallest workable constant per frequency; ``anchor`` fixes the
    lower limit instead of the per-frequency separating time.
    """
    from scipy.integrate import quad

    from .coeffs import t_lambda

    rows = []
    for lam in lams:
        tl = t_lambda(profile.nu, lam, params.P)
        lo = anchor if anchor is not None else tl
        hi = t_end if t_end is not None else profile.T
        val, _err = quad(lambda tau: a(tau, lam), lo, hi, limit=400)
        nu_sep = float(profile.nu.value(tl))
        rows.append(IntegralBoundRow(lam=float(lam), t_sep=tl, integral=abs(val),
                                     nu_at_sep=nu_sep, constant=abs(val) / nu_sep))
    return rows


def zone_map(profile: CoefficientProfile, params: ZoneParams,
             t_grid: np.ndarray, lam_grid: np.ndarray):
    """(t, lam, zone) triples for plotting."""
    out = []
    for lam in lam_grid:
        for t in t_grid:
            out.append((float(t), float(lam),
                        classify(float(t), float(lam), params, profile.nu).value))
    return out
