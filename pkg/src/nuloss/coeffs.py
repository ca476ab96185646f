"""Time coefficient b(t), oscillation scale nu(t), and derived quantities.

nu is positive and strictly decreasing on (0, T]; mu(t) = t/nu(t) is its
increasing companion.  The separating time t_lambda solves
t*lambda = 2^P nu(t) and anchors the loss weight exp(c1 nu(t_lambda)).
Admissibility of b is checked numerically: bounds above/below, and
|b^(k)| <= C3 (nu/t)^k for k = 1, 2 on geometric sample grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import exprlang

T_FLOOR = 1e-300  # keeps log(1/t) chains out of underflow

LOSS_NONE = "none"
LOSS_FINITE = "finite"
LOSS_ARBITRARILY_SMALL = "arbitrarily_small"
LOSS_INFINITE = "infinite"


class CoeffsError(ValueError):
    pass


# --- nu catalog --------------------------------------------------------------


@dataclass(frozen=True)
class NuFunction:
    """Oscillation scale on (0, T]: positive, strictly decreasing (or constant)."""

    kind: str  # constant | log | log_power | iterated_log | custom
    T: float
    constant: float = 1.0
    gamma: float = 1.0
    gammas: tuple = ()
    expr: Optional[exprlang.Expr] = None

    def value(self, t):
        t = np.maximum(np.asarray(t, dtype=float), T_FLOOR)
        if self.kind == "constant":
            return np.full_like(t, self.constant) if t.ndim else self.constant
        if self.kind == "log":
            return np.log(1.0 / t)
        if self.kind == "log_power":
            return np.log(1.0 / t) ** self.gamma
        if self.kind == "iterated_log":
            y = np.log(1.0 / t)
            out = np.array(y, copy=True)
            for g in self.gammas:
                y = np.log(y)
                out = out * y**g
            return out
        # custom expression in t
        fn = self._fn  # type: ignore[attr-defined]
        if np.ndim(t) == 0:
            return fn(float(t))
        return np.array([fn(x) for x in np.atleast_1d(t)])

    __call__ = value

    @property
    def unbounded_at_origin(self) -> bool:
        return self.kind in ("log", "log_power", "iterated_log")


def _validate_nu(nu: NuFunction) -> None:
    # dyadic sample grid down to T * 2^-40
    ts = nu.T * 2.0 ** (-np.arange(0, 321) / 8.0)
    vals = np.asarray(nu.value(ts), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise CoeffsError(f"nu ({nu.kind}) must be positive on (0, T]")
    if nu.kind != "constant":
        # ts is decreasing, so values must be increasing toward t -> 0
        if np.any(np.diff(vals) <= 0):
            raise CoeffsError(f"nu ({nu.kind}) must be strictly decreasing in t")


def nu_constant(c: float = 1.0, T: float = 1.0) -> NuFunction:
    if c <= 0:
        raise CoeffsError("constant nu must be positive")
    nu = NuFunction(kind="constant", T=T, constant=c)
    _validate_nu(nu)
    return nu


def nu_log(T: float = 0.9) -> NuFunction:
    if not (0 < T < 1):
        raise CoeffsError("log scale needs T < 1 for positivity")
    nu = NuFunction(kind="log", T=T)
    _validate_nu(nu)
    return nu


def nu_log_power(gamma: float, T: float = 0.9) -> NuFunction:
    if not (0 < gamma < 1):
        raise CoeffsError("log_power exponent must lie in (0, 1)")
    if not (0 < T < 1):
        raise CoeffsError("log_power scale needs T < 1")
    nu = NuFunction(kind="log_power", T=T, gamma=gamma)
    _validate_nu(nu)
    return nu


def nu_iterated_log(gammas: Sequence[float] = (1.0,), T: float = 0.3) -> NuFunction:
    gammas = tuple(float(g) for g in gammas)
    if not gammas or any(not (0 < g <= 1) for g in gammas):
        raise CoeffsError("iterated_log exponents must lie in (0, 1]")
    if not (0 < T < 1 / math.e):
        raise CoeffsError("iterated_log needs T < 1/e so log(1/t) > 1")
    nu = NuFunction(kind="iterated_log", T=T, gammas=gammas)
    _validate_nu(nu)
    return nu


def nu_custom(expr, T: float) -> NuFunction:
    if isinstance(expr, str):
        expr = exprlang.parse(expr)
    extra = exprlang.free_vars(expr) - {"t"}
    if extra:
        raise CoeffsError(f"custom nu may only use t, found {sorted(extra)}")
    nu = NuFunction(kind="custom", T=T, expr=expr)
    object.__setattr__(nu, "_fn", exprlang.compile1(expr, "t"))
    _validate_nu(nu)
    return nu


def nu_from_tag(tag, T: float) -> NuFunction:
    """Build from the JSON catalog tag, e.g. {"kind": "log_power", "gamma": 0.5}."""
    if isinstance(tag, str):
        return nu_custom(tag, T)
    kind = tag.get("kind")
    if kind == "constant":
        return nu_constant(tag.get("c", 1.0), T)
    if kind == "log":
        return nu_log(T)
    if kind == "log_power":
        return nu_log_power(tag["gamma"], T)
    if kind == "iterated_log":
        return nu_iterated_log(tuple(tag.get("gammas", (1.0,))), T)
    if kind == "custom":
        return nu_custom(tag["expr"], T)
    raise CoeffsError(f"unknown nu kind {kind!r}")


def classify_loss(nu: NuFunction) -> str:
    """Loss class of the regularity weight induced by nu."""
    if nu.kind == "constant":
        return LOSS_NONE
    if nu.kind == "log":
        return LOSS_FINITE
    if nu.kind == "log_power":
        return LOSS_ARBITRARILY_SMALL
    if nu.kind == "iterated_log":
        return LOSS_INFINITE
    raise CoeffsError("custom nu cannot be classified; use a catalog kind")


# --- time coefficient --------------------------------------------------------


class TimeCoefficient:
    """b(t) with two derivatives.  Implementations must be pure."""

    def value(self, t: float) -> float:
        raise NotImplementedError

    def d1(self, t: float) -> float:
        raise NotImplementedError

    def d2(self, t: float) -> float:
        raise NotImplementedError

    def values(self, ts) -> np.ndarray:
        return np.array([self.value(float(t)) for t in np.atleast_1d(ts)])

    def d1_values(self, ts) -> np.ndarray:
        return np.array([self.d1(float(t)) for t in np.atleast_1d(ts)])

    def d2_values(self, ts) -> np.ndarray:
        return np.array([self.d2(float(t)) for t in np.atleast_1d(ts)])


class ExprCoefficient(TimeCoefficient):
    def __init__(self, expr):
        if isinstance(expr, str):
            expr = exprlang.parse(expr)
        extra = exprlang.free_vars(expr) - {"t"}
        if extra:
            raise CoeffsError(f"b may only use variable t, found {sorted(extra)}")
        self.expr = expr
        d1 = exprlang.differentiate(expr, "t")
        d2 = exprlang.differentiate(d1, "t")
        self._f = exprlang.compile1(expr, "t")
        self._f1 = exprlang.compile1(d1, "t")
        self._f2 = exprlang.compile1(d2, "t")
        self._vf = exprlang.compile_np(expr, "t")
        self._vf1 = exprlang.compile_np(d1, "t")
        self._vf2 = exprlang.compile_np(d2, "t")

    def value(self, t):
        return self._f(t)

    def d1(self, t):
        return self._f1(t)

    def d2(self, t):
        return self._f2(t)

    def values(self, ts):
        return np.asarray(self._vf(np.asarray(ts, dtype=float)))

    def d1_values(self, ts):
        return np.asarray(self._vf1(np.asarray(ts, dtype=float)))

    def d2_values(self, ts):
        return np.asarray(self._vf2(np.asarray(ts, dtype=float)))


class ConstantCoefficient(TimeCoefficient):
    def __init__(self, c: float):
        self.c = float(c)

    def value(self, t):
        return self.c

    def d1(self, t):
        return 0.0

    def d2(self, t):
        return 0.0

    def values(self, ts):
        return np.full(np.shape(np.atleast_1d(ts)), self.c)

    def d1_values(self, ts):
        return np.zeros(np.shape(np.atleast_1d(ts)))

    def d2_values(self, ts):
        return np.zeros(np.shape(np.atleast_1d(ts)))


@dataclass(frozen=True)
class CoefficientProfile:
    b: TimeCoefficient
    nu: NuFunction
    T: float
    label: str = ""
    # verified constants, filled in by verify_assumptions via with_constants
    c1: Optional[float] = None
    c2: Optional[float] = None
    c3: Optional[float] = None

    def b_value(self, t: float) -> float:
        return self.b.value(t)

    def with_constants(self, report: "AssumptionReport") -> "CoefficientProfile":
        import dataclasses

        return dataclasses.replace(self, c1=report.c1, c2=report.c2, c3=report.c3)


def profile_from_expr(b_src, nu: NuFunction, label: str = "") -> CoefficientProfile:
    return CoefficientProfile(b=ExprCoefficient(b_src), nu=nu, T=nu.T, label=label)


def catalog_profile(kind: str, **kwargs) -> CoefficientProfile:
    """Matched (b, nu) pairs: b = 2 + sin(S(t)) with S an antiderivative of
    nu/t, so |b'| = |cos(S)| nu/t saturates the admissible derivative bound.
    """
    if kind == "constant":
        T = kwargs.get("T", 1.0)
        return CoefficientProfile(b=ConstantCoefficient(1.0), nu=nu_constant(1.0, T),
                                  T=T, label="b=1, nu=1")
    if kind == "log":
        T = kwargs.get("T", 0.9)
        return profile_from_expr("2+sin(log(1/t))", nu_log(T), label="log")
    if kind == "log_power":
        g = kwargs.get("gamma", 0.5)
        T = kwargs.get("T", 0.9)
        gp1 = g + 1.0
        src = f"2+sin((log(1/t))^{gp1!r}/{gp1!r})"
        return profile_from_expr(src, nu_log_power(g, T), label=f"log_power({g})")
    if kind == "iterated_log":
        # gamma_2 = 1: S = y^2 (2 log y - 1)/4 with y = log(1/t) has S' = -nu/t
        T = kwargs.get("T", 0.3)
        src = "2+sin((log(1/t))^2*(2*log(log(1/t))-1)/4)"
        return profile_from_expr(src, nu_iterated_log((1.0,), T), label="iterated_log")
    raise CoeffsError(f"unknown catalog kind {kind!r}")


# --- derived quantities -------------------------------------------------------


def bisect_root(g: Callable[[float], float], lo: float, hi: float,
                rtol: float = 1e-12, max_iter: int = 200) -> float:
    """Root of increasing g with g(lo) <= 0 <= g(hi)."""
    glo, ghi = g(lo), g(hi)
    if glo > 0 or ghi < 0:
        raise CoeffsError(f"bisection bracket invalid: g({lo})={glo}, g({hi})={ghi}")
    if glo == 0.0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * max(abs(mid), 1.0):
            return mid
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def mu(profile_or_nu, t: float) -> float:
    nu = profile_or_nu.nu if isinstance(profile_or_nu, CoefficientProfile) else profile_or_nu
    if not (0 < t <= nu.T * (1 + 1e-12)):
        raise CoeffsError(f"t={t} outside (0, T={nu.T}]")
    return t / float(nu.value(t))


def mu_inverse(profile_or_nu, y: float) -> float:
    """t with mu(t) = y, to 1e-12 relative, by bisection on the monotone mu."""
    nu = profile_or_nu.nu if isinstance(profile_or_nu, CoefficientProfile) else profile_or_nu
    top = mu(nu, nu.T)
    if not (0 < y <= top * (1 + 1e-12)):
        raise CoeffsError(f"mu_inverse argument {y} outside (0, mu(T)={top}]")
    lo = nu.T
    while mu(nu, lo) > y and lo > T_FLOOR:
        lo *= 0.5
    return bisect_root(lambda t: mu(nu, t) - y, lo, nu.T, rtol=1e-13)


def t_lambda(profile_or_nu, lam: float, P: int) -> float:
    """Separating time: the unique root of t*lam = 2^P nu(t) in (0, T]."""
    nu = profile_or_nu.nu if isinstance(profile_or_nu, CoefficientProfile) else profile_or_nu
    scale = 2.0**P

    def g(t):
        return t * lam - scale * float(nu.value(t))

    if g(nu.T) < 0:
        raise CoeffsError(
            f"separating time outside (0, T]: need lam >= 2^P nu(T)/T = "
            f"{scale * float(nu.value(nu.T)) / nu.T}, got {lam}"
        )
    lo = nu.T
    while g(lo) > 0 and lo > T_FLOOR:
        lo *= 0.5
    return bisect_root(g, lo, nu.T, rtol=1e-13)


def loss_weight(profile_or_nu, lam: float, P: int, c1: float) -> float:
    nu = profile_or_nu.nu if isinstance(profile_or_nu, CoefficientProfile) else profile_or_nu
    tl = t_lambda(nu, lam, P)
    return math.exp(c1 * float(nu.value(tl)))


# --- assumption verification ---------------------------------------------------


@dataclass
class AssumptionReport:
    c1: float
    c2: float
    c3: float
    c4: float
    bounds_pass: bool
    derivative_pass: bool
    worst_t_bounds: float
    worst_t_derivative: float
    c3_k1: float = 0.0
    c3_k2: float = 0.0
    octave_sups: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.bounds_pass and self.derivative_pass

    def as_dict(self) -> dict:
        return {
            "C1": self.c1, "C2": self.c2, "C3": self.c3, "C4": self.c4,
            "bounds_pass": self.bounds_pass, "derivative_pass": self.derivative_pass,
            "worst_t_bounds": self.worst_t_bounds,
            "worst_t_derivative": self.worst_t_derivative,
        }


def unbounded_tail(octave_sups: Sequence[float], growth: float = 1.01) -> bool:
    """Running supremum growing by >1% across three successive octave
    refinements signals an unbounded ratio."""
    running = []
    cur = -math.inf
    for s in octave_sups:
        cur = max(cur, s)
        running.append(cur)
    if len(running) < 4:
        return False
    r = running[-4:]
    return all(r[i + 1] > growth * r[i] > 0 for i in range(3))


def verify_assumptions(profile: CoefficientProfile, grid_size: int = 120,
                       extra_times: Optional[np.ndarray] = None) -> AssumptionReport:
    """Estimate the admissibility constants on t_j = T 2^(-j/8), j=0..grid_size.

    Bounds: 0 < C1 <= b <= C2.  Derivatives: |b^(k)| <= C3 (nu/t)^k, k=1,2.
    A ratio whose running supremum keeps growing across the three deepest
    octaves is reported as unbounded (fail).
    """
    T = profile.T
    ts = T * 2.0 ** (-np.arange(0, grid_size + 1) / 8.0)
    if extra_times is not None:
        extra = np.asarray(extra_times, dtype=float)
        extra = extra[(extra > 0) & (extra <= T)]
        ts = np.concatenate([ts, extra])
    order = np.argsort(-ts)  # descending, octave structure preserved for dyadic part
    ts = ts[order]

    b = profile.b
    bvals = np.array([b.value(float(t)) for t in ts])
    d1 = np.array([b.d1(float(t)) for t in ts])
    d2 = np.array([b.d2(float(t)) for t in ts])
    nuvals = np.asarray(profile.nu.value(ts), dtype=float)
    rate = nuvals / ts

    ratio1 = np.abs(d1) / rate
    ratio2 = np.abs(d2) / rate**2
    ratio = np.maximum(ratio1, ratio2)

    c1 = float(np.min(bvals))
    c2 = float(np.max(bvals))
    c3 = float(np.max(ratio))
    c4 = float(np.min(nuvals))

    # octave-wise suprema on the dyadic grid only
    n_oct = (grid_size + 1) // 8
    dyadic = T * 2.0 ** (-np.arange(0, grid_size + 1) / 8.0)
    dy_ratio = []
    dy_b = []
    for o in range(n_oct):
        sel = slice(8 * o, 8 * (o + 1))
        tt = dyadic[sel]
        bb = np.array([b.value(float(t)) for t in tt])
        dd1 = np.array([b.d1(float(t)) for t in tt])
        dd2 = np.array([b.d2(float(t)) for t in tt])
        nn = np.asarray(profile.nu.value(tt), dtype=float)
        rr = nn / tt
        dy_ratio.append(float(np.max(np.maximum(np.abs(dd1) / rr, np.abs(dd2) / rr**2))))
        dy_b.append(float(np.max(np.abs(bb))))

    derivative_pass = c1 > 0 and not unbounded_tail(dy_ratio)
    bounds_pass = c1 > 0 and not unbounded_tail(dy_b)

    return AssumptionReport(
        c1=c1, c2=c2, c3=c3, c4=c4,
        bounds_pass=bounds_pass, derivative_pass=derivative_pass,
        worst_t_bounds=float(ts[int(np.argmax(bvals))]),
        worst_t_derivative=float(ts[int(np.argmax(ratio))]),
        c3_k1=float(np.max(ratio1)), c3_k2=float(np.max(ratio2)),
        octave_sups=dy_ratio,
    )
