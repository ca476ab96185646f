"""Single-mode solvers for D_t^2 u - lam^2 b^2(t) u = 0.

Three routes, cross-validated against each other:

* ``integrate_mode``    adaptive embedded Runge-Kutta 5(4) on u'' = -lam^2 b^2 u
* ``matrizant``         time-ordered iterated-integral series for first-order
                        systems D_t V = A(t) V, with a certified factorial
                        tail bound on the truncation
* ``wkb_propagate``     two-step diagonalization: mixer M, phase diagonal,
                        normal-form corrector N_1 = I + N^(1), then the
                        residual system solved by a short matrizant

Convention: D_t = -i d/dt, so fundamental solutions satisfy dE/dt = i A E
and the series carries i^k factors.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._quadrature import CumulativeGL, integration_matrix, panel_nodes
from .coeffs import CoefficientProfile, t_lambda

LAMBDA_PHASE_GUARD = 2.0**20  # beyond this, double-precision phases degrade


class SolverError(RuntimeError):
    pass


# --- mode state / trajectory -------------------------------------------------


@dataclass(frozen=True)
class ModeState:
    """(u, du/dt) of one spectral mode at time t.  D_t u = -i du/dt."""

    t: float
    u: complex
    ut: complex
    lam: float

    @property
    def dt_u(self) -> complex:
        return -1j * self.ut


@dataclass
class Trajectory:
    lam: float
    ts: np.ndarray
    us: np.ndarray
    uts: np.ndarray

    def state(self, i: int) -> ModeState:
        return ModeState(t=float(self.ts[i]), u=complex(self.us[i]),
                         ut=complex(self.uts[i]), lam=self.lam)

    @property
    def final(self) -> ModeState:
        return self.state(len(self.ts) - 1)

    def wronskian_drift(self) -> float:
        """Max relative drift of Im(conj(u) u'), conserved for real b."""
        w = np.imag(np.conj(self.us) * self.uts)
        scale = np.max(np.abs(self.us) * np.abs(self.uts)) + 1e-300
        return float((np.max(w) - np.min(w)) / scale)


# Dormand-Prince 5(4) tableau
_DP_C = (0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
_DP_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
         -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


def integrate_oscillator(q: Callable[[float], float], t0: float, t1: float,
                         u0: complex, v0: complex, rtol: float = 1e-10,
                         atol: float = 1e-12, h0: Optional[float] = None,
                         max_steps: int = 5_000_000, collect: bool = True):
    """Adaptive RK5(4) for u'' = -q(t) u, either time direction.

    Returns (ts, us, vs) arrays of accepted steps (endpoints included).
    """
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    if span == 0.0:
        return np.array([t0]), np.array([u0], dtype=complex), np.array([v0], dtype=complex)
    if h0 is None:
        q0 = abs(q(t0))
        h0 = 0.1 / math.sqrt(q0) if q0 > 0 else span / 100.0
    h = direction * min(abs(h0), span)

    t, u, v = t0, complex(u0), complex(v0)
    ts, us, vs = [t], [u], [v]
    f_u, f_v = v, -q(t) * u  # FSAL cache
    steps = 0
    uround = np.finfo(float).eps

    while (t1 - t) * direction > 0:
        if abs(h) < 32 * uround * max(abs(t), abs(t1)):
            raise SolverError(f"step underflow at t={t!r} (h={h!r})")
        if steps > max_steps:
            raise SolverError(f"tolerance failure: {max_steps} steps exceeded at t={t!r}")
        steps += 1
        if (t + h - t1) * direction > 0:
            h = t1 - t

        k1u, k1v = f_u, f_v
        yu = u + h * (_DP_A[0][0] * k1u)
        yv = v + h * (_DP_A[0][0] * k1v)
        k2u, k2v = yv, -q(t + _DP_C[0] * h) * yu
        a = _DP_A[1]
        yu = u + h * (a[0] * k1u + a[1] * k2u)
        yv = v + h * (a[0] * k1v + a[1] * k2v)
        k3u, k3v = yv, -q(t + _DP_C[1] * h) * yu
        a = _DP_A[2]
        yu = u + h * (a[0] * k1u + a[1] * k2u + a[2] * k3u)
        yv = v + h * (a[0] * k1v + a[1] * k2v + a[2] * k3v)
        k4u, k4v = yv, -q(t + _DP_C[2] * h) * yu
        a = _DP_A[3]
        yu = u + h * (a[0] * k1u + a[1] * k2u + a[2] * k3u + a[3] * k4u)
        yv = v + h * (a[0] * k1v + a[1] * k2v + a[2] * k3v + a[3] * k4v)
        k5u, k5v = yv, -q(t + _DP_C[3] * h) * yu
        a = _DP_A[4]
        yu = u + h * (a[0] * k1u + a[1] * k2u + a[2] * k3u + a[3] * k4u + a[4] * k5u)
        yv = v + h * (a[0] * k1v + a[1] * k2v + a[2] * k3v + a[3] * k4v + a[4] * k5v)
        k6u, k6v = yv, -q(t + h) * yu
        b = _DP_A[5]
        u5 = u + h * (b[0] * k1u + b[2] * k3u + b[3] * k4u + b[4] * k5u + b[5] * k6u)
        v5 = v + h * (b[0] * k1v + b[2] * k3v + b[3] * k4v + b[4] * k5v + b[5] * k6v)
        k7u, k7v = v5, -q(t + h) * u5

        e = _DP_E
        err_u = h * (e[0] * k1u + e[2] * k3u + e[3] * k4u + e[4] * k5u + e[5] * k6u + e[6] * k7u)
        err_v = h * (e[0] * k1v + e[2] * k3v + e[3] * k4v + e[4] * k5v + e[5] * k6v + e[6] * k7v)
        sc_u = atol + rtol * max(abs(u), abs(u5))
        sc_v = atol + rtol * max(abs(v), abs(v5))
        err = math.sqrt(0.5 * ((abs(err_u) / sc_u) ** 2 + (abs(err_v) / sc_v) ** 2))

        if err <= 1.0:
            t += h
            u, v = u5, v5
            f_u, f_v = k7u, k7v
            if collect:
                ts.append(t)
                us.append(u)
                vs.append(v)
        factor = 0.9 * (err ** -0.2) if err > 0 else 5.0
        h *= min(5.0, max(0.2, factor))

    if not collect:
        ts, us, vs = [t0, t], [u0, u], [v0, v]
    return np.asarray(ts), np.asarray(us, dtype=complex), np.asarray(vs, dtype=complex)


def integrate_mode(profile: CoefficientProfile, lam: float, t0: float, t1: float,
                   init, rtol: float = 1e-10, atol: float = 1e-12,
                   h0: Optional[float] = None, collect: bool = True,
                   max_steps: int = 5_000_000) -> Trajectory:
    """Evolve one mode of the equation through [t0, t1] (either direction)."""
    if isinstance(init, ModeState):
        u0, v0 = init.u, init.ut
    else:
        u0, v0 = init
    bfun = profile.b.value

    def q(t):
        bb = bfun(t)
        return lam * lam * bb * bb

    if h0 is None:
        h0 = 0.1 / (lam * max(abs(bfun(t0)), 1.0))
    ts, us, vs = integrate_oscillator(q, t0, t1, u0, v0, rtol=rtol, atol=atol,
                                      h0=h0, collect=collect, max_steps=max_steps)
    return Trajectory(lam=lam, ts=ts, us=us, uts=vs)


# --- matrizant (time-ordered series) ------------------------------------------


@dataclass
class FundamentalSolution:
    """E(t, s, lam): 2x2 propagator of a first-order mode system."""

    matrix: np.ndarray
    s: float
    t: float
    lam: float
    method: str  # matrizant | wkb | integrator
    remainder: float = 0.0
    sample_ts: Optional[np.ndarray] = None
    sample_matrices: Optional[np.ndarray] = None

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def _op_norms(mats: np.ndarray) -> np.ndarray:
    return np.linalg.norm(mats, ord=2, axis=(1, 2))


def _cumulative_nodes(gvals: np.ndarray, breaks: np.ndarray, n: int):
    """Cumulative integral of panelwise GL-sampled (n,2,2) data.

    Returns (values at the GL nodes, value at the right endpoint); GL nodes
    exclude the endpoints, so the final value needs the full prefix sum.
    """
    S = integration_matrix(n)
    halves = np.diff(breaks) / 2.0
    g = gvals.reshape(len(breaks) - 1, n, 2, 2)
    in_panel = np.einsum("ij,pjab->piab", S, g) * halves[:, None, None, None]
    _, w = np.polynomial.legendre.leggauss(n)
    full = np.einsum("j,pjab->pab", w, g) * halves[:, None, None]
    prefix = np.concatenate([np.zeros((1, 2, 2), dtype=complex), np.cumsum(full, axis=0)])
    return (in_panel + prefix[:-1, None, :, :]).reshape(-1, 2, 2), prefix[-1]


def _series_tail(J: float, K: int) -> float:
    """sum_{k>K} J^k/k! <= J^(K+1)/(K+1)! * e^J, the factorial tail bound."""
    try:
        return J ** (K + 1) / math.factorial(K + 1) * math.exp(J)
    except OverflowError:
        return math.inf


def _matrizant_segment(A, a: float, b: float, K: int, tol: float,
                       breaks: Optional[np.ndarray], nodes_per_panel: int):
    if breaks is None:
        breaks = np.linspace(a, b, 33)
    n = nodes_per_panel
    nodes, weights = panel_nodes(breaks, n)
    Avals = np.asarray(A(nodes))
    J = float(np.sum(weights * _op_norms(Avals)))

    eye = np.broadcast_to(np.eye(2, dtype=complex), (len(nodes), 2, 2)).copy()
    term = eye.copy()
    total = eye.copy()
    E_end = np.eye(2, dtype=complex)
    terms_used = 0
    for k in range(1, K + 1):
        integrand = np.einsum("nab,nbc->nac", Avals, term)
        term, term_end = _cumulative_nodes(integrand, breaks, n)
        term = 1j * term
        total = total + term
        E_end = E_end + 1j * term_end
        terms_used = k
        tnorm = max(float(np.max(_op_norms(term))), float(np.linalg.norm(term_end, 2)))
        if tnorm < tol:
            break
    remainder = _series_tail(J, terms_used)
    return nodes, total, E_end, J, terms_used, remainder


def matrizant(A, s: float, t: float, lam: float = 0.0, K: int = 30,
              tol: float = 1e-13, breaks: Optional[np.ndarray] = None,
              nodes_per_panel: int = 8, keep_nodes: bool = False,
              max_segment_growth: float = 8.0, strict: bool = True) -> FundamentalSolution:
    """Fundamental solution of D_t V = A(t) V by the iterated-integral series.

    ``A`` must be vectorized: ndarray of times -> (n, 2, 2) complex.  The
    series is summed by the equivalent Volterra recursion (linear cost per
    term).  When the growth integral J = int ||A|| exceeds
    ``max_segment_growth`` the interval is split and propagators composed;
    the certified bound then composes as prod(||E_i|| + r_i) - prod ||E_i||.

    The returned ``remainder`` certifies the series truncation; panel layout
    must resolve any oscillation of A (caller-supplied ``breaks``).
    """
    if breaks is None:
        seg_breaks = [np.linspace(min(s, t), max(s, t), 33)]
    else:
        seg_breaks = [np.asarray(breaks, dtype=float)]

    # estimate J on the proposed layout, split if needed
    n = nodes_per_panel
    nodes, weights = panel_nodes(seg_breaks[0], n)
    J_total = float(np.sum(weights * _op_norms(np.asarray(A(nodes)))))
    n_seg = max(1, math.ceil(J_total / max_segment_growth))
    if n_seg > 1:
        bk = seg_breaks[0]
        idx = np.linspace(0, len(bk) - 1, n_seg + 1).round().astype(int)
        idx = np.unique(idx)
        seg_breaks = [bk[idx[i]: idx[i + 1] + 1] for i in range(len(idx) - 1)]

    E = np.eye(2, dtype=complex)
    norms, rems = [], []
    J_sum = 0.0
    terms_max = 0
    all_ts, all_mats = [], []
    reverse = t < s
    if reverse:
        # integrate on [t, s] then invert; series runs on ascending intervals
        raise SolverError("matrizant requires s <= t; invert the propagator instead")
    for bk in seg_breaks:
        nodes_k, total_k, E_k, J_k, used_k, rem_k = _matrizant_segment(
            A, bk[0], bk[-1], K, tol, bk, n)
        if strict and rem_k > max(tol, 1e-9) and used_k == K:
            raise SolverError(
                f"matrizant: {K} terms exhausted, remainder bound {rem_k:.3e} "
                f"above tolerance on [{bk[0]}, {bk[-1]}] (J={J_k:.3g})"
            )
        if keep_nodes:
            all_ts.append(nodes_k)
            all_mats.append(np.einsum("nab,bc->nac", total_k, E))
        E = E_k @ E
        norms.append(float(np.linalg.norm(E_k, 2)))
        rems.append(rem_k)
        J_sum += J_k
        terms_max = max(terms_max, used_k)

    prod_n = float(np.prod(norms))
    prod_nr = float(np.prod([nk + rk for nk, rk in zip(norms, rems)]))
    remainder = prod_nr - prod_n

    fs = FundamentalSolution(matrix=E, s=s, t=t, lam=lam, method="matrizant",
                             remainder=remainder)
    if keep_nodes:
        fs.sample_ts = np.concatenate(all_ts)
        fs.sample_matrices = np.concatenate(all_mats)
    fs.J = J_sum  # type: ignore[attr-defined]
    fs.terms = terms_max  # type: ignore[attr-defined]
    return fs


def system_matrix_low(profile: CoefficientProfile, lam: float):
    """A(t) for the low-frequency micro-energy (u, D_t u)."""

    def A(ts):
        ts = np.atleast_1d(ts)
        b2 = profile.b.values(ts) ** 2
        out = np.zeros((len(ts), 2, 2), dtype=complex)
        out[:, 0, 1] = 1.0
        out[:, 1, 0] = lam * lam * b2
        return out

    return A


def system_matrix_pd(profile: CoefficientProfile, lam: float):
    """A(t) for the pseudodifferential micro-energy (lam u, D_t u)."""

    def A(ts):
        ts = np.atleast_1d(ts)
        b2 = profile.b.values(ts) ** 2
        out = np.zeros((len(ts), 2, 2), dtype=complex)
        out[:, 0, 1] = lam
        out[:, 1, 0] = lam * b2
        return out

    return A


# --- two-step diagonalization ---------------------------------------------------

MIXER = np.array([[1.0, -1.0], [1.0, 1.0]], dtype=complex)
MIXER_INV = np.array([[0.5, 0.5], [-0.5, 0.5]], dtype=complex)


@dataclass
class DiagonalizationData:
    """Matrices of the two-step reduction at one (t, lam).

    After mixing V = M V0 the system is (D_t - D + B) V0 = 0 with
    D = diag(lam b, -lam b) and B built from D_t b / b.  The normal-form
    corrector N1 = I + N^(1) moves the off-diagonal remainder one order down:
    (D_t - D + B) N1 = N1 (D_t - D + F0 + R1).
    """

    t: float
    lam: float
    b: float
    d_entries: tuple
    b_matrix: np.ndarray
    n1: np.ndarray
    n1_inv: np.ndarray
    f0: np.ndarray
    r1: np.ndarray
    n_offdiag: float  # |N^(1)_{12}| = |N^(1)_{21}|

    @property
    def n1_deviation(self) -> float:
        """||N1 - I|| (spectral norm)."""
        return self.n_offdiag


def _diag_pieces(b: float, db: float, d2b: float, lam: float):
    d = -1j * db / b  # D_t b / b
    n = d / (4.0 * lam * b)  # = -i b' / (4 lam b^2)
    # D_t n = -i d/dt n
    dt_n = -(d2b / (4.0 * lam * b * b) - db * db / (2.0 * lam * b**3))
    dn = d * n
    det = 1.0 + n * n
    b11 = -0.5 * d
    Bm = np.array([[b11, 0.5 * d], [0.5 * d, b11]], dtype=complex)
    N1 = np.array([[1.0, n], [-n, 1.0]], dtype=complex)
    N1i = np.array([[1.0, -n], [n, 1.0]], dtype=complex) / det
    F0 = np.array([[b11, 0.0], [0.0, b11]], dtype=complex)
    B1 = np.array([[-0.5 * dn, dt_n], [-dt_n, 0.5 * dn]], dtype=complex)
    R1 = N1i @ B1
    return d, n, Bm, N1, N1i, F0, R1


def diagonalize(profile: CoefficientProfile, lam: float, t: float) -> DiagonalizationData:
    b = profile.b.value(t)
    db = profile.b.d1(t)
    d2b = profile.b.d2(t)
    d, n, Bm, N1, N1i, F0, R1 = _diag_pieces(b, db, d2b, lam)
    dd = DiagonalizationData(
        t=t, lam=lam, b=b, d_entries=(lam * b, -lam * b), b_matrix=Bm,
        n1=N1, n1_inv=N1i, f0=F0, r1=R1, n_offdiag=abs(n),
    )
    if dd.n1_deviation >= 0.5:
        raise SolverError(
            f"||N1 - I|| = {dd.n1_deviation:.3g} >= 1/2 at (t={t}, lam={lam}); "
            "zone exponent P too small for this coefficient"
        )
    return dd


def r1_values(profile: CoefficientProfile, lam: float, ts) -> np.ndarray:
    """Vectorized R1(t, lam) on an array of times -> (n, 2, 2)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    b = profile.b.values(ts)
    db = profile.b.d1_values(ts)
    d2b = profile.b.d2_values(ts)
    d = -1j * db / b
    n = d / (4.0 * lam * b)
    dt_n = -(d2b / (4.0 * lam * b * b) - db * db / (2.0 * lam * b**3))
    dn = d * n
    det = 1.0 + n * n
    out = np.empty((len(ts), 2, 2), dtype=complex)
    # N1^-1 B1 unrolled
    b11 = -0.5 * dn
    b12 = dt_n
    b21 = -dt_n
    b22 = 0.5 * dn
    out[:, 0, 0] = (b11 - n * b21) / det
    out[:, 0, 1] = (b12 - n * b22) / det
    out[:, 1, 0] = (n * b11 + b21) / det
    out[:, 1, 1] = (n * b12 + b22) / det
    return out


def n1_matrices(profile: CoefficientProfile, lam: float, ts) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    b = profile.b.values(ts)
    db = profile.b.d1_values(ts)
    n = (-1j * db / b) / (4.0 * lam * b)
    out = np.broadcast_to(np.eye(2, dtype=complex), (len(ts), 2, 2)).copy()
    out[:, 0, 1] = n
    out[:, 1, 0] = -n
    return out


# --- WKB propagation in the p-evolution zone -------------------------------------


class PeFrame:
    """Cumulative phase/amplitude data for the diagonal factor on [s, t]."""

    def __init__(self, profile: CoefficientProfile, lam: float, s: float, t: float,
                 panels: Optional[int] = None, order: int = 16):
        if lam > LAMBDA_PHASE_GUARD:
            raise SolverError(
                f"lam={lam:.4g} beyond phase-accuracy guard 2^20; "
                "double-precision phase integrals degrade"
            )
        self.profile = profile
        self.lam = lam
        self.s = s
        self.t = t
        if panels is None:
            panels = max(64, int(40 * math.log(max(t / s, 1.0001))) + 64)
        # geometric panels track coefficients oscillating in log t
        breaks = np.geomspace(s, t, panels + 1) if s > 0 else np.linspace(s, t, panels + 1)
        bfun = profile.b.values
        self.theta = CumulativeGL(lambda x: lam * bfun(x), breaks, n=order)
        self.b_s = profile.b.value(s)

    def phase(self, tau):
        return self.theta(tau)

    def e1_factors(self, tau):
        """Diagonal entries of E1(tau, s): amp*e^{i theta}, amp*e^{-i theta}."""
        th = np.asarray(self.theta(tau), dtype=float)
        amp = np.sqrt(self.profile.b.values(np.atleast_1d(tau)) / self.b_s)
        if np.ndim(tau) == 0:
            th = float(th)
            a = float(amp[0])
            return a * cmath.exp(1j * th), a * cmath.exp(-1j * th)
        return amp * np.exp(1j * th), amp * np.exp(-1j * th)

    def phase_breaks(self, max_dphase: float = math.pi) -> np.ndarray:
        """Breakpoints with phase increment <= max_dphase, for resolving
        the e^{+-2i theta} conjugation of the residual symbol."""
        nodes, cum = self.theta.at_nodes()
        total = float(cum[-1])
        n_br = max(8, int(2.0 * total / max_dphase) + 1)
        levels = np.linspace(0.0, total, n_br + 1)
        ts = np.interp(levels, np.concatenate([[0.0], cum]),
                       np.concatenate([[self.s], nodes]))
        ts[0], ts[-1] = self.s, self.t
        return np.unique(ts)


def pe_micro_vector(profile: CoefficientProfile, lam: float, state: ModeState) -> np.ndarray:
    b = profile.b.value(state.t)
    return np.array([lam * b * state.u, state.dt_u], dtype=complex)


def state_from_pe_vector(profile: CoefficientProfile, lam: float, t: float,
                         v: np.ndarray) -> ModeState:
    b = profile.b.value(t)
    u = v[0] / (lam * b)
    ut = 1j * v[1]  # invert D_t u = -i u_t
    return ModeState(t=t, u=complex(u), ut=complex(ut), lam=lam)


def v1_from_state(profile: CoefficientProfile, lam: float, state: ModeState) -> np.ndarray:
    v = pe_micro_vector(profile, lam, state)
    dd = diagonalize(profile, lam, state.t)
    return dd.n1_inv @ (MIXER_INV @ v)


def state_from_v1(profile: CoefficientProfile, lam: float, t: float,
                  v1: np.ndarray) -> ModeState:
    dd = diagonalize(profile, lam, t)
    v = MIXER @ (dd.n1 @ v1)
    return state_from_pe_vector(profile, lam, t, v)


@dataclass
class WkbResult:
    fs: FundamentalSolution  # propagator of the diagonalized system
    state: Optional[ModeState]
    v1: Optional[np.ndarray]
    sample_ts: np.ndarray
    sample_norms: np.ndarray  # ||E(t_i, s)|| of the diagonalized propagator
    phase_check: float  # |quad(b'/b) - log ratio|, consistency diagnostic
    h_sup_norm: float = 1.0  # sup ||H||: growth of the normal-form residual factor


def wkb_propagate(profile: CoefficientProfile, lam: float, t_start: float,
                  t_end: float, v1_init: Optional[np.ndarray] = None,
                  state: Optional[ModeState] = None, htol: float = 1e-13,
                  keep_samples: bool = True) -> WkbResult:
    """Propagate through [t_start, t_end] in the p-evolution zone.

    The diagonal factor is exact up to quadrature: entries
    exp(+-i int lam b + (1/2) int b'/b), the real part evaluated as
    (1/2) log(b(t)/b(s)).  The residual system D_t H = -R~ H is summed by
    the matrizant on a phase-resolving panel layout, so the full propagator
    is E = E1 H.  ``state``/``v1_init`` select the output representation.
    """
    if t_end <= t_start:
        raise SolverError("wkb_propagate requires t_start < t_end")
    frame = PeFrame(profile, lam, t_start, t_end)
    if state is not None:
        v1_init = v1_from_state(profile, lam, state)

    # consistency of the amplitude integral with the closed-form log ratio
    bfun = profile.b.values
    d1fun = profile.b.d1_values
    breaks_amp = np.geomspace(t_start, t_end, 129)
    amp_quad = CumulativeGL(lambda x: d1fun(x) / bfun(x), breaks_amp, n=12).total
    amp_log = math.log(profile.b.value(t_end) / profile.b.value(t_start))
    phase_check = abs(amp_quad - amp_log)

    # phase-resolving panel layout; the residual symbol carries e^{+-2i theta}
    n_mz = 8
    breaks = frame.phase_breaks()
    nodes, _ = panel_nodes(breaks, n_mz)
    theta_cum = CumulativeGL(lambda x: lam * profile.b.values(x), breaks, n=n_mz)
    _, th_nodes = theta_cum.at_nodes()  # cumulative phase at the same nodes
    r1_nodes = r1_values(profile, lam, nodes)
    A_vals = np.empty_like(r1_nodes)
    A_vals[:, 0, 0] = -r1_nodes[:, 0, 0]
    A_vals[:, 1, 1] = -r1_nodes[:, 1, 1]
    A_vals[:, 0, 1] = -r1_nodes[:, 0, 1] * np.exp(-2j * th_nodes)
    A_vals[:, 1, 0] = -r1_nodes[:, 1, 0] * np.exp(2j * th_nodes)

    def A_H(ts):
        ts = np.atleast_1d(ts)
        if len(ts) == len(nodes) and ts[0] == nodes[0] and ts[-1] == nodes[-1]:
            return A_vals
        r = r1_values(profile, lam, ts)
        th = np.interp(ts, nodes, th_nodes)
        out = np.empty_like(r)
        out[:, 0, 0] = -r[:, 0, 0]
        out[:, 1, 1] = -r[:, 1, 1]
        out[:, 0, 1] = -r[:, 0, 1] * np.exp(-2j * th)
        out[:, 1, 0] = -r[:, 1, 0] * np.exp(2j * th)
        return out

    fs_h = matrizant(A_H, t_start, t_end, lam=lam, tol=htol, breaks=breaks,
                     nodes_per_panel=n_mz, keep_nodes=keep_samples)

    theta_end = float(theta_cum.total)
    amp_end = math.sqrt(profile.b.value(t_end) / profile.b.value(t_start))
    e1_end = np.array([[amp_end * cmath.exp(1j * theta_end), 0.0],
                       [0.0, amp_end * cmath.exp(-1j * theta_end)]], dtype=complex)
    E_end = e1_end @ fs_h.matrix
    if keep_samples and fs_h.sample_ts is not None:
        amps = np.sqrt(profile.b.values(fs_h.sample_ts) / profile.b.value(t_start))
        e1a = amps * np.exp(1j * th_nodes)
        e1c = amps * np.exp(-1j * th_nodes)
        mats = fs_h.sample_matrices.copy()
        mats[:, 0, :] *= e1a[:, None]
        mats[:, 1, :] *= e1c[:, None]
        sample_ts = fs_h.sample_ts
        sample_norms = _op_norms(mats)
    else:
        mats = None
        sample_ts = np.array([t_end])
        sample_norms = np.array([float(np.linalg.norm(E_end, 2))])

    fs = FundamentalSolution(matrix=E_end, s=t_start, t=t_end, lam=lam,
                             method="wkb", remainder=fs_h.remainder,
                             sample_ts=sample_ts,
                             sample_matrices=mats if keep_samples and fs_h.sample_ts is not None else None)

    out_state = None
    v1_end = None
    if v1_init is not None:
        v1_init = np.asarray(v1_init, dtype=complex)
        v1_end = E_end @ v1_init
        out_state = state_from_v1(profile, lam, t_end, v1_end)
    h_sup = float(np.linalg.norm(fs_h.matrix, 2))
    if fs_h.sample_matrices is not None:
        h_sup = max(h_sup, float(np.max(_op_norms(fs_h.sample_matrices))))
    return WkbResult(fs=fs, state=out_state, v1=v1_end, sample_ts=sample_ts,
                     sample_norms=sample_norms, phase_check=phase_check,
                     h_sup_norm=h_sup)


# --- fundamental-solution norm estimate -------------------------------------------


def fundamental_from_integrator(profile: CoefficientProfile, lam: float,
                                s: float, t: float, micro: str = "pd",
                                rtol: float = 1e-10) -> FundamentalSolution:
    """Propagator in micro-energy coordinates from two unit-vector solves."""
    cols = []
    for init_v in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
        if micro == "pd":
            u0 = init_v[0] / lam
        elif micro == "low":
            u0 = init_v[0]
        else:
            u0 = init_v[0] / (lam * profile.b.value(s))
        ut0 = 1j * init_v[1]  # V2 = D_t u = -i u_t
        traj = integrate_mode(profile, lam, s, t, (u0, ut0), rtol=rtol, collect=False)
        fin = traj.final
        if micro == "pd":
            cols.append(np.array([lam * fin.u, fin.dt_u]))
        elif micro == "low":
            cols.append(np.array([fin.u, fin.dt_u]))
        else:
            cols.append(np.array([lam * profile.b.value(t) * fin.u, fin.dt_u]))
    E = np.stack(cols, axis=1)
    return FundamentalSolution(matrix=E, s=s, t=t, lam=lam, method="integrator")


@dataclass
class NormEstimate:
    lam: float
    t_sep: float
    nu_at_sep: float
    observed_sup: float
    pd_growth_bound: float  # exp(int ||B||) over the pseudodifferential span
    empirical_c1: float  # log observed / nu(t_sep)
    margin: float

    def as_dict(self) -> dict:
        return {
            "lam": self.lam, "t_sep": self.t_sep, "nu_at_sep": self.nu_at_sep,
            "observed_sup": self.observed_sup,
            "pd_growth_bound": self.pd_growth_bound,
            "empirical_c1": self.empirical_c1, "margin": self.margin,
        }


def estimate_fundamental_norm(profile: CoefficientProfile, lam: float, params,
                              anchor: Optional[float] = None) -> NormEstimate:
    """Observed propagator norms against the exponential nu-weight.

    In the p-evolution region the propagator comes from the WKB route and
    norms are sampled along the trajectory; in the pseudodifferential region
    the exponential-growth bound exp(int ||B||) <= exp(c 2^P nu(t_sep)) is
    evaluated by quadrature.  The reported empirical c1 is the smallest
    constant making exp(c1 nu(t_sep)) dominate the observed norm.
    """
    if lam <= params.M:
        raise SolverError("estimate_fundamental_norm needs lam > M")
    tl = t_lambda(profile.nu, lam, params.P)
    start = anchor if anchor is not None else tl
    nu_sep = float(profile.nu.value(tl))

    res = wkb_propagate(profile, lam, tl, profile.T)
    if start < tl:
        # compose with the pseudodifferential propagator so the observed
        # norm is that of E(t, anchor), not a submultiplicative bound
        E_pd = fundamental_from_integrator(profile, lam, start, tl, micro="pd").matrix
        if res.fs.sample_matrices is not None:
            prods = np.einsum("nab,bc->nac", res.fs.sample_matrices, E_pd)
            observed = float(np.max(_op_norms(prods)))
        else:
            observed = float(np.linalg.norm(res.fs.matrix @ E_pd, 2))
        observed = max(observed, float(np.linalg.norm(E_pd, 2)))
    else:
        observed = float(np.max(res.sample_norms))

    # quadrature bound on the pseudodifferential span [start or ~0, tl]
    b2max = lambda ts: lam * np.maximum(1.0, profile.b.values(ts) ** 2)
    lo = max(start if start < tl else tl * 1e-8, 1e-12)
    J_pd = CumulativeGL(b2max, np.geomspace(lo, tl, 257), n=8).total
    pd_bound = math.exp(min(J_pd, 700.0))

    emp = math.log(max(observed, 1e-300)) / nu_sep
    margin = pd_bound / max(observed, 1e-300)
    return NormEstimate(lam=lam, t_sep=tl, nu_at_sep=nu_sep,
                        observed_sup=observed, pd_growth_bound=pd_bound,
                        empirical_c1=emp, margin=margin)
