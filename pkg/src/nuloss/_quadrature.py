"""Composite Gauss-Legendre quadrature with cumulative evaluation.

Workhorse for gauge phases, WKB phase integrals and the iterated integrals
of the time-ordered series.  Panels are explicit so callers can size them to
the oscillation they need to resolve.
"""

from __future__ import annotations

import numpy as np


def gl_rule(n: int):
    """Nodes/weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


def _integration_matrix(nodes: np.ndarray) -> np.ndarray:
    """S with S[i, j] = integral_{-1}^{nodes[i]} of Lagrange basis j."""
    n = len(nodes)
    S = np.empty((n, n))
    for j in range(n):
        c = np.zeros(n)
        c[j] = 1.0
        # Lagrange basis through the nodes, as a polynomial in coefficient form
        pj = np.polynomial.polynomial.Polynomial.fit(nodes, c, n - 1).convert()
        Pj = pj.integ()
        S[:, j] = Pj(nodes) - Pj(-1.0)
    return S


_S_CACHE: dict[int, np.ndarray] = {}


def integration_matrix(n: int) -> np.ndarray:
    if n not in _S_CACHE:
        nodes, _ = gl_rule(n)
        _S_CACHE[n] = _integration_matrix(nodes)
    return _S_CACHE[n]


def panel_nodes(breaks: np.ndarray, n: int):
    """All GL nodes/weights for panels delimited by ``breaks`` (ascending)."""
    x, w = gl_rule(n)
    a = breaks[:-1][:, None]
    b = breaks[1:][:, None]
    half = (b - a) / 2.0
    nodes = (a + b) / 2.0 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def geometric_breaks(a: float, b: float, n_panels: int) -> np.ndarray:
    """Panel breakpoints geometric in t; resolves log-in-time variation."""
    if a <= 0:
        raise ValueError("geometric panels need a > 0")
    return np.geomspace(a, b, n_panels + 1)


class CumulativeGL:
    """Cumulative integral x -> integral_a^x f on a fixed panel layout.

    ``f`` must accept ndarray input.  Values at arbitrary points are exact
    for the GL interpolant: full panels via prefix sums, the partial panel
    via a fresh GL rule on [panel_start, x].
    """

    def __init__(self, f, breaks: np.ndarray, n: int = 12):
        self.f = f
        self.breaks = np.asarray(breaks, dtype=float)
        self.n = n
        nodes, weights = panel_nodes(self.breaks, n)
        vals = np.asarray(f(nodes))
        panel_ints = (weights * vals).reshape(len(self.breaks) - 1, n).sum(axis=1)
        self.prefix = np.concatenate([[0.0], np.cumsum(panel_ints)])
        self._x1, self._w1 = gl_rule(n)

    @property
    def total(self):
        return self.prefix[-1]

    def __call__(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([self._one(xi) for xi in xs])
        return out[0] if np.asarray(x).ndim == 0 else out

    def _one(self, xi: float):
        lo, hi = self.breaks[0], self.breaks[-1]
        span = hi - lo
        if not (lo - 1e-12 * span <= xi <= hi + 1e-12 * span):
            raise ValueError(f"point {xi} outside quadrature range [{lo}, {hi}]")
        xi = min(max(xi, lo), hi)
        k = int(np.searchsorted(self.breaks, xi, side="right")) - 1
        k = min(max(k, 0), len(self.breaks) - 2)
        a = self.breaks[k]
        half = (xi - a) / 2.0
        if half == 0.0:
            return self.prefix[k]
        pts = (a + xi) / 2.0 + half * self._x1
        return self.prefix[k] + half * np.sum(self._w1 * self.f(pts))

    def at_nodes(self):
        """(nodes, cumulative values at nodes) on the panel layout."""
        nodes, _ = panel_nodes(self.breaks, self.n)
        vals = np.asarray(self.f(nodes)).reshape(len(self.breaks) - 1, self.n)
        S = integration_matrix(self.n)
        halves = np.diff(self.breaks) / 2.0
        cum_in_panel = halves[:, None] * np.einsum("ij,pj->pi", S, vals)
        cum = cum_in_panel + self.prefix[:-1, None]
        return nodes, cum.ravel()


def fixed_quad(f, a: float, b: float, n_panels: int = 64, n: int = 12) -> float:
    """Plain composite GL integral for smooth integrands."""
    nodes, weights = panel_nodes(np.linspace(a, b, n_panels + 1), n)
    return float(np.sum(weights * f(nodes)))
