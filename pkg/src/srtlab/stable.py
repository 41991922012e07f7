"""Stable densities for the local limit theorem and LLT diagnostics.

Scale convention: the one-sided limit has Laplace transform
exp(-Gamma(1-alpha) lambda^alpha), so that P(X > x) ~ x^-alpha and
n F(a_n, inf) -> 1 matches S_n / a_n -> X with no free constant.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np
from scipy import integrate, optimize, stats
from scipy.interpolate import CubicSpline
from scipy.special import gamma, gammaln, roots_legendre

from .dists import LatticeLaw
from .renewal import restricted_walk_pmf, walk_pmf

_PANELS = 24
_GX, _GW = roots_legendre(32)


class StableDensity:
    def __init__(self, alpha: float, p: float = 1.0, q: float = 0.0):
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0,1)")
        if p < 0 or q < 0 or p + q <= 0:
            raise ValueError("p, q must be nonnegative and not both zero")
        self.alpha, self.p, self.q = float(alpha), float(p), float(q)
        self.c = gamma(1.0 - alpha)
        self.scale = self.c ** (1.0 / alpha)

    @property
    def one_sided(self) -> bool:
        return self.q == 0

    # -- unit-scale density of Y with E exp(-lambda Y) = exp(-lambda^alpha)

    def _kanter(self, y):
        a = self.alpha
        y = np.atleast_1d(np.asarray(y, dtype=float))
        edges = np.linspace(0.0, math.pi, _PANELS + 1)
        half = 0.5 * np.diff(edges)
        theta = (0.5 * (edges[:-1] + edges[1:])[:, None] + half[:, None] * _GX[None, :]).ravel()
        w = (half[:, None] * _GW[None, :]).ravel()
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            la = ((a / (1 - a)) * np.log(np.sin(a * theta)) + np.log(np.sin((1 - a) * theta))
                  - np.log(np.sin(theta)) / (1 - a))
        out = np.empty_like(y)
        for s in range(0, y.size, 4096):
            yy = y[s:s + 4096, None]
            z = yy ** (-a / (1 - a))
            with np.errstate(over="ignore", under="ignore"):
                integrand = np.exp(la[None, :] - np.exp(la[None, :]) * z)
            out[s:s + 4096] = (a / (1 - a)) / math.pi * yy[:, 0] ** (-1 / (1 - a)) * (integrand @ w)
        return out

    _TERMS = 600

    def _series_terms(self, y):
        a = self.alpha
        k = np.arange(1, self._TERMS + 1, dtype=float)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        logmag = gammaln(k * a + 1) - gammaln(k + 1) - (k * a + 1)[None, :] * np.log(y)[:, None]
        sign = (-1.0) ** (k + 1) * np.sin(k * math.pi * a) / math.pi
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(logmag) * sign[None, :]

    def unit_sf(self, y: float) -> float:
        """P(Y > y) from the termwise-integrated series; valid for y >= crossover."""
        k = np.arange(1, self._TERMS + 1, dtype=float)
        return float((self._series_terms(np.array([y]))[0] * y / (k * self.alpha)).sum())

    def _series(self, y):
        return self._series_terms(y).sum(axis=1)

    @cached_property
    def crossover(self) -> float:
        """Smallest y where the series is converged to 1e-10 without cancellation trouble."""
        for y in np.geomspace(0.05, 200.0, 400):
            t = self._series_terms(np.array([y]))[0]
            with np.errstate(invalid="ignore"):
                s = t.sum()
            if not s > 0:
                continue
            tail = np.abs(t[-50:]).max()
            if tail < 1e-14 * s and np.abs(t).max() < 1e4 * s:
                return float(y)
        return 200.0

    def _unit(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        pos = y > 0
        yc = self.crossover
        lo = pos & (y < yc)
        hi = pos & (y >= yc)
        if np.any(lo):
            out[lo] = self._kanter(y[lo])
        if np.any(hi):
            out[hi] = self._series(y[hi])
        return out

    @cached_property
    def _levy(self):
        a = self.alpha
        P = self.p + self.q
        sigma = (self.c * P * math.cos(math.pi * a / 2)) ** (1 / a)
        beta = (self.p - self.q) / P
        return stats.levy_stable(a, beta, loc=0.0, scale=sigma)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not self.one_sided:
            out = np.atleast_1d(self._levy.pdf(np.atleast_1d(x))).reshape(x.shape)
            return float(out) if out.ndim == 0 else out
        if self.p != 1.0:
            # p F-tail: rescale time, X_p = p^(1/alpha) X_1
            s = self.p ** (1.0 / self.alpha)
            out = self._unit(x / (s * self.scale)) / (s * self.scale)
        else:
            out = self._unit(x / self.scale) / self.scale
        return float(out) if np.ndim(out) == 0 else out

    @cached_property
    def mode(self) -> tuple[float, float]:
        """(argmax, max) of the density."""
        grid = np.geomspace(1e-2, 1e2, 2000) if self.one_sided else np.linspace(-20, 20, 801)
        vals = self(grid)
        i = int(np.argmax(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = optimize.minimize_scalar(lambda t: -float(self(np.array([t]))[0]), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12})
        return float(res.x), float(-res.fun)

    def sup(self) -> float:
        return self.mode[1]

    def interpolator(self, y_max: float, points: int = 8000):
        """Fast evaluator on [0, y_max] by a cubic spline on a logarithmic grid."""
        y_max = float(y_max)
        if self.one_sided:
            grid = np.concatenate([[0.0], np.geomspace(1e-4, y_max, points)])
        else:
            grid = np.linspace(-y_max, y_max, points)
        spline = CubicSpline(grid, self(grid))

        def evaluate(y):
            y = np.asarray(y, dtype=float)
            inside = np.abs(y) <= y_max
            out = np.empty_like(y)
            out[inside] = spline(y[inside])
            if not np.all(inside):
                out[~inside] = self(y[~inside])
            return out

        return evaluate


def stable_density(spec: StableDensity, x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) and spec.one_sided:
        raise ValueError("stable_density needs x > 0 for one-sided laws")
    return spec(x)


def total_mass(spec: StableDensity) -> float:
    """Integral of the density by adaptive quadrature."""
    f = lambda t: float(spec(np.array([t]))[0])
    if spec.one_sided:
        m = spec.mode[0]
        parts = [(0.0, m), (m, 10 * m), (10 * m, 1e3 * m)]
        total = sum(integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-12)[0] for a, b in parts)
        s = spec.scale * spec.p ** (1.0 / spec.alpha)
        return total + spec.unit_sf(1e3 * m / s)
    return integrate.quad(f, -np.inf, np.inf, limit=400)[0]


def _phi_for(F: LatticeLaw) -> StableDensity:
    return StableDensity(F.alpha, F.p, F.q)


def llt_error(F: LatticeLaw, n: int, window_mult: float = 10.0, phi: StableDensity | None = None) -> dict:
    """sup over the lattice window [0, window_mult a_n] of |a_n P(S_n = x)/v - phi(x/a_n)|."""
    if n < 1:
        raise ValueError("n must be positive")
    phi = phi or _phi_for(F)
    a_n = float(F.A.inverse(float(n)))
    v = F.lattice_span()
    top = int(math.ceil(window_mult * a_n / F.h))
    lo = 0 if F.one_sided else -top
    w = walk_pmf(F, n, (lo, top))
    y = np.arange(lo, top + 1, dtype=float) * F.h / a_n
    if F.one_sided:
        ev = phi.interpolator(window_mult * 1.0001)
        dens = np.zeros_like(y)
        pos = y > 0
        dens[pos] = ev(y[pos])
    else:
        dens = phi.interpolator(window_mult * 1.0001, points=2001)(y)
    diff = np.abs(a_n * w.values / v - dens)
    i = int(np.argmax(diff))
    return {"n": n, "a_n": a_n, "span": v, "stat": float(diff[i]), "argmax": float(y[i]),
            "sup_phi": phi.sup(), "escaped": w.escaped_mass}


def llt_truncated_lower(F: LatticeLaw, n: int, C_mult: float, K_region: str = "auto") -> float:
    """a_n * inf over z/a_n in K of P(S_n in z+J, max_i X_i <= C_mult a_n)."""
    if n < 1:
        raise ValueError("n must be positive")
    if not F.one_sided:
        raise ValueError("truncated LLT lower bound is implemented for one-sided laws")
    if K_region not in ("auto", "positive"):
        raise ValueError("one-sided laws use K = [1, 2]")
    a_n = float(F.A.inverse(float(n)))
    lo = int(math.ceil(a_n / F.h))
    hi = int(math.floor(2.0 * a_n / F.h))
    if math.isinf(C_mult):
        w = walk_pmf(F, n, (0, hi))
    else:
        w = restricted_walk_pmf(F, n, C_mult * a_n, (0, hi))
    return float(a_n * w.values[lo:hi + 1].min())
