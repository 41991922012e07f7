"""Regularly varying functions A(x) = x^alpha L(x).

A is normalized so that A(0) = 1/2 and A(1) = 1, is C^1 and strictly
increasing on [0, inf). For x >= 1 it is proportional to x^alpha L(x), except
when L decreases too fast near 1 (e.g. 1/log(1+x) with small alpha): then a
log-quadratic bridge joins x=1 to the first point beyond which the log-index
x A'/A stays above alpha/2.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

_KINDS = ("constant", "log-power", "reciprocal-log", "tabulated")
_LOG2 = math.log(2.0)


class SlowlyVarying:
    """Slowly varying profile L, evaluated for x >= 1."""

    def __init__(self, kind: str, params: dict | None = None, slack: float = 0.5):
        if kind not in _KINDS:
            raise ValueError(f"unknown slowly varying kind {kind!r}")
        params = dict(params or {})
        self.kind = kind
        if kind == "constant":
            c = float(params.get("c", 1.0))
            if not c > 0:
                raise ValueError("constant L must be positive")
            self.params = {"c": c}
        elif kind == "log-power":
            self.params = {"beta": float(params.get("beta", 1.0))}
        elif kind == "reciprocal-log":
            self.params = {}
        else:
            xs = np.asarray(params["x"], dtype=float)
            vals = np.asarray(params["values"], dtype=float)
            if xs.ndim != 1 or xs.shape != vals.shape or xs.size < 2:
                raise ValueError("tabulated L needs matching breakpoint and value arrays")
            if np.any(np.diff(xs) <= 0) or xs[0] < 1:
                raise ValueError("tabulated breakpoints must be increasing and >= 1")
            if np.any(vals <= 0):
                raise ValueError("tabulated L must be positive")
            self.params = {"x": xs.tolist(), "values": vals.tolist()}
            self._lx = np.log(xs)
            self._lv = np.log(vals)
            grid = 2.0 ** np.arange(0.0, math.log2(xs[-1]) + 1.0)
            ratio = self(2 * grid) / self(grid)
            bad = np.abs(np.log(ratio)) > math.log1p(slack)
            if np.any(bad):
                x0 = grid[np.argmax(bad)]
                raise ValueError(f"tabulated L varies too fast at doubling point x={x0:g}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.params["c"])
        if self.kind == "log-power":
            return np.log1p(x) ** self.params["beta"]
        if self.kind == "reciprocal-log":
            return 1.0 / np.log1p(x)
        lx = np.log(np.maximum(x, 1e-300))
        return np.exp(np.interp(lx, self._lx, self._lv))

    def log_slope(self, x):
        """x L'(x) / L(x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind in ("log-power", "reciprocal-log"):
            beta = self.params["beta"] if self.kind == "log-power" else -1.0
            return beta * x / ((1.0 + x) * np.log1p(x))
        seg = np.diff(self._lv) / np.diff(self._lx)
        lx = np.log(np.maximum(x, 1e-300))
        idx = np.searchsorted(self._lx, lx, side="right") - 1
        inside = (idx >= 0) & (idx < seg.size)
        out = np.zeros_like(x)
        out[inside] = seg[idx[inside]]
        return out

    @property
    def monotone(self) -> str | None:
        if self.kind == "constant":
            return "constant"
        if self.kind == "log-power":
            b = self.params["beta"]
            return "constant" if b == 0 else ("increasing" if b > 0 else "decreasing")
        if self.kind == "reciprocal-log":
            return "decreasing"
        return None

    def to_text(self) -> str:
        if self.kind == "tabulated":
            xs = ",".join(repr(v) for v in self.params["x"])
            vs = ",".join(repr(v) for v in self.params["values"])
            return f"x={xs};values={vs}"
        return ";".join(f"{k}={v!r}" for k, v in self.params.items())

    @classmethod
    def from_text(cls, kind: str, text: str) -> "SlowlyVarying":
        params: dict = {}
        for item in filter(None, (s.strip() for s in text.split(";"))):
            key, _, val = item.partition("=")
            if kind == "tabulated":
                params[key.strip()] = [float(v) for v in val.split(",")]
            else:
                params[key.strip()] = float(val)
        return cls(kind, params)

    def __repr__(self) -> str:
        return f"SlowlyVarying({self.kind!r}, {self.params!r})"


@dataclass(frozen=True, eq=False)
class TailIndexFunction:
    alpha: float
    L: SlowlyVarying = field(default_factory=lambda: SlowlyVarying("constant"))

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        _ = self._shape

    # -- construction of the normalized shape ---------------------------------

    def _index(self, x):
        return self.alpha + self.L.log_slope(x)

    @cached_property
    def _shape(self):
        a = self.alpha
        lo = a / 2.0
        grid = np.logspace(0.0, 15.0, 3001)
        bad = self._index(grid) < lo
        if not np.any(bad):
            xb, ib = 1.0, float(self._index(np.array([1.0]))[0])
        else:
            last = int(np.nonzero(bad)[0][-1])
            if last == grid.size - 1:
                raise ValueError("log-index of A stays below alpha/2; L decays too fast")
            a_, b_ = grid[last], grid[last + 1]
            for _ in range(200):
                m = math.sqrt(a_ * b_)
                if self._index(np.array([m]))[0] < lo:
                    a_ = m
                else:
                    b_ = m
            xb = b_
            ib = max(lo, float(self._index(np.array([xb * (1 + 1e-12)]))[0]))
        T = math.log(xb)
        vb = T * (a + ib) / 2.0
        g_b = math.log(xb) * a + math.log(float(self.L(np.array([xb]))[0]))
        slope1 = a if xb > 1.0 else ib
        c2 = slope1 - _LOG2
        c1 = 2.0 * _LOG2 - slope1
        loglinear = c1 <= 0.0
        return {"xb": xb, "T": T, "ib": ib, "vb": vb, "g_b": g_b,
                "c1": c1, "c2": c2, "loglinear": loglinear}

    @property
    def bridge_end(self) -> float:
        """Right end of the log-quadratic bridge (1.0 when no bridge is needed)."""
        return self._shape["xb"]

    @cached_property
    def pure_power(self) -> bool:
        return self.L.kind == "constant" or (self.L.kind == "log-power" and self.L.params["beta"] == 0)

    def log_A(self, x):
        x = np.asarray(x, dtype=float)
        sh = self._shape
        out = np.empty_like(x)
        small = x < 1.0
        if np.any(small):
            xs = np.maximum(x[small], 0.0)
            if sh["loglinear"]:
                out[small] = -_LOG2 + _LOG2 * xs
            else:
                out[small] = -_LOG2 + sh["c1"] * xs + sh["c2"] * xs * xs
        mid = (~small) & (x < sh["xb"])
        if np.any(mid):
            t = np.log(x[mid])
            out[mid] = self.alpha * t + (sh["ib"] - self.alpha) * t * t / (2.0 * sh["T"])
        big = (~small) & ~mid
        if np.any(big):
            xg = x[big]
            out[big] = sh["vb"] + self.alpha * np.log(xg) + np.log(self.L(xg)) - sh["g_b"]
        return out

    def __call__(self, x):
        return np.exp(self.log_A(x))

    def log_derivative(self, x):
        """d log A / dx."""
        x = np.asarray(x, dtype=float)
        sh = self._shape
        out = np.empty_like(x)
        small = x < 1.0
        if np.any(small):
            xs = np.maximum(x[small], 0.0)
            out[small] = _LOG2 if sh["loglinear"] else sh["c1"] + 2.0 * sh["c2"] * xs
        mid = (~small) & (x < sh["xb"])
        if np.any(mid):
            t = np.log(x[mid])
            out[mid] = (self.alpha + (sh["ib"] - self.alpha) * t / sh["T"]) / x[mid]
        big = (~small) & ~mid
        if np.any(big):
            out[big] = self._index(x[big]) / x[big]
        return out

    def derivative(self, x):
        return self(x) * self.log_derivative(x)

    def inverse(self, y):
        """a = A^{-1}(y) for y >= 1/2, by monotone bisection."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        if np.any(~(y >= 0.5)):
            raise ValueError("inverse_A requires y >= 1/2")
        out = np.empty_like(y)
        if self.pure_power:
            hi = y >= 1.0
            out[hi] = y[hi] ** (1.0 / self.alpha)
        else:
            hi = np.zeros_like(y, dtype=bool)
        todo_big = (y > 1.0) & ~hi
        if np.any(todo_big):
            out[todo_big] = _bisect_log(self, y[todo_big])
        low = y <= 1.0
        low &= ~(hi & (y == 1.0))
        if np.any(low):
            out[low] = _bisect_unit(self, y[low])
        return out[0] if scalar else out

    # -- serialization ----------------------------------------------------------

    def to_text(self) -> str:
        return f"alpha = {self.alpha!r}\nL.kind = {self.L.kind}\nL.params = {self.L.to_text()}\n"

    @classmethod
    def from_text(cls, text: str) -> "TailIndexFunction":
        vals = {}
        for line in text.strip().splitlines():
            key, _, val = line.partition("=")
            vals[key.strip()] = val.strip()
        L = SlowlyVarying.from_text(vals["L.kind"], vals.get("L.params", ""))
        return cls(float(vals["alpha"]), L)

    @cached_property
    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def __repr__(self) -> str:
        return f"TailIndexFunction(alpha={self.alpha}, L={self.L!r})"


def _bisect_log(A: TailIndexFunction, y):
    target = np.log(y)
    lo = np.zeros_like(y)
    hi = np.maximum(np.log(y) / A.alpha, 1.0)
    for _ in range(80):
        short = A.log_A(np.exp(hi)) < target
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi, hi)
        if np.any(hi > math.log(1e300)):
            hi = np.minimum(hi, math.log(1e300))
            if np.any(A.log_A(np.exp(hi)) < target):
                raise ValueError("inverse_A: no bracket below 1e300")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = A.log_A(np.exp(mid)) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
            break
    return np.exp(0.5 * (lo + hi))


def _bisect_unit(A: TailIndexFunction, y):
    target = np.log(y)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = A.log_A(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


# -- operations ------------------------------------------------------------------


def eval_A(A: TailIndexFunction, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("eval_A requires x >= 0")
    out = A(x)
    return float(out) if out.ndim == 0 else out


def inverse_A(A: TailIndexFunction, y):
    out = A.inverse(y)
    return float(out) if np.ndim(out) == 0 else out


def eval_Lstar(A: TailIndexFunction, x):
    """sup of L over [1, x]."""
    L = A.L
    x = np.asarray(x, dtype=float)
    if np.any(x < 1):
        raise ValueError("eval_Lstar requires x >= 1")
    mono = L.monotone
    if mono in ("constant", "increasing"):
        out = L(x)
    elif mono == "decreasing":
        out = np.full_like(x, float(L(np.array([1.0]))[0]))
    else:
        bx = np.asarray(L.params["x"])
        bv = np.asarray(L.params["values"])
        l1 = float(L(np.array([1.0]))[0])
        flat = np.atleast_1d(x)
        res = np.maximum(l1, L(flat))
        for i, xi in enumerate(flat):
            inside = bv[bx <= xi]
            if inside.size:
                res[i] = max(res[i], inside.max())
        out = res.reshape(x.shape)
    return float(out) if np.ndim(out) == 0 else out


class LStarCache:
    """Running sup of L on a dyadically refined logarithmic grid."""

    def __init__(self, L: SlowlyVarying, x_max: float, depth: int = 6):
        if x_max < 1:
            raise ValueError("x_max must be >= 1")
        self.depth = depth
        octaves = max(1, math.ceil(math.log2(x_max)))
        n = octaves * 2 ** depth + 1
        self.x = np.minimum(np.exp2(np.linspace(0.0, octaves, n)), x_max)
        self.x = np.unique(self.x)
        self.values = np.maximum.accumulate(L(self.x))

    def __call__(self, x):
        idx = np.searchsorted(self.x, np.asarray(x, dtype=float), side="right") - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]


@dataclass(frozen=True)
class PotterReport:
    lower_ok: bool
    upper_ok: bool
    ratio: float
    lower_constant: float
    upper_constant: float


def potter_check(A: TailIndexFunction, rho: float, x: float, eps: float, cap: float = 2.0) -> PotterReport:
    """Constants needed for rho^(a+e) <= K A(rho x)/A(x) and A(rho x)/A(x) <= K' rho^(a-e)."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0,1]")
    if rho * x < 1:
        raise ValueError("potter_check requires rho*x >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    ratio = float(A(np.array([rho * x]))[0] / A(np.array([x]))[0])
    k_low = rho ** (A.alpha + eps) / ratio
    k_up = ratio / rho ** (A.alpha - eps)
    return PotterReport(k_low <= cap, k_up <= cap, ratio, k_low, k_up)


def karamata_partial_sum_check(zeta: float, L: SlowlyVarying, t: int) -> float:
    """sum_{n<=t} n^zeta L(n) divided by t^(zeta+1) L(t)/(zeta+1)."""
    if zeta <= -1:
        raise ValueError("zeta must exceed -1")
    if t < 10:
        raise ValueError("t must be at least 10")
    n = np.arange(1, int(t) + 1, dtype=float)
    total = math.fsum(n ** zeta * L(n))
    return total / (t ** (zeta + 1) * float(L(np.array([float(t)]))[0]) / (zeta + 1))


# -- integrals of A^2 weights ---------------------------------------------------------

_GL_X, _GL_W = roots_legendre(8)


def cell_integrals(A: TailIndexFunction, edges, power: int):
    """Integrals of A(s)^2 / s^power over consecutive cells [edges[i], edges[i+1]]."""
    e = np.asarray(edges, dtype=float)
    lo, hi = e[:-1], e[1:]
    if A.pure_power and lo.size and lo.min() >= 1.0:
        q = 2.0 * A.alpha - power + 1.0
        if abs(q) < 1e-14:
            return np.log(hi / lo)
        return (hi ** q - lo ** q) / q
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    out = np.zeros_like(lo)
    for xg, wg in zip(_GL_X, _GL_W):
        s = mid + half * xg
        out += wg * A(s) ** 2 / s ** power
    return out * half


def chi_u(A: TailIndexFunction, x: float) -> float:
    """u(x) = integral over [1, x] of A(s)^2/s^2, by adaptive quadrature."""
    if x < 1:
        raise ValueError("chi_u requires x >= 1")
    if x == 1:
        return 0.0
    top = math.log(x)

    def integrand(t):
        return float(np.exp(2.0 * A.log_A(np.array([math.exp(t)]))[0] - t))

    breaks = [math.log(A.bridge_end)] if 1.0 < A.bridge_end < x else None
    val, _ = integrate.quad(integrand, 0.0, top, epsabs=0.0, epsrel=1e-11, limit=500, points=breaks)
    return val
