"""Renewal ratios, big-jump parameters and probes of the small-n estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .criteria import series_trend
from .dists import LatticeLaw, mass_interval
from .regvar import TailIndexFunction
from .renewal import (RenewalTable, bigjump_decomposition, conv_full, restricted_walk_pmf,
                      walk_pmf)
from .stable import StableDensity


def const_C(alpha: float) -> float:
    """alpha sin(pi alpha)/pi."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    return alpha * math.sin(math.pi * alpha) / math.pi


def _inv_parts(alpha: float) -> tuple[int, float]:
    """floor and fractional part of 1/alpha, snapping near-integers."""
    inv = 1.0 / alpha
    r = round(inv)
    if abs(inv - r) < 1e-12 * max(1.0, inv):
        return int(r), 0.0
    fl = math.floor(inv)
    return int(fl), inv - fl


@dataclass(frozen=True)
class BigJumpParams:
    alpha: float
    gamma: float
    kappa: int
    J_alpha: float

    def xi(self, a_n: float, x: float) -> float:
        """Big-jump threshold a_n^gamma x^(1-gamma)."""
        return a_n ** self.gamma * x ** (1.0 - self.gamma)


def big_jump_params(alpha: float) -> BigJumpParams:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    fl, frac = _inv_parts(alpha)
    gamma = (alpha / 4.0) * (1.0 - frac)
    kappa = fl - 1
    J = (kappa + 1) * (1.0 - 2.0 * gamma) - 1.0 / alpha
    return BigJumpParams(float(alpha), gamma, kappa, J)


# -- renewal ratios --------------------------------------------------------------------------


def srt_ratio_value(U_local: float, A_over_x: float, h: float, alpha: float) -> float:
    """U(x+I) / (C h A(x)/x) from given numbers."""
    if U_local == 0:
        return 0.0
    return U_local / (const_C(alpha) * h * A_over_x)


def srt_ratio(F: LatticeLaw, table: RenewalTable, x) -> np.ndarray | float:
    """U(x+I) / (C h A(x)/x) at lattice points x."""
    k = table.index(x)
    xs = np.asarray(x, dtype=float)
    out = table.u[k] / (const_C(F.alpha) * F.h * F.A(xs) / xs)
    return float(out) if np.ndim(out) == 0 else out


def integrated_ratio(F: LatticeLaw, table: RenewalTable, x) -> np.ndarray | float:
    """U([0, x]) / ((C/alpha) A(x))."""
    k = table.index(x)
    xs = np.asarray(x, dtype=float)
    out = table.cumulative()[k] / (const_C(F.alpha) / F.alpha * F.A(xs))
    return float(out) if np.ndim(out) == 0 else out


def riemann_C_delta(alpha: float, delta: float, phi: StableDensity | None = None) -> float:
    """alpha * integral over [delta, 1/delta] of z^(alpha-2) phi(1/z)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0,1)")
    phi = phi or StableDensity(alpha)

    def integrand(t):
        z = math.exp(t)
        return z ** (alpha - 1.0) * float(phi(np.array([1.0 / z]))[0])

    val, _ = integrate.quad(integrand, math.log(delta), -math.log(delta), epsabs=0.0, epsrel=1e-10,
                            limit=400)
    return alpha * val


# -- probes of the small-n estimates ---------------------------------------------------------


def _n_top(F: LatticeLaw, delta: float, x: float) -> int:
    return int(math.floor(float(F.A(np.array([delta * x]))[0]) + 1e-12))


def lemma41_probe(F: LatticeLaw, delta: float, x: float, ell: int, m: int) -> float:
    """sum over n <= A(delta x) of n^ell P(S_n in x+I, at least m big jumps), over A(x)^(ell+1)/x."""
    bj = big_jump_params(F.alpha)
    if ell + m < bj.kappa + 1:
        raise ValueError(f"need ell + m >= kappa + 1 = {bj.kappa + 1}")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0,1]")
    total = 0.0
    for n in range(1, _n_top(F, delta, x) + 1):
        split = bigjump_decomposition(F, n, x, k_max=max(m, 0))
        total += n ** ell * (split.total if m == 0 else split.at_least(m))
    return total / (float(F.A(np.array([x]))[0]) ** (ell + 1) / x)


def lemma41_partition(F: LatticeLaw, delta: float, x: float) -> tuple[float, float]:
    """(sum over n and k of the exactly-k masses, sum over n of P(S_n in x+I)) for one (delta, x)."""
    parts = whole = 0.0
    for n in range(1, _n_top(F, delta, x) + 1):
        split = bigjump_decomposition(F, n, x, k_max=n)
        parts += float(split.components.sum()) + split.remainder
        whole += split.total
    return parts, whole


def lemma42_probe(F: LatticeLaw, delta: float, x: float, ell: int) -> float:
    """sum over n <= A(delta x) of n^ell sup_z P(S_n in z+I, no big jump), over A(x)^(ell+1)/x.

    The sup runs over lattice z in [delta^(gamma/2) x, 4x].
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0,1]")
    bj = big_jump_params(F.alpha)
    z_lo = int(math.ceil(delta ** (bj.gamma / 2) * x / F.h - 1e-9))
    z_hi = int(math.floor(4 * x / F.h + 1e-9))
    total = 0.0
    for n in range(1, _n_top(F, delta, x) + 1):
        xi = bj.xi(float(F.A.inverse(float(n))), x)
        w = restricted_walk_pmf(F, n, xi, (0, z_hi))
        total += n ** ell * float(w.values[z_lo:].max())
    return total / (float(F.A(np.array([x]))[0]) ** (ell + 1) / x)


def lemma51_probe(F: LatticeLaw, n_list, z: float) -> dict:
    """Fit P(S_n in z+I) <= (C/a_n) exp(-c n/A(z)); c is half the empirical decay slope."""
    kz = int(round(z / F.h))
    if kz < 1:
        raise ValueError("z must be at least h")
    Az = float(F.A(np.array([z]))[0])
    ns, vals = [], []
    for n in n_list:
        p = float(walk_pmf(F, int(n), (kz, kz)).values[0])
        a_n = float(F.A.inverse(float(n)))
        ns.append(int(n))
        vals.append(a_n * p)
    ns_a = np.asarray(ns, dtype=float)
    vals_a = np.asarray(vals)
    ok = vals_a > 0
    if ok.sum() < 2:
        return {"C": float("inf"), "c": float("nan"), "degenerate": True, "n": ns, "scaled": vals}
    slope = float(np.polyfit(ns_a[ok] / Az, np.log(vals_a[ok]), 1)[0])
    if slope >= 0:
        return {"C": float(vals_a.max()), "c": 0.0, "degenerate": True, "slope": slope,
                "n": ns, "scaled": vals}
    c = -slope / 2.0
    C = float(np.max(vals_a * np.exp(c * ns_a / Az)))
    return {"C": C, "c": c, "degenerate": False, "slope": slope, "n": ns, "scaled": vals}


def necessity_probe(F: LatticeLaw, x_list, w: float, m_max: int = 3) -> dict:
    """(x/A(x)) F((x-w, x]) and (x/A(x)) P(S_m in (x-w, x]) for m = 2..m_max along x_list."""
    if w < F.h * (1 - 1e-12):
        raise ValueError("w must be at least h")
    xs = [float(x) for x in x_list]
    series = {1: [x / float(F.A(np.array([x]))[0]) * mass_interval(F, x - w, x) for x in xs]}
    if F.one_sided and m_max >= 2:
        k_top = int(round(max(xs) / F.h))
        f = F.pmf_range(0, k_top)
        cum_f = f
        for m in range(2, m_max + 1):
            cum_f = conv_full(cum_f, f, k_top + 1)
            c = np.concatenate([[0.0], np.cumsum(cum_f)])
            row = []
            for x in xs:
                kx = int(round(x / F.h))
                kw = int(math.floor((x - w) / F.h + 1e-9))
                mass = c[kx + 1] - c[max(kw + 1, 0)]
                row.append(x / float(F.A(np.array([x]))[0]) * max(mass, 0.0))
            series[m] = row
    trends = {m: series_trend(xs, v) for m, v in series.items()}
    return {"x": xs, "w": w, "series": series, "trend": trends}
