"""Lattice laws on hZ with dense pmf tables and exact analytic tails.

A law is a weighted mixture of parts. Every part answers pmf, P(X > k) and
P(X <= k) for integer lattice indices k (passed as float64 arrays so that
indices beyond 2^63 still work), which keeps far-tail queries exact without
materializing huge tables.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_laguerre

from .errors import InvariantError
from .regvar import SlowlyVarying, TailIndexFunction

_LAG_X, _LAG_W = roots_laguerre(48)


def _idx(k):
    return np.asarray(k, dtype=float)


# -- parts -------------------------------------------------------------------------


class ParetoTail:
    """Exact tail P(X > kh) = min(1, 1/A(kh)) on k >= 0."""

    def __init__(self, A: TailIndexFunction, h: float):
        self.A, self.h = A, float(h)
        self.total = 1.0
        self.support_min = 1.0

    def sf(self, k):
        k = _idx(k)
        with np.errstate(over="ignore"):
            out = np.minimum(1.0, np.exp(-self.A.log_A(np.maximum(k, 0.0) * self.h)))
        return np.where(k < 0, 1.0, out)

    def cdf(self, k):
        return 1.0 - self.sf(k)

    def pmf(self, k):
        k = _idx(k)
        out = np.zeros_like(k)
        pos = k >= 1
        if not np.any(pos):
            return out
        kk = k[pos]
        la_hi = self.A.log_A(kk * self.h)
        la_lo = self.A.log_A((kk - 1.0) * self.h)
        if self.A.pure_power:
            safe = (kk - 1.0) * self.h >= 1.0
            step = np.where(safe, self.A.alpha * np.log1p(1.0 / np.maximum(kk - 1.0, 1.0)), la_hi - la_lo)
        else:
            step = la_hi - la_lo
        sf_hi = np.minimum(1.0, np.exp(-la_hi))
        capped = la_lo <= 0.0
        val = np.where(capped, 1.0 - sf_hi, sf_hi * np.expm1(step))
        out[pos] = np.maximum(val, 0.0)
        return out


class DensityTail:
    """f(n) = 2 alpha/(n A(n)) for |n| > n0 with an atom at n0 (and -n0 when symmetric).

    The atom takes whatever mass is left so the part has total mass one.
    Positions n are integers placed at lattice index n*stride.
    """

    def __init__(self, A: TailIndexFunction, symmetric: bool = False, n0: int | None = None,
                 stride: int = 1, dense: int = 1 << 16, atom_floor: float = 0.1):
        self.A, self.symmetric, self.stride = A, symmetric, int(stride)
        self.dense = int(dense)
        n = np.arange(0, self.dense + 1, dtype=float)
        g = np.zeros_like(n)
        g[1:] = self._g(n[1:])
        tail = float(self._em_tail(np.array([float(self.dense)]))[0])
        # suffix[j] = sum_{n > j} g(n) for j in [0, dense]
        suffix = np.empty_like(n)
        suffix[-1] = tail
        suffix[:-1] = tail + np.cumsum(g[::-1])[::-1][1:]
        share = 0.5 if symmetric else 1.0
        if n0 is None:
            ok = np.nonzero(share - suffix[1:] >= atom_floor * share)[0]
            if ok.size == 0:
                raise InvariantError("no atom position n0 within the dense range")
            n0 = int(ok[0]) + 1
        self.n0 = int(n0)
        if not 1 <= self.n0 < self.dense:
            raise InvariantError(f"n0={n0} outside [1, {self.dense})")
        self.series = float(suffix[self.n0])
        self.atom = share - self.series
        if self.atom <= 0:
            raise InvariantError(f"series beyond n0={n0} exceeds the available mass")
        self._g_arr = np.where(n > self.n0, g, 0.0)
        self._suffix = suffix
        self.total = 1.0
        self.support_min = -np.inf if symmetric else float(self.n0 * self.stride)

    def _g(self, n):
        return 2.0 * self.A.alpha * np.exp(-self.A.log_A(n)) / n

    def _em_tail(self, N):
        """sum_{n > N} g(n) for large N by Euler-Maclaurin with a Laguerre integral."""
        N = np.asarray(N, dtype=float)
        a = self.A.alpha
        u = _LAG_X / a
        logN = np.log(N)[:, None]
        lx = logN + u[None, :]
        big = lx > math.log(1e300)
        with np.errstate(over="ignore", invalid="ignore"):
            la = self.A.log_A(np.exp(np.minimum(lx, math.log(1e300))))
        laN = self.A.log_A(N)[:, None]
        phi = np.where(big, 0.0, np.exp(a * u[None, :] + laN - la))
        integral = 2.0 * np.exp(-laN[:, 0]) * (phi @ _LAG_W)
        g = self._g(N)
        iota = N * self.A.log_derivative(N)
        g1 = -g * (1.0 + iota) / N
        with np.errstate(over="ignore"):
            g3 = -g * (1.0 + iota) * (2.0 + iota) * (3.0 + iota) / N ** 3
        return integral - g / 2.0 - g1 / 12.0 + g3 / 720.0

    def _right_sf(self, j):
        """Mass of positions n > j on the positive side, j >= 0 integer-valued."""
        j = np.asarray(j, dtype=float)
        out = np.empty_like(j)
        below = j < self.n0
        out[below] = self.atom + self.series
        mid = (~below) & (j <= self.dense)
        out[mid] = self._suffix[j[mid].astype(np.int64)]
        far = (~below) & ~mid
        if np.any(far):
            out[far] = self._em_tail(j[far])
        return out

    def _pmf_pos(self, n):
        n = np.asarray(n, dtype=float)
        out = np.zeros_like(n)
        out[n == self.n0] = self.atom
        mid = (n > self.n0) & (n <= self.dense)
        out[mid] = self._g_arr[n[mid].astype(np.int64)]
        far = n > self.dense
        if np.any(far):
            out[far] = self._g(n[far])
        return out

    def pmf(self, k):
        k = _idx(k)
        on = np.mod(k, self.stride) == 0
        n = np.floor_divide(k, self.stride)
        if self.symmetric:
            n = np.abs(n)
        else:
            on &= n > 0
        out = np.zeros_like(k)
        if np.any(on):
            out[on] = self._pmf_pos(n[on])
        return out

    def sf(self, k):
        j = np.floor_divide(_idx(k), self.stride)
        out = np.empty_like(j)
        pos = j >= 0
        out[pos] = self._right_sf(j[pos])
        neg = ~pos
        if np.any(neg):
            out[neg] = 1.0 - self._right_sf(-j[neg] - 1.0) if self.symmetric else 1.0
        return out

    def cdf(self, k):
        j = np.floor_divide(_idx(k), self.stride)
        out = np.empty_like(j)
        pos = j >= 0
        out[pos] = 1.0 - self._right_sf(j[pos])
        neg = ~pos
        if np.any(neg):
            out[neg] = self._right_sf(-j[neg] - 1.0) if self.symmetric else 0.0
        return out


class Atoms:
    """Finitely many point masses at lattice indices."""

    def __init__(self, index, mass):
        index = np.asarray(index, dtype=float)
        mass = np.asarray(mass, dtype=float)
        order = np.argsort(index, kind="stable")
        index, mass = index[order], mass[order]
        uniq, inv = np.unique(index, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, mass)
        if np.any(merged < 0):
            raise InvariantError("negative atom mass")
        self.index, self.mass = uniq, merged
        self._prefix = np.concatenate([[0.0], np.cumsum(merged)])
        self.total = float(self._prefix[-1])
        self.support_min = float(uniq[0]) if uniq.size else np.inf

    def pmf(self, k):
        k = _idx(k)
        pos = np.searchsorted(self.index, k)
        pos_c = np.minimum(pos, self.index.size - 1)
        hit = (pos < self.index.size) & (self.index[pos_c] == k)
        return np.where(hit, self.mass[pos_c], 0.0)

    def cdf(self, k):
        return self._prefix[np.searchsorted(self.index, _idx(k), side="right")]

    def sf(self, k):
        return self.total - self.cdf(k)


# -- the law ------------------------------------------------------------------------------


@dataclass(eq=False)
class LatticeLaw:
    family: str
    h: float
    parts: tuple
    A: TailIndexFunction | None = None
    p: float = 1.0
    q: float = 0.0
    params: dict = field(default_factory=dict)
    K_table: int = 1 << 16
    components: dict = field(default_factory=dict)
    tail_window: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.support_min = min(part.support_min for _, part in self.parts)
        lo = -self.K_table if not np.isfinite(self.support_min) else min(int(self.support_min), self.K_table)
        self.k_lo, self.k_hi = int(lo), int(self.K_table)
        ks = np.arange(self.k_lo, self.k_hi + 1, dtype=float)
        self.table = self._parts_pmf(ks)

    # parts-level evaluation
    def _parts_pmf(self, k):
        k = _idx(k)
        out = np.zeros_like(k)
        for w, part in self.parts:
            out += w * part.pmf(k)
        return out

    @property
    def alpha(self) -> float | None:
        return None if self.A is None else self.A.alpha

    @property
    def one_sided(self) -> bool:
        return self.support_min >= 0

    @property
    def two_sided(self) -> bool:
        return not self.one_sided

    def pmf(self, k):
        k = _idx(k)
        inside = (k >= self.k_lo) & (k <= self.k_hi)
        if np.all(inside):
            return self.table[(k - self.k_lo).astype(np.int64)]
        out = np.empty_like(k)
        out[inside] = self.table[(k[inside] - self.k_lo).astype(np.int64)]
        out[~inside] = self._parts_pmf(k[~inside])
        return out

    def pmf_range(self, k_lo: int, k_hi: int) -> np.ndarray:
        """pmf on the closed index range [k_lo, k_hi]."""
        if k_hi < k_lo:
            return np.zeros(0)
        a, b = max(k_lo, self.k_lo), min(k_hi, self.k_hi)
        if a <= b and a == k_lo and b == k_hi:
            return self.table[a - self.k_lo:b - self.k_lo + 1].copy()
        return self.pmf(np.arange(k_lo, k_hi + 1, dtype=float))

    def sf_index(self, k):
        """P(X > k h)."""
        k = _idx(k)
        out = np.zeros_like(k)
        for w, part in self.parts:
            out += w * part.sf(k)
        return out

    def cdf_index(self, k):
        """P(X <= k h)."""
        k = _idx(k)
        out = np.zeros_like(k)
        for w, part in self.parts:
            out += w * part.cdf(k)
        return out

    def index_of(self, x):
        return np.floor(np.asarray(x, dtype=float) / self.h + 1e-9)

    def sf(self, x):
        out = self.sf_index(self.index_of(x))
        return float(out) if np.ndim(out) == 0 else out

    def left_tail(self, x):
        """P(X <= -x)."""
        out = self.cdf_index(self.index_of(-np.asarray(x, dtype=float)))
        return float(out) if np.ndim(out) == 0 else out

    def atoms(self) -> np.ndarray:
        """Indices of finitely supported spike components (empty if none)."""
        idx = [part.index for _, part in self.parts if isinstance(part, Atoms)]
        return np.unique(np.concatenate(idx)) if idx else np.zeros(0)

    def lattice_span(self) -> float:
        """Largest v with the support inside vZ + a, read off the dense table."""
        nz = np.nonzero(self.table > 0)[0]
        if nz.size < 2:
            return self.h
        return float(np.gcd.reduce(np.diff(nz))) * self.h

    def arithmetic_span(self) -> float:
        nz = np.nonzero(self.table > 0)[0] + self.k_lo
        return float(np.gcd.reduce(np.abs(nz))) * self.h if nz.size else self.h

    @property
    def content_hash(self) -> str:
        if "_hash" not in self.meta:
            sha = hashlib.sha256(_header_core(self).encode())
            sha.update(np.ascontiguousarray(self.table).tobytes())
            self.meta["_hash"] = sha.hexdigest()[:16]
        return self.meta["_hash"]

    def summary(self) -> dict:
        out = {
            "family": self.family,
            "alpha": self.alpha,
            "h": self.h,
            "p": self.p,
            "q": self.q,
            "one_sided": self.one_sided,
            "K_table": self.K_table,
            "hash": self.content_hash,
        }
        out.update({k: v for k, v in self.meta.items() if not k.startswith("_")})
        return out


def mass_interval(F: LatticeLaw, a: float, b: float) -> float:
    """F((a, b])."""
    if a > b:
        raise ValueError("mass_interval requires a <= b")
    if a == b:
        return 0.0
    if np.isinf(a) and np.isinf(b):
        return 1.0
    if np.isinf(a):
        return float(F.cdf_index(F.index_of(b)))
    if np.isinf(b):
        return float(F.sf_index(F.index_of(a)))
    ka, kb = float(F.index_of(a)), float(F.index_of(b))
    if kb <= ka:
        return 0.0
    if kb - ka <= 200_000:
        return float(np.sum(F.pmf(np.arange(ka + 1, kb + 1))))
    if ka >= 0:
        return float(F.sf_index(ka) - F.sf_index(kb))
    return float(F.cdf_index(kb) - F.cdf_index(ka))


def check_law(F: LatticeLaw, window_points: int = 9) -> dict:
    """Verify nonnegativity, normalization, junction and tail-window consistency."""
    report = {}
    if np.any(F.table < 0):
        raise InvariantError("negative mass in pmf table")
    left = float(F.cdf_index(F.k_lo - 1))
    right = float(F.sf_index(F.k_hi))
    total = left + math.fsum(F.table) + right
    report["total_mass"] = total
    if abs(total - 1.0) > 1e-12:
        raise InvariantError(f"total mass {total!r} differs from 1 by more than 1e-12")
    m = 4096
    beyond = F._parts_pmf(np.arange(F.k_hi + 1, F.k_hi + m + 1, dtype=float))
    junction = abs(right - (math.fsum(beyond) + float(F.sf_index(F.k_hi + m))))
    report["junction_error"] = junction
    if junction > 1e-12:
        raise InvariantError(f"table/analytic tail mismatch {junction:.3e} at the junction")
    if F.A is not None and F.tail_window is not None:
        lo, hi = F.tail_window
        xs = np.geomspace(lo, hi, window_points)
        right_ratio = F.A(xs) * F.sf(xs) / F.p
        report["tail_ratio_right"] = right_ratio.tolist()
        bad = (right_ratio < 0.9) | (right_ratio > 1.1)
        if np.any(bad):
            x0 = xs[np.argmax(bad)]
            raise InvariantError(f"A(x)F(x,inf)/p = {right_ratio[np.argmax(bad)]:.4f} at x={x0:g} outside [0.9,1.1]")
        if F.q > 0:
            left_ratio = F.A(xs) * F.left_tail(xs) / F.q
            report["tail_ratio_left"] = left_ratio.tolist()
            bad = (left_ratio < 0.9) | (left_ratio > 1.1)
            if np.any(bad):
                x0 = xs[np.argmax(bad)]
                raise InvariantError(f"A(x)F(-inf,-x]/q = {left_ratio[np.argmax(bad)]:.4f} at x={x0:g} outside [0.9,1.1]")
    return report


# -- builders -------------------------------------------------------------------------------


def _stride(grid_h: float) -> int:
    m = round(1.0 / grid_h)
    if m < 1 or abs(m * grid_h - 1.0) > 1e-12:
        raise InvariantError(f"grid_h={grid_h} must be 1/m for an integer m >= 1")
    return int(m)


def _L_params(A: TailIndexFunction) -> dict:
    return {"alpha": A.alpha, "L.kind": A.L.kind, "L.params": A.L.to_text()}


def make_pareto_lattice(A: TailIndexFunction, h: float = 1.0, K_table: int = 1 << 16,
                        tail_window: tuple | None = (1e3, 1e8), check: bool = True) -> LatticeLaw:
    law = LatticeLaw("pareto", float(h), ((1.0, ParetoTail(A, h)),), A=A, p=1.0, q=0.0,
                     params={**_L_params(A), "h": float(h)}, K_table=K_table, tail_window=tail_window)
    if check:
        law.meta["check"] = check_law(law)
    return law


def make_finite_law(masses, k_min: int = 0, h: float = 1.0, A: TailIndexFunction | None = None) -> LatticeLaw:
    """Law with finitely many masses at indices k_min, k_min+1, ... (zeros allowed)."""
    masses = np.asarray(masses, dtype=float)
    idx = np.arange(k_min, k_min + masses.size, dtype=float)
    keep = masses > 0
    part = Atoms(idx[keep], masses[keep])
    if abs(part.total - 1.0) > 1e-12:
        raise InvariantError(f"finite law masses sum to {part.total!r}")
    hi = int(idx[keep].max()) if keep.any() else 0
    law = LatticeLaw("finite", float(h), ((1.0, part),), A=A, p=1.0, q=0.0,
                     params={"k_min": int(k_min), "masses": masses.tolist(), "h": float(h)},
                     K_table=max(hi, 1), tail_window=None)
    check_law(law)
    return law


@dataclass
class UaoSpec:
    A: TailIndexFunction
    z_seq: list
    eps_seq: list
    n0: int | None = None
    h: float = 1.0
    tail_window: tuple | None = None
    K_table: int = 1 << 16


def select_geometric(values) -> list:
    """Greedy indices n_k with values[n_{k+1}] <= values[n_k]/2."""
    sel = []
    for i, v in enumerate(values):
        if not sel or v <= 0.5 * values[sel[-1]]:
            sel.append(i)
    return sel


def make_uao_family(spec: UaoSpec) -> LatticeLaw:
    A = spec.A
    m = _stride(spec.h)
    f1 = DensityTail(A, symmetric=False, n0=spec.n0, stride=m)
    params = {**_L_params(A), "h": spec.h, "n0": f1.n0,
              "z_seq": [float(z) for z in spec.z_seq], "eps_seq": [float(e) for e in spec.eps_seq]}
    meta = {"n0": f1.n0, "c1": f1.series}
    if len(spec.eps_seq) == 0:
        # alone, f1(n) = 2a/(n A(n)) has tail 2/A; inside the mixture its weight 1/2 restores p = 1
        law = LatticeLaw("density-form", spec.h, ((1.0, f1),), A=A, p=2.0, q=0.0, params=params,
                         K_table=spec.K_table, components={"f1": f1}, tail_window=spec.tail_window, meta=meta)
        law.meta["check"] = check_law(law)
        return law
    z = np.asarray(spec.z_seq, dtype=float)
    eps = np.asarray(spec.eps_seq, dtype=float)
    if z.shape != eps.shape:
        raise InvariantError("z_seq and eps_seq must have equal length")
    if np.any(np.diff(z) <= 0) or np.any(eps <= 0):
        raise InvariantError("z_seq must increase and eps_seq must be positive")
    idx = np.round(z / spec.h)
    zr = idx * spec.h
    score = eps / A(zr)
    sel = select_geometric(score)
    if len(sel) < 3:
        raise InvariantError(f"greedy subsequence selection stalled after {len(sel)} indices")
    c2 = 1.0 / math.fsum(score[sel])
    f2 = Atoms(idx[sel], c2 * score[sel])
    meta.update({"c2": c2, "spike_constant": c2 / 2.0, "selected": [int(s) for s in sel],
                 "spikes": zr[sel].tolist(), "rounding": float(np.max(np.abs(zr - z)))})
    window = spec.tail_window or (10.0 * zr[sel[-3]], 10.0 * zr[sel[-1]])
    law = LatticeLaw("uao", spec.h, ((0.5, f1), (0.5, f2)), A=A, p=1.0, q=0.0, params=params,
                     K_table=spec.K_table, components={"f1": f1, "f2": f2}, tail_window=window, meta=meta)
    law.meta["check"] = check_law(law)
    return law


def _cluster_law(family, A, points_per_n, mass_fn, grid_h, n_max, K_table, tail_window, extra):
    m = _stride(grid_h)
    f1 = DensityTail(A, symmetric=True, stride=m)
    pts, counts, gaps = [], {}, []
    for n in range(1, n_max + 1):
        y = points_per_n(n)
        if y.size > 1:
            gaps.append(float(np.min(np.diff(y))))
        counts[n] = int(y.size)
        pts.append(y)
    min_gap = gaps[0] if gaps else math.inf
    if min_gap < grid_h:
        raise InvariantError(f"grid_h={grid_h} coarser than the smallest cluster gap {min_gap:.4g}")
    if gaps and min(gaps) < grid_h:
        raise InvariantError(f"cluster gap {min(gaps):.4g} below grid_h={grid_h}")
    y = np.concatenate(pts)
    idx = np.round(y / grid_h)
    yr = idx * grid_h
    raw = mass_fn(yr)
    c2 = 1.0 / math.fsum(raw)
    f2 = Atoms(idx, c2 * raw)
    meta = {"n0": f1.n0, "c1": f1.atom, "c2": c2, "cluster_sizes": counts,
            "rounding": float(np.max(np.abs(yr - y))), "n_max": n_max, **extra}
    params = {**_L_params(A), "grid_h": grid_h, "n_max": n_max}
    if tail_window is None:
        tail_window = (2.0 ** (n_max + 1), 2.0 ** (n_max + 12))
    law = LatticeLaw(family, grid_h, ((0.5, f1), (0.5, f2)), A=A, p=1.0, q=1.0, params=params,
                     K_table=K_table, components={"f1": f1, "f2": f2}, tail_window=tail_window, meta=meta)
    xs = 2.0 ** np.arange(8, n_max + 1, 4)
    meta["tail_profile"] = {int(round(math.log2(x))): float(r) for x, r in zip(xs, A(xs) * law.sf(xs))}
    law.meta["check"] = check_law(law)
    return law


def twosided_cluster(alpha: float, n: int) -> np.ndarray:
    """E_n = {2^n + k^(1/(1-2 alpha)) : 0 <= k < floor(2^(n(1-2 alpha)))}."""
    kmax = int(math.floor(2.0 ** (n * (1.0 - 2.0 * alpha)) + 1e-9))
    k = np.arange(kmax, dtype=float)
    return 2.0 ** n + k ** (1.0 / (1.0 - 2.0 * alpha))


def half_cluster(n: int) -> np.ndarray:
    """E_n = {2^n + e^sqrt(k) - 1 : 0 <= k < floor(log(1+2^n))^2}."""
    kmax = int(math.floor(math.log1p(2.0 ** n))) ** 2
    k = np.arange(kmax, dtype=float)
    return 2.0 ** n + np.expm1(np.sqrt(k))


def make_twosided_counterexample(alpha: float, grid_h: float = 1.0, n_max: int = 30,
                                 K_table: int = 1 << 16, tail_window: tuple | None = None) -> LatticeLaw:
    if not 0 < alpha < 0.5:
        raise InvariantError("the two-sided counterexample needs 0 < alpha < 1/2")
    A = TailIndexFunction(alpha)

    def mass(y):
        return 1.0 / (y ** (1.0 - alpha) * np.sqrt(np.log(y)))

    d = {n: 2.0 / (2.0 ** (n * alpha) * math.sqrt(math.log(2.0 ** n))) for n in range(1, n_max + 1)}
    return _cluster_law("twosided", A, lambda n: twosided_cluster(alpha, n), mass, grid_h, n_max,
                        K_table, tail_window, {"d_n": d})


def make_half_counterexample(grid_h: float = 1.0, n_max: int = 40, K_table: int = 1 << 16,
                             tail_window: tuple | None = None) -> LatticeLaw:
    A = TailIndexFunction(0.5, SlowlyVarying("reciprocal-log"))

    def mass(y):
        l1 = np.log1p(y)
        return 1.0 / (np.sqrt(y) * l1 * np.sqrt(np.log(l1)))

    return _cluster_law("half", A, half_cluster, mass, grid_h, n_max, K_table, tail_window, {})


def make_smooth_family(alpha: float, eps: float, h: float = 1.0, x_list=None, K_table: int = 1 << 16) -> LatticeLaw:
    """Pareto lattice law with a certified smoothness witness F((x,x+s])/F(x,inf) <= C (s/x)^(1-2a+e)."""
    from .criteria import smoothness_exponent

    if not 0 < alpha <= 0.5:
        raise InvariantError("smooth family needs alpha <= 1/2")
    if eps <= 0:
        raise InvariantError("eps must be positive")
    law = make_pareto_lattice(TailIndexFunction(alpha), h=h, K_table=K_table)
    law.family = "smooth"
    law.params["eps"] = float(eps)
    xs = x_list if x_list is not None else [2.0 ** j * h for j in range(10, 17)]
    rep = smoothness_exponent(law, xs, eps=eps)
    if not rep["certified"]:
        raise InvariantError(
            f"smoothness exponent {rep['exponent']:.4f} below {rep['required']:.4f}; "
            f"worst point (x, s) = {rep['worst']}"
        )
    law.meta["smoothness"] = rep
    return law


# -- registry and serialization ------------------------------------------------------------


def _A_from(params: dict) -> TailIndexFunction:
    return TailIndexFunction(float(params["alpha"]),
                             SlowlyVarying.from_text(params.get("L.kind", "constant"), params.get("L.params", "c=1.0")))


def build_law(family: str, params: dict, K_table: int = 1 << 16) -> LatticeLaw:
    if family == "pareto":
        return make_pareto_lattice(_A_from(params), h=float(params.get("h", 1.0)), K_table=K_table)
    if family == "smooth":
        return make_smooth_family(float(params["alpha"]), float(params["eps"]), h=float(params.get("h", 1.0)),
                                  K_table=K_table)
    if family in ("uao", "density-form"):
        spec = UaoSpec(_A_from(params), list(params.get("z_seq", [])), list(params.get("eps_seq", [])),
                       n0=int(params["n0"]) if params.get("n0") is not None else None,
                       h=float(params.get("h", 1.0)), K_table=K_table,
                       tail_window=tuple(params["tail_window"]) if params.get("tail_window") else None)
        return make_uao_family(spec)
    if family == "twosided":
        return make_twosided_counterexample(float(params["alpha"]), float(params.get("grid_h", 1.0)),
                                            int(params.get("n_max", 30)), K_table=K_table)
    if family == "half":
        return make_half_counterexample(float(params.get("grid_h", 1.0)), int(params.get("n_max", 40)),
                                        K_table=K_table)
    if family == "finite":
        return make_finite_law(params["masses"], int(params.get("k_min", 0)), float(params.get("h", 1.0)))
    raise InvariantError(f"unknown law family {family!r}")


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _header_core(F: LatticeLaw) -> str:
    lines = [f"family = {F.family}", f"alpha = {F.alpha!r}", f"h = {F.h!r}", f"p = {F.p!r}",
             f"q = {F.q!r}", f"K_table = {F.K_table}"]
    if F.A is not None:
        lines += [f"L.kind = {F.A.L.kind}", f"L.params = {F.A.L.to_text()}"]
    for key in sorted(F.params):
        if key in ("alpha", "h", "L.kind", "L.params"):
            continue
        lines.append(f"param.{key} = {_fmt(F.params[key])}")
    return "\n".join(lines) + "\n"


def law_to_text(F: LatticeLaw) -> str:
    buf = io.StringIO()
    buf.write(_header_core(F))
    buf.write(f"hash = {F.content_hash}\n---\nk,mass\n")
    ks = np.arange(F.k_lo, F.k_hi + 1)
    nz = F.table > 0
    for k, v in zip(ks[nz], F.table[nz]):
        buf.write(f"{int(k)},{float(v)!r}\n")
    return buf.getvalue()


_LIST_KEYS = {"z_seq", "eps_seq", "masses", "tail_window"}


def law_from_text(text: str) -> LatticeLaw:
    head, _, payload = text.partition("\n---\n")
    vals = {}
    for line in head.strip().splitlines():
        key, _, val = line.partition("=")
        vals[key.strip()] = val.strip()
    params = {}
    if vals.get("alpha") not in (None, "None"):
        params["alpha"] = float(vals["alpha"])
    if "L.kind" in vals:
        params["L.kind"] = vals["L.kind"]
        params["L.params"] = vals.get("L.params", "")
    params["h"] = float(vals["h"])
    for key, val in vals.items():
        if key.startswith("param."):
            name = key[6:]
            if name in _LIST_KEYS:
                params[name] = [float(x) for x in val.split(",") if x]
            elif name in ("n0", "n_max", "k_min"):
                params[name] = None if val == "None" else int(val)
            else:
                params[name] = float(val)
    law = build_law(vals["family"], params, K_table=int(vals["K_table"]))
    rows = np.loadtxt(io.StringIO(payload), delimiter=",", skiprows=1, ndmin=2)
    if rows.size:
        stored = np.zeros_like(law.table)
        stored[(rows[:, 0] - law.k_lo).astype(np.int64)] = rows[:, 1]
        diff = np.max(np.abs(stored - law.table) / np.maximum(law.table, 1e-300))
        if diff > 1e-12:
            raise InvariantError(f"stored pmf disagrees with the rebuilt law (relative {diff:.3e})")
    if vals.get("hash") != law.content_hash:
        raise InvariantError("content hash mismatch on load")
    check_law(law)
    return law
