"""Exact walk marginals, renewal masses and big-jump decompositions on lattices."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import integrate

from .dists import LatticeLaw
from .errors import BudgetError, InvariantError

MAX_POINTS = 1 << 25
DIRECT_LIMIT = 1 << 16


@dataclass
class DustLedger:
    """Negative round-off removed from transform-based convolutions."""

    clamped_total: float = 0.0
    clamped_max: float = 0.0
    events: int = 0

    def clamp(self, v: np.ndarray) -> np.ndarray:
        neg = v < 0
        if np.any(neg):
            dust = -v[neg]
            self.clamped_total += float(dust.sum())
            self.clamped_max = max(self.clamped_max, float(dust.max()))
            self.events += 1
            v[neg] = 0.0
        return v

    def as_dict(self) -> dict:
        return {"clamped_total": self.clamped_total, "clamped_max": self.clamped_max, "events": self.events}


def conv_full(a: np.ndarray, b: np.ndarray, n_out: int | None = None, ledger: DustLedger | None = None) -> np.ndarray:
    """Linear convolution of a and b, truncated to its first n_out entries."""
    full = a.size + b.size - 1
    if n_out is None or n_out > full:
        n_out = full
    if a.size == 0 or b.size == 0 or n_out <= 0:
        return np.zeros(max(n_out, 0))
    if min(a.size, b.size) <= 64 or a.size * b.size <= DIRECT_LIMIT:
        return np.convolve(a, b)[:n_out]
    size = sfft.next_fast_len(full, real=True)
    fa = sfft.rfft(a, size)
    fb = fa if (b is a) else sfft.rfft(b, size)
    out = sfft.irfft(fa * fb, size)[:n_out]
    if ledger is None:
        out[out < 0] = 0.0
    else:
        ledger.clamp(out)
    return out


# -- walk marginals -------------------------------------------------------------------------


@dataclass
class WalkPmf:
    n: int
    k_lo: int
    k_hi: int
    values: np.ndarray
    escaped_mass: float = 0.0
    h: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size != self.k_hi - self.k_lo + 1:
            raise ValueError("values do not match the window")

    def at(self, k) -> np.ndarray:
        k = np.asarray(k)
        inside = (k >= self.k_lo) & (k <= self.k_hi)
        out = np.zeros(k.shape)
        out[inside] = self.values[(k[inside] - self.k_lo).astype(np.int64)]
        return out

    @classmethod
    def delta(cls, k: int = 0, h: float = 1.0) -> "WalkPmf":
        return cls(0, k, k, np.ones(1), 0.0, h)


def _restrict(lo: int, vals: np.ndarray, window: tuple[int, int]) -> tuple[np.ndarray, float]:
    """Values of a pmf starting at index lo, restricted to window, and the mass left outside."""
    w_lo, w_hi = window
    out = np.zeros(w_hi - w_lo + 1)
    a, b = max(lo, w_lo), min(lo + vals.size - 1, w_hi)
    if a <= b:
        out[a - w_lo:b - w_lo + 1] = vals[a - lo:b - lo + 1]
    return out, max(0.0, float(vals.sum() - out.sum()))


def convolve(a: WalkPmf, b: WalkPmf, window: tuple[int, int] | None = None,
             ledger: DustLedger | None = None) -> WalkPmf:
    if abs(a.h - b.h) > 1e-12 * max(a.h, b.h):
        raise ValueError("incompatible spans")
    lo = a.k_lo + b.k_lo
    if window is None:
        window = (lo, a.k_hi + b.k_hi)
    if abs(window[0]) > 2 ** 62 or abs(window[1]) > 2 ** 62:
        raise OverflowError("window index overflow")
    if window[1] - window[0] + 1 > MAX_POINTS:
        raise BudgetError(f"window of {window[1] - window[0] + 1} points exceeds the budget {MAX_POINTS}")
    n_out = max(0, window[1] - lo + 1)
    full = conv_full(a.values, b.values, n_out, ledger)
    vals, lost = _restrict(lo, full, window)
    mass_in = float(a.values.sum() * b.values.sum())
    lost = max(0.0, mass_in - float(vals.sum()))
    return WalkPmf(a.n + b.n, window[0], window[1], vals, a.escaped_mass + b.escaped_mass + lost, a.h)


def _check_budget(size: int):
    if size > MAX_POINTS:
        raise BudgetError(f"window of {size} points exceeds the budget {MAX_POINTS}")


def _power_onesided(f: np.ndarray, n: int, ledger: DustLedger | None) -> np.ndarray:
    """(f^{*n}) on indices [0, len(f)) for a pmf f supported on [0, len(f))."""
    size = f.size
    result = np.zeros(size)
    result[0] = 1.0
    base = f.copy()
    first = True
    while n > 0:
        if n & 1:
            result = base.copy() if first else conv_full(result, base, size, ledger)
            first = False
        n >>= 1
        if n:
            base = conv_full(base, base, size, ledger)
    return result


def walk_pmf(F: LatticeLaw, n: int, window: tuple[int, int] | None = None,
             ledger: DustLedger | None = None, margin: int | None = None) -> WalkPmf:
    """P(S_n = kh) on a closed index window.

    Exact for one-sided laws (nothing outside [0, k_hi] can come back). For
    two-sided laws the walk is computed on a padded window and the values are
    lower bounds; escaped_mass then bounds everything not accounted for.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if window is None:
        window = (0, F.K_table)
    w_lo, w_hi = int(window[0]), int(window[1])
    _check_budget(w_hi - w_lo + 1)
    if n == 0:
        vals, lost = _restrict(0, np.ones(1), (w_lo, w_hi))
        return WalkPmf(0, w_lo, w_hi, vals, lost, F.h)
    if F.one_sided:
        top = max(w_hi, 0)
        f = F.pmf_range(0, top)
        powered = _power_onesided(f, n, ledger)
        vals, _ = _restrict(0, powered, (w_lo, w_hi))
        escaped = max(0.0, 1.0 - float(vals.sum()))
        return WalkPmf(n, w_lo, w_hi, vals, escaped, F.h)
    pad = (w_hi - w_lo + 1) if margin is None else int(margin)
    lo, hi = w_lo - pad, w_hi + pad
    _check_budget(hi - lo + 1)
    span = hi - lo
    f = WalkPmf(1, -span, span, F.pmf_range(-span, span), 0.0, F.h)
    f.escaped_mass = max(0.0, 1.0 - float(f.values.sum()))
    result = None
    base = f
    m = n
    while m > 0:
        if m & 1:
            result = _clip(base, lo, hi) if result is None else convolve(result, base, (lo, hi), ledger)
        m >>= 1
        if m:
            base = convolve(base, base, (lo - hi, hi - lo), ledger)
    vals, _ = _restrict(lo, result.values, (w_lo, w_hi))
    escaped = max(0.0, 1.0 - float(vals.sum()))
    return WalkPmf(n, w_lo, w_hi, vals, escaped, F.h)


def _clip(p: WalkPmf, lo: int, hi: int) -> WalkPmf:
    vals, lost = _restrict(p.k_lo, p.values, (lo, hi))
    return WalkPmf(p.n, lo, hi, vals, p.escaped_mass + lost, p.h)


def restricted_walk_pmf(F: LatticeLaw, n: int, xi: float, window: tuple[int, int] | None = None,
                        ledger: DustLedger | None = None) -> WalkPmf:
    """P(S_n = kh, max_i X_i <= xi), by powering the pmf truncated at xi (no renormalization)."""
    if window is None:
        window = (0, F.K_table)
    w_lo, w_hi = int(window[0]), int(window[1])
    _check_budget(w_hi - w_lo + 1)
    cut = int(math.floor(xi / F.h + 1e-9))
    if n == 0:
        vals, lost = _restrict(0, np.ones(1), (w_lo, w_hi))
        return WalkPmf(0, w_lo, w_hi, vals, lost, F.h)
    if not F.one_sided:
        raise ValueError("restricted walks are implemented for one-sided laws")
    top = max(w_hi, 0)
    f = F.pmf_range(0, top)
    if cut < top:
        f[max(cut + 1, 0):] = 0.0
    powered = _power_onesided(f, n, ledger)
    vals, _ = _restrict(0, powered, (w_lo, w_hi))
    return WalkPmf(n, w_lo, w_hi, vals, 0.0, F.h)


# -- renewal tables -----------------------------------------------------------------------------


@dataclass
class RenewalTable:
    K: int
    u: np.ndarray
    method: str
    h: float = 1.0
    law_hash: str = ""
    truncation_error: np.ndarray | None = None
    n_max: int | None = None
    ledger: dict = field(default_factory=dict)

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.u)

    def index(self, x) -> np.ndarray:
        k = np.round(np.asarray(x, dtype=float) / self.h)
        if np.any(np.abs(k * self.h - np.asarray(x, dtype=float)) > 1e-9 * np.maximum(1.0, np.abs(x))):
            raise ValueError("x must be a lattice point")
        if np.any(k < 0) or np.any(k > self.K):
            raise ValueError("x beyond the renewal table window")
        return k.astype(np.int64)


def _renewal_recursion(f: np.ndarray) -> np.ndarray:
    K = f.size - 1
    denom = 1.0 - f[0]
    u = np.zeros(K + 1)
    u[0] = 1.0 / denom
    g = f[1:]
    for k in range(1, K + 1):
        u[k] = np.dot(g[:k], u[k - 1::-1]) / denom
    return u


def _renewal_cdq(f: np.ndarray, ledger: DustLedger, block: int = 128) -> np.ndarray:
    K = f.size - 1
    denom = 1.0 - f[0]
    g = f.copy()
    g[0] = 0.0
    u = np.zeros(K + 1)
    acc = np.zeros(K + 1)
    acc[0] = 1.0

    def base(l, r):
        for k in range(l, r):
            s = acc[k]
            if k > l:
                s += np.dot(g[1:k - l + 1], u[k - 1:l - 1 if l > 0 else None:-1])
            u[k] = s / denom

    def solve(l, r):
        if r - l <= block:
            base(l, r)
            return
        mid = (l + r) // 2
        solve(l, mid)
        c = conv_full(u[l:mid], g[:r - l], r - l, ledger)
        acc[mid:r] += c[mid - l:r - l]
        solve(mid, r)

    solve(0, K + 1)
    return u


def renewal_measure_onesided(F: LatticeLaw, K: int, method: str = "fast") -> RenewalTable:
    """u(k) = U({kh}) for 0 <= k <= K."""
    if not F.one_sided:
        raise ValueError("renewal_measure_onesided needs a law supported on [0, inf)")
    _check_budget(K + 1)
    f = F.pmf_range(0, K)
    if f[0] >= 1.0:
        raise InvariantError("degenerate law with f(0) = 1")
    ledger = DustLedger()
    if method == "recursion":
        u = _renewal_recursion(f)
    elif method == "fast":
        u = _renewal_cdq(f, ledger)
    else:
        raise ValueError(f"unknown renewal method {method!r}")
    u = ledger.clamp(u)
    return RenewalTable(K, u, method, F.h, F.content_hash, ledger=ledger.as_dict())


def inverse_sum_tail(A, N: int) -> float:
    """Upper bound for sum_{n > N} 1/a_n, with a_n = A^{-1}(n)."""
    aN = float(A.inverse(float(N)))

    def integrand(v):
        s = math.exp(v)
        return float(A.derivative(np.array([s]))[0])

    # integrand decays like exp(-(1-a)v); beyond v = 700 the remaining mass is below 1e-100
    lv = math.log(aN)
    cuts = [lv, lv + 20.0, lv + 100.0, max(700.0, lv + 200.0)]
    return math.fsum(integrate.quad(integrand, a, b, limit=200)[0] for a, b in zip(cuts, cuts[1:]))


def renewal_measure_twosided(F: LatticeLaw, K: int, N_max: int, margin: int | None = None,
                             tol: float | None = None, probe_n: int = 64) -> RenewalTable:
    """u(k) = sum_{n <= N_max} P(S_n = kh) on [0, K] with a certified error bound.

    The walk is killed outside [-M, K+M]. Mass killed at step j can contribute
    at most G = sum_m min(1, C_sup/a_m) later visits to a point, and steps past
    N_max contribute at most C_sup * sum_{n > N_max} 1/a_n, where C_sup bounds
    a_n * max_k P(S_n = k) (certified on the first probe_n steps, then doubled).
    """
    if F.A is None:
        raise ValueError("two-sided renewal needs a tail index function")
    M = K if margin is None else int(margin)
    lo, hi = -M, K + M
    _check_budget(hi - lo + 1)
    span = hi - lo
    f = F.pmf_range(-span, span)
    ledger = DustLedger()
    v = np.zeros(hi - lo + 1)
    v[-lo] = 1.0
    u = np.zeros(K + 1)
    u += v[-lo:-lo + K + 1]
    killed_left = killed_right = 0.0
    lost_running = 0.0
    c_emp = 0.0
    can_return_right = F.support_min < 0
    can_return_left = F.sf_index(0) > 0
    size = sfft.next_fast_len(v.size + f.size - 1, real=True)
    ff = sfft.rfft(f, size)
    for n in range(1, N_max + 1):
        full = sfft.irfft(sfft.rfft(v, size) * ff, size)
        # full[i] is the mass at index lo + i - span
        new = full[span:span + v.size].copy()
        ledger.clamp(new)
        mass_before = float(v.sum())
        out_left = max(0.0, float(full[:span].clip(min=0).sum()))
        out_right = max(0.0, mass_before - float(new.sum()) - out_left)
        killed_left += out_left
        killed_right += out_right
        lost_running += out_left + out_right
        v = new
        u += v[-lo:-lo + K + 1]
        if n <= probe_n:
            a_n = float(F.A.inverse(float(n)))
            c_emp = max(c_emp, (float(v.max()) + lost_running) * a_n)
        if float(v.sum()) < 1e-300:
            break
    C_sup = 2.0 * c_emp
    m = np.arange(1, 200_001, dtype=float)
    a_m = F.A.inverse(m)
    G = float(np.sum(np.minimum(1.0, C_sup / a_m))) + C_sup * inverse_sum_tail(F.A, int(m[-1]))
    returning = (killed_left if can_return_left else 0.0) + (killed_right if can_return_right else 0.0)
    if F.one_sided and float(F.pmf_range(0, 0)[0]) == 0.0 and N_max >= K:
        remainder = 0.0
    else:
        remainder = C_sup * inverse_sum_tail(F.A, N_max)
    bound = returning * G + remainder
    if tol is not None and bound > tol:
        raise InvariantError(f"two-sided remainder bound {bound:.3e} exceeds tolerance {tol:.3e}")
    u = ledger.clamp(u)
    led = ledger.as_dict()
    led.update({"C_sup": C_sup, "killed_left": killed_left, "killed_right": killed_right,
                "remainder": remainder, "revisit_factor": G})
    return RenewalTable(K, u, "twosided-series", F.h, F.content_hash,
                        truncation_error=np.full(K + 1, bound), n_max=N_max, ledger=led)


# -- cache ------------------------------------------------------------------------------------------


def renewal_cached(F: LatticeLaw, K: int, method: str = "fast", cache_dir: str | Path | None = None) -> tuple[RenewalTable, bool]:
    """Renewal table with an on-disk cache keyed by (law hash, K, method)."""
    if cache_dir is None:
        return renewal_measure_onesided(F, K, method), False
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"renewal-{F.content_hash}-{K}-{method}.npz"
    if path.exists():
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("law_hash") == F.content_hash and int(meta["K"]) == K and meta["method"] == method:
                return RenewalTable(K, z["u"].copy(), method, float(meta["h"]), meta["law_hash"],
                                    ledger=meta["ledger"]), True
        path.unlink()
    table = renewal_measure_onesided(F, K, method)
    meta = {"law_hash": F.content_hash, "K": K, "method": method, "h": F.h, "ledger": table.ledger}
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(tmp, u=table.u, meta=np.array(json.dumps(meta, sort_keys=True)))
    tmp.replace(path)
    return table, False


# -- small-n sums and big jumps -------------------------------------------------------------------


def small_n_sums(F: LatticeLaw, x: float, deltas, ledger: DustLedger | None = None) -> dict:
    """(x/A(x)) * sum_{1 <= n <= A(delta x)} P(S_n in x+I) for each delta (one-sided laws)."""
    if not F.one_sided:
        raise ValueError("small_n_sum is exact for one-sided laws only")
    k = int(round(x / F.h))
    if abs(k * F.h - x) > 1e-9 * max(1.0, x) or k < 1:
        raise ValueError("x must be a positive lattice point")
    deltas = [float(d) for d in deltas]
    caps = {d: int(math.floor(float(F.A(np.array([d * x]))[0]) + 1e-12)) for d in deltas}
    n_top = max(caps.values())
    f = F.pmf_range(0, k)
    v = np.zeros(k + 1)
    v[0] = 1.0
    running = [0.0]
    for _ in range(n_top):
        v = conv_full(v, f, k + 1, ledger)
        running.append(running[-1] + float(v[k]))
        if not v.any():
            running.extend([running[-1]] * (n_top + 1 - len(running)))
            break
    scale = x / float(F.A(np.array([x]))[0])
    return {d: scale * running[caps[d]] if caps[d] >= 1 else 0.0 for d in deltas}


def small_n_sum(F: LatticeLaw, x: float, delta: float) -> float:
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0,1]")
    if x < F.h:
        raise ValueError("x must be at least h")
    return small_n_sums(F, x, [delta])[delta]


@dataclass
class BigJumpSplit:
    n: int
    x: float
    xi: float
    components: np.ndarray
    remainder: float
    total: float

    def at_least(self, m: int) -> float:
        return float(self.components[m:].sum() + self.remainder)


def bigjump_decomposition(F: LatticeLaw, n: int, x: float, k_max: int = 3, xi: float | None = None,
                          ledger: DustLedger | None = None) -> BigJumpSplit:
    """P(S_n in x+I, exactly k increments > xi) for k = 0..k_max, plus the remainder over k > k_max.

    Every k is computed directly as C(n,k) big^{*k} * small^{*(n-k)}, so the
    partition identity against P(S_n in x+I) is a genuine check.
    """
    from .diagnostics import big_jump_params

    if not F.one_sided:
        raise ValueError("big-jump decomposition is implemented for one-sided laws")
    if n < 1:
        raise ValueError("n must be positive")
    kx = int(round(x / F.h))
    if abs(kx * F.h - x) > 1e-9 * max(1.0, x):
        raise ValueError("x must be a lattice point")
    if xi is None:
        xi = big_jump_params(F.alpha).xi(float(F.A.inverse(float(n))), x)
    k_max = min(k_max, n)
    cut = int(math.floor(xi / F.h + 1e-9))
    f = F.pmf_range(0, kx)
    small = f.copy()
    big = f.copy()
    if cut < kx:
        small[max(cut + 1, 0):] = 0.0
        big[:max(cut + 1, 0)] = 0.0
    else:
        big[:] = 0.0
    min_big = max(cut + 1, 1)
    k_cap = min(n, kx // min_big) if big.any() else 0
    comps = np.zeros(max(k_cap, k_max) + 1)
    small_pow = _power_onesided(small, n - k_cap, ledger)
    big_pow = np.zeros(kx + 1)
    big_pow[0] = 1.0
    pows_small = {n - k_cap: small_pow}
    for j in range(n - k_cap + 1, n + 1):
        pows_small[j] = conv_full(pows_small[j - 1], small, kx + 1, ledger)
    for k in range(0, k_cap + 1):
        if k > 0:
            big_pow = conv_full(big_pow, big, kx + 1, ledger)
        val = float(conv_full(big_pow, pows_small[n - k], kx + 1, ledger)[kx])
        comps[k] = math.comb(n, k) * val
    total = float(_power_onesided(f, n, ledger)[kx])
    return BigJumpSplit(n, x, xi, comps[:k_max + 1], float(comps[k_max + 1:].sum()), total)


def uniform_bound(F: LatticeLaw, n_list, window_mult: float = 3.0) -> dict:
    """a_n * max_k P(S_n = kh) for each n (one-sided laws); certified constant = 2 * max."""
    out = {}
    for n in n_list:
        a_n = float(F.A.inverse(float(n)))
        top = int(math.ceil(window_mult * a_n / F.h))
        w = walk_pmf(F, int(n), (0, top))
        out[int(n)] = float(w.values.max()) * a_n
    return {"per_n": out, "certified": 2.0 * max(out.values())}
