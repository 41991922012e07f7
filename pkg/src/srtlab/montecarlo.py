"""Monte Carlo cross-checks with counter-based streams and batch-means errors."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dists import LatticeLaw
from .regvar import TailIndexFunction

MIN_BATCHES = 16
_TOP_INDEX = 1e300


def stream(seed: int, batch: int) -> np.random.Generator:
    """Independent Philox stream for one batch; depends only on (seed, batch)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(batch)])))


@dataclass
class McEstimate:
    target: str
    estimate: float
    stderr: float
    n_walks: int
    seed: int
    batches: int
    hits: int | None = None
    upper_95: float | None = None
    bias_bound: float = 0.0
    meta: dict = field(default_factory=dict)

    def covers(self, exact: float, k: float = 3.0) -> bool:
        if self.stderr == 0:
            if self.upper_95 is not None:
                return 0.0 <= exact <= self.upper_95 + self.bias_bound
            return abs(exact - self.estimate) <= 1e-12 + self.bias_bound
        return abs(exact - self.estimate) <= k * self.stderr + self.bias_bound

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class Sampler:
    """Inverse-CDF sampling: table lookup in the body, bisection on the analytic tails."""

    def __init__(self, F: LatticeLaw):
        self.F = F
        self.k0 = F.k_lo
        self.left = float(F.cdf_index(F.k_lo - 1))
        self.cdf = self.left + np.cumsum(F.table)
        self.right = float(F.sf_index(F.k_hi))

    @staticmethod
    def _search(ok, shape) -> np.ndarray:
        """Smallest distance d >= 1 with ok(d) true, by geometric bisection (ok is monotone)."""
        lo = np.zeros(shape)
        hi = np.full(shape, _TOP_INDEX)
        while True:
            mid = np.floor(np.sqrt(np.maximum(lo, 1.0) * hi))
            mid = np.clip(mid, lo + 1, hi - 1)
            # far out, float spacing exceeds 1 and the bracket stops at relative precision
            active = (hi - lo > 1) & (mid > lo) & (mid < hi)
            if not active.any():
                return hi
            good = ok(np.where(active, mid, hi)) & active
            hi = np.where(good, mid, hi)
            lo = np.where(active & ~good, mid, lo)

    def _right_tail(self, v: np.ndarray) -> np.ndarray:
        """Smallest k > k_hi with sf_index(k) <= v * sf_index(k_hi)."""
        target = v * self.right
        d = self._search(lambda d: self.F.sf_index(self.F.k_hi + d) <= target, v.shape)
        return self.F.k_hi + d

    def _left_tail(self, v: np.ndarray) -> np.ndarray:
        """Smallest k < k_lo with cdf_index(k) >= v * cdf_index(k_lo - 1)."""
        target = v * self.left
        # cdf(k_lo - d) >= target holds for small d; find the first d where it fails
        d = self._search(lambda d: self.F.cdf_index(self.k0 - d) < target, v.shape)
        return self.k0 - d + 1

    def indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        if self.right == 0:
            # finite right support: keep rounding in the last cumulative value inside the table
            u = np.minimum(u, np.nextafter(self.cdf[-1], 0.0))
        out = np.empty(size)
        body = (u >= self.left) & (u < self.left + (self.cdf[-1] - self.left))
        out[body] = self.k0 + np.searchsorted(self.cdf, u[body], side="right")
        hi_mask = u >= self.cdf[-1]
        if hi_mask.any():
            out[hi_mask] = self._right_tail(rng.random(int(hi_mask.sum())))
        lo_mask = u < self.left
        if lo_mask.any():
            out[lo_mask] = self._left_tail(rng.random(int(lo_mask.sum())))
        return out


def sample_increment(F: LatticeLaw, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Lattice values X h drawn from F."""
    return Sampler(F).indices(rng, size) * F.h


def _batches(n_walks: int, batches: int) -> list[int]:
    batches = max(MIN_BATCHES, int(batches))
    if n_walks < batches:
        raise ValueError(f"need at least {batches} walks")
    base, extra = divmod(int(n_walks), batches)
    return [base + (1 if b < extra else 0) for b in range(batches)]


def _batch_means(target, sums, counts, n_walks, seed, hits=None, **kw) -> McEstimate:
    means = np.array([s / c for s, c in zip(sums, counts)])
    est = math.fsum(sums) / n_walks
    B = len(means)
    se = float(np.std(means, ddof=1) / math.sqrt(B))
    upper = None
    if hits == 0:
        upper = 3.0 / n_walks
        se = 0.0
    return McEstimate(target, est, se, int(n_walks), int(seed), B, hits=hits, upper_95=upper, **kw)


def _run(fn, sizes, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, range(len(sizes))))
    return [fn(b) for b in range(len(sizes))]


def _cap_bias(F: LatticeLaw, N: int) -> float:
    from .renewal import inverse_sum_tail, walk_pmf

    c = 0.0
    for n in (1, 2, 4, 8, 16):
        a_n = float(F.A.inverse(float(n)))
        top = int(math.ceil(3 * a_n / F.h)) + 1
        w = walk_pmf(F, n, (-top, top))
        c = max(c, (float(w.values.max()) + w.escaped_mass) * a_n)
    return 2.0 * c * inverse_sum_tail(F.A, N)


def mc_renewal_estimate(F: LatticeLaw, x: float, window_w: float, n_walks: int, seed: int,
                        batches: int = MIN_BATCHES, threads: int = 1, n_cap: int = 10_000) -> McEstimate:
    """Mean number of n >= 0 with S_n in (x - w, x]."""
    sampler = Sampler(F)
    sizes = _batches(n_walks, batches)
    lo, hi = x - window_w, x
    one = F.one_sided
    if one and F.pmf(0.0) >= 1.0:
        raise ValueError("walk with only zero increments never leaves the origin")

    def batch(b):
        rng = stream(seed, b)
        m = sizes[b]
        S = np.zeros(m)
        count = ((S > lo) & (S <= hi)).astype(float)
        alive = np.ones(m, dtype=bool)
        steps = 0
        while alive.any() and steps < (n_cap if not one else 10 ** 9):
            idx = np.nonzero(alive)[0]
            S[idx] += sampler.indices(rng, idx.size) * F.h
            count[idx] += (S[idx] > lo) & (S[idx] <= hi)
            steps += 1
            if one:
                alive[idx] = S[idx] <= hi
        return math.fsum(count), m, steps

    res = _run(batch, sizes, threads)
    bias = 0.0 if one else _cap_bias(F, n_cap)
    est = _batch_means("U(x+I)", [r[0] for r in res], [r[1] for r in res], n_walks, seed,
                       bias_bound=bias, meta={"x": x, "w": window_w, "max_steps": max(r[2] for r in res),
                                              "n_cap": None if one else n_cap})
    return est


def mc_event_probability(F: LatticeLaw, n: int, x: float, n_walks: int, seed: int, k: int | None = None,
                         xi: float | None = None, batches: int = MIN_BATCHES, threads: int = 1) -> McEstimate:
    """Frequency of {S_n in x+I, exactly k increments > xi} (any count when k is None)."""
    if k is not None and not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    if xi is None and k is not None:
        from .diagnostics import big_jump_params
        xi = big_jump_params(F.alpha).xi(float(F.A.inverse(float(n))), x)
    sampler = Sampler(F)
    sizes = _batches(n_walks, batches)
    lo, hi = x - F.h, x

    def batch(b):
        rng = stream(seed, b)
        m = sizes[b]
        S = np.zeros(m)
        big = np.zeros(m, dtype=np.int64)
        for _ in range(n):
            X = sampler.indices(rng, m) * F.h
            S += X
            if xi is not None:
                big += X > xi
        hit = (S > lo + 1e-9 * F.h) & (S <= hi + 1e-9 * F.h)
        if k is not None:
            hit &= big == k
        return float(hit.sum()), m

    res = _run(batch, sizes, threads)
    hits = int(sum(r[0] for r in res))
    target = "P(S_n in x+I)" if k is None else f"P(S_n in x+I, B^{k})"
    return _batch_means(target, [r[0] for r in res], [r[1] for r in res], n_walks, seed, hits=hits,
                        meta={"n": n, "x": x, "k": k, "xi": xi})


def mc_tail_frequency(F: LatticeLaw, x: float, n_draws: int, seed: int, batches: int = MIN_BATCHES) -> McEstimate:
    """Empirical F(x, inf)."""
    sampler = Sampler(F)
    sizes = _batches(n_draws, batches)
    res = [(float((sampler.indices(stream(seed, b), m) * F.h > x).sum()), m) for b, m in enumerate(sizes)]
    hits = int(sum(r[0] for r in res))
    return _batch_means("F(x,inf)", [r[0] for r in res], [r[1] for r in res], n_draws, seed, hits=hits,
                        meta={"x": x})


# -- coverage suite ---------------------------------------------------------------------------


def coverage_suite(seed: int = 20240, n_walks: int = 32_000, threads: int = 1) -> list[dict]:
    """20 (law, target) pairs with exact values from the deterministic engine."""
    from .dists import make_finite_law, make_pareto_lattice
    from .renewal import bigjump_decomposition, renewal_measure_onesided, walk_pmf

    two = make_finite_law([0.5, 0.5], 1)
    three = make_finite_law([0.2, 0.5, 0.3], 1)
    skew = make_finite_law([0.1, 0.0, 0.6, 0.0, 0.0, 0.3], 0)
    jumps = make_finite_law([0.0, 0.5] + [0.0] * 8 + [0.5], 0)
    p5 = make_pareto_lattice(TailIndexFunction(0.5), K_table=1 << 14)
    p7 = make_pareto_lattice(TailIndexFunction(0.7), K_table=1 << 14)
    p3 = make_pareto_lattice(TailIndexFunction(0.3), K_table=1 << 14)

    def u_exact(F, x):
        return float(renewal_measure_onesided(F, int(x), method="recursion").u[int(x)])

    def s_exact(F, n, x):
        return float(walk_pmf(F, n, (int(x), int(x))).values[0])

    cases = []
    for F, name, x in [(two, "two-point", 10), (two, "two-point", 50), (three, "three-point", 40),
                       (skew, "skew", 30), (p5, "pareto-0.5", 256), (p5, "pareto-0.5", 1024),
                       (p7, "pareto-0.7", 512), (p3, "pareto-0.3", 128)]:
        cases.append((f"U {name} x={x}", lambda F=F, x=x, s=len(cases):
                      mc_renewal_estimate(F, x, 1.0, n_walks // 4, seed + s, threads=threads),
                      lambda F=F, x=x: u_exact(F, x)))
    for F, name, n, x in [(two, "two-point", 4, 6), (three, "three-point", 3, 5), (skew, "skew", 3, 7),
                          (p5, "pareto-0.5", 2, 4), (p7, "pareto-0.7", 3, 6), (p3, "pareto-0.3", 2, 5)]:
        cases.append((f"S_{n}={x} {name}", lambda F=F, n=n, x=x, s=len(cases):
                      mc_event_probability(F, n, x, n_walks, seed + s, threads=threads),
                      lambda F=F, n=n, x=x: s_exact(F, n, x)))
    for F, name, n, x, k, xi in [(jumps, "jumps", 2, 11, 1, 5.0), (jumps, "jumps", 2, 20, 2, 5.0),
                                 (p5, "pareto-0.5", 2, 16, 1, 8.0), (p7, "pareto-0.7", 3, 12, 0, 6.0)]:
        cases.append((f"B^{k} {name} n={n} x={x}", lambda F=F, n=n, x=x, k=k, xi=xi, s=len(cases):
                      mc_event_probability(F, n, x, n_walks, seed + s, k=k, xi=xi, threads=threads),
                      lambda F=F, n=n, x=x, k=k, xi=xi: float(bigjump_decomposition(F, n, x, k_max=n, xi=xi).components[k])))
    for F, name, x in [(p5, "pareto-0.5", 100.0), (p3, "pareto-0.3", 1000.0)]:
        cases.append((f"tail {name} x={x:g}", lambda F=F, x=x, s=len(cases):
                      mc_tail_frequency(F, x, n_walks, seed + s),
                      lambda F=F, x=x: float(F.sf(x))))
    out = []
    for name, run, exact in cases:
        est = run()
        ex = exact()
        out.append({"case": name, "estimate": est.estimate, "stderr": est.stderr, "exact": ex,
                    "covered": est.covers(ex), "record": est})
    return out
