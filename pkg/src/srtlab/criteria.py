"""Lattice-exact evaluation of local-tail criteria and the (eta, x) trend classifier.

Cell convention: r is constant on each cell ((k-1)h, kh] with the value r(kh),
so every integral below is a finite sum with closed-form cell weights.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dists import LatticeLaw, mass_interval
from .errors import BudgetError
from .regvar import TailIndexFunction, cell_integrals, chi_u, eval_Lstar

SCAN_BUDGET = 1 << 24

GROWTH_SLOPE = 0.05
GROWTH_R2 = 0.5
VANISH_DROP = 0.30
BOUNDED_SLOPE = 0.05

DEFAULT_ETAS = (0.4, 0.2, 0.1, 0.05)
DEFAULT_XS = tuple(2.0 ** j for j in range(12, 23))


def _k(F: LatticeLaw, x: float) -> int:
    return int(F.index_of(x))


def _Ax(F: LatticeLaw, x):
    return F.A(np.asarray(x, dtype=float))


# -- r and its integrals -----------------------------------------------------------------


def r_values(F: LatticeLaw, k_lo: int, k_hi: int) -> np.ndarray:
    """r(kh) for k in [k_lo, k_hi]; zero where the right tail is exhausted."""
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    f = F.pmf_range(k_lo, k_hi) if k_hi >= k_lo else np.zeros(0)
    sf = F.sf_index(k)
    out = np.zeros_like(k)
    ok = sf > 0
    out[ok] = f[ok] * k[ok] * F.h / sf[ok]
    return out


def r_func(F: LatticeLaw, x: float) -> float:
    """F((x-h, x]) / (F(x, inf)/x) at a lattice point x >= h."""
    if x < F.h * (1 - 1e-12):
        raise ValueError("r_func requires x >= h")
    k = _k(F, x)
    sf = float(F.sf_index(k))
    if sf <= 0:
        raise ValueError(f"F(x, inf) = 0 at x={x:g}: query beyond the support")
    return float(F.pmf(k)) * k * F.h / sf


def R_T(F: LatticeLaw, a: float, b: float, T: float) -> float:
    """Integral over (a, b] of (r(y) - T)^+ with the cell convention."""
    if a > b:
        raise ValueError("R_T requires a <= b")
    a = max(a, 0.0)
    if b <= a:
        return 0.0
    h = F.h
    k_lo = int(math.floor(a / h + 1e-12)) + 1
    k_hi = int(math.ceil(b / h - 1e-12))
    if k_hi - k_lo > SCAN_BUDGET:
        raise BudgetError(f"R_T over {k_hi - k_lo} cells exceeds the scan budget")
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    width = np.minimum(k * h, b) - np.maximum((k - 1) * h, a)
    excess = np.maximum(r_values(F, k_lo, k_hi) - T, 0.0)
    return float(math.fsum(excess * np.maximum(width, 0.0)))


def doney_sup(F: LatticeLaw, x_max: float) -> dict:
    """sup of r over lattice points in [h, x_max] and where it is attained."""
    k_max = _k(F, x_max)
    if k_max < 1:
        raise ValueError("x_max must be at least h")
    dense_hi = min(k_max, SCAN_BUDGET)
    best, arg = 0.0, 1
    for s in range(1, dense_hi + 1, 1 << 20):
        e = min(dense_hi, s + (1 << 20) - 1)
        r = r_values(F, s, e)
        i = int(np.argmax(r))
        if r[i] > best:
            best, arg = float(r[i]), s + i
    extra = []
    if k_max > dense_hi:
        extra = list(np.unique(np.geomspace(dense_hi, k_max, 4096).astype(np.int64)))
        atoms = F.atoms()
        extra += [int(a) for a in atoms if dense_hi < a <= k_max]
        for k in extra:
            r = r_values(F, int(k), int(k))[0]
            if r > best:
                best, arg = float(r), int(k)
    return {"sup": best, "argmax": arg * F.h, "dense_points": dense_hi, "sparse_points": len(extra)}


def chi_diag(F: LatticeLaw, eta: float, x: float, T: float) -> float:
    """R_T((1-eta)x, x)/A(x)^2, times u(x) when alpha = 1/2."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0,1)")
    val = R_T(F, (1 - eta) * x, x, T) / float(_Ax(F, x)) ** 2
    if abs(F.alpha - 0.5) < 1e-12:
        val *= chi_u(F.A, x)
    return val


# -- necessary-and-sufficient diagnostics ------------------------------------------------


def _s_range(F: LatticeLaw, eta: float, x: float) -> np.ndarray:
    """Lattice offsets j with 1 <= j h < eta x."""
    h = F.h
    j_lo = max(1, int(math.ceil(1.0 / h - 1e-12)))
    j_hi = int(math.ceil(eta * x / h - 1e-12)) - 1
    if j_hi - j_lo > SCAN_BUDGET:
        raise BudgetError(f"{j_hi - j_lo} offsets exceed the scan budget")
    return np.arange(j_lo, j_hi + 1, dtype=np.int64)


def _weighted_side(F: LatticeLaw, eta: float, x: float, sign: int) -> float:
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0,1)")
    j = _s_range(F, eta, x)
    if j.size == 0:
        return 0.0
    s = j * F.h
    k = _k(F, x) + sign * j
    w = _Ax(F, s) ** 2 / s
    f = F.pmf(k.astype(float))
    return float(x / _Ax(F, x) * math.fsum(w * f))


def ns_diag_density(F: LatticeLaw, eta: float, x: float) -> float:
    """(x/A(x)) sum over lattice s in [1, eta x) of A(s)^2/s f(x - s)."""
    return _weighted_side(F, eta, x, -1)


def ns_diag_twosided(F: LatticeLaw, eta: float, x: float) -> float:
    """ns_diag_density plus the mirrored term with f(x + s) when the law has a left tail."""
    base = _weighted_side(F, eta, x, -1)
    if F.q > 0:
        base += _weighted_side(F, eta, x, +1)
    return base


def ns_diag_interval(F: LatticeLaw, eta: float, x: float) -> float:
    """(x/A(x)) integral over [1, eta x] of A(s)^2/s^2 F((x-s, x]) ds, exact on cells."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0,1)")
    h = F.h
    top = eta * x
    if top <= 1:
        return 0.0
    j_lo = int(math.floor(1.0 / h))
    j_hi = int(math.ceil(top / h - 1e-12)) - 1
    if j_hi - j_lo > SCAN_BUDGET:
        raise BudgetError(f"{j_hi - j_lo} cells exceed the scan budget")
    kx = _k(F, x)
    # G(j) = F((x - (j+1)h, x]) holds for s in (jh, (j+1)h]
    masses = F.pmf(np.arange(kx, kx - j_hi - 1, -1, dtype=float))
    G = np.cumsum(masses)[j_lo:]
    j = np.arange(j_lo, j_hi + 1, dtype=float)
    edges = np.concatenate([[max(1.0, j_lo * h)], np.minimum((j[:-1] + 1) * h, top), [top]])
    edges = np.maximum(edges, 1.0)
    wts = cell_integrals(F.A, edges, 2)
    return float(x / _Ax(F, x) * math.fsum(G * wts))


def ns_diag_r(F: LatticeLaw, eta: float, x: float, T: float = 0.0) -> float:
    """(1/A(x)^2) integral over [1, eta x) of A(s)^2/s (r(x-s) - T)^+ ds with the cell convention."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0,1)")
    h = F.h
    top = eta * x
    if top <= 1:
        return 0.0
    # cell ((k-1)h, kh] of y = x - s corresponds to s in [x - kh, x - (k-1)h)
    k_hi = int(math.floor((x - 1.0) / h + 1e-12))
    k_lo = max(1, int(math.floor((x - top) / h + 1e-12)) + 1)
    if k_hi < k_lo:
        return 0.0
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    lo = np.maximum(x - k * h, 1.0)
    hi = np.minimum(x - (k - 1) * h, top)
    ok = hi > lo
    r = np.maximum(r_values(F, k_lo, k_hi) - T, 0.0)
    wts = np.zeros_like(k)
    if np.any(ok):
        e = np.empty(2 * ok.sum())
        e[0::2], e[1::2] = lo[ok], hi[ok]
        wts[ok] = cell_integrals(F.A, e, 1)[0::2]
    return float(math.fsum(r * wts) / float(_Ax(F, x)) ** 2)


def cutoff_bound(F: LatticeLaw, eta: float, x: float, T: float) -> float:
    """Upper bound on |ns_diag_r(T) - ns_diag_r(0)|: T times the weight integral over A(x)^2."""
    top = eta * x
    if top <= 1:
        return 0.0
    return T * float(cell_integrals(F.A, np.array([1.0, top]), 1)[0]) / float(_Ax(F, x)) ** 2


def nec_profile(F: LatticeLaw, x_list, w: float) -> np.ndarray:
    """(x/A(x)) F((x-w, x]) along x_list."""
    xs = np.asarray(x_list, dtype=float)
    return np.array([x / float(_Ax(F, x)) * mass_interval(F, x - w, x) for x in xs])


# -- alpha = 1/2 and smoothness ------------------------------------------------------------


def half_condition(A: TailIndexFunction, x_max: float, points: int = 200) -> dict:
    """sup over a geometric grid of L*(x)/L(x), with L the slowly varying factor of A."""
    if abs(A.alpha - 0.5) > 1e-12:
        raise ValueError("half_condition applies only to alpha = 1/2")
    if x_max <= 1:
        raise ValueError("x_max must exceed 1")
    xs = np.geomspace(1.0, x_max, points)
    ratio = np.asarray(eval_Lstar(A, xs)) / A.L(xs)
    i = int(np.argmax(ratio))
    half = points // 2
    grows = ratio[half:].max() > 1.01 * ratio[:half].max()
    verdict = "fails on probed range" if grows else "holds on probed range"
    return {"sup_ratio": float(ratio[i]), "witness_x": float(xs[i]), "verdict": verdict,
            "x": xs.tolist(), "ratio": ratio.tolist()}


def u_over_Lstar_sq(A: TailIndexFunction, x_list) -> np.ndarray:
    """chi_u(x)/L*(x)^2 along x_list (x > 1)."""
    xs = np.asarray(x_list, dtype=float)
    return np.array([chi_u(A, x) for x in xs]) / np.asarray(eval_Lstar(A, xs)) ** 2


def dyadic_offsets(x: float, h: float, depth: int = 10) -> list:
    return [x / 2 ** j for j in range(1, depth + 1) if x / 2 ** j >= h]


def smoothness_exponent(F: LatticeLaw, x_list, eps: float, s_rule=dyadic_offsets,
                        min_points: int = 6) -> dict:
    """Fit F((x, x+s])/F(x, inf) ~ C (s/x)^e over the sample and compare e with 1 - 2 alpha + eps."""
    if F.alpha > 0.5 + 1e-12:
        raise ValueError("smoothness exponent applies to alpha <= 1/2")
    required = 1.0 - 2.0 * F.alpha + eps
    rows = []
    for x in x_list:
        tail = float(F.sf(x))
        if tail <= 0:
            continue
        for s in s_rule(float(x), F.h):
            m = mass_interval(F, x, x + s)
            rows.append((float(x), float(s), m / tail))
    pos = [(x, s, q) for x, s, q in rows if q > 0]
    if len(pos) < min_points:
        return {"exponent": float("nan"), "required": required, "certified": False,
                "inconclusive": True, "C": float("inf"), "worst": None, "points": len(pos),
                "max_residual": float("nan")}
    u = np.log([s / x for x, s, _ in pos])
    v = np.log([q for _, _, q in pos])
    slope, icpt = np.polyfit(u, v, 1)
    resid = v - (slope * u + icpt)
    bound = np.exp(v - required * u)
    iw = int(np.argmax(bound))
    return {"exponent": float(slope), "required": required,
            "certified": bool(slope >= required), "inconclusive": False,
            "C": float(bound[iw]), "worst": (pos[iw][0], pos[iw][1]), "points": len(pos),
            "max_residual": float(np.abs(resid).max()),
            "anchor_ok": all(q <= 1.0 + 1e-12 for _, _, q in rows)}


# -- grids and the trend classifier -------------------------------------------------------

CRITERIA = {
    "ns_density": ns_diag_density,
    "ns_interval": ns_diag_interval,
    "ns_twosided": ns_diag_twosided,
    "ns_r": ns_diag_r,
    "chi": chi_diag,
}


@dataclass
class CriterionGrid:
    criterion: str
    eta_list: list
    x_list: list
    Q: np.ndarray
    T: float | None = None
    trend: str | None = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        if self.Q.shape != (len(self.eta_list), len(self.x_list)):
            raise ValueError("Q must have shape (len(eta_list), len(x_list))")
        if np.any(self.Q < 0) or not np.all(np.isfinite(self.Q)):
            raise ValueError("criterion values must be finite and nonnegative")
        if any(b >= a for a, b in zip(self.eta_list, self.eta_list[1:])):
            raise ValueError("eta_list must be strictly decreasing")

    def classify(self) -> str:
        self.trend, self.stats = classify_trend(self, with_stats=True)
        return self.trend

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["criterion", "eta", "x", "Q"])
            for i, eta in enumerate(self.eta_list):
                for j, x in enumerate(self.x_list):
                    w.writerow([self.criterion, repr(float(eta)), repr(float(x)), repr(float(self.Q[i, j]))])

    def sidecar(self) -> dict:
        if self.trend is None:
            self.classify()
        return {"criterion": self.criterion, "T": self.T, "trend": self.trend, **self.stats,
                "thresholds": {"growth_slope": GROWTH_SLOPE, "growth_r2": GROWTH_R2,
                               "vanish_drop_per_halving": VANISH_DROP, "bounded_slope": BOUNDED_SLOPE}}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True))

    @classmethod
    def from_csv(cls, path) -> "CriterionGrid":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        etas = sorted({float(r["eta"]) for r in rows}, reverse=True)
        xs = sorted({float(r["x"]) for r in rows})
        Q = np.zeros((len(etas), len(xs)))
        for r in rows:
            Q[etas.index(float(r["eta"])), xs.index(float(r["x"]))] = float(r["Q"])
        return cls(rows[0]["criterion"], etas, xs, Q)


def _fit(u, v):
    slope, icpt = np.polyfit(u, v, 1)
    pred = slope * u + icpt
    ss = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(np.sum((v - pred) ** 2)) / ss if ss > 0 else 0.0
    return float(slope), r2


def classify_trend(grid: CriterionGrid, with_stats: bool = False):
    """growing / vanishing / bounded / inconclusive from fixed-threshold regressions."""
    if len(grid.x_list) < 3:
        raise ValueError("classification needs at least 3 x points per eta")
    Q = grid.Q
    u = np.log(np.asarray(grid.x_list, dtype=float))
    fits = [_fit(u, Q[i]) for i in range(Q.shape[0])]
    slopes = [f[0] for f in fits]
    r2 = [f[1] for f in fits]
    last = Q[:, -1]
    drops = []
    vanish = True
    for i in range(len(grid.eta_list) - 1):
        halvings = math.log2(grid.eta_list[i] / grid.eta_list[i + 1])
        allowed = (1.0 - VANISH_DROP) ** halvings
        if last[i] == 0:
            drops.append(0.0 if last[i + 1] == 0 else float("inf"))
            vanish &= last[i + 1] == 0
        else:
            with np.errstate(over="ignore"):
                ratio = last[i + 1] / last[i]
            drops.append(float(ratio))
            vanish &= ratio <= allowed + 1e-12
    if slopes[-1] > GROWTH_SLOPE and r2[-1] > GROWTH_R2:
        label = "growing"
    elif vanish:
        label = "vanishing"
    elif all(abs(s) <= BOUNDED_SLOPE for s in slopes):
        label = "bounded"
    else:
        label = "inconclusive"
    if not with_stats:
        return label
    return label, {"slopes": slopes, "r2": r2, "eta_ratios_at_largest_x": drops}


def series_trend(x_list, values) -> str:
    """Single-series version of the classifier: the same slope and drop thresholds along x."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("classification needs at least 3 x points")
    if not np.any(v):
        return "vanishing"
    slope, r2 = _fit(np.log(np.asarray(x_list, dtype=float)), v)
    if slope > GROWTH_SLOPE and r2 > GROWTH_R2:
        return "growing"
    if v[0] > 0 and v[-1] <= (1.0 - VANISH_DROP) * v[0] and slope < 0:
        return "vanishing"
    if abs(slope) <= BOUNDED_SLOPE:
        return "bounded"
    return "inconclusive"


def eta_exponent(grid: CriterionGrid) -> float:
    """Fitted exponent b in Q(eta, x_max) ~ c eta^b over the eta list."""
    q = grid.Q[:, -1]
    ok = q > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(grid.eta_list)[ok]), np.log(q[ok]), 1)[0])


def evaluate_grid(F: LatticeLaw, criterion: str, eta_list=DEFAULT_ETAS, x_list=DEFAULT_XS,
                  T: float | None = None, threads: int = 1) -> CriterionGrid:
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; choose from {sorted(CRITERIA)}")
    fn = CRITERIA[criterion]
    if criterion != "chi" and eta_list and x_list:
        _s_range(F, max(eta_list), max(x_list))  # fail fast before any work
    cells = [(i, j, eta, x) for i, eta in enumerate(eta_list) for j, x in enumerate(x_list)]

    def one(c):
        i, j, eta, x = c
        if criterion in ("ns_r", "chi"):
            return i, j, fn(F, eta, x, T or 0.0)
        return i, j, fn(F, eta, x)

    Q = np.zeros((len(eta_list), len(x_list)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, cells))
    else:
        results = [one(c) for c in cells]
    for i, j, v in results:
        Q[i, j] = v
    grid = CriterionGrid(criterion, list(map(float, eta_list)), list(map(float, x_list)), Q, T=T)
    grid.classify()
    return grid
