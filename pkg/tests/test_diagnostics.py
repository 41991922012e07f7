import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srtlab.diagnostics import (big_jump_params, const_C, integrated_ratio, lemma41_partition, lemma41_probe,
                                lemma42_probe, lemma51_probe, necessity_probe, riemann_C_delta, srt_ratio,
                                srt_ratio_value)
from srtlab.dists import make_finite_law
from srtlab.regvar import TailIndexFunction
from srtlab.renewal import renewal_measure_onesided, small_n_sums

ALPHA_GRID = np.linspace(0.01, 0.99, 97)


def test_const_C():
    assert const_C(0.5) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert const_C(0.3) == pytest.approx(0.3 * math.sin(0.3 * math.pi) / math.pi, rel=1e-14)
    assert const_C(0.3) == pytest.approx(0.07725, abs=1e-5)
    assert const_C(1 - 1e-9) < 1e-8


def test_big_jump_examples():
    assert big_jump_params(0.7).kappa == 0
    bj = big_jump_params(0.4)
    assert (bj.kappa, bj.gamma) == (1, pytest.approx(0.05))
    assert bj.J_alpha == pytest.approx(-0.7)
    assert big_jump_params(0.5).xi(16.0, 256.0) == pytest.approx(2 ** 7.5, rel=1e-12)


def test_big_jump_grid_invariants():
    for a in ALPHA_GRID:
        bj = big_jump_params(float(a))
        assert 0 < bj.gamma < 0.25 or (bj.gamma == 0 and abs(1 / a - round(1 / a)) < 1e-9)
        assert bj.J_alpha > -1
        m = bj.kappa
        assert 1 / (m + 2) < a <= 1 / (m + 1) + 1e-12


@given(st.integers(1, 30))
def test_kappa_steps_at_reciprocals(m):
    a = 1.0 / (m + 1)
    assert big_jump_params(a).kappa == m
    assert big_jump_params(a * (1 + 1e-9)).kappa == m - 1
    assert big_jump_params(a * (1 - 1e-9)).kappa == m


def test_srt_ratio_value():
    assert srt_ratio_value(0.002, 0.01, 1.0, 0.5) == pytest.approx(1.2566, abs=1e-4)
    assert srt_ratio_value(0.0, 0.01, 1.0, 0.5) == 0.0


def test_ratio_at_origin(pareto):
    F = pareto(0.5)
    t = renewal_measure_onesided(F, 100)
    assert integrated_ratio(F, t, 0.0) == pytest.approx(t.u[0] * 0.5 / (const_C(0.5) * 0.5), rel=1e-12)
    with pytest.raises(ValueError):
        srt_ratio(F, t, 1e5)


def test_renewal_limits_match_classical_constant(pareto):
    # U([0,x]) ~ sin(pi a)/(pi a) A(x): the ratio to (C/alpha) A(x) tends to 1/alpha
    F = pareto(0.5)
    t = renewal_measure_onesided(F, 20000)
    band = np.arange(16000, 20001, dtype=float)
    assert np.median(srt_ratio(F, t, band)) == pytest.approx(2.0, rel=0.01)
    assert integrated_ratio(F, t, 20000.0) == pytest.approx(2.0, rel=0.02)


def test_riemann_constant_monotone():
    vals = [riemann_C_delta(0.5, d) for d in (0.9, 0.1, 0.03, 0.01)]
    assert vals[0] < 0.05
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        riemann_C_delta(0.5, 1.0)


def test_riemann_constant_limit_is_classical():
    # alpha * integral of z^(alpha-2) phi(1/z) over (0, inf) equals sin(pi a)/pi
    for a in (0.3, 0.5, 0.7):
        assert riemann_C_delta(a, 1e-4) == pytest.approx(math.sin(math.pi * a) / math.pi, rel=0.01)


def test_lemma41_probe(pareto):
    F = pareto(0.4)
    x = 2.0 ** 12
    with pytest.raises(ValueError):
        lemma41_probe(F, 0.2, x, 0, 1)
    vals = [lemma41_probe(F, d, x, 2, 0) for d in (0.4, 0.2, 0.1)]
    assert vals[0] > vals[1] > vals[2] > 0
    tiny = 0.5 / x
    assert lemma41_probe(F, tiny, x, 0, 2) == 0.0


def test_lemma41_partition_matches_small_n(pareto):
    F = pareto(0.4)
    x = 2.0 ** 11
    for d in (0.4, 0.1):
        parts, whole = lemma41_partition(F, d, x)
        assert parts == pytest.approx(whole, abs=1e-9)
        s = small_n_sums(F, x, [d])[d]
        assert whole * x / float(F.A(np.array([x]))[0]) == pytest.approx(s, abs=1e-9)


def test_lemma42_decay(pareto):
    F = pareto(0.4)
    x = 2.0 ** 12
    vals = [lemma42_probe(F, d, x, 0) for d in (0.4, 0.2, 0.1, 0.05)]
    assert np.all(np.diff(vals) < 0)
    v1 = [lemma42_probe(F, d, x, 1) for d in (0.4, 0.2, 0.1)]
    assert np.all(np.diff(v1) < 0)
    # decay outpaces the delta^(first local exponent) power law
    e0 = math.log(vals[1] / vals[0]) / math.log(0.5)
    assert vals[3] < vals[1] * 0.25 ** e0 * 1.0001 or vals[3] < vals[0] * 0.125 ** e0
    assert lemma42_probe(F, 0.5 / x, x, 0) == 0.0


def test_lemma51(pareto):
    F = pareto(0.5)
    z = 2.0 ** 10
    Az = float(F.A(np.array([z]))[0])
    rep = lemma51_probe(F, [int(Az * m) for m in (1, 2, 4, 8)], z)
    assert not rep["degenerate"] and rep["c"] > 0
    ns = np.asarray(rep["n"], dtype=float)
    assert np.all(np.asarray(rep["scaled"]) <= rep["C"] * np.exp(-rep["c"] * ns / Az) * (1 + 1e-12))


def test_lemma51_deterministic():
    F = make_finite_law(np.array([0.0, 1.0]), 0, A=TailIndexFunction(0.5))
    rep = lemma51_probe(F, [2, 3, 4], 3.0)
    assert rep["degenerate"]


def test_necessity_probe(pareto):
    rep = necessity_probe(pareto(0.5), [2.0 ** j for j in range(12, 21)], 1.0)
    assert all(t == "vanishing" for t in rep["trend"].values())
    for series in rep["series"].values():
        assert np.all(np.diff(series) < 0)
    F = make_finite_law(np.array([0.0, 0.5, 0.5]), 0, A=TailIndexFunction(0.5))
    rep = necessity_probe(F, [100.0, 200.0, 400.0], 1.0)
    assert all(not np.any(v) for v in rep["series"].values())
    with pytest.raises(ValueError):
        necessity_probe(F, [100.0, 200.0, 400.0], 0.5)
