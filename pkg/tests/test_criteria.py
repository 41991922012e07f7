import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srtlab.criteria import (CriterionGrid, R_T, chi_diag, classify_trend, cutoff_bound, doney_sup,
                             eta_exponent, evaluate_grid, half_condition, nec_profile, ns_diag_density,
                             ns_diag_interval, ns_diag_r, ns_diag_twosided, r_func, r_values, series_trend,
                             smoothness_exponent, u_over_Lstar_sq)
from srtlab.dists import make_finite_law, make_twosided_counterexample
from srtlab.errors import BudgetError
from srtlab.regvar import SlowlyVarying, TailIndexFunction, cell_integrals

XS = [2.0 ** j for j in range(12, 23)]
ETAS = [0.4, 0.2, 0.1, 0.05]


def spike_law(spikes: dict, alpha=0.5, size=None):
    """Finite law with the given index -> mass spikes and the remaining mass at index 1."""
    top = max(spikes)
    m = np.zeros(top + 1)
    for k, v in spikes.items():
        m[k] = v
    m[1] += 1.0 - m.sum()
    return make_finite_law(m, 0, 1.0, A=TailIndexFunction(alpha))


def A_of(F, x):
    return float(F.A(np.array([float(x)]))[0])


def test_r_examples(pareto):
    F = pareto(0.5)
    assert r_func(F, 4.0) == pytest.approx(4 * (3 ** -0.5 - 0.5) / 0.5, rel=1e-12)
    assert r_func(F, 4.0) == pytest.approx(0.6188, abs=1e-4)
    assert r_func(F, 1.0) == 0.0
    assert r_func(F, 1e6) == pytest.approx(0.5, rel=1e-5)
    with pytest.raises(ValueError):
        r_func(F, 0.5)
    with pytest.raises(ValueError):
        r_func(spike_law({5: 0.5}), 5.0)


def test_R_T_examples(pareto):
    F = pareto(0.5)
    assert R_T(F, 3.0, 5.0, 0.0) == pytest.approx(r_func(F, 4.0) + r_func(F, 5.0), rel=1e-13)
    assert R_T(F, 7.0, 7.0, 0.0) == 0.0
    sup = doney_sup(F, 1e4)["sup"]
    assert R_T(F, 1.0, 1e4, sup) == 0.0


@given(st.floats(0.0, 5e4), st.floats(0.0, 5e4), st.floats(0.0, 5e4), st.floats(0.0, 1.0))
def test_R_T_additive(a, b, c, T):
    from srtlab.dists import make_pareto_lattice
    F = make_pareto_lattice(TailIndexFunction(0.4), K_table=1 << 16)
    a, b, c = sorted((a, b, c))
    assert R_T(F, a, c, T) == pytest.approx(R_T(F, a, b, T) + R_T(F, b, c, T), rel=1e-10, abs=1e-12)


def test_doney(pareto):
    rep = doney_sup(pareto(0.5), 2.0 ** 20)
    assert math.isfinite(rep["sup"]) and rep["argmax"] <= 16


def test_doney_spikes_grow_with_range():
    z = [2.0 ** n - 1 for n in range(1, 51)]
    eps = [math.log(2) / math.log1p(2.0 ** n) for n in range(1, 51)]
    from srtlab.dists import UaoSpec, make_uao_family
    F = make_uao_family(UaoSpec(TailIndexFunction(0.5, SlowlyVarying("reciprocal-log")), z, eps,
                                tail_window=(2.0 ** 40, 2.0 ** 52)))
    sups = [doney_sup(F, 2.0 ** j)["sup"] for j in (6, 10, 14, 20)]
    assert np.all(np.diff(sups) > 0) and sups[-1] > 100 * sups[0]


def test_chi_examples(pareto):
    F = pareto(0.4)
    assert chi_diag(F, 0.1, 2.0 ** 16, 1.0) < 1e-3
    sup = doney_sup(F, 2.0 ** 16)["sup"]
    assert chi_diag(F, 0.1, 2.0 ** 16, sup) == 0.0


def test_chi_jumps_when_spike_enters():
    F = spike_law({900: 0.01, 2000: 0.01})
    before = chi_diag(F, 0.1, 899.0, 0.0)
    after = chi_diag(F, 0.1, 950.0, 0.0)
    assert before == 0.0 and after > 0.0


def test_ns_density_single_spike():
    x, s0, m = 1000, 37, 0.02
    F = spike_law({x - s0: m})
    expected = x / A_of(F, x) * A_of(F, s0) ** 2 / s0 * m
    assert ns_diag_density(F, 0.1, float(x)) == pytest.approx(expected, rel=1e-12)
    assert ns_diag_density(spike_law({500: m}), 0.1, float(x)) == 0.0


def test_ns_interval_single_spike():
    x, s0, m = 1000, 37, 0.02
    F = spike_law({x - s0: m})
    integral = cell_integrals(F.A, np.array([float(s0), 0.1 * x]), 2)[0]
    assert ns_diag_interval(F, 0.1, float(x)) == pytest.approx(x / A_of(F, x) * m * integral, rel=1e-10)
    assert ns_diag_interval(spike_law({500: m}), 0.1, float(x)) == 0.0


@given(st.lists(st.tuples(st.integers(901, 999), st.floats(1e-4, 1e-2)), min_size=1, max_size=6,
                unique_by=lambda t: t[0]))
def test_ns_density_additive_over_spikes(spikes):
    x = 1000.0
    whole = ns_diag_density(spike_law(dict(spikes)), 0.1, x)
    parts = sum(ns_diag_density(spike_law({k: m}), 0.1, x) for k, m in spikes)
    assert whole == pytest.approx(parts, rel=1e-10)


def test_ns_density_pareto(pareto):
    F = pareto(0.4)
    vals = [ns_diag_density(F, eta, 2.0 ** 16) for eta in ETAS]
    assert vals[2] < 1.0
    assert np.all(np.diff(vals) < 0)


def test_twosided_reduces_for_onesided(pareto):
    F = pareto(0.4)
    assert ns_diag_twosided(F, 0.1, 2.0 ** 14) == ns_diag_density(F, 0.1, 2.0 ** 14)


def test_twosided_growth_vs_density():
    F = make_twosided_counterexample(0.25)
    two = [ns_diag_twosided(F, 0.1, x) for x in (2.0 ** 12, 2.0 ** 16, 2.0 ** 20)]
    one = [ns_diag_density(F, 0.1, x) for x in (2.0 ** 12, 2.0 ** 16, 2.0 ** 20)]
    assert two[0] < two[1] < two[2]
    assert max(one) / min(one) < 1.1


def test_scan_budget(pareto):
    with pytest.raises(BudgetError):
        ns_diag_density(pareto(0.5), 0.4, 2.0 ** 30)
    with pytest.raises(BudgetError):
        evaluate_grid(pareto(0.5), "ns_density", ETAS, [2.0 ** 12, 2.0 ** 20, 2.0 ** 30])


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
def test_cutoff_equivalence(pareto, T):
    F = pareto(0.4)
    for eta in (0.4, 0.1):
        for x in (2.0 ** 12, 2.0 ** 16):
            d = abs(ns_diag_r(F, eta, x, T) - ns_diag_r(F, eta, x, 0.0))
            assert d <= cutoff_bound(F, eta, x, T) * (1 + 1e-12)


def test_cutoff_labels_agree(pareto):
    F = pareto(0.4)
    xs = XS[:7]
    g0 = evaluate_grid(F, "ns_r", ETAS, xs, T=0.0)
    g1 = evaluate_grid(F, "ns_r", ETAS, xs, T=0.5)
    assert g0.trend == g1.trend


def test_nec_profile_decreasing(pareto):
    vals = nec_profile(pareto(0.4), XS, 1.0)
    assert np.all(np.diff(vals) < 0)


def test_half_condition_examples():
    xs_max = 2.0 ** 40
    rep = half_condition(TailIndexFunction(0.5), xs_max)
    assert rep["verdict"] == "holds on probed range" and np.allclose(rep["ratio"], 1.0)
    rep = half_condition(TailIndexFunction(0.5, SlowlyVarying("log-power", {"beta": 2.0})), xs_max)
    assert np.allclose(rep["ratio"], 1.0)
    rep = half_condition(TailIndexFunction(0.5, SlowlyVarying("reciprocal-log")), xs_max)
    x = np.asarray(rep["x"])
    assert rep["verdict"] == "fails on probed range"
    assert np.allclose(rep["ratio"], np.log1p(x) / math.log(2), rtol=0.01)
    with pytest.raises(ValueError):
        half_condition(TailIndexFunction(0.4), xs_max)


def test_u_dominates_Lstar_squared():
    for L in (SlowlyVarying("constant"), SlowlyVarying("log-power", {"beta": 1.0}),
              SlowlyVarying("reciprocal-log")):
        ratio = u_over_Lstar_sq(TailIndexFunction(0.5, L), np.geomspace(10, 1e12, 30))
        assert ratio.min() > 0


def test_smoothness(pareto):
    rep = smoothness_exponent(pareto(0.4), [2.0 ** j for j in range(10, 17)], 0.5)
    assert rep["exponent"] == pytest.approx(1.0, abs=0.1)
    assert rep["certified"] and rep["anchor_ok"]
    assert not smoothness_exponent(pareto(0.4), [2.0 ** j for j in range(10, 17)], 0.9)["certified"]


def test_smoothness_flags_spikes():
    F = spike_law({1030: 0.05, 1100: 0.05, 2100: 0.05, 4200: 0.05}, alpha=0.4)
    rep = smoothness_exponent(F, [1024.0, 2048.0, 4096.0], 0.1, min_points=3)
    assert not rep["certified"] or rep["max_residual"] > 1.0


def test_smoothness_inconclusive():
    F = spike_law({3: 0.5}, alpha=0.4)
    assert smoothness_exponent(F, [1.0], 0.1)["inconclusive"]


def grid_of(fn, xs=XS, etas=ETAS):
    Q = np.array([[fn(e, x) for x in xs] for e in etas])
    return CriterionGrid("synthetic", etas, xs, Q)


def test_classifier_synthetic():
    assert classify_trend(grid_of(lambda e, x: 0.0)) == "vanishing"
    assert classify_trend(grid_of(lambda e, x: math.sqrt(math.log(x)))) == "growing"
    assert classify_trend(grid_of(lambda e, x: e ** 0.8)) == "vanishing"
    assert classify_trend(grid_of(lambda e, x: 0.3)) == "bounded"
    assert classify_trend(grid_of(lambda e, x: 2.0 - 0.1 * math.log(x))) == "inconclusive"


@given(st.lists(st.floats(0.0, 10.0), min_size=44, max_size=44))
def test_classifier_reproducible_from_csv(tmp_path_factory, values):
    g = CriterionGrid("synthetic", ETAS, XS, np.reshape(values, (4, 11)))
    g.classify()
    path = tmp_path_factory.mktemp("grid") / "g.csv"
    g.to_csv(path)
    back = CriterionGrid.from_csv(path)
    assert np.array_equal(back.Q, g.Q)
    assert back.classify() == g.trend


def test_grid_rejects_bad_values():
    with pytest.raises(ValueError):
        CriterionGrid("x", ETAS, XS, -np.ones((4, 11)))
    with pytest.raises(ValueError):
        CriterionGrid("x", [0.1, 0.2, 0.3], XS, np.ones((3, 11)))


def test_series_trend():
    xs = XS
    assert series_trend(xs, np.zeros(len(xs))) == "vanishing"
    assert series_trend(xs, 1 / np.asarray(xs) ** 0.2) == "vanishing"
    assert series_trend(xs, np.sqrt(np.log(xs))) == "growing"
    assert series_trend(xs, np.full(len(xs), 2.0)) == "bounded"


def test_pareto_grids_not_growing(pareto):
    F = pareto(0.4)
    labels = {c: evaluate_grid(F, c, ETAS, XS).trend for c in ("ns_density", "ns_interval")}
    assert "growing" not in labels.values()
    assert labels["ns_density"] == labels["ns_interval"]


def test_threads_do_not_change_grid(pareto):
    F = pareto(0.6)
    a = evaluate_grid(F, "ns_density", ETAS, XS[:5], threads=1)
    b = evaluate_grid(F, "ns_density", ETAS, XS[:5], threads=4)
    assert np.array_equal(a.Q, b.Q)


@pytest.mark.parametrize("alpha", [0.6, 0.7, 0.8])
def test_eta_exponent(pareto, alpha):
    g = evaluate_grid(pareto(alpha), "ns_density", ETAS, XS)
    assert abs(eta_exponent(g) - 2 * alpha) <= 0.3


def test_r_values_vectorized(pareto):
    F = pareto(0.3)
    vals = r_values(F, 1, 50)
    assert np.allclose(vals, [r_func(F, float(k)) for k in range(1, 51)], rtol=1e-14)
