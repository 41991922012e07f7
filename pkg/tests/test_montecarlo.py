import numpy as np
import pytest
from hypothesis import given, strategies as st

from srtlab.dists import make_finite_law, make_twosided_counterexample
from srtlab.montecarlo import (MIN_BATCHES, Sampler, coverage_suite, mc_event_probability, mc_renewal_estimate,
                               mc_tail_frequency, sample_increment, stream)
from srtlab.regvar import TailIndexFunction
from srtlab.renewal import bigjump_decomposition, renewal_measure_onesided


def finite(masses, k_min=0):
    return make_finite_law(np.asarray(masses, dtype=float), k_min, A=TailIndexFunction(0.5))


def test_streams_depend_only_on_seed_and_batch():
    a = stream(7, 3).random(5)
    b = stream(7, 3).random(5)
    c = stream(7, 4).random(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_deterministic_law_sampling():
    F = finite([0, 0, 1])
    assert np.all(sample_increment(F, stream(0, 0), 1000) == 2)


def test_two_point_frequency():
    F = finite([0, 0.5, 0.5])
    x = sample_increment(F, stream(1, 0), 100_000)
    p = np.mean(x == 1)
    assert abs(p - 0.5) <= 3 * np.sqrt(0.25 / 1e5)


@given(st.floats(0.0, 1.0, exclude_max=True))
def test_sampler_inverts_cdf(u):
    # the sampled index k satisfies cdf(k-1) <= u < cdf(k)
    from srtlab.dists import make_pareto_lattice
    F = make_pareto_lattice(TailIndexFunction(0.5), K_table=256)
    s = Sampler(F)

    class Fixed:
        def __init__(self):
            self.calls = 0

        def random(self, size):
            self.calls += 1
            return np.full(size, u if self.calls == 1 else 0.37)

    k = s.indices(Fixed(), 1)[0]
    if u < s.cdf[-1]:
        assert F.cdf_index(k - 1) <= u < F.cdf_index(k) + 1e-15
    else:
        assert k > F.k_hi


def test_pareto_tail_frequency(pareto):
    F = pareto(0.5)
    est = mc_tail_frequency(F, 1e3, 1_000_000, seed=3)
    assert est.covers(F.sf(1e3))
    assert est.estimate * 1e3 ** 0.5 == pytest.approx(1.0, abs=3 * est.stderr * 1e3 ** 0.5)


def test_two_sided_sampler_hits_both_tails():
    F = make_twosided_counterexample(0.25, n_max=14, K_table=2048)
    x = sample_increment(F, stream(5, 0), 200_000)
    assert (x < -F.k_hi).any() and (x > F.k_hi).any()
    for t in (4096.0, 65536.0):
        p_hat = np.mean(x > t)
        p = F.sf(t)
        assert abs(p_hat - p) <= 4 * np.sqrt(p * (1 - p) / x.size)
        q_hat = np.mean(x <= -t)
        q = F.left_tail(t)
        assert abs(q_hat - q) <= 4 * np.sqrt(q * (1 - q) / x.size)


def test_renewal_examples(pareto):
    est = mc_renewal_estimate(finite([0, 1]), 10.0, 1.0, 1000, seed=0)
    assert est.estimate == 1.0 and est.stderr == 0.0
    F = finite([0, 0.5, 0.5])
    u = renewal_measure_onesided(F, 50).u
    est = mc_renewal_estimate(F, 50.0, 1.0, 20_000, seed=1)
    assert est.covers(u[50])
    P = pareto(0.5)
    u = renewal_measure_onesided(P, 4096).u
    est = mc_renewal_estimate(P, 4096.0, 1.0, 40_000, seed=2)
    assert est.covers(u[4096])


def test_event_examples():
    w = np.zeros(11)
    w[1] = w[10] = 0.5
    F = finite(w)
    imp = mc_event_probability(F, 2, 1.0, 2000, seed=0)
    assert imp.estimate == 0.0 and imp.hits == 0 and imp.upper_95 == pytest.approx(3 / 2000)
    b1 = mc_event_probability(F, 2, 11.0, 20_000, seed=1, k=1, xi=5.0)
    assert b1.covers(0.5)
    parts = [mc_event_probability(F, 2, 11.0, 20_000, seed=1, k=k, xi=5.0) for k in range(3)]
    total = mc_event_probability(F, 2, 11.0, 20_000, seed=1, xi=5.0)
    assert sum(p.estimate for p in parts) == pytest.approx(total.estimate, abs=1e-12)
    with pytest.raises(ValueError):
        mc_event_probability(F, 2, 11.0, 2000, seed=1, k=3, xi=5.0)


def test_event_matches_bigjump(pareto):
    F = pareto(0.4)
    s = bigjump_decomposition(F, 4, 200.0, k_max=2)
    for k in range(2):
        est = mc_event_probability(F, 4, 200.0, 200_000, seed=11, k=k, xi=s.xi)
        assert est.covers(s.components[k])


def test_determinism_across_threads(pareto):
    F = pareto(0.5)
    a = mc_renewal_estimate(F, 512.0, 4.0, 8000, seed=9, threads=1)
    b = mc_renewal_estimate(F, 512.0, 4.0, 8000, seed=9, threads=4)
    assert a.to_json() == b.to_json()


def test_batches_floor():
    F = finite([0, 0.5, 0.5])
    est = mc_renewal_estimate(F, 20.0, 1.0, 1000, seed=0, batches=4)
    assert est.batches >= MIN_BATCHES
    with pytest.raises(ValueError):
        mc_renewal_estimate(F, 20.0, 1.0, 8, seed=0)


def test_coverage_suite():
    rows = coverage_suite()
    assert len(rows) == 20
    assert sum(r["covered"] for r in rows) >= 18
