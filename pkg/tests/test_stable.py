import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from srtlab.dists import make_pareto_lattice
from srtlab.regvar import TailIndexFunction
from srtlab.stable import StableDensity, llt_error, llt_truncated_lower, stable_density, total_mass


def levy(x):
    return 0.5 * x ** -1.5 * np.exp(-math.pi / (4 * x))


def test_levy_closed_form():
    phi = StableDensity(0.5)
    xs = np.geomspace(0.1, 50, 500)
    assert np.max(np.abs(phi(xs) / levy(xs) - 1)) < 1e-6
    assert float(phi(np.array([1.0]))[0]) == pytest.approx(0.22797, abs=5e-6)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_unit_mass(alpha):
    assert total_mass(StableDensity(alpha)) == pytest.approx(1.0, abs=1e-6)


def test_two_sided_mass():
    assert total_mass(StableDensity(0.25, 1.0, 1.0)) == pytest.approx(1.0, abs=1e-6)


@given(st.floats(0.1, 0.95))
def test_nonnegative_and_continuous(alpha):
    phi = StableDensity(alpha)
    xs = np.geomspace(1e-3, 1e4, 600)
    assert np.all(phi(xs) >= 0)
    c = phi.crossover * phi.scale
    lo, hi = phi(np.array([c * (1 - 1e-9), c * (1 + 1e-9)]))
    assert abs(lo - hi) <= 1e-8 * max(1.0, lo)


def test_vanishes_at_origin():
    phi = StableDensity(0.3)
    vals = phi(np.array([1e-2, 1e-3, 1e-4, 1e-5]))
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-30


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_matches_reference_implementation(alpha):
    phi = StableDensity(alpha)
    ref = stats.levy_stable(alpha, 1.0, loc=0.0, scale=(math.gamma(1 - alpha) * math.cos(math.pi * alpha / 2)) ** (1 / alpha))
    ref.dist.parameterization = "S1"
    xs = np.array([0.5, 1.0, 2.0, 5.0])
    assert np.allclose(phi(xs), ref.pdf(xs), rtol=1e-4)


@pytest.mark.parametrize("alpha, tol", [(0.5, 0.02), (0.7, 0.03)])
def test_tail_forced_by_convention(alpha, tol):
    # P(X > x) ~ x^-alpha, so phi(x) ~ alpha x^(-alpha-1) with no 1/Gamma(1-alpha) factor
    phi = StableDensity(alpha)
    x = 1e3
    assert float(phi(np.array([x]))[0]) / (alpha * x ** (-alpha - 1)) == pytest.approx(1.0, abs=tol)


def test_tail_with_gamma_factor_fails():
    phi = StableDensity(0.5)
    x = 1e3
    ratio = float(phi(np.array([x]))[0]) / (0.5 * x ** -1.5 / math.gamma(0.5))
    assert abs(ratio - 1) > 0.5


def test_stable_density_domain():
    with pytest.raises(ValueError):
        stable_density(StableDensity(0.5), np.array([-1.0]))


def test_interpolator_accuracy():
    phi = StableDensity(0.6)
    ev = phi.interpolator(20.0)
    xs = np.geomspace(0.05, 19.0, 300)
    assert np.max(np.abs(ev(xs) - phi(xs))) < 1e-7 * phi.sup()


def test_llt_error_decreasing():
    F = make_pareto_lattice(TailIndexFunction(0.5), h=16, K_table=1 << 16)
    phi = StableDensity(0.5)
    stats_ = [llt_error(F, n, phi=phi)["stat"] for n in (2 ** 4, 2 ** 6, 2 ** 8)]
    assert stats_[0] > stats_[1] > stats_[2]


def test_truncated_lower_bound():
    F = make_pareto_lattice(TailIndexFunction(0.4), h=16, K_table=1 << 14)
    n = 2 ** 8
    full = llt_truncated_lower(F, n, math.inf)
    c8 = llt_truncated_lower(F, n, 8.0)
    assert full > 0
    assert abs(c8 / full - 1) <= 0.25
    a_n = float(F.A.inverse(float(n)))
    assert llt_truncated_lower(F, n, 0.5 * F.h / a_n) == 0.0
