import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import binomial_pmf, gauss_legendre_box, poisson_pmf
from oscillametric import stochastic as R
from oscillametric.manifold import ValidationError

BOX = ((0.0, 0.0, 0.0), (2.0, 1.0, 1.0))
FRINGE = lambda t, x: np.cos(3.0 * x[:, 0])  # noqa: E731
UNIFORM = lambda t, x: np.ones(len(x))  # noqa: E731


def test_region_probability_examples():
    assert R.region_probability(FRINGE, R.RegionSpec.whole(*BOX)) == 1.0
    half = R.RegionSpec((0, 0, 0), (1, 1, 1), *BOX)
    assert abs(R.region_probability(UNIFORM, half) - 0.5) <= 1e-14
    wave = lambda t, x: np.exp(1j * (0.7 * x[:, 0] - 0.2 * x[:, 2] - t))
    small = R.RegionSpec((0.2, 0.1, 0.3), (0.9, 0.6, 0.5), *BOX)
    assert abs(R.region_probability(wave, small) - 0.7 * 0.5 * 0.2 / 2.0) <= 1e-14


def test_region_probability_against_independent_quadrature():
    region = R.RegionSpec((0.1, 0.0, 0.0), (0.8, 1.0, 1.0), *BOX)
    dens = lambda a, b, c: np.cos(3.0 * a) ** 2 * (1 + 0.5 * b * c)
    field = lambda t, x: np.cos(3.0 * x[:, 0]) * np.sqrt(1 + 0.5 * x[:, 1] * x[:, 2])
    want = gauss_legendre_box(dens, region.omega_lo, region.omega_hi) / gauss_legendre_box(dens, *BOX)
    assert abs(R.region_probability(field, region) - want) <= 1e-10


def test_region_additive_and_monotone():
    left = R.RegionSpec((0, 0, 0), (0.7, 1, 1), *BOX)
    right = R.RegionSpec((0.7, 0, 0), (2, 1, 1), *BOX)
    inner = R.RegionSpec((0.1, 0.2, 0.2), (0.5, 0.8, 0.8), *BOX)
    pl, pr, pi = (R.region_probability(FRINGE, r) for r in (left, right, inner))
    assert abs(pl + pr - 1) <= 1e-12
    assert pi <= pl


def test_region_spec_validation():
    with pytest.raises(ValidationError):
        R.RegionSpec((0, 0, 0), (3, 1, 1), *BOX)
    with pytest.raises(ValidationError):
        R.RegionSpec((0, 0, 0), (0, 1, 1), *BOX)
    with pytest.raises(ValidationError):
        R.region_probability(lambda t, x: np.zeros(len(x)), R.RegionSpec.whole(*BOX))


def test_count_law_examples():
    assert R.count_law(1, 0.3, 1) == pytest.approx(0.3, abs=1e-15)
    assert abs(R.count_law(10, 0.5, 5) - 0.24609375) <= 1e-15
    assert abs(sum(R.count_law(12, 0.37, k) for k in range(13)) - 1) <= 1e-14
    assert abs(R.count_law(20, 0.25, 7) - float(binomial_pmf(20, Fraction(1, 4), 7))) <= 1e-15


def test_poisson_examples():
    assert abs(R.poisson_limit(1.0, 1.0, 0) - math.exp(-1)) <= 1e-15
    assert abs(sum(R.poisson_limit(2.0, 1.5, k) for k in range(80)) - 1) <= 1e-14
    assert abs(R.poisson_limit(2.0, 1.5, 4) - poisson_pmf(3.0, 4)) <= 1e-15


def test_binomial_poisson_convergence():
    assert abs(R.count_law(10_000, 1e-4, 3) - R.poisson_limit(1.0, 1.0, 3)) <= 1e-3
    gaps = [R.binomial_poisson_gap(N, 5.0) for N in (100, 1000, 10_000)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] <= 1e-3


def test_sampler_empty_and_inside():
    assert R.sample_singularities(UNIFORM, R.RegionSpec.whole(*BOX), 0, seed=1).positions.shape == (0, 3)
    s = R.sample_singularities(FRINGE, R.RegionSpec.whole(*BOX), 5000, seed=1, envelope=1.0)
    assert np.all(s.positions >= BOX[0]) and np.all(s.positions <= BOX[1])
    assert s.seed == 1


def test_sampler_uniform_ks():
    s = R.sample_singularities(UNIFORM, R.RegionSpec.whole(*BOX), 100_000, seed=3, envelope=1.0)
    assert R.ks_uniform(s.positions[:, 0], 0.0, 2.0).pvalue > 0.01


def test_sampler_fringe_chi2():
    s = R.sample_singularities(FRINGE, R.RegionSpec.whole(*BOX), 100_000, seed=20240611, envelope=1.0)
    edges = np.linspace(0, 2, 41)
    assert R.chi2_against(s.positions[:, 0], edges, R.fringe_bin_probabilities(3.0, edges)).pvalue > 0.01


def test_sampler_bins_converge_to_region_probabilities():
    region = R.RegionSpec.whole(*BOX)
    s = R.sample_singularities(FRINGE, region, 40_000, seed=8, envelope=1.0)
    sub = R.RegionSpec((0, 0, 0), (0.5, 1, 1), *BOX)
    frac = np.mean(s.positions[:, 0] < 0.5)
    p = R.region_probability(FRINGE, sub)
    assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / 40_000)


def test_sampler_thread_independent():
    region = R.RegionSpec.whole(*BOX)
    a = R.sample_singularities(FRINGE, region, 150_000, seed=5, envelope=1.0, threads=1)
    b = R.sample_singularities(FRINGE, region, 150_000, seed=5, envelope=1.0, threads=4)
    assert np.array_equal(a.positions, b.positions)


def test_sampler_rejects_bad_envelope():
    from oscillametric.manifold import NumericalError
    with pytest.raises(NumericalError):
        R.sample_singularities(lambda t, x: 2 * np.ones(len(x)), R.RegionSpec.whole(*BOX), 10, seed=0, envelope=1.0)
    with pytest.raises(ValidationError):
        R.sample_singularities(UNIFORM, R.RegionSpec.whole(*BOX), 10, seed=0, envelope=0.0)


def test_fringe_bins_sum_to_one():
    assert abs(R.fringe_bin_probabilities(3.0, np.linspace(0, 2, 11)).sum() - 1) <= 1e-15


def test_unaveraged_diagnostic_matches_for_u_free_field():
    region = R.RegionSpec((0, 0, 0), (1, 1, 1), *BOX)
    a = lambda t, x, u: np.cos(3.0 * x[:, 0])
    assert abs(R.region_probability_unaveraged(a, region, 0.0, 0.3) - R.region_probability(FRINGE, region)) <= 1e-14
