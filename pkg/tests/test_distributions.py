import math
from fractions import Fraction

import numpy as np
import pytest

from xolfreq.distributions import Binomial, Convolution, NegBin, Poisson, from_dict, moments
from xolfreq.errors import InvalidParameter

import oracles


def sample_moments_ok(draws, mean, variance):
    """Sample mean and variance within four standard errors of the targets."""
    m = draws.size
    mu4 = ((draws - draws.mean()) ** 4).mean()
    s2 = draws.var(ddof=1)
    se_mean = math.sqrt(variance / m)
    se_var = math.sqrt(max(mu4 - s2**2, 1e-12) / m)
    return abs(draws.mean() - mean) <= 4 * se_mean and abs(s2 - variance) <= 4 * se_var


class TestPmf:
    def test_geometric_head(self):
        assert NegBin(1.0, 0.5).pmf(0) == pytest.approx(0.5, abs=1e-15)

    def test_empty_binomial_component(self):
        conv = Convolution(Binomial(0, 0.3), Poisson(2.2))
        pois = Poisson(2.2)
        for k in range(15):
            assert conv.pmf(k) == pytest.approx(pois.pmf(k), rel=1e-12)

    def test_negbin_against_rising_factorial_oracle(self):
        # Gamma(r + 3) = (r + 2)(r + 1) r Gamma(r), evaluated directly.
        got = NegBin(2.5, 0.4).pmf(3)
        assert got == pytest.approx(oracles.nb_pmf_by_recursion(3, 2.5, 0.4), rel=1e-12)

    @pytest.mark.parametrize("r,p", [(0.3, 0.2), (2.5, 0.4), (106.939, 0.78)])
    def test_negbin_grid_against_oracle(self, r, p):
        dist = NegBin(r, p)
        for k in range(0, 40, 3):
            assert dist.pmf(k) == pytest.approx(oracles.nb_pmf_by_recursion(k, r, p), rel=1e-10)

    def test_point_masses(self):
        assert NegBin(0.0, 0.5).pmf(0) == 1.0
        assert NegBin(0.0, 0.5).pmf(3) == 0.0
        assert NegBin(2.0, 1.0).pmf(0) == 1.0
        assert Poisson(0.0).pmf(0) == 1.0

    @pytest.mark.parametrize(
        "dist",
        [
            Poisson(6.5),
            Binomial(17, 0.35),
            NegBin(2.5, 0.4),
            NegBin(106.939, 0.78),
            Convolution(Binomial(11, 0.85), Poisson(3.7)),
            Convolution(Binomial(9, 0.4), NegBin(3.3, 0.6)),
        ],
    )
    def test_pmf_table_mass(self, dist):
        _, probs = dist.pmf_table()
        assert abs(probs.sum() - 1.0) < 1e-10

    def test_negative_k_zero(self):
        assert Poisson(2.0).pmf(-1) == 0.0
        assert Binomial(3, 0.5).pmf(np.array([-2, 0])).tolist()[0] == 0.0


class TestMoments:
    @pytest.mark.parametrize(
        "dist,mean,var",
        [
            (Poisson(27.752), 27.752, 27.752),
            (Binomial(11, 0.5), 5.5, 2.75),
            (NegBin(2.0, 0.25), 6.0, 24.0),
            (NegBin(0.0, 0.4), 0.0, 0.0),
        ],
    )
    def test_closed_forms(self, dist, mean, var):
        assert moments(dist) == (pytest.approx(mean), pytest.approx(var))

    def test_convolution_adds_moments(self):
        conv = Convolution(Binomial(13, 0.55), NegBin(2.2, 0.7))
        assert conv.mean == pytest.approx(13 * 0.55 + 2.2 * 0.3 / 0.7)
        assert conv.variance == pytest.approx(13 * 0.55 * 0.45 + 2.2 * 0.3 / 0.49)

    def test_negbin_variance_is_mean_over_p(self):
        # At the published next-year scale the variance is mean / p.
        dist = NegBin(106.939, 0.780)
        assert dist.mean == pytest.approx(106.939 * 0.22 / 0.78, rel=1e-12)
        assert dist.variance == pytest.approx(dist.mean / 0.78, rel=1e-12)

    def test_moments_match_pmf_table(self):
        for dist in (Poisson(4.4), Convolution(Binomial(7, 0.6), NegBin(1.7, 0.45))):
            ks, probs = dist.pmf_table()
            mean = float((ks * probs).sum())
            var = float(((ks - mean) ** 2 * probs).sum())
            assert mean == pytest.approx(dist.mean, abs=1e-8)
            assert var == pytest.approx(dist.variance, abs=1e-6)


class TestCdfQuantile:
    def test_cdf_accumulates_pmf(self):
        dist = NegBin(2.5, 0.4)
        acc = 0.0
        for k in range(12):
            acc += dist.pmf(k)
            assert dist.cdf(k) == pytest.approx(acc, rel=1e-12)

    def test_quantile_is_smallest_k(self):
        dist = Poisson(3.0)
        for q in (0.1, 0.5, 0.9, 0.99):
            k = dist.quantile(q)
            assert dist.cdf(k) >= q
            assert k == 0 or dist.cdf(k - 1) < q

    def test_quantile_zero_gives_support_minimum(self):
        point_mass_at_5 = Convolution(Binomial(5, 1.0), Poisson(0.0))
        assert point_mass_at_5.quantile(0.0) == 5
        assert NegBin(0.0, 0.3).quantile(0.0) == 0

    def test_quantile_bounds(self):
        with pytest.raises(InvalidParameter):
            Poisson(1.0).quantile(1.5)


class TestSampling:
    def test_poisson_zero_always_zero(self, rng):
        assert Poisson(0.0).sample(rng, 1000).max() == 0

    def test_negbin_moment_check_at_published_scale(self, rng):
        # Mean r (1 - p) / p = 30.243 at the published next-year parameters.
        dist = NegBin(106.939, 0.78)
        draws = dist.sample(rng, 1_000_000)
        assert sample_moments_ok(draws, dist.mean, dist.variance)

    def test_binomial_variance_check(self, rng):
        draws = Binomial(11, 0.5).sample(rng, 1_000_000)
        assert sample_moments_ok(draws, 5.5, 2.75)

    def test_gamma_mixture_handles_small_shape(self, rng):
        dist = NegBin(0.31, 0.6)
        draws = dist.sample(rng, 400_000)
        assert sample_moments_ok(draws, dist.mean, dist.variance)

    @pytest.mark.parametrize(
        "dist",
        [
            Poisson(27.752),
            NegBin(106.939, 0.78),
            Binomial(11, 0.3),
            Convolution(Binomial(13, 0.55), Poisson(3.2)),
            Convolution(Binomial(11, 0.85), NegBin(2.2, 0.7)),
        ],
    )
    def test_sample_pmf_consistency_chi2(self, dist, rng):
        draws = dist.sample(rng, 100_000)
        assert oracles.chi2_gof_pvalue(draws, dist.pmf) >= 1e-4


class TestThinningIdentities:
    def test_poisson_thinning_exact(self):
        # Dropping each count independently leaves a thinner Poisson law.
        lam, drop = 3.7, 0.42
        base = Poisson(lam)
        thinned = Poisson(lam * (1.0 - drop))
        for k in range(31):
            want = oracles.thinned_pmf(base.pmf, drop, k)
            assert abs(thinned.pmf(k) - want) < 1e-10

    def test_negbin_thinning_exact(self):
        r, p, drop = 2.3, 0.35, 0.4
        base = NegBin(r, p)
        p_prime = p / (1.0 - drop * (1.0 - p))
        thinned = NegBin(r, p_prime)
        for k in range(31):
            want = oracles.thinned_pmf(base.pmf, drop, k)
            assert abs(thinned.pmf(k) - want) < 1e-10

    def test_poisson_thinning_monte_carlo(self, rng):
        lam, drop = 5.5, 0.3
        n = rng.poisson(lam, 1_000_000)
        survivors = n - rng.binomial(n, drop)
        assert sample_moments_ok(survivors, lam * 0.7, lam * 0.7)

    def test_negbin_thinning_monte_carlo(self, rng):
        r, p, drop = 4.0, 0.45, 0.25
        n = NegBin(r, p).sample(rng, 1_000_000)
        survivors = n - rng.binomial(n, drop)
        p_prime = p / (1.0 - drop * (1.0 - p))
        law = NegBin(r, p_prime)
        assert sample_moments_ok(survivors, law.mean, law.variance)

    @pytest.mark.parametrize(
        "n,drops",
        [
            (7, [Fraction(1, 4)]),
            (12, [Fraction(1, 3), Fraction(1, 5)]),
            (20, [Fraction(1, 2), Fraction(1, 4), Fraction(1, 3), Fraction(2, 7)]),
        ],
    )
    def test_sequential_binomial_thinning_is_binomial(self, n, drops):
        # Surviving through k drop rounds is one binomial with the product
        # survival probability; checked in exact rational arithmetic.
        law = oracles.sequential_binomial_thinning_exact(n, drops)
        keep = math.prod(1 - p for p in drops)
        for k, mass in enumerate(law):
            assert mass == oracles.binomial_pmf_exact(n, keep, k)


class TestValidationAndJson:
    @pytest.mark.parametrize(
        "build",
        [
            lambda: Poisson(-1.0),
            lambda: Binomial(-1, 0.5),
            lambda: Binomial(3, 1.2),
            lambda: NegBin(-0.5, 0.5),
            lambda: NegBin(1.0, 0.0),
            lambda: NegBin(1.0, 1.0001),
            lambda: Convolution(Binomial(2, 0.5), Binomial(2, 0.5)),
        ],
    )
    def test_invalid_parameters(self, build):
        with pytest.raises(InvalidParameter):
            build()

    @pytest.mark.parametrize(
        "dist",
        [
            Poisson(2.0),
            Binomial(5, 0.4),
            NegBin(1.5, 0.7),
            Convolution(Binomial(4, 0.2), NegBin(2.0, 0.5)),
        ],
    )
    def test_to_dict_roundtrip(self, dist):
        assert from_dict(dist.to_dict()) == dist
