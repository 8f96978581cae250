import math

import numpy as np
import pytest
from scipy.special import expit, logit

from exceptions import ConfigurationError, DomainError
from model_families import (
    ParamDomain, bernoulli_mean, bernoulli_natural, bernoulli_pair, bernoulli_pair_curve, build_family,
    contaminated_gaussian, critical_radius, empirical_fisher, fisher, hidden_binary, latent_divergence_bound,
    log_likelihood, mle, poisson_truncated, score, v_statistic,
)
from utils import central_gradient, count_matrix


EXPONENTIAL_PRESETS = ["bernoulli_natural", "poisson_truncated", "gaussian", "gaussian_location", "bernoulli_pair"]


def _random_theta(family, rng):
    if family.name == "gaussian":
        mu, var = rng.uniform(-2.0, 2.0), rng.uniform(0.5, 3.0)
        return np.array([mu / var, -1.0 / (2.0 * var)])
    lo, hi = np.asarray(family.domain.lo), np.asarray(family.domain.hi)
    mid, quarter = (lo + hi) / 2.0, (hi - lo) / 4.0
    return rng.uniform(mid - quarter, mid + quarter)


def _fd_empirical_fisher(family, theta, xs, step=1e-5):
    n = len(xs)
    theta = np.asarray(theta, dtype=float)
    columns = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        columns.append((family.score(theta + e, xs) - family.score(theta - e, xs)) / (2.0 * step))
    return -np.column_stack(columns) / n


class TestLogLikelihood:

    def test_uniform_coin(self):
        assert log_likelihood(bernoulli_mean(), [0.5], [1, 0, 1]) == pytest.approx(3 * math.log(0.5), abs=1e-12)

    def test_natural_bernoulli_at_zero(self):
        assert log_likelihood(bernoulli_natural(), [0.0], [1]) == pytest.approx(-math.log(2.0), abs=1e-12)

    def test_hidden_variable_direct_sum(self):
        spec = hidden_binary([[0.9, 0.1], [0.2, 0.8]], latent="simplex")
        assert log_likelihood(spec, [0.5], [0]) == pytest.approx(math.log(0.55), abs=1e-12)

    def test_outside_domain_raises(self):
        with pytest.raises(DomainError):
            log_likelihood(bernoulli_mean(), [1.2], [0, 1])

    def test_unknown_symbol_raises(self):
        with pytest.raises(DomainError):
            log_likelihood(bernoulli_mean(), [0.5], [0, 2])

    def test_zero_probability_symbol_gives_minus_infinity(self):
        assert log_likelihood(bernoulli_mean(), [1.0], [0, 1]) == -math.inf

    def test_exponential_matches_statistic_form(self, rng):
        family = build_family(bernoulli_pair())
        theta = np.array([0.3, -1.1])
        xs = rng.integers(0, 4, size=40).tolist()
        tbar = family.stat[xs].mean(axis=0)
        expected = len(xs) * (theta @ tbar - family.log_partition(theta))
        assert family.log_likelihood(theta, xs) == pytest.approx(expected, rel=1e-12)


class TestScore:

    def test_natural_bernoulli(self):
        np.testing.assert_allclose(score(bernoulli_natural(), [0.0], [1, 1]), [1.0], atol=1e-12)

    @pytest.mark.parametrize("spec, theta", [
        (bernoulli_pair_curve(), [0.3]),
        (hidden_binary([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]], latent="natural"), [0.4]),
        (hidden_binary([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]], latent="simplex"), [0.35]),
        (contaminated_gaussian(math.exp(2.0), 0.05), [0.2]),
    ])
    def test_matches_finite_differences(self, spec, theta, rng):
        family = build_family(spec)
        if family.finite:
            xs = rng.integers(0, family.k, size=30).tolist()
        else:
            xs = [0.5, -1.0, 3.0, 7.0, 0.1]
        numeric = central_gradient(lambda t: family.log_likelihood(t, xs), theta)
        np.testing.assert_allclose(family.score(theta, xs), numeric, rtol=1e-6, atol=1e-7)

    def test_hidden_variable_score_is_posterior_mean_gap(self, hidden_natural):
        xs = [0, 0, 1, 2, 2, 2]
        theta = np.array([-0.3])
        post = hidden_natural.posterior(theta, np.array(xs))
        t_tilde = post[:, 1].mean()
        eta = expit(theta[0])
        np.testing.assert_allclose(hidden_natural.score(theta, xs), [len(xs) * (t_tilde - eta)], atol=1e-12)


class TestFisher:

    def test_bernoulli_natural(self):
        np.testing.assert_allclose(fisher(bernoulli_natural(), [0.0]), [[0.25]], atol=1e-14)
        value = math.exp(1.5) / (1.0 + math.exp(1.5)) ** 2
        np.testing.assert_allclose(fisher(bernoulli_natural(), [1.5]), [[value]], rtol=1e-12)

    def test_poisson(self):
        np.testing.assert_allclose(fisher(poisson_truncated(), [0.0]), [[1.0]], rtol=1e-10)
        np.testing.assert_allclose(fisher(poisson_truncated(), [1.0]), [[math.exp(-1.0)]], rtol=1e-10)

    def test_contaminated_gaussian_band(self):
        nu, spread_sq = 0.05, math.exp(2.0)
        value = fisher(contaminated_gaussian(spread_sq, nu), [0.0])[0, 0]
        assert max(nu, 1.0 - nu * spread_sq) <= value <= 1.0

    def test_hidden_variable_two_ways(self, hidden_natural):
        theta = np.array([0.7])
        q1 = expit(0.7)
        emission = np.array([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]])
        p = (1 - q1) * emission[0] + q1 * emission[1]
        post1 = q1 * emission[1] / p
        closed = q1 * (1 - q1) - np.sum(p * post1 * (1 - post1))
        np.testing.assert_allclose(hidden_natural.fisher(theta), [[closed]], rtol=1e-10)

        scores = []
        for x in range(3):
            scores.append(central_gradient(lambda t: hidden_natural.log_likelihood(t, [x]), theta)[0])
        numeric = np.sum(p * np.square(scores))
        np.testing.assert_allclose(hidden_natural.fisher(theta), [[numeric]], rtol=1e-8)

    def test_curved_pulls_back_ambient(self):
        family = build_family(bernoulli_pair_curve())
        theta = 0.6
        jac = np.array([[1.0], [2.0 * theta]])
        ambient = family.ambient.fisher(family.phi([theta]))
        np.testing.assert_allclose(family.fisher([theta]), jac.T @ ambient @ jac, rtol=1e-12)


class TestEmpiricalFisher:

    @pytest.mark.parametrize("spec, theta", [
        (bernoulli_pair_curve(), [-0.4]),
        (hidden_binary([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]], latent="natural"), [1.1]),
        (hidden_binary([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]], latent="simplex"), [0.6]),
        (contaminated_gaussian(math.exp(2.0), 0.05), [-0.5]),
    ])
    def test_matches_finite_differences(self, spec, theta, rng):
        family = build_family(spec)
        xs = rng.integers(0, family.k, size=25).tolist() if family.finite else [0.5, -1.0, 3.0, 7.0, 0.1]
        np.testing.assert_allclose(family.empirical_fisher(theta, xs), _fd_empirical_fisher(family, theta, xs),
                                   rtol=1e-6, atol=1e-7)

    def test_hidden_variable_is_latent_fisher_minus_posterior_covariance(self, hidden_natural):
        theta = np.array([-0.8])
        xs = [0, 1, 1, 2, 2, 2, 0]
        q1 = expit(-0.8)
        emission = np.array([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]])
        covariance = 0.0
        for x in xs:
            post1 = q1 * emission[1, x] / ((1 - q1) * emission[0, x] + q1 * emission[1, x])
            covariance += post1 * (1 - post1)
        expected = q1 * (1 - q1) - covariance / len(xs)
        np.testing.assert_allclose(hidden_natural.empirical_fisher(theta, xs), [[expected]], rtol=1e-12)

    def test_mixture_family_is_positive_semidefinite(self, hidden_simplex, rng):
        for _ in range(20):
            theta = rng.uniform(0.01, 0.99, size=1)
            xs = rng.integers(0, 3, size=12).tolist()
            assert np.linalg.eigvalsh(hidden_simplex.empirical_fisher(theta, xs))[0] >= -1e-12

    def test_mixture_family_band_on_margin_simplex(self, hidden_simplex, rng):
        tau = 0.1
        for _ in range(30):
            a, b = rng.uniform(tau, 1 - tau, size=2)
            xs = rng.integers(0, 3, size=9).tolist()
            ratio = hidden_simplex.empirical_fisher([a], xs)[0, 0] / hidden_simplex.empirical_fisher([b], xs)[0, 0]
            spread = 2.0 * abs(a - b) / tau
            assert math.exp(-spread) - 1e-12 <= ratio <= math.exp(spread) + 1e-12

    def test_contaminated_gaussian_goes_negative(self):
        spec = contaminated_gaussian(math.exp(5.0), 0.01)
        c = critical_radius(spec)
        assert empirical_fisher(spec, [c], [0.0])[0, 0] < 0.0


class TestVStatistic:

    def test_zero_for_exponential(self, rng):
        xs = rng.integers(0, 4, size=10).tolist()
        np.testing.assert_allclose(v_statistic(bernoulli_pair(), [0.2, 0.4], xs), np.zeros((2, 2)), atol=1e-10)

    def test_curved_closed_form(self, rng):
        family = build_family(bernoulli_pair_curve())
        theta = np.array([0.45])
        xs = rng.integers(0, 4, size=15).tolist()
        gap = family.statistic_gap(theta, xs)
        expected = -gap[1] * 2.0 / family.fisher(theta)[0, 0]
        np.testing.assert_allclose(family.v_statistic(theta, xs), [[expected]], rtol=1e-10, atol=1e-12)


class TestMLE:

    def test_bernoulli_frequency(self):
        result = mle(bernoulli_mean(), [1, 1, 0, 1])
        assert result.theta == pytest.approx((0.75,), abs=1e-12)
        assert not result.multiple

    def test_natural_bernoulli_matches_closed_form_for_every_class(self):
        family = build_family(bernoulli_natural())
        n = 12
        for zeros, ones in count_matrix(n, 2):
            result = family.mle(family.observe_counts([zeros, ones]))
            if 0 < ones < n:
                assert result.theta[0] == pytest.approx(logit(ones / n), abs=1e-9)
                assert not result.boundary
            else:
                assert result.boundary
                assert abs(result.theta[0]) == pytest.approx(8.0)

    def test_margin_simplex_caps_frequencies(self, trinomial):
        domain = ParamDomain.simplex(2, 0.1)
        result = trinomial.mle(trinomial.observe_counts([0, 3, 7]), domain)
        np.testing.assert_allclose(result.theta, [0.3 * 0.9 / 1.0, 0.7 * 0.9 / 1.0], atol=1e-12)
        assert result.boundary

    def test_contaminated_gaussian_has_two_maximizers(self):
        family = build_family(contaminated_gaussian(math.exp(5.0), 0.01))
        c = family.critical_radius()
        result = family.mle([c, -c])
        assert result.multiple
        assert result.theta[0] < 0.0
        mirror = family.log_likelihood([-result.theta[0]], [c, -c])
        assert mirror == pytest.approx(result.log_likelihood, abs=1e-8)
        assert result.log_likelihood > family.log_likelihood([0.0], [c, -c])

    def test_empty_sample_raises(self):
        with pytest.raises(DomainError):
            mle(bernoulli_mean(), [])


class TestCriticalRadius:

    def test_plug_in(self):
        c = critical_radius(contaminated_gaussian(math.exp(4.0), 0.5))
        assert c * c == pytest.approx(4.0 / (1.0 - math.exp(-4.0)), rel=1e-12)

    @pytest.mark.parametrize("log_spread_sq, nu", [(2.0, 0.3), (5.0, 0.01), (8.0, 0.2)])
    def test_half_responsibility_at_zero(self, log_spread_sq, nu):
        family = build_family(contaminated_gaussian(math.exp(log_spread_sq), nu))
        c = family.critical_radius()
        assert c * c >= log_spread_sq
        assert family.responsibility(c * c) == pytest.approx(0.5, abs=1e-10)

    def test_needs_contaminated_family(self):
        with pytest.raises(ConfigurationError):
            critical_radius(bernoulli_mean())


class TestLatentDivergenceBound:

    def test_bounds_likelihood_ratio_for_every_class(self, hidden_simplex):
        grid = np.linspace(0.05, 0.95, 19)
        for n in (3, 6, 9):
            for row in count_matrix(n, 3):
                obs = hidden_simplex.observe_counts(row)
                best = hidden_simplex.mle(obs)
                for theta in grid:
                    gap = best.log_likelihood - hidden_simplex.log_likelihood([theta], obs)
                    assert gap <= latent_divergence_bound(hidden_simplex, best.theta, [theta], n) + 1e-8


class TestParamDomain:

    def test_simplex_membership_counts_implicit_coordinate(self):
        domain = ParamDomain.simplex(2, 0.1)
        assert domain.contains([0.1, 0.1])
        assert not domain.contains([0.85, 0.1])

    def test_projection_lands_inside(self, rng):
        domain = ParamDomain.simplex(2, 0.05)
        for _ in range(20):
            point = domain.project(rng.uniform(-1, 2, size=2))
            assert domain.contains(point, tol=1e-12)

    def test_empty_margin_rejected(self):
        with pytest.raises(ValueError):
            ParamDomain.simplex(2, 0.4)


class TestExponentialFamilies:

    @pytest.mark.parametrize("name", EXPONENTIAL_PRESETS)
    def test_empirical_fisher_equals_fisher(self, name):
        family = build_family(name)
        rng = np.random.default_rng(101)
        for _ in range(100):
            theta = _random_theta(family, rng)
            xs = family.sample(theta, 20, rng)
            expected = family.fisher(theta)
            gap = np.max(np.abs(family.empirical_fisher(theta, xs) - expected))
            assert gap <= 1e-10 * max(1.0, np.max(np.abs(expected)))

    @pytest.mark.parametrize("name", EXPONENTIAL_PRESETS)
    def test_score_matches_finite_differences(self, name):
        family = build_family(name)
        rng = np.random.default_rng(202)
        for _ in range(50):
            theta = _random_theta(family, rng)
            xs = family.sample(theta, 20, rng)
            numeric = central_gradient(lambda t: family.log_likelihood(t, xs), theta)
            np.testing.assert_allclose(family.score(theta, xs), numeric, rtol=1e-5, atol=1e-5)

    @pytest.mark.parametrize("name", EXPONENTIAL_PRESETS)
    def test_fisher_matches_finite_differences_of_the_score(self, name):
        family = build_family(name)
        rng = np.random.default_rng(303)
        for _ in range(50):
            theta = _random_theta(family, rng)
            xs = family.sample(theta, 20, rng)
            np.testing.assert_allclose(_fd_empirical_fisher(family, theta, xs), family.fisher(theta),
                                       rtol=1e-5, atol=1e-6)
