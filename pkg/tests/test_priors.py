import math

import numpy as np
import pytest
from scipy.stats import chi2, norm

from model_families import ParamDomain, bernoulli_mean, bernoulli_natural, build_family, gaussian_location, multinomial
from priors import (
    Prior, PriorSpec, QuadratureGrid, default_alpha_scale, default_epsilon, gaussian_ball_mass_bound,
    ideal_factor_continuity_bound, ideal_factor_lower_bound, ideal_normalizer_bounds, ideal_prior_factor,
    ideal_prior_normalizer, jeffreys_integral, prior_log_density, schedule_diagnostics,
)


class TestJeffreysIntegral:

    def test_bernoulli_full_simplex(self):
        assert jeffreys_integral(bernoulli_mean()) == pytest.approx(math.pi, rel=1e-6)

    def test_bernoulli_sub_interval(self):
        expected = 2.0 * (math.asin(math.sqrt(0.8)) - math.asin(math.sqrt(0.2)))
        value = jeffreys_integral(bernoulli_mean(), ParamDomain.interval(0.2, 0.8))
        assert value == pytest.approx(expected, rel=1e-6)
        assert value == pytest.approx(1.28700, abs=1e-5)

    def test_trinomial_full_simplex(self):
        assert jeffreys_integral(multinomial(3)) == pytest.approx(2.0 * math.pi, rel=1e-6)

    def test_stable_under_grid_doubling(self):
        domain = ParamDomain.simplex(1)
        coarse = jeffreys_integral(bernoulli_mean(), domain, QuadratureGrid.for_domain(domain, 256))
        fine = jeffreys_integral(bernoulli_mean(), domain, QuadratureGrid.for_domain(domain, 512))
        assert coarse == pytest.approx(fine, rel=1e-6)

    def test_natural_parameter_interval(self):
        # integral of 1 / (2 cosh(theta / 2)) is atan(sinh(theta / 2))
        value = jeffreys_integral(bernoulli_natural(), ParamDomain.interval(-2.0, 2.0))
        assert value == pytest.approx(2.0 * math.atan(math.sinh(1.0)), rel=1e-9)


class TestPriorDensity:

    def test_jeffreys_at_center(self):
        value = prior_log_density(PriorSpec(kind="jeffreys"), bernoulli_mean(), [0.5])
        assert value == pytest.approx(math.log(2.0 / math.pi), abs=1e-6)

    def test_dirichlet_half_matches_jeffreys(self):
        value = prior_log_density(PriorSpec(kind="dirichlet_alpha", alpha=0.5), bernoulli_mean(), [0.5])
        assert value == pytest.approx(math.log(2.0 / math.pi), abs=1e-12)

    def test_outside_domain_is_minus_infinity(self):
        prior = Prior(PriorSpec(kind="jeffreys"), bernoulli_mean(), ParamDomain.interval(0.2, 0.8))
        assert prior.log_density([0.9]) == -math.inf

    @pytest.mark.parametrize("spec", [
        PriorSpec(kind="jeffreys"),
        PriorSpec(kind="dirichlet_alpha", alpha=0.5),
        PriorSpec(kind="uniform"),
        PriorSpec(kind="ideal", n=200),
    ])
    def test_integrates_to_one(self, spec):
        prior = Prior(spec, bernoulli_mean())
        densities = np.exp([prior.log_density(node) for node in prior.grid.nodes])
        assert float(np.dot(prior.grid.weights, densities)) == pytest.approx(1.0, abs=1e-6)

    def test_dirichlet_dominates_jeffreys_near_faces(self):
        dirichlet = Prior(PriorSpec(kind="dirichlet_alpha", alpha=0.25), bernoulli_mean())
        jeffreys = Prior(PriorSpec(kind="jeffreys"), bernoulli_mean())
        ratios = [dirichlet.log_density([t]) - jeffreys.log_density([t]) for t in (1e-2, 1e-3, 1e-4)]
        assert ratios[0] < ratios[1] < ratios[2]

    def test_ideal_density_dominates_scaled_jeffreys(self):
        ideal = Prior(PriorSpec(kind="ideal", n=100), bernoulli_mean())
        jeffreys = Prior(PriorSpec(kind="jeffreys"), bernoulli_mean())
        shift = jeffreys.log_normalizer - ideal.log_normalizer
        for theta in np.linspace(0.01, 0.99, 25):
            assert ideal.log_density([theta]) >= jeffreys.log_density([theta]) + shift - 1e-12

    def test_density_agrees_with_node_weights(self):
        spec = PriorSpec(kind="ideal", n=50, mc_samples=2000, nodes_per_axis=4)
        prior = Prior(spec, multinomial(3), ParamDomain.simplex(2, 0.05))
        densities = np.array([prior.log_density(node) for node in prior.grid.nodes])
        np.testing.assert_allclose(prior.node_log_weights(), np.log(prior.grid.weights) + densities, atol=1e-10)
        assert prior.log_density(prior.grid.nodes[0]) == densities[0]

class TestIdealPriorFactor:

    def test_one_dimensional_face(self):
        family = build_family(gaussian_location())
        estimate = ideal_prior_factor(family, ParamDomain.interval(0.0, 1.0), [1.0], 0.3, 1.0, 100)
        assert estimate.method == "exact"
        assert estimate.value == pytest.approx(norm.cdf(0.0) - norm.cdf(-3.0), abs=1e-12)
        assert estimate.value == pytest.approx(0.49865, abs=1e-5)

    def test_interior_approaches_one(self):
        family = build_family(gaussian_location())
        values = []
        for n in (100, 1000, 10000):
            eps = default_epsilon(n)
            values.append(ideal_prior_factor(family, family.domain, [0.0], eps, default_alpha_scale(n), n).value)
        assert values[0] < values[1] < values[2]
        assert values[2] == pytest.approx(chi2.cdf(math.log(10000), 1), rel=1e-12)
        assert values[2] > 0.99

    def test_interior_exceeds_simplified_ball_bound(self):
        n, eps = 100, math.sqrt(8.0 / 100)
        family = build_family(gaussian_location())
        value = ideal_prior_factor(family, family.domain, [0.0], eps, 1.0, n).value
        assert value > 1.0 - math.exp(-2.0 + 0.5)

    def test_flat_boundary_is_near_half(self):
        family = build_family(gaussian_location())
        n = 10000
        eps = default_epsilon(n)
        wide_alpha = 100.0 * math.sqrt(n) * eps
        value = ideal_prior_factor(family, ParamDomain.interval(0.0, 50.0), [0.0], eps, wide_alpha, n).value
        assert abs(value - 0.5) < 0.02

    def test_nonincreasing_in_alpha_scale(self):
        family = build_family(bernoulli_natural())
        domain = ParamDomain.interval(-2.0, 2.0)
        n, eps = 1000, default_epsilon(1000)
        for theta in (-1.95, -1.0, 0.0, 1.7):
            values = [ideal_prior_factor(family, domain, [theta], eps, a, n).value for a in (1.0, 3.0, 9.0, 27.0)]
            assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))

    def test_outside_domain_is_empty(self):
        family = build_family(gaussian_location())
        estimate = ideal_prior_factor(family, ParamDomain.interval(0.0, 1.0), [2.0], 0.3, 1.0, 100)
        assert estimate.empty and estimate.value == 0.0

    def test_cone_lower_bound_holds(self):
        family = build_family(bernoulli_natural())
        domain = ParamDomain.interval(-2.0, 2.0)
        n = 10000
        eps, alpha = default_epsilon(n), default_alpha_scale(n)
        for theta in np.linspace(-2.0, 2.0, 21):
            bound = ideal_factor_lower_bound(family, domain, [theta], eps, alpha, n)
            assert bound > 0.0
            assert ideal_prior_factor(family, domain, [theta], eps, alpha, n).value >= bound

    def test_continuity_bound_on_neighbor_pairs(self):
        family = build_family(bernoulli_natural())
        domain = ParamDomain.interval(-2.0, 2.0)
        n = 1000
        eps, alpha = default_epsilon(n), default_alpha_scale(n)
        for theta in (-1.99, -1.5, 0.0, 1.98):
            neighbor = float(np.clip(theta + 0.5 * eps, -2.0, 2.0))
            base = ideal_prior_factor(family, domain, [theta], eps, alpha, n).value
            other = ideal_prior_factor(family, domain, [neighbor], eps, alpha, n).value
            bound = ideal_factor_continuity_bound(family, domain, [theta], [neighbor], eps, alpha, n)
            assert other / base <= bound


class TestGaussianBallMassBound:

    def test_one_dimension_at_eight(self):
        result = gaussian_ball_mass_bound(8, 1.0, 1)
        assert result.simplified == pytest.approx(1.0 - math.exp(-1.5), abs=1e-12)
        assert result.exact == pytest.approx(0.99532, abs=1e-5)
        assert result.bound == pytest.approx(1.0 - math.exp(-4.0 + 0.5 * math.log(8.0) + 0.5), rel=1e-12)

    def test_simplified_bound_at_validity_edge(self):
        result = gaussian_ball_mass_bound(4, 1.0, 2)
        assert result.simplified == pytest.approx(0.0, abs=1e-15)

    def test_no_bound_below_dimension(self):
        result = gaussian_ball_mass_bound(1, 1.0, 2)
        assert result.bound == 0.0 and result.simplified is None

    def test_bounds_below_exact_on_lattice(self):
        points = [(n, eps, d) for n in (10, 100, 1000, 10000) for eps in (0.05, 0.2) for d in (1, 2, 3)]
        points = points[:20]
        assert len(points) == 20
        for n, eps, d in points:
            result = gaussian_ball_mass_bound(n, eps, d)
            assert result.bound <= result.exact + 1e-12
            if result.simplified is not None:
                assert result.simplified <= result.exact + 1e-12


class TestIdealPriorNormalizer:

    def test_sandwich(self):
        family = build_family(bernoulli_natural())
        domain = ParamDomain.interval(-2.0, 2.0)
        n = 1000
        bounds = ideal_normalizer_bounds(family, domain, default_epsilon(n), default_alpha_scale(n), n)
        assert bounds.jeffreys <= bounds.value <= bounds.upper
        assert 0.0 < bounds.rho <= 1.0
        assert 0.0 <= bounds.interior_fraction <= 1.0

    def test_natural_bernoulli_ratio_at_ten_thousand(self):
        family = build_family(bernoulli_natural())
        domain = ParamDomain.interval(-2.0, 2.0)
        n = 10000
        ratio = (ideal_prior_normalizer(family, domain, default_epsilon(n), default_alpha_scale(n), n)
                 / jeffreys_integral(family, domain))
        assert 1.0 <= ratio < 1.1

    def test_ratio_trend_toward_one(self):
        family = build_family(bernoulli_mean())
        domain = family.domain
        jeffreys = jeffreys_integral(family, domain)
        ratios = []
        for n in (100, 1000, 10000):
            normalizer = ideal_prior_normalizer(family, domain, default_epsilon(n), default_alpha_scale(n), n)
            ratios.append(normalizer / jeffreys)
        assert all(r >= 1.0 for r in ratios)
        assert ratios[0] > ratios[1] > ratios[2]
        assert ratios[2] < 1.15


class TestScheduleDiagnostics:

    @pytest.mark.parametrize("n", [100, 10_000, 1_000_000])
    def test_default_schedule(self, n):
        values = schedule_diagnostics(n, default_epsilon(n), default_alpha_scale(n))
        assert values["sqrt_n_eps_over_alpha"] == pytest.approx(1.0 / math.sqrt(math.log(n)), rel=1e-12)
        assert values["n_eps2_over_alpha2"] == pytest.approx(1.0 / math.log(n), rel=1e-12)

    def test_eps_alpha_shrinks(self):
        values = [schedule_diagnostics(n, default_epsilon(n), default_alpha_scale(n))["eps_alpha"]
                  for n in (100, 10_000, 1_000_000)]
        assert values[0] > values[1] > values[2]
