"""
Priors over restricted parameter sets and their normalizers

Supported prior kinds:
- jeffreys: |J(theta)|^{1/2} / C_J(K)
- dirichlet_alpha: prod theta_i^{alpha-1} over the simplex, Gamma-function normalizer
- ideal: the Jeffreys density divided by the Gaussian mass of the local
  region U(theta), which puts extra weight near the boundary of K
- uniform / beta_uniform: flat density over a box or simplex

Integrals are taken on deterministic quadrature grids whose nodes stay
strictly inside the domain, so integrands that blow up on a face (Jeffreys
on the simplex, Dirichlet with alpha < 1) are still evaluated safely.
"""
import logging
import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import gammaln, xlogy
from scipy.stats import chi2, norm

from config import (
    GL_NODES_1D, GL_NODES_2D, MC_SAMPLES, MC_SEED, NORMALIZER_MC_SAMPLES, SIMPLEX_NODES,
)
from exceptions import ConfigurationError, DomainError, NumericalError
from model_families import ModelFamily, ParamDomain, build_family
from state import BallMassBound, FactorEstimate, NormalizerBounds
from utils import as_vector, inv_sqrt, log_det_spd, spd_sqrt

logger = logging.getLogger(__name__)


# ---- Quadrature ----

class QuadratureGrid(BaseModel):
    """Tensor-product quadrature rule over a ParamDomain"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scheme: Literal["gauss_legendre", "trapezoid", "simplex_product"]
    nodes_per_axis: int = Field(gt=0)
    nodes: np.ndarray = Field(description="Node coordinates, shape (N, d)")
    weights: np.ndarray = Field(description="Positive weights, shape (N,)")

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @classmethod
    def for_domain(cls, domain: ParamDomain, nodes_per_axis: Optional[int] = None,
                   scheme: Optional[str] = None) -> "QuadratureGrid":
        """Default rule for a domain: product simplex for simplices, Gauss-Legendre for boxes"""
        d = domain.dim
        if scheme is None:
            scheme = "simplex_product" if domain.shape == "simplex" else "gauss_legendre"
        if nodes_per_axis is None:
            if scheme == "simplex_product":
                nodes_per_axis = GL_NODES_1D if d == 1 else SIMPLEX_NODES
            else:
                nodes_per_axis = GL_NODES_1D if d == 1 else (GL_NODES_2D if d == 2 else 24)
        unit, unit_w = _unit_rule(scheme, nodes_per_axis)
        if scheme == "simplex_product":
            if domain.shape != "simplex":
                raise ConfigurationError("simplex_product quadrature needs a simplex domain")
            nodes, weights = _simplex_rule(unit, unit_w, d)
            span = 1.0 - (d + 1) * domain.tau
            nodes = domain.tau + span * nodes
            weights = weights * span ** d
        else:
            if domain.shape == "simplex":
                raise ConfigurationError(f"{scheme} quadrature needs a box domain")
            lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
            mesh = np.array(np.meshgrid(*[unit] * d, indexing="ij")).reshape(d, -1).T
            wmesh = np.array(np.meshgrid(*[unit_w] * d, indexing="ij")).reshape(d, -1).T
            nodes = lo + (hi - lo) * mesh
            weights = np.prod(wmesh, axis=1) * np.prod(hi - lo)
        return cls(scheme=scheme, nodes_per_axis=nodes_per_axis, nodes=nodes, weights=weights)


def _unit_rule(scheme: str, count: int):
    """Nodes and weights on (0, 1)"""
    if scheme == "trapezoid":
        # midpoint offsets keep nodes half a step away from the faces
        return (np.arange(count) + 0.5) / count, np.full(count, 1.0 / count)
    v, w = np.polynomial.legendre.leggauss(count)
    v = 0.5 * (v + 1.0)
    w = 0.5 * w
    # sine map u = (1 - cos(pi v)) / 2 flattens inverse-square-root endpoint singularities
    u = 0.5 * (1.0 - np.cos(np.pi * v))
    return u, w * 0.5 * np.pi * np.sin(np.pi * v)


def _simplex_rule(unit, unit_w, d: int):
    """Collapsed-coordinate product rule on the unit simplex {z >= 0, sum z <= 1}"""
    mesh = np.array(np.meshgrid(*[unit] * d, indexing="ij")).reshape(d, -1).T
    wmesh = np.array(np.meshgrid(*[unit_w] * d, indexing="ij")).reshape(d, -1).T
    nodes = np.empty_like(mesh)
    remaining = np.ones(mesh.shape[0])
    jac = np.ones(mesh.shape[0])
    for k in range(d):
        nodes[:, k] = remaining * mesh[:, k]
        if k < d - 1:
            jac *= remaining
        remaining = remaining * (1.0 - mesh[:, k])
    return nodes, np.prod(wmesh, axis=1) * jac


# ---- Ideal-prior defaults ----

def default_epsilon(n: int) -> float:
    """epsilon_n = sqrt(log n / n)"""
    return math.sqrt(math.log(n) / n)


def default_alpha_scale(n: int) -> float:
    """alpha_n = log n, floored at 1"""
    return max(1.0, math.log(n))


def schedule_diagnostics(n: int, epsilon: float, alpha_scale: float) -> dict:
    """Quantities whose limits the ideal-prior conditions constrain"""
    return {
        "sqrt_n_eps_over_alpha": math.sqrt(n) * epsilon / alpha_scale,
        "n_eps2_over_alpha2": n * epsilon ** 2 / alpha_scale ** 2,
        "eps_alpha": epsilon * alpha_scale,
        "eps_over_alpha": epsilon / alpha_scale,
    }


# ---- Gaussian mass ----

def gaussian_ball_mass(n: int, epsilon: float, d: int) -> float:
    """Standard Gaussian mass of the ball of radius sqrt(n) * epsilon"""
    return float(chi2.cdf(n * epsilon ** 2, d))


def gaussian_ball_mass_bound(n: int, epsilon: float, d: int) -> BallMassBound:
    t = n * epsilon ** 2
    if t <= 0:
        raise DomainError("gaussian_ball_mass_bound needs n * eps^2 > 0")
    bound = 0.0
    if t >= d:
        bound = max(0.0, 1.0 - math.exp(-(t / 2.0) * (1.0 - (d / t) * math.log(t / d)) + d / 2.0))
    simplified = 1.0 - math.exp(-t / 4.0 + d / 2.0) if t / d >= 2.0 else None
    return BallMassBound(bound=bound, simplified=simplified, exact=float(chi2.cdf(t, d)))


def _region_factor(family: ModelFamily, domain: ParamDomain, theta: np.ndarray, epsilon: float,
                   alpha_scale: float, n: int, seed: int, samples: int):
    """(value, stderr, method) for the Gaussian mass of U(theta)"""
    d = domain.dim
    radius = math.sqrt(n) * epsilon
    if not domain.contains(theta):
        return 0.0, 0.0, "empty"
    fisher_matrix = family.fisher(theta)
    if d == 1 or (domain.shape != "simplex" and _is_diagonal(fisher_matrix)):
        lo, hi = np.array(domain.bounds()).T
        scale = math.sqrt(n) * np.sqrt(np.diag(fisher_matrix)) / alpha_scale
        a, b = scale * (lo - theta), scale * (hi - theta)
        if d == 1:
            lo_z, hi_z = max(a[0], -radius), min(b[0], radius)
            return float(max(0.0, norm.cdf(hi_z) - norm.cdf(lo_z))), 0.0, "exact"
        corners = np.maximum(np.abs(a), np.abs(b))
        if float(np.linalg.norm(corners)) <= radius:
            return float(np.prod(norm.cdf(b) - norm.cdf(a))), 0.0, "exact"
        if np.all(-a >= radius) and np.all(b >= radius):
            return float(chi2.cdf(radius ** 2, d)), 0.0, "exact"
    if domain.contains_ellipsoid(theta, fisher_matrix, epsilon * alpha_scale):
        return float(chi2.cdf(radius ** 2, d)), 0.0, "exact"

    rng = np.random.default_rng(_point_seed(seed, theta))
    half = max(1, samples // 2)
    z = rng.standard_normal((half, d))
    back = (alpha_scale / math.sqrt(n)) * inv_sqrt(fisher_matrix)
    a_mat, b_vec = domain.halfspaces()

    def inside(draws):
        in_ball = np.sum(draws * draws, axis=1) <= radius ** 2
        points = theta + draws @ back.T
        return (in_ball & np.all(points @ a_mat.T <= b_vec + 1e-12, axis=1)).astype(float)

    paired = 0.5 * (inside(z) + inside(-z))
    stderr = float(paired.std(ddof=1) / math.sqrt(half)) if half > 1 else 0.0
    return float(paired.mean()), stderr, "monte_carlo"


def _point_seed(seed: int, theta: np.ndarray) -> np.random.SeedSequence:
    """Monte Carlo stream for the factor at theta, keyed on the seed and the bits of theta"""
    words = np.frombuffer(np.ascontiguousarray(theta, dtype=np.float64).tobytes(), dtype=np.uint32)
    return np.random.SeedSequence([int(seed)] + words.tolist())


def _is_diagonal(matrix: np.ndarray) -> bool:
    off = matrix - np.diag(np.diag(matrix))
    return bool(np.max(np.abs(off)) <= 1e-14 * np.max(np.abs(matrix)))


def ideal_prior_factor(family, domain: ParamDomain, theta, epsilon: float, alpha_scale: float, n: int,
                       mc_seed: int = MC_SEED, samples: int = MC_SAMPLES) -> FactorEstimate:
    """
    Standard Gaussian mass of U(theta) = N_{sqrt(n) eps}(0) cap (sqrt(n)/alpha) J^{1/2} (K - theta)

    Exact when d = 1, when K is a box with diagonal J and the region is a box
    or a ball, or when the Fisher ellipsoid of radius eps * alpha fits in K.
    Otherwise Monte Carlo with antithetic pairs.
    """
    if epsilon <= 0 or alpha_scale < 1:
        raise ConfigurationError(f"ideal prior needs eps > 0 and alpha_scale >= 1, got {epsilon}, {alpha_scale}")
    family = build_family(family)
    value, stderr, method = _region_factor(family, domain, as_vector(theta), epsilon, alpha_scale, n,
                                           mc_seed, samples)
    if method == "monte_carlo":
        logger.warning(f"Gaussian-mass factor by Monte Carlo ({samples} draws): {value:.6f} +/- {3 * stderr:.2e}")
    empty = method == "empty"
    return FactorEstimate(value=value, stderr=stderr, method="exact" if empty else method, empty=empty)


def ideal_factor_lower_bound(family, domain: ParamDomain, theta, epsilon: float, alpha_scale: float,
                             n: int) -> float:
    """
    Cone lower bound vol(L) / (2 diam(L)^d V_d) * Phi(N_{sqrt(n) eps}(0)) with L = J^{1/2} K

    Returns 0.0 when the volume condition V_d (eps alpha)^d <= vol(L)/2 fails.
    """
    family = build_family(family)
    d = domain.dim
    fisher_matrix = family.fisher(as_vector(theta))
    root = spd_sqrt(fisher_matrix)
    vol_l = math.exp(0.5 * log_det_spd(fisher_matrix)) * domain.volume()
    unit_ball = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
    if unit_ball * (epsilon * alpha_scale) ** d > vol_l / 2.0:
        return 0.0
    diam_l = domain.diameter(transform=root)
    return vol_l / (2.0 * diam_l ** d * unit_ball) * gaussian_ball_mass(n, epsilon, d)


def ideal_factor_continuity_bound(family, domain: ParamDomain, theta, theta_prime, epsilon: float,
                                  alpha_scale: float, n: int, rho: Optional[float] = None,
                                  max_eigenvalue: Optional[float] = None) -> float:
    """
    Upper bound on factor(theta') / factor(theta) for |theta' - theta| = r <= eps

    1 + sqrt(n lam) r / (rho alpha) + C_d diam(K) sqrt(n lam) max(g, 0) / (rho alpha)
    with C_d = 2^{1-d/2} Gamma(d/2) and g = max ||J(theta)^{-1/2} J(theta'')^{1/2}||_s - 1
    over test points theta'' of B_r(theta) cap K.
    """
    family = build_family(family)
    theta, theta_prime = as_vector(theta), as_vector(theta_prime)
    d = domain.dim
    r = float(np.linalg.norm(theta_prime - theta))
    if r > epsilon:
        raise DomainError(f"continuity bound needs |theta' - theta| <= eps, got {r} > {epsilon}")
    if rho is None:
        rho = ideal_prior_factor(family, domain, theta, epsilon, alpha_scale, n).value
    if max_eigenvalue is None:
        grid = QuadratureGrid.for_domain(domain, nodes_per_axis=16 if d == 1 else 8)
        points = np.vstack([grid.nodes, theta, theta_prime])
        max_eigenvalue = max(float(np.linalg.eigvalsh(family.fisher(p))[-1]) for p in points)
    inv_root = inv_sqrt(family.fisher(theta))
    neighbors = [theta_prime] + [domain.project(theta + s * r * e) for e in np.eye(d) for s in (-1.0, 1.0)]
    g = max(float(np.linalg.norm(inv_root @ spd_sqrt(family.fisher(p)), 2)) for p in neighbors) - 1.0
    c_d = 2.0 ** (1.0 - d / 2.0) * math.gamma(d / 2.0)
    lead = math.sqrt(n * max_eigenvalue) / (rho * alpha_scale)
    return 1.0 + lead * r + c_d * domain.diameter() * lead * max(g, 0.0)


# ---- Integrals ----

def _sqrt_det_fisher(family: ModelFamily, nodes: np.ndarray) -> np.ndarray:
    values = np.empty(nodes.shape[0])
    for i, node in enumerate(nodes):
        try:
            values[i] = math.exp(0.5 * log_det_spd(family.fisher(node)))
        except NumericalError as e:
            raise NumericalError(f"Jeffreys integrand failed at node {node.tolist()}: {e}")
        if not math.isfinite(values[i]):
            raise NumericalError(f"Jeffreys integrand is not finite at node {node.tolist()}")
    return values


def jeffreys_integral(family, domain: Optional[ParamDomain] = None,
                      grid: Optional[QuadratureGrid] = None) -> float:
    """C_J(K) = integral over K of |J(theta)|^{1/2}"""
    family = build_family(family)
    domain = domain or family.domain
    grid = grid or QuadratureGrid.for_domain(domain)
    return float(np.dot(grid.weights, _sqrt_det_fisher(family, grid.nodes)))


def _node_factors(family, domain, grid, epsilon, alpha_scale, n, seed, samples):
    factors = np.empty(grid.size)
    monte_carlo = 0
    for i, node in enumerate(grid.nodes):
        value, _, method = _region_factor(family, domain, node, epsilon, alpha_scale, n, seed, samples)
        if value <= 0.0:
            raise NumericalError(f"Gaussian-mass factor is zero at node {node.tolist()}")
        factors[i] = value
        monte_carlo += method == "monte_carlo"
    if monte_carlo:
        logger.warning(f"{monte_carlo} of {grid.size} prior factors estimated by Monte Carlo")
    return factors


def ideal_prior_normalizer(family, domain: ParamDomain, epsilon: float, alpha_scale: float, n: int,
                           grid: Optional[QuadratureGrid] = None, mc_seed: int = MC_SEED,
                           samples: int = NORMALIZER_MC_SAMPLES) -> float:
    """Quadrature of |J|^{1/2} / factor over K"""
    family = build_family(family)
    grid = grid or QuadratureGrid.for_domain(domain)
    factors = _node_factors(family, domain, grid, epsilon, alpha_scale, n, mc_seed, samples)
    return float(np.dot(grid.weights, _sqrt_det_fisher(family, grid.nodes) / factors))


def ideal_normalizer_bounds(family, domain: ParamDomain, epsilon: float, alpha_scale: float, n: int,
                            grid: Optional[QuadratureGrid] = None, mc_seed: int = MC_SEED,
                            samples: int = NORMALIZER_MC_SAMPLES) -> NormalizerBounds:
    """
    Sandwich C_J(K) <= C_ideal <= C_J / (1 - e^{-n eps^2/4 + d/2}) + C_J(K minus K_{eps alpha}) / rho

    rho is the smallest cone bound over boundary nodes when the volume
    condition holds at all of them, otherwise the smallest observed factor.
    """
    family = build_family(family)
    d = domain.dim
    grid = grid or QuadratureGrid.for_domain(domain)
    root_det = _sqrt_det_fisher(family, grid.nodes)
    factors = _node_factors(family, domain, grid, epsilon, alpha_scale, n, mc_seed, samples)
    interior = np.array([domain.contains_ellipsoid(node, family.fisher(node), epsilon * alpha_scale)
                         for node in grid.nodes])
    jeffreys = float(np.dot(grid.weights, root_det))
    boundary_mass = float(np.dot(grid.weights[~interior], root_det[~interior]))

    rho, source = 1.0, "volume_ratio"
    if np.any(~interior):
        cone = [ideal_factor_lower_bound(family, domain, node, epsilon, alpha_scale, n)
                for node in grid.nodes[~interior]]
        if min(cone) > 0.0:
            rho = min(cone)
        else:
            rho, source = float(factors[~interior].min()), "observed"

    ball = gaussian_ball_mass_bound(n, epsilon, d)
    ball_bound = ball.simplified if ball.simplified is not None else ball.bound
    upper = jeffreys / ball_bound + boundary_mass / rho if ball_bound > 0 else math.inf
    smallest = min(float(np.linalg.eigvalsh(family.fisher(x))[0]) for x in grid.nodes)
    if (epsilon * alpha_scale) ** 2 > smallest:
        logger.debug(f"eps^2 alpha^2 exceeds the smallest Fisher eigenvalue {smallest:.4g} on the grid")
    return NormalizerBounds(
        jeffreys=jeffreys,
        value=float(np.dot(grid.weights, root_det / factors)),
        upper=upper,
        rho=rho,
        rho_source=source,
        interior_fraction=1.0 - boundary_mass / jeffreys,
    )


# ---- Prior specs ----

class PriorSpec(BaseModel):
    """JSON description of a prior; numeric defaults follow the ideal-prior schedule"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["jeffreys", "dirichlet_alpha", "ideal", "uniform", "beta_uniform"]
    alpha: Optional[float] = Field(default=None, gt=0.0, le=1.0, description="Dirichlet exponent")
    epsilon: Optional[float] = Field(default=None, gt=0.0)
    alpha_scale: Optional[float] = Field(default=None, ge=1.0)
    n: Optional[int] = Field(default=None, ge=2)
    half_width: Optional[float] = Field(default=None, gt=0.0, description="Side b of the beta box")
    mc_seed: int = MC_SEED
    mc_samples: int = Field(default=NORMALIZER_MC_SAMPLES, ge=2)
    nodes_per_axis: Optional[int] = Field(default=None, gt=0)


class Prior:
    """
    A prior density bound to a family and a domain

    The normalizer (and for the ideal kind the per-node Gaussian-mass
    factors) is computed once at construction; afterwards the object is
    read-only.
    """

    def __init__(self, spec: PriorSpec, family, domain: Optional[ParamDomain] = None,
                 grid: Optional[QuadratureGrid] = None):
        self.spec = spec
        self.family = build_family(family)
        if spec.kind == "beta_uniform":
            if spec.half_width is None:
                raise ConfigurationError("beta_uniform prior needs half_width")
            d2 = self.family.d ** 2
            domain = ParamDomain.box([-spec.half_width / 2.0] * d2, [spec.half_width / 2.0] * d2)
        self.domain = domain or self.family.domain
        self.grid = grid or QuadratureGrid.for_domain(self.domain, spec.nodes_per_axis)
        if spec.kind == "ideal":
            if spec.n is None:
                raise ConfigurationError("ideal prior needs n")
            self.epsilon = spec.epsilon or default_epsilon(spec.n)
            self.alpha_scale = spec.alpha_scale or default_alpha_scale(spec.n)
        if spec.kind == "dirichlet_alpha":
            if spec.alpha is None:
                raise ConfigurationError("dirichlet_alpha prior needs alpha")
            if self.domain.shape != "simplex":
                raise ConfigurationError("dirichlet_alpha prior needs a simplex domain")
        self.log_normalizer = self._log_normalizer()
        logger.debug(f"Prior {spec.kind} on {self.family.name}: log normalizer {self.log_normalizer:.10f}")

    def _unnormalized_log(self, nodes: np.ndarray, factors: Optional[np.ndarray] = None) -> np.ndarray:
        kind = self.spec.kind
        if kind == "jeffreys":
            return np.log(_sqrt_det_fisher(self.family, nodes))
        if kind == "ideal":
            if factors is None:
                factors = np.array([
                    _region_factor(self.family, self.domain, x, self.epsilon, self.alpha_scale, self.spec.n,
                                   self.spec.mc_seed, self.spec.mc_samples)[0]
                    for x in nodes
                ])
            return np.log(_sqrt_det_fisher(self.family, nodes) / factors)
        if kind == "dirichlet_alpha":
            full = np.column_stack([1.0 - nodes.sum(axis=1), nodes])
            return np.sum(xlogy(self.spec.alpha - 1.0, full), axis=1)
        return np.zeros(nodes.shape[0])

    def _log_normalizer(self) -> float:
        kind = self.spec.kind
        self.node_factors = None
        if kind in ("uniform", "beta_uniform"):
            return math.log(self.domain.volume())
        if kind == "dirichlet_alpha" and self.domain.tau == 0.0:
            m = self.domain.dim + 1
            return float(m * gammaln(self.spec.alpha) - gammaln(m * self.spec.alpha))
        if kind == "ideal":
            self.node_factors = _node_factors(self.family, self.domain, self.grid, self.epsilon,
                                              self.alpha_scale, self.spec.n, self.spec.mc_seed,
                                              self.spec.mc_samples)
        values = np.exp(self._unnormalized_log(self.grid.nodes, self.node_factors))
        total = float(np.dot(self.grid.weights, values))
        if not math.isfinite(total) or total <= 0:
            raise NumericalError(f"{kind} prior normalizer is not finite and positive: {total}")
        return math.log(total)

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    def log_density(self, theta) -> float:
        theta = as_vector(theta)
        if not self.domain.contains(theta):
            return -math.inf
        return float(self._unnormalized_log(theta.reshape(1, -1))[0] - self.log_normalizer)

    def node_log_weights(self) -> np.ndarray:
        """log(quadrature weight * density) at the grid nodes, normalized to sum to one"""
        raw = np.log(self.grid.weights) + self._unnormalized_log(self.grid.nodes, self.node_factors)
        return raw - np.logaddexp.reduce(raw)


def build_prior(spec: PriorSpec, family, domain: Optional[ParamDomain] = None,
                grid: Optional[QuadratureGrid] = None) -> Prior:
    return Prior(spec, family, domain, grid)


def prior_log_density(prior, family, theta, domain: Optional[ParamDomain] = None) -> float:
    """Log prior density at theta; -inf outside the domain"""
    if isinstance(prior, PriorSpec):
        prior = Prior(prior, family, domain)
    return prior.log_density(theta)
