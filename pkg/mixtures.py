"""
Coding strategies: Bayes mixtures, tilted enlargements, NML and composites

A strategy assigns a (sub-)probability q(x^n) to every string. All
strategies here are exchangeable over finite alphabets, so they are
evaluated on count vectors; log_marginal_counts() takes a whole matrix of
count classes at once, which is what the regret tools and the arithmetic
coder use.
"""
import logging
import math
from typing import List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import betainc, betaincc, betaln, gammaln, logsumexp

from config import BETA_NODES, COMPOSITE_MASS_TOL, PREDICTIVE_TOL, TILT_HALF_WIDTH
from exceptions import ConfigurationError, DomainError, NumericalError, TiltingError
from model_families import (
    FamilySpec, HiddenVariableFamily, ModelFamily, ParamDomain, build_family, counts_dot_log,
    max_log_likelihood,
)
from priors import Prior, PriorSpec, QuadratureGrid
from utils import as_vector, count_matrix, inv_sqrt, log_multinomial

logger = logging.getLogger(__name__)


class StrategySpec(BaseModel):
    """
    JSON description of a coding strategy

    Composite kinds list their children with weights; the builder kinds
    (theorem5, theorem7, theorem8) expand into composites with the documented weights.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["fixed", "bayes", "tilted", "nml", "composite", "theorem5", "theorem7", "theorem8"]
    id: Optional[str] = None
    family: Optional[Union[FamilySpec, str]] = None
    domain: Optional[ParamDomain] = None
    prior: Optional[PriorSpec] = None
    theta: Optional[List[float]] = None
    n: Optional[int] = Field(default=None, ge=1)
    half_width: float = Field(default=TILT_HALF_WIDTH, gt=0.0)
    beta_nodes: Optional[int] = Field(default=None, gt=0)
    nodes_per_axis: Optional[int] = Field(default=None, gt=0)
    weights: Optional[List[float]] = None
    children: Optional[List["StrategySpec"]] = None
    r: Optional[float] = Field(default=None, gt=0.0)
    epsilon: Optional[float] = Field(default=None, gt=0.0)
    alpha_scale: Optional[float] = Field(default=None, ge=1.0)
    alpha: Optional[float] = Field(default=None, gt=0.0, lt=0.5)
    p: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    mix_weight: Optional[float] = Field(default=None, gt=0.0, lt=0.5)
    tau: Optional[float] = Field(default=None, ge=0.0)
    ambient_domain: Optional[ParamDomain] = None

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "composite":
            if not self.children or not self.weights or len(self.children) != len(self.weights):
                raise ValueError("composite strategy needs matching children and weights")
        if self.kind == "fixed" and self.theta is None:
            raise ValueError("fixed strategy needs theta")
        return self

    @property
    def label(self) -> str:
        return self.id or self.kind


StrategySpec.model_rebuild()


# ---- Strategies ----

class Strategy:
    """Base class for built strategies; evaluation methods are pure"""

    kind = "strategy"

    def __init__(self, family: ModelFamily, name: str):
        self.family = family
        self.name = name

    def log_marginal_counts(self, counts: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def _log_marginal_points(self, xs) -> float:
        raise ConfigurationError(f"{self.name}: strategy needs a finite alphabet")

    def log_marginal(self, xs) -> float:
        if len(xs) == 0:
            return 0.0
        if not self.family.finite:
            return self._log_marginal_points(xs)
        counts = self.family.observe(xs).weights.astype(np.int64)
        return float(self.log_marginal_counts(counts[None, :])[0])

    def predictive_counts(self, counts) -> np.ndarray:
        """Next-symbol distribution after a prefix with the given counts"""
        counts = np.asarray(counts, dtype=np.int64)
        rows = np.vstack([counts, counts + np.eye(counts.size, dtype=np.int64)])
        values = self.log_marginal_counts(rows)
        if not np.isfinite(values[0]):
            raise NumericalError(f"{self.name}: prefix has zero probability")
        probs = np.exp(values[1:] - values[0])
        total = probs.sum()
        if abs(total - 1.0) > PREDICTIVE_TOL:
            logger.warning(f"{self.name}: predictive sums to {total:.12f}; renormalized")
        return probs / total

    def predictive(self, prefix) -> np.ndarray:
        if not self.family.finite:
            raise ConfigurationError("predictive distributions need a finite alphabet")
        return self.predictive_counts(self.family.observe(prefix).weights)

    def total_mass(self, n: int) -> float:
        """Sum of q(x^n) over all strings of length n"""
        counts = count_matrix(n, self.family.k)
        return float(np.exp(logsumexp(log_multinomial(counts) + self.log_marginal_counts(counts))))


class FixedStrategy(Strategy):
    """i.i.d. coding with a fixed parameter theta_0"""

    kind = "fixed"

    def __init__(self, family: ModelFamily, theta, name: str = "fixed"):
        super().__init__(family, name)
        self.theta = family.check_theta(theta)
        self.log_probs = family.symbol_log_probs(self.theta)

    def log_marginal_counts(self, counts):
        return counts_dot_log(np.atleast_2d(counts), self.log_probs)


class BayesMixture(Strategy):
    """
    q(x^n) = integral of p(x^n|theta) w(theta) by quadrature

    Multinomial families with Jeffreys or Dirichlet priors use the exact
    Beta/Dirichlet integrals instead (truncated Beta for d = 1 on a
    sub-interval).
    """

    kind = "bayes"

    def __init__(self, family: ModelFamily, prior: Prior, name: str = "bayes", conjugate: bool = True):
        super().__init__(family, name)
        self.prior = prior
        self.nodes = prior.grid.nodes
        self.node_log_weights = prior.node_log_weights()
        self.conjugate_exponent = self._conjugate_exponent() if conjugate else None
        if family.finite:
            self.log_table = np.array([family.symbol_log_probs(t) for t in self.nodes])
        logger.debug(f"{name}: {self.nodes.shape[0]} nodes, conjugate={self.conjugate_exponent is not None}")

    def _conjugate_exponent(self) -> Optional[float]:
        family, spec, domain = self.family, self.prior.spec, self.prior.domain
        if not (isinstance(family, HiddenVariableFamily) and family.is_multinomial):
            return None
        if spec.kind not in ("jeffreys", "dirichlet_alpha"):
            return None
        full_simplex = domain.shape == "simplex" and domain.tau == 0.0
        if not full_simplex and family.d != 1:
            return None
        return 0.5 if spec.kind == "jeffreys" else spec.alpha

    def _conjugate_log_marginal(self, counts: np.ndarray) -> np.ndarray:
        a = self.conjugate_exponent
        domain = self.prior.domain
        counts = counts.astype(float)
        m = counts.shape[1]
        if domain.shape == "simplex" and domain.tau == 0.0:
            norm = m * gammaln(a) - gammaln(m * a)
            return gammaln(counts + a).sum(axis=1) - gammaln(counts.sum(axis=1) + m * a) - norm
        lo, hi = domain.bounds()[0]
        # symbol 1 has probability theta, symbol 0 has 1 - theta
        top = counts[:, 1] + a
        bottom = counts[:, 0] + a
        log_mass = betaln(top, bottom) + _log_beta_window(top, bottom, lo, hi)
        prior_mass = betaln(a, a) + _log_beta_window(np.array([a]), np.array([a]), lo, hi)[0]
        return log_mass - prior_mass

    def log_marginal_counts(self, counts):
        counts = np.atleast_2d(counts)
        if self.conjugate_exponent is not None:
            return self._conjugate_log_marginal(counts)
        values = logsumexp(self.node_log_weights + counts_dot_log(counts, self.log_table), axis=1)
        if np.any(np.isneginf(values)):
            raise NumericalError(f"{self.name}: every quadrature node gives zero likelihood")
        return values

    def _log_marginal_points(self, xs) -> float:
        obs = self.family.observe(xs)
        ll = np.array([self.family._ll_obs(t, obs) for t in self.nodes])
        value = float(logsumexp(self.node_log_weights + ll))
        if not math.isfinite(value):
            raise NumericalError(f"{self.name}: every quadrature node gives zero likelihood")
        return value


def _log_beta_window(a: np.ndarray, b: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """log(I_hi(a, b) - I_lo(a, b)), choosing the tail that avoids cancellation"""
    left_lo, left_hi = betainc(a, b, lo), betainc(a, b, hi)
    right_lo, right_hi = betaincc(a, b, lo), betaincc(a, b, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(left_lo < 0.5, np.log(left_hi - left_lo), np.log(right_lo - right_hi))


class TiltedMixture(Strategy):
    """
    Mixture over the tilted enlargement p_e(x|theta, beta)

    theta is drawn from a prior over K and beta uniformly from the box
    (-b/2, b/2)^{d x d}; the tilt uses the single-symbol deviation
    statistic V_1(x|theta).
    """

    kind = "tilted"

    def __init__(self, family: ModelFamily, theta_prior: Prior, half_width: float = TILT_HALF_WIDTH,
                 beta_nodes: Optional[int] = None, name: str = "tilted"):
        if not family.finite:
            raise ConfigurationError("tilted mixtures are tabulated over a finite alphabet")
        super().__init__(family, name)
        d = family.d
        self.half_width = half_width
        beta_box = ParamDomain.box([-half_width / 2.0] * d * d, [half_width / 2.0] * d * d)
        beta_grid = QuadratureGrid.for_domain(beta_box, beta_nodes or BETA_NODES.get(d, 3))
        beta_lw = np.log(beta_grid.weights) - np.logaddexp.reduce(np.log(beta_grid.weights))
        corners = beta_box.vertices()

        tables, weights, spread = [], [], 0.0
        for theta, lw in zip(theta_prior.grid.nodes, theta_prior.node_log_weights()):
            logp = family.symbol_log_probs(theta)
            v_flat = family.symbol_v(theta).reshape(family.k, d * d)
            for corner in corners:
                if not np.isfinite(logsumexp(logp + v_flat @ corner)):
                    raise TiltingError(f"psi is not finite at theta={theta.tolist()}, beta={corner.tolist()}")
            tilts = v_flat @ beta_grid.nodes.T
            logpe = logp[:, None] + tilts
            logpe = logpe - logsumexp(logpe, axis=0)
            tables.append(logpe.T)
            weights.append(lw + beta_lw)
            spread = max(spread, _max_tilt_covariance(v_flat, np.exp(logpe)))
        self.log_table = np.vstack(tables)
        self.node_log_weights = np.concatenate(weights)
        self.max_covariance = spread
        logger.debug(f"{name}: {self.log_table.shape[0]} (theta, beta) nodes, lambda*={spread:.4g}")

    def log_marginal_counts(self, counts):
        values = logsumexp(self.node_log_weights + counts_dot_log(np.atleast_2d(counts), self.log_table), axis=1)
        if np.any(np.isneginf(values)):
            raise NumericalError(f"{self.name}: every node gives zero likelihood")
        return values


def _max_tilt_covariance(v_flat: np.ndarray, pe: np.ndarray) -> float:
    """Largest eigenvalue of Cov(vec V_1) under p_e over the beta nodes"""
    best = 0.0
    for column in pe.T:
        mean = column @ v_flat
        centered = v_flat - mean
        cov = (centered * column[:, None]).T @ centered
        best = max(best, float(np.linalg.eigvalsh(cov)[-1]))
    return best


class NMLStrategy(Strategy):
    """
    Normalized maximum likelihood over strings of length n

    q(x^n) = max_{theta in K} p(x^n|theta) / c_{n,K}. Shorter prefixes get
    the marginal obtained by summing over all continuations, which makes
    the strategy usable sequentially.
    """

    kind = "nml"

    def __init__(self, family: ModelFamily, domain: ParamDomain, n: int, name: str = "nml"):
        if not family.finite:
            raise ConfigurationError("NML needs a finite alphabet")
        super().__init__(family, name)
        self.domain = domain
        self.n = n
        classes = count_matrix(n, family.k)
        max_ll = max_log_likelihood(family, classes, domain)
        self.log_constant = float(logsumexp(log_multinomial(classes) + max_ll))
        self._max_ll = {tuple(row): value for row, value in zip(classes.tolist(), max_ll)}
        logger.debug(f"{name}: log c_(n={n}) = {self.log_constant:.12f}")

    def log_marginal_counts(self, counts):
        counts = np.atleast_2d(counts)
        values = np.empty(counts.shape[0])
        for i, row in enumerate(counts):
            t = int(row.sum())
            if t > self.n:
                raise DomainError(f"{self.name}: string length {t} exceeds n={self.n}")
            if t == self.n:
                values[i] = self._max_ll[tuple(int(c) for c in row)] - self.log_constant
                continue
            rest = count_matrix(self.n - t, self.family.k)
            full = rest + row
            terms = log_multinomial(rest) + np.array([self._max_ll[tuple(r)] for r in full.tolist()])
            values[i] = logsumexp(terms) - self.log_constant
        return values


class CompositeStrategy(Strategy):
    """Convex (possibly deficient) combination of strategies over one alphabet"""

    kind = "composite"

    def __init__(self, children: Sequence[Strategy], weights: Sequence[float], name: str = "composite"):
        weights = np.asarray(weights, dtype=float)
        if len(children) == 0 or len(children) != weights.size:
            raise ConfigurationError("composite needs one weight per child")
        if np.any(weights <= 0):
            raise ConfigurationError(f"composite weights must be positive, got {weights.tolist()}")
        if weights.sum() > 1.0 + COMPOSITE_MASS_TOL:
            raise ConfigurationError(f"composite weights sum to {weights.sum():.6f} > 1")
        alphabets = {tuple(c.family.alphabet) if c.family.finite else "continuous" for c in children}
        if len(alphabets) != 1:
            raise ConfigurationError("composite children must share one alphabet")
        super().__init__(children[0].family, name)
        self.children = list(children)
        self.weights = weights
        deficiency = 1.0 - weights.sum()
        if deficiency > COMPOSITE_MASS_TOL:
            logger.warning(f"{name}: weights sum to {weights.sum():.6f}; deficient mass {deficiency:.3e}")

    def child_log_marginals(self, counts) -> np.ndarray:
        """Per-child log-marginals, shape (children, rows)"""
        return np.vstack([c.log_marginal_counts(np.atleast_2d(counts)) for c in self.children])

    def log_marginal_counts(self, counts):
        return logsumexp(np.log(self.weights)[:, None] + self.child_log_marginals(counts), axis=0)

    def _log_marginal_points(self, xs) -> float:
        values = np.array([c.log_marginal(xs) for c in self.children])
        return float(logsumexp(np.log(self.weights) + values))


# ---- Tilt normalizer ----

def _as_beta(family: ModelFamily, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size != family.d ** 2:
        raise DomainError(f"beta must be a {family.d}x{family.d} matrix")
    return beta


def _point_v(family: ModelFamily, theta: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    root = inv_sqrt(family.fisher(theta))
    jhat = -family.atom_hessians(theta, atoms)
    v = np.einsum("ij,ajk,kl->ail", root, jhat, root) - np.eye(family.d)
    return v.reshape(len(atoms), family.d ** 2)


def psi(family, theta, beta) -> float:
    """psi(theta, beta) = log E_theta exp(trace(V_1(x|theta) beta^T))"""
    family = build_family(family)
    theta = family.check_theta(theta)
    beta = _as_beta(family, beta)
    if family.finite:
        tilt = family.symbol_v(theta).reshape(family.k, -1) @ beta
        value = float(logsumexp(family.symbol_log_probs(theta) + tilt))
    else:
        nodes, weights = family.quadrature_nodes(theta)
        with np.errstate(over="ignore"):
            value = float(np.log(np.dot(weights, np.exp(_point_v(family, theta, nodes) @ beta))))
    if not math.isfinite(value):
        raise TiltingError(f"psi is not finite at theta={theta.tolist()}, beta={beta.tolist()}")
    return value


def tilted_log_density(family, theta, beta, x) -> float:
    """log p_e(x|theta, beta) = log p(x|theta) + V_1(x|theta).beta - psi(theta, beta)"""
    family = build_family(family)
    theta = family.check_theta(theta)
    beta = _as_beta(family, beta)
    obs = family.observe([x])
    atom = obs.atoms[obs.weights > 0]
    tilt = float((_point_v(family, theta, atom) @ beta)[0])
    return float(family.atom_log_density(theta, atom)[0]) + tilt - psi(family, theta, beta)


# ---- Construction ----

def bayes_strategy(family, prior_spec: PriorSpec, domain: Optional[ParamDomain] = None,
                   name: str = "bayes", nodes_per_axis: Optional[int] = None) -> BayesMixture:
    family = build_family(family)
    domain = domain or family.domain
    grid = QuadratureGrid.for_domain(domain, nodes_per_axis or prior_spec.nodes_per_axis)
    return BayesMixture(family, Prior(prior_spec, family, domain, grid), name)


def jeffreys_strategy(family, domain: Optional[ParamDomain] = None, name: str = "jeffreys") -> BayesMixture:
    return bayes_strategy(family, PriorSpec(kind="jeffreys"), domain, name)


def build_strategy(spec: StrategySpec, family=None) -> Strategy:
    """Build a strategy from its spec; the family comes from the spec or the argument"""
    if spec.family is None and family is None:
        raise ConfigurationError(f"strategy '{spec.label}' has no family")
    family = build_family(spec.family if spec.family is not None else family)
    domain = spec.domain or family.domain
    name = spec.label
    if spec.kind == "fixed":
        return FixedStrategy(family, spec.theta, name)
    if spec.kind == "bayes":
        return bayes_strategy(family, spec.prior or PriorSpec(kind="jeffreys"), domain, name, spec.nodes_per_axis)
    if spec.kind == "tilted":
        grid = QuadratureGrid.for_domain(domain, spec.nodes_per_axis)
        prior = Prior(spec.prior or PriorSpec(kind="jeffreys"), family, domain, grid)
        return TiltedMixture(family, prior, spec.half_width, spec.beta_nodes, name)
    if spec.kind == "nml":
        if spec.n is None:
            raise ConfigurationError(f"nml strategy '{name}' needs n")
        return NMLStrategy(family, domain, spec.n, name)
    if spec.kind == "composite":
        children = [build_strategy(child, family) for child in spec.children]
        return CompositeStrategy(children, spec.weights, name)

    # composite builders live in the strategies package, which imports this module
    from strategies import build_theorem5, build_theorem7_curved, build_theorem8_simplex

    if spec.n is None:
        raise ConfigurationError(f"{spec.kind} strategy needs n")
    if spec.kind == "theorem5":
        return build_theorem5(family, domain, spec.n, r=spec.r, half_width=spec.half_width,
                              beta_nodes=spec.beta_nodes, epsilon=spec.epsilon,
                              alpha_scale=spec.alpha_scale, name=name)
    if spec.kind == "theorem7":
        if spec.ambient_domain is None:
            raise ConfigurationError("theorem7 strategy needs ambient_domain")
        return build_theorem7_curved(family, domain, spec.n, spec.ambient_domain, r=spec.r,
                                     epsilon=spec.epsilon, alpha_scale=spec.alpha_scale, name=name)
    return build_theorem8_simplex(family, spec.n, r=spec.r, alpha=spec.alpha, p=spec.p,
                                  half_width=spec.half_width, beta_nodes=spec.beta_nodes,
                                  epsilon=spec.epsilon, alpha_scale=spec.alpha_scale,
                                  mix_weight=spec.mix_weight, tau=spec.tau, name=name)


def mixture_log_marginal(strategy: Strategy, xs) -> float:
    return strategy.log_marginal(xs)


def predictive(strategy: Strategy, prefix) -> np.ndarray:
    return strategy.predictive(prefix)
