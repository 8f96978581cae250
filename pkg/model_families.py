"""
Model families for minimax coding experiments

This module defines the parametric families the lab codes with and every
per-family quantity the strategies and regret tools need: log-likelihoods,
scores, Fisher information, empirical Fisher information, the deviation
statistic V and maximum-likelihood estimation.

Four kinds of family are supported:
- exponential: finite-alphabet exponential families in natural parameters,
  plus the Gaussian (natural parameters) and Gaussian-location families
- curved: a smooth curve or surface inside a finite exponential family
- hidden_variable: mixtures p(x|theta) = sum_y q(y|theta) kappa(x|y) with a
  simplex (mean-parameter) latent, an exponential latent in natural
  parameters, or fixed mixing weights over an exponential component
- contaminated_gaussian: (1-nu) N(theta, I) + nu N(theta, s^2 I)

Families are described by a JSON-serializable FamilySpec and turned into
immutable ModelFamily objects by build_family(). Finite-alphabet families
work on count vectors internally, which is what makes exact enumeration of
count classes possible downstream.
"""
import logging
import math
from typing import Callable, List, Literal, NamedTuple, Optional, Sequence, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import optimize
from scipy.special import gammaln, logsumexp, roots_genlaguerre, xlogy

from config import (
    FD_STEP, GH_MAX_NODES, GH_NODES, GH_RTOL, MLE_GRID_1D, MLE_GRID_2D,
    MLE_NEWTON_STEPS, MLE_TIE_TOL,
)
from exceptions import ConfigurationError, DomainError, NumericalError
from state import MLEResult
from utils import as_vector, central_jacobian, inv_sqrt

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-9


# ---- Parameter domains ----

class ParamDomain(BaseModel):
    """
    Restricted parameter set K

    Three shapes are supported. A box is the axis-aligned product of
    intervals [lo_i, hi_i]. A clipped domain is the same box but marks an
    artificial truncation of an unbounded natural parameter space, so a
    maximizer on its boundary is treated as escaping the domain. A simplex
    is expressed in d free coordinates theta_1..theta_d with the implicit
    theta_0 = 1 - sum(theta); every coordinate including theta_0 must be at
    least tau.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    shape: Literal["box", "simplex", "clipped"] = "box"
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None
    tau: float = Field(default=0.0, ge=0.0)
    d: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _fill_dimension(cls, data):
        if isinstance(data, dict) and data.get("d") is None and data.get("lo") is not None:
            data = dict(data)
            data["d"] = len(data["lo"])
        return data

    @model_validator(mode="after")
    def _check_shape(self):
        if self.shape == "simplex":
            if self.d is None:
                raise ValueError("simplex domain needs d")
            if (self.d + 1) * self.tau >= 1.0:
                raise ValueError(f"margin tau={self.tau} leaves an empty simplex for d={self.d}")
        else:
            if self.lo is None or self.hi is None or len(self.lo) != len(self.hi):
                raise ValueError("box domain needs lo and hi of equal length")
            if any(a >= b for a, b in zip(self.lo, self.hi)):
                raise ValueError("box domain needs lo < hi in every coordinate")
        return self

    @classmethod
    def interval(cls, lo: float, hi: float) -> "ParamDomain":
        return cls(shape="box", lo=[lo], hi=[hi])

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float], clipped: bool = False) -> "ParamDomain":
        return cls(shape="clipped" if clipped else "box", lo=list(lo), hi=list(hi))

    @classmethod
    def simplex(cls, d: int, tau: float = 0.0) -> "ParamDomain":
        return cls(shape="simplex", d=d, tau=tau)

    @property
    def dim(self) -> int:
        return int(self.d)

    def halfspaces(self):
        """Return (A, b) with the domain equal to {theta : A theta <= b}"""
        eye = np.eye(self.dim)
        if self.shape == "simplex":
            a = np.vstack([-eye, np.ones((1, self.dim))])
            b = np.concatenate([-self.tau * np.ones(self.dim), [1.0 - self.tau]])
        else:
            a = np.vstack([eye, -eye])
            b = np.concatenate([np.asarray(self.hi, float), -np.asarray(self.lo, float)])
        return a, b

    def bounds(self):
        """Coordinate-wise bounds (for bounded optimizers)"""
        if self.shape == "simplex":
            return [(self.tau, 1.0 - self.dim * self.tau)] * self.dim
        return list(zip(self.lo, self.hi))

    def contains(self, theta, tol: float = 1e-12) -> bool:
        theta = as_vector(theta)
        if theta.size != self.dim or not np.all(np.isfinite(theta)):
            return False
        a, b = self.halfspaces()
        return bool(np.all(a @ theta <= b + tol))

    def on_boundary(self, theta, tol: float = BOUNDARY_TOL) -> bool:
        a, b = self.halfspaces()
        return bool(np.any(np.abs(a @ as_vector(theta) - b) <= tol))

    def project(self, theta) -> np.ndarray:
        """Exact Euclidean projection onto the domain"""
        theta = as_vector(theta)
        if self.shape != "simplex":
            return np.clip(theta, self.lo, self.hi)
        clipped = np.maximum(theta, self.tau)
        if clipped.sum() <= 1.0 - self.tau:
            return clipped
        # Project onto {u >= 0, sum u = s} with u = theta - tau
        shifted = theta - self.tau
        total = 1.0 - (self.dim + 1) * self.tau
        mu = np.sort(shifted)[::-1]
        cssv = np.cumsum(mu) - total
        index = np.arange(1, self.dim + 1)
        active = mu - cssv / index > 0
        rho = index[active][-1]
        lam = cssv[active][-1] / rho
        return np.maximum(shifted - lam, 0.0) + self.tau

    def vertices(self) -> np.ndarray:
        if self.shape == "simplex":
            span = 1.0 - (self.dim + 1) * self.tau
            verts = [np.full(self.dim, self.tau)]
            for i in range(self.dim):
                v = np.full(self.dim, self.tau)
                v[i] += span
                verts.append(v)
            return np.array(verts)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        grids = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)], indexing="ij"))
        return grids.reshape(self.dim, -1).T

    def volume(self) -> float:
        if self.shape == "simplex":
            return (1.0 - (self.dim + 1) * self.tau) ** self.dim / math.factorial(self.dim)
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def diameter(self, transform: Optional[np.ndarray] = None) -> float:
        """Diameter of the domain, optionally after a linear map"""
        verts = self.vertices()
        if transform is not None:
            verts = verts @ np.asarray(transform).T
        diffs = verts[:, None, :] - verts[None, :, :]
        return float(np.max(np.linalg.norm(diffs, axis=-1)))

    def center(self) -> np.ndarray:
        return self.vertices().mean(axis=0)

    def contains_ellipsoid(self, center, fisher: np.ndarray, radius: float) -> bool:
        """True when {theta : (theta-c)^T J (theta-c) <= radius^2} lies inside the domain"""
        a, b = self.halfspaces()
        support = radius * np.sqrt(np.einsum("ij,jk,ik->i", a, np.linalg.inv(fisher), a))
        return bool(np.all(a @ as_vector(center) + support <= b + 1e-12))

    def start_grid(self, per_axis: int) -> np.ndarray:
        """Deterministic grid of points inside the domain"""
        if self.shape == "simplex":
            ticks = np.linspace(0.0, 1.0, per_axis)
            mesh = np.array(np.meshgrid(*[ticks] * self.dim, indexing="ij")).reshape(self.dim, -1).T
            mesh = mesh[mesh.sum(axis=1) <= 1.0]
            span = 1.0 - (self.dim + 1) * self.tau
            return self.tau + span * mesh
        axes = [np.linspace(a, b, per_axis) for a, b in zip(self.lo, self.hi)]
        return np.array(np.meshgrid(*axes, indexing="ij")).reshape(self.dim, -1).T


# ---- Family specifications ----

class EmbeddingSpec(BaseModel):
    """Quadratic embedding phi(theta) = c + B theta + (1/2)[theta^T A_k theta]_k"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    offset: List[float]
    linear: List[List[float]] = Field(description="Row-major dbar x d matrix B")
    quadratic: Optional[List[List[List[float]]]] = Field(
        default=None, description="dbar matrices A_k of size d x d"
    )


class FamilySpec(BaseModel):
    """
    JSON description of a parametric model family

    Only the payload fields of the chosen kind are read. Emission matrices
    are row-major with rows indexed by the latent value.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["exponential", "curved", "hidden_variable", "contaminated_gaussian"]
    d: int = Field(ge=1)
    name: str = ""
    alphabet: Union[List[float], Literal["continuous"]]
    domain: ParamDomain

    sufficient_stat: Optional[List[List[float]]] = None
    base_log_measure: Optional[List[float]] = None
    continuous_form: Optional[Literal["gaussian", "gaussian_location"]] = None

    ambient: Optional["FamilySpec"] = None
    embedding: Optional[EmbeddingSpec] = None

    emission: Optional[List[List[float]]] = None
    latent: Literal["simplex", "natural", "fixed_weight"] = "simplex"
    latent_stat: Optional[List[List[float]]] = None
    base_pmf: Optional[List[float]] = None
    mix_weight: float = Field(default=0.5, gt=0.0, lt=1.0)

    contamination: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    spread: Optional[float] = Field(default=None, gt=1.0)

    @property
    def finite(self) -> bool:
        return self.alphabet != "continuous"

    @model_validator(mode="after")
    def _check_payload(self):
        if self.domain.dim != self.d:
            raise ValueError(f"domain dimension {self.domain.dim} does not match d={self.d}")
        k = len(self.alphabet) if self.finite else None
        if self.kind == "exponential":
            if self.finite:
                if self.sufficient_stat is None or len(self.sufficient_stat) != k:
                    raise ValueError("finite exponential family needs one sufficient statistic row per symbol")
                if any(len(row) != self.d for row in self.sufficient_stat):
                    raise ValueError("sufficient statistic rows must have length d")
            elif self.continuous_form is None:
                raise ValueError("continuous exponential family needs continuous_form")
        elif self.kind == "curved":
            if self.ambient is None or self.embedding is None:
                raise ValueError("curved family needs ambient and embedding")
            if self.ambient.kind != "exponential" or not self.ambient.finite:
                raise ValueError("curved family needs a finite exponential ambient")
            if len(self.embedding.offset) != self.ambient.d:
                raise ValueError("embedding offset must have the ambient dimension")
        elif self.kind == "hidden_variable":
            if not self.finite:
                raise ValueError("hidden-variable families need a finite alphabet")
            if self.latent == "fixed_weight":
                if self.base_pmf is None or self.sufficient_stat is None:
                    raise ValueError("fixed-weight mixture needs base_pmf and sufficient_stat")
                if abs(sum(self.base_pmf) - 1.0) > 1e-9:
                    raise ValueError("base_pmf must sum to 1")
            else:
                if self.emission is None:
                    raise ValueError("hidden-variable family needs an emission matrix")
                for row in self.emission:
                    if len(row) != k or abs(sum(row) - 1.0) > 1e-9 or min(row) < 0:
                        raise ValueError("each emission row must be a distribution over the alphabet")
                m = len(self.emission)
                if self.latent == "simplex" and self.d != m - 1:
                    raise ValueError("simplex latent needs d = m - 1")
                if self.latent == "natural" and (self.latent_stat is None or len(self.latent_stat) != m):
                    raise ValueError("natural latent needs one latent_stat row per latent value")
        elif self.kind == "contaminated_gaussian":
            if self.finite or self.contamination is None or self.spread is None:
                raise ValueError("contaminated Gaussian needs contamination, spread and a continuous alphabet")
        return self


FamilySpec.model_rebuild()


# ---- Presets ----

def bernoulli_natural(bound: float = 8.0) -> FamilySpec:
    """Bernoulli in the natural parameter, psi(theta) = log(1 + e^theta)"""
    return FamilySpec(
        kind="exponential", d=1, name="bernoulli_natural", alphabet=[0, 1],
        sufficient_stat=[[0.0], [1.0]], domain=ParamDomain.box([-bound], [bound], clipped=True),
    )


def multinomial(k: int, tau: float = 0.0) -> FamilySpec:
    """Multinomial in mean parameters (a mixture family with identity emission)"""
    return FamilySpec(
        kind="hidden_variable", d=k - 1, name=f"multinomial{k}", alphabet=list(range(k)),
        emission=np.eye(k).tolist(), latent="simplex", domain=ParamDomain.simplex(k - 1, tau),
    )


def bernoulli_mean(tau: float = 0.0) -> FamilySpec:
    spec = multinomial(2, tau)
    return spec.model_copy(update={"name": "bernoulli_mean"})


def poisson_truncated(max_count: int = 30, bound: float = 5.0) -> FamilySpec:
    """Poisson on {0, -1, ..., -M} with T(x) = x and reference weight 1/(-x)!"""
    symbols = [-j for j in range(max_count + 1)]
    return FamilySpec(
        kind="exponential", d=1, name="poisson_truncated", alphabet=symbols,
        sufficient_stat=[[float(x)] for x in symbols],
        base_log_measure=[float(-gammaln(1 - x)) for x in symbols],
        domain=ParamDomain.box([-bound], [bound], clipped=True),
    )


def gaussian() -> FamilySpec:
    """Gaussian in natural parameters (mu/sigma^2, -1/(2 sigma^2))"""
    return FamilySpec(
        kind="exponential", d=2, name="gaussian", alphabet="continuous", continuous_form="gaussian",
        domain=ParamDomain.box([-50.0, -50.0], [50.0, -1e-3], clipped=True),
    )


def gaussian_location(d: int = 1, bound: float = 50.0) -> FamilySpec:
    return FamilySpec(
        kind="exponential", d=d, name="gaussian_location", alphabet="continuous",
        continuous_form="gaussian_location", domain=ParamDomain.box([-bound] * d, [bound] * d, clipped=True),
    )


def bernoulli_pair(bound: float = 6.0) -> FamilySpec:
    """Two independent bits; symbol 2*x1 + x2, T = (x1, x2)"""
    return FamilySpec(
        kind="exponential", d=2, name="bernoulli_pair", alphabet=[0, 1, 2, 3],
        sufficient_stat=[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]],
        domain=ParamDomain.box([-bound, -bound], [bound, bound], clipped=True),
    )


def bernoulli_pair_curve(curvature: float = 1.0, bound: float = 3.0) -> FamilySpec:
    """The curve phi(theta) = (theta, curvature * theta^2) in the Bernoulli-pair family"""
    return FamilySpec(
        kind="curved", d=1, name="bernoulli_pair_curve", alphabet=[0, 1, 2, 3],
        ambient=bernoulli_pair(), domain=ParamDomain.box([-bound], [bound], clipped=True),
        embedding=EmbeddingSpec(offset=[0.0, 0.0], linear=[[1.0], [0.0]],
                                quadratic=[[[0.0]], [[2.0 * curvature]]]),
    )


def hidden_binary(emission: Sequence[Sequence[float]], latent: str = "natural", bound: float = 6.0) -> FamilySpec:
    """Two-valued latent with the given emission rows"""
    if latent == "natural":
        domain = ParamDomain.box([-bound], [bound], clipped=True)
        stat = [[0.0], [1.0]]
    else:
        domain = ParamDomain.simplex(1)
        stat = None
    return FamilySpec(
        kind="hidden_variable", d=1, name=f"hidden_binary_{latent}",
        alphabet=list(range(len(emission[0]))), emission=[list(r) for r in emission],
        latent=latent, latent_stat=stat, domain=domain,
    )


def fixed_weight_mixture(base_pmf: Sequence[float], sufficient_stat: Sequence[Sequence[float]],
                         mix_weight: float = 0.5, bound: float = 6.0) -> FamilySpec:
    """lambda * g0(x) + (1 - lambda) * g1(x|theta) with g1 a finite exponential family"""
    d = len(sufficient_stat[0])
    return FamilySpec(
        kind="hidden_variable", d=d, name="fixed_weight_mixture", alphabet=list(range(len(base_pmf))),
        latent="fixed_weight", base_pmf=list(base_pmf), sufficient_stat=[list(r) for r in sufficient_stat],
        mix_weight=mix_weight, domain=ParamDomain.box([-bound] * d, [bound] * d, clipped=True),
    )


def contaminated_gaussian(spread_sq: float, contamination: float, d: int = 1, bound: float = 10.0) -> FamilySpec:
    return FamilySpec(
        kind="contaminated_gaussian", d=d, name="contaminated_gaussian", alphabet="continuous",
        contamination=contamination, spread=math.sqrt(spread_sq),
        domain=ParamDomain.box([-bound] * d, [bound] * d, clipped=True),
    )


PRESETS = {
    "bernoulli_natural": bernoulli_natural,
    "bernoulli_mean": bernoulli_mean,
    "multinomial3": lambda: multinomial(3),
    "poisson_truncated": poisson_truncated,
    "gaussian": gaussian,
    "gaussian_location": gaussian_location,
    "bernoulli_pair": bernoulli_pair,
    "bernoulli_pair_curve": bernoulli_pair_curve,
}


# ---- Observations ----

class Observations(NamedTuple):
    """Data reduced to weighted atoms: symbol indices with counts, or points with unit weights"""

    atoms: np.ndarray
    weights: np.ndarray
    n: int


# ---- Families ----

class ModelFamily:
    """
    Base class for built families

    Subclasses provide per-atom log densities, scores and Hessians of the
    log density; likelihood, score and empirical Fisher information of a
    sample are weighted sums of these. All methods are pure.
    """

    finite = True

    def __init__(self, spec: FamilySpec):
        self.spec = spec
        self.d = spec.d
        self.domain = spec.domain
        if spec.finite:
            self.alphabet = list(spec.alphabet)
            self.k = len(self.alphabet)
            self._index = {symbol: i for i, symbol in enumerate(self.alphabet)}

    @property
    def name(self) -> str:
        return self.spec.name or self.spec.kind

    # -- data handling --

    def observe(self, xs) -> Observations:
        if isinstance(xs, Observations):
            return xs
        if self.finite:
            try:
                idx = np.array([self._index[x] for x in xs], dtype=int)
            except KeyError as e:
                raise DomainError(f"Symbol {e.args[0]!r} is not in the alphabet of {self.name}")
            counts = np.bincount(idx, minlength=self.k).astype(float)
            return Observations(np.arange(self.k), counts, int(idx.size))
        points = np.asarray(xs, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1) if self.point_dim == 1 else points.reshape(1, -1)
        return Observations(points, np.ones(points.shape[0]), int(points.shape[0]))

    def observe_counts(self, counts) -> Observations:
        counts = np.asarray(counts, dtype=float)
        if counts.shape != (self.k,) or np.any(counts < 0):
            raise DomainError(f"Count vector must have {self.k} nonnegative entries")
        return Observations(np.arange(self.k), counts, int(round(counts.sum())))

    def indices(self, xs) -> np.ndarray:
        try:
            return np.array([self._index[x] for x in xs], dtype=int)
        except KeyError as e:
            raise DomainError(f"Symbol {e.args[0]!r} is not in the alphabet of {self.name}")

    @property
    def point_dim(self) -> int:
        return self.d

    def check_theta(self, theta) -> np.ndarray:
        theta = as_vector(theta)
        if theta.size != self.d:
            raise DomainError(f"{self.name}: parameter must have length {self.d}, got {theta.size}")
        if not self.domain.contains(theta, tol=1e-9):
            raise DomainError(f"{self.name}: theta={theta.tolist()} is outside the parameter domain")
        return theta

    # -- per-atom terms, provided by subclasses --

    def atom_log_density(self, theta: np.ndarray, atoms: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def atom_scores(self, theta: np.ndarray, atoms: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def atom_hessians(self, theta: np.ndarray, atoms: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def fisher(self, theta) -> np.ndarray:
        raise NotImplementedError()

    # -- sample quantities --

    def log_likelihood(self, theta, xs) -> float:
        theta = self.check_theta(theta)
        obs = self.observe(xs)
        used = obs.weights > 0
        if not np.any(used):
            return 0.0
        logp = self.atom_log_density(theta, obs.atoms[used])
        if np.any(np.isneginf(logp)):
            logger.warning(f"{self.name}: zero-probability symbol at theta={theta.tolist()}")
            return -math.inf
        return float(np.dot(obs.weights[used], logp))

    def score(self, theta, xs) -> np.ndarray:
        theta = self.check_theta(theta)
        obs = self.observe(xs)
        used = obs.weights > 0
        if not np.any(used):
            return np.zeros(self.d)
        return obs.weights[used] @ self.atom_scores(theta, obs.atoms[used])

    def empirical_fisher(self, theta, xs) -> np.ndarray:
        theta = self.check_theta(theta)
        obs = self.observe(xs)
        if obs.n == 0:
            raise DomainError("empirical Fisher information needs a nonempty sample")
        used = obs.weights > 0
        hess = self.atom_hessians(theta, obs.atoms[used])
        jhat = -np.einsum("a,aij->ij", obs.weights[used], hess) / obs.n
        return 0.5 * (jhat + jhat.T)

    def v_statistic(self, theta, xs) -> np.ndarray:
        root = inv_sqrt(self.fisher(theta))
        return root @ self.empirical_fisher(theta, xs) @ root - np.eye(self.d)

    # -- finite-alphabet helpers --

    def symbol_log_probs(self, theta) -> np.ndarray:
        return self.atom_log_density(as_vector(theta), np.arange(self.k))

    def symbol_probs(self, theta) -> np.ndarray:
        return np.exp(self.symbol_log_probs(theta))

    def symbol_v(self, theta) -> np.ndarray:
        """Single-symbol deviation statistics V_1(x|theta), shape (k, d, d)"""
        theta = as_vector(theta)
        root = inv_sqrt(self.fisher(theta))
        jhat = -self.atom_hessians(theta, np.arange(self.k))
        return np.einsum("ij,ajk,kl->ail", root, jhat, root) - np.eye(self.d)

    def log_likelihood_counts(self, theta, counts: np.ndarray) -> np.ndarray:
        """Log-likelihood of every row of a count matrix at one theta"""
        return counts_dot_log(np.atleast_2d(counts), self.symbol_log_probs(theta))

    def sample(self, theta, n: int, rng: np.random.Generator):
        theta = self.check_theta(theta)
        if self.finite:
            idx = rng.choice(self.k, size=n, p=self.symbol_probs(theta))
            return [self.alphabet[i] for i in idx]
        return self._sample_points(theta, n, rng)

    def sample_counts(self, theta, n: int, trials: int, rng: np.random.Generator) -> np.ndarray:
        p = self.symbol_probs(self.check_theta(theta))
        return rng.multinomial(n, p / p.sum(), size=trials)

    def _sample_points(self, theta, n, rng):
        raise NotImplementedError()

    def expectation(self, theta, func: Callable[[np.ndarray], np.ndarray]):
        """E_theta[func(x)] over a finite alphabet or by Gauss-Hermite quadrature"""
        theta = as_vector(theta)
        if self.finite:
            atoms = np.arange(self.k)
            values = np.asarray(func(atoms))
            return np.tensordot(self.symbol_probs(theta), values, axes=(0, 0))
        nodes, weights = self.quadrature_nodes(theta)
        return np.tensordot(weights, np.asarray(func(nodes)), axes=(0, 0))

    def quadrature_nodes(self, theta):
        raise ConfigurationError(f"{self.name}: no quadrature rule for expectations")

    # -- maximum likelihood --

    def mle(self, xs, domain: Optional[ParamDomain] = None) -> MLEResult:
        obs = self.observe(xs)
        if obs.n == 0:
            raise DomainError("mle needs a nonempty sample")
        return self._multistart_mle(obs, domain or self.domain)

    def _ll_obs(self, theta, obs: Observations) -> float:
        used = obs.weights > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = self.atom_log_density(theta, obs.atoms[used])
        value = float(np.dot(obs.weights[used], logp))
        return value if np.isfinite(value) else -math.inf

    def _score_obs(self, theta, obs: Observations) -> np.ndarray:
        used = obs.weights > 0
        return obs.weights[used] @ self.atom_scores(theta, obs.atoms[used])

    def _hessian_obs(self, theta, obs: Observations) -> np.ndarray:
        used = obs.weights > 0
        return np.einsum("a,aij->ij", obs.weights[used], self.atom_hessians(theta, obs.atoms[used]))

    def _result(self, theta, obs, domain, multiple=False) -> MLEResult:
        theta = as_vector(theta)
        return MLEResult(
            theta=tuple(float(t) for t in theta),
            log_likelihood=self._ll_obs(theta, obs),
            multiple=multiple,
            boundary=domain.on_boundary(theta),
        )

    def _multistart_mle(self, obs: Observations, domain: ParamDomain) -> MLEResult:
        """Local ascent from the local maxima of a deterministic grid, then Newton polish"""
        per_axis = MLE_GRID_1D if self.d == 1 else (MLE_GRID_2D if self.d == 2 else 7)
        grid = domain.start_grid(per_axis)
        values = np.array([self._ll_obs(t, obs) for t in grid])
        if self.d == 1:
            padded = np.concatenate([[-np.inf], values, [-np.inf]])
            peaks = np.where((values >= padded[:-2]) & (values >= padded[2:]) & np.isfinite(values))[0]
            starts = grid[peaks]
        else:
            order = np.argsort(-values, kind="stable")[:8]
            starts = grid[order[np.isfinite(values[order])]]
        if len(starts) == 0:
            raise NumericalError(f"{self.name}: likelihood is zero on the whole start grid")

        candidates = []
        for start in starts:
            theta = self._ascend(start, obs, domain)
            theta = self._newton_polish(theta, obs, domain)
            candidates.append((self._ll_obs(theta, obs), theta))

        best = max(value for value, _ in candidates)
        tied = []
        for value, theta in candidates:
            if best - value <= MLE_TIE_TOL and all(np.linalg.norm(theta - t) > 1e-6 for t in tied):
                tied.append(theta)
        tied.sort(key=lambda t: tuple(t))
        if len(tied) > 1:
            logger.info(f"{self.name}: {len(tied)} maximizers tie within {MLE_TIE_TOL}; returning the smallest")
        return self._result(tied[0], obs, domain, multiple=len(tied) > 1)

    def _ascend(self, start, obs, domain) -> np.ndarray:
        def objective(t):
            value = self._ll_obs(t, obs)
            if not np.isfinite(value):
                return 1e300, np.zeros(self.d)
            return -value, -self._score_obs(t, obs)

        if domain.shape == "simplex" and self.d > 1:
            cons = [{"type": "ineq", "fun": lambda t: 1.0 - domain.tau - np.sum(t),
                     "jac": lambda t: -np.ones_like(t)}]
            res = optimize.minimize(lambda t: objective(t)[0], start, jac=lambda t: objective(t)[1],
                                    method="SLSQP", bounds=domain.bounds(), constraints=cons,
                                    options={"ftol": 1e-14, "maxiter": 500})
        else:
            res = optimize.minimize(objective, start, jac=True, method="L-BFGS-B", bounds=domain.bounds(),
                                    options={"ftol": 1e-15, "gtol": 1e-11, "maxiter": 500})
        return domain.project(res.x)

    def _newton_polish(self, theta, obs, domain) -> np.ndarray:
        if domain.on_boundary(theta, tol=1e-7):
            return theta
        current = self._ll_obs(theta, obs)
        for _ in range(MLE_NEWTON_STEPS):
            hess = self._hessian_obs(theta, obs)
            if not np.all(np.isfinite(hess)) or np.max(np.linalg.eigvalsh(0.5 * (hess + hess.T))) >= 0:
                break
            step = np.linalg.solve(hess, -self._score_obs(theta, obs))
            proposal = theta + step
            if not domain.contains(proposal):
                break
            value = self._ll_obs(proposal, obs)
            if value < current - 1e-12:
                break
            theta, current = proposal, value
            if np.max(np.abs(step)) < 1e-13:
                break
        return theta


def counts_dot_log(counts: np.ndarray, log_probs: np.ndarray) -> np.ndarray:
    """counts @ log_probs with 0 * log 0 = 0; log_probs may be a vector or a (nodes, k) table"""
    log_probs = np.asarray(log_probs, dtype=float)
    table = np.atleast_2d(log_probs)
    finite = np.isfinite(table)
    value = counts @ np.where(finite, table, 0.0).T
    if not np.all(finite):
        hits = (counts > 0).astype(float) @ (~finite).astype(float).T
        value = np.where(hits > 0, -np.inf, value)
    return value[:, 0] if log_probs.ndim == 1 else value


class FiniteExponentialFamily(ModelFamily):
    """p(x|theta) = exp(theta . T(x) - psi(theta) + U(x)) over a finite alphabet"""

    def __init__(self, spec: FamilySpec):
        super().__init__(spec)
        self.stat = np.asarray(spec.sufficient_stat, dtype=float)
        self.base = (np.zeros(self.k) if spec.base_log_measure is None
                     else np.asarray(spec.base_log_measure, dtype=float))

    def log_partition(self, theta) -> float:
        return float(logsumexp(self.stat @ as_vector(theta) + self.base))

    def _log_probs(self, theta) -> np.ndarray:
        logits = self.stat @ theta + self.base
        return logits - logsumexp(logits)

    def mean_parameter(self, theta) -> np.ndarray:
        return np.exp(self._log_probs(as_vector(theta))) @ self.stat

    def atom_log_density(self, theta, atoms):
        return self._log_probs(theta)[atoms]

    def atom_scores(self, theta, atoms):
        return self.stat[atoms] - self.mean_parameter(theta)

    def atom_hessians(self, theta, atoms):
        return np.broadcast_to(-self.fisher(theta), (len(atoms), self.d, self.d)).copy()

    def fisher(self, theta) -> np.ndarray:
        theta = as_vector(theta)
        p = np.exp(self._log_probs(theta))
        centered = self.stat - p @ self.stat
        return (centered * p[:, None]).T @ centered

    def empirical_fisher(self, theta, xs) -> np.ndarray:
        theta = self.check_theta(theta)
        if self.observe(xs).n == 0:
            raise DomainError("empirical Fisher information needs a nonempty sample")
        return self.fisher(theta)

    def mle(self, xs, domain: Optional[ParamDomain] = None) -> MLEResult:
        domain = domain or self.domain
        obs = self.observe(xs)
        if obs.n == 0:
            raise DomainError("mle needs a nonempty sample")
        tbar = obs.weights @ self.stat / obs.n
        if self.d == 1 and domain.shape != "simplex":
            lo, hi = domain.lo[0], domain.hi[0]
            gap = lambda t: float(self.mean_parameter([t])[0] - tbar[0])
            if gap(lo) >= 0:
                theta = [lo]
            elif gap(hi) <= 0:
                theta = [hi]
            else:
                theta = [optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)]
            return self._result(theta, obs, domain)
        theta = self._ascend(domain.center(), obs, domain)
        return self._result(self._newton_polish(theta, obs, domain), obs, domain)


class GaussianFamily(ModelFamily):
    """Gaussian with T(x) = (x, x^2) and natural parameters (mu/sigma^2, -1/(2 sigma^2))"""

    finite = False

    @property
    def point_dim(self) -> int:
        return 1

    @staticmethod
    def moments(theta):
        t1, t2 = as_vector(theta)
        return -t1 / (2.0 * t2), -1.0 / (2.0 * t2)

    def log_partition(self, theta) -> float:
        t1, t2 = as_vector(theta)
        return -t1 * t1 / (4.0 * t2) + 0.5 * math.log(math.pi / -t2)

    def mean_parameter(self, theta) -> np.ndarray:
        mu, var = self.moments(theta)
        return np.array([mu, mu * mu + var])

    def atom_log_density(self, theta, atoms):
        x = atoms[:, 0]
        return theta[0] * x + theta[1] * x * x - self.log_partition(theta)

    def atom_scores(self, theta, atoms):
        x = atoms[:, 0]
        return np.stack([x, x * x], axis=1) - self.mean_parameter(theta)

    def atom_hessians(self, theta, atoms):
        return np.broadcast_to(-self.fisher(theta), (len(atoms), 2, 2)).copy()

    def fisher(self, theta) -> np.ndarray:
        t1, t2 = as_vector(theta)
        return np.array([
            [-1.0 / (2.0 * t2), t1 / (2.0 * t2 ** 2)],
            [t1 / (2.0 * t2 ** 2), -t1 ** 2 / (2.0 * t2 ** 3) + 1.0 / (2.0 * t2 ** 2)],
        ])

    def empirical_fisher(self, theta, xs) -> np.ndarray:
        theta = self.check_theta(theta)
        if self.observe(xs).n == 0:
            raise DomainError("empirical Fisher information needs a nonempty sample")
        return self.fisher(theta)

    def mle(self, xs, domain: Optional[ParamDomain] = None) -> MLEResult:
        domain = domain or self.domain
        obs = self.observe(xs)
        x = obs.atoms[:, 0]
        mu, var = float(np.mean(x)), float(np.var(x))
        if var > 0:
            theta = np.array([mu / var, -1.0 / (2.0 * var)])
            if domain.contains(theta):
                return self._result(theta, obs, domain)
        theta = self._ascend(domain.project([0.0, -0.5]), obs, domain)
        return self._result(theta, obs, domain)

    def _sample_points(self, theta, n, rng):
        mu, var = self.moments(theta)
        return rng.normal(mu, math.sqrt(var), size=n)

    def quadrature_nodes(self, theta):
        mu, var = self.moments(theta)
        z, w = hermegauss(GH_NODES)
        return (mu + math.sqrt(var) * z).reshape(-1, 1), w / math.sqrt(2.0 * math.pi)


class GaussianLocationFamily(ModelFamily):
    """N(theta, I) in d dimensions; J = I"""

    finite = False

    def atom_log_density(self, theta, atoms):
        z = atoms - theta
        return -0.5 * np.sum(z * z, axis=1) - 0.5 * self.d * math.log(2.0 * math.pi)

    def atom_scores(self, theta, atoms):
        return atoms - theta

    def atom_hessians(self, theta, atoms):
        return np.broadcast_to(-np.eye(self.d), (len(atoms), self.d, self.d)).copy()

    def fisher(self, theta) -> np.ndarray:
        return np.eye(self.d)

    def empirical_fisher(self, theta, xs) -> np.ndarray:
        self.check_theta(theta)
        return np.eye(self.d)

    def mle(self, xs, domain: Optional[ParamDomain] = None) -> MLEResult:
        domain = domain or self.domain
        obs = self.observe(xs)
        mean = obs.atoms.mean(axis=0)
        return self._result(domain.project(mean), obs, domain)

    def _sample_points(self, theta, n, rng):
        return theta + rng.standard_normal((n, self.d))

    def quadrature_nodes(self, theta):
        if self.d != 1:
            raise ConfigurationError("Gauss-Hermite expectations are one-dimensional")
        z, w = hermegauss(GH_NODES)
        return (as_vector(theta)[0] + z).reshape(-1, 1), w / math.sqrt(2.0 * math.pi)


# ---- Curved families ----

class QuadraticEmbedding:
    """Analytic quadratic embedding built from an EmbeddingSpec"""

    def __init__(self, spec: EmbeddingSpec, d: int):
        self.offset = np.asarray(spec.offset, dtype=float)
        self.linear = np.asarray(spec.linear, dtype=float).reshape(self.offset.size, d)
        quad = np.zeros((self.offset.size, d, d)) if spec.quadratic is None else np.asarray(spec.quadratic, float)
        self.quadratic = 0.5 * (quad + np.transpose(quad, (0, 2, 1)))

    def phi(self, theta) -> np.ndarray:
        theta = as_vector(theta)
        return self.offset + self.linear @ theta + 0.5 * np.einsum("kij,i,j->k", self.quadratic, theta, theta)

    def jacobian(self, theta) -> np.ndarray:
        return self.linear + np.einsum("kij,j->ki", self.quadratic, as_vector(theta))

    def hessians(self, theta) -> np.ndarray:
        return self.quadratic


class CallableEmbedding:
    """Embedding from Python callables; missing derivatives use central differences"""

    def __init__(self, phi: Callable, jacobian: Optional[Callable] = None,
                 hessians: Optional[Callable] = None, step: float = FD_STEP):
        self._phi = phi
        self._jacobian = jacobian
        self._hessians = hessians
        self.step = step

    def phi(self, theta) -> np.ndarray:
        return np.asarray(self._phi(as_vector(theta)), dtype=float)

    def jacobian(self, theta) -> np.ndarray:
        if self._jacobian is not None:
            return np.asarray(self._jacobian(as_vector(theta)), dtype=float)
        return central_jacobian(self.phi, theta, self.step)

    def hessians(self, theta) -> np.ndarray:
        if self._hessians is not None:
            return np.asarray(self._hessians(as_vector(theta)), dtype=float)
        hess = central_jacobian(self.jacobian, theta, self.step)
        return 0.5 * (hess + np.transpose(hess, (0, 2, 1)))


class CurvedFamily(ModelFamily):
    """
    Curved exponential family p(x|theta) = pbar(x|phi(theta))

    Args:
        spec: FamilySpec of kind 'curved'
        embedding: optional override for the JSON quadratic embedding
    """

    def __init__(self, spec: FamilySpec, embedding=None):
        super().__init__(spec)
        self.ambient = FiniteExponentialFamily(spec.ambient)
        if list(self.ambient.alphabet) != list(self.alphabet):
            raise ConfigurationError("curved family and ambient must share the alphabet")
        self.embedding = embedding or QuadraticEmbedding(spec.embedding, spec.d)

    def phi(self, theta) -> np.ndarray:
        return self.embedding.phi(theta)

    def statistic_gap(self, theta, xs) -> np.ndarray:
        """T_bar - eta(phi(theta))"""
        obs = self.observe(xs)
        tbar = obs.weights @ self.ambient.stat / obs.n
        return tbar - self.ambient.mean_parameter(self.phi(theta))

    def atom_log_density(self, theta, atoms):
        return self.ambient.atom_log_density(self.phi(theta), atoms)

    def atom_scores(self, theta, atoms):
        return self.ambient.atom_scores(self.phi(theta), atoms) @ self.embedding.jacobian(theta)

    def atom_hessians(self, theta, atoms):
        u = self.phi(theta)
        jac = self.embedding.jacobian(theta)
        base = -jac.T @ self.ambient.fisher(u) @ jac
        centered = self.ambient.atom_scores(u, atoms)
        return base + np.einsum("ak,kij->aij", centered, self.embedding.hessians(theta))

    def fisher(self, theta) -> np.ndarray:
        jac = self.embedding.jacobian(theta)
        if np.linalg.matrix_rank(jac) < self.d:
            raise NumericalError(f"{self.name}: embedding Jacobian is rank deficient at {as_vector(theta).tolist()}")
        return jac.T @ self.ambient.fisher(self.phi(theta)) @ jac


# ---- Hidden-variable families ----

class HiddenVariableFamily(ModelFamily):
    """
    Models with a hidden variable p(x|theta) = sum_y q(y|theta) kappa(x|y)

    The latent law is either the simplex in mean parameters (a mixture
    family), an exponential family in natural parameters, or a fixed
    two-way split lambda * g0 + (1 - lambda) * g1(theta).
    """

    def __init__(self, spec: FamilySpec):
        super().__init__(spec)
        self.latent = spec.latent
        if self.latent == "fixed_weight":
            self.base_pmf = np.asarray(spec.base_pmf, dtype=float)
            self.component = FiniteExponentialFamily(spec.model_copy(update={
                "kind": "exponential", "latent": "simplex", "base_pmf": None,
            }))
            self.weight = spec.mix_weight
        else:
            self.emission = np.asarray(spec.emission, dtype=float)
            self.m = self.emission.shape[0]
            if self.latent == "natural":
                self.latent_stat = np.asarray(spec.latent_stat, dtype=float)
            else:
                self.directions = self.emission[1:] - self.emission[0]

    @property
    def is_multinomial(self) -> bool:
        return (self.latent == "simplex" and self.emission.shape[0] == self.emission.shape[1]
                and np.array_equal(self.emission, np.eye(self.m)))

    def latent_distribution(self, theta) -> np.ndarray:
        theta = as_vector(theta)
        if self.latent == "simplex":
            return np.concatenate([[1.0 - theta.sum()], theta])
        if self.latent == "natural":
            logits = self.latent_stat @ theta
            return np.exp(logits - logsumexp(logits))
        raise ConfigurationError("fixed-weight mixtures have no latent parameter distribution")

    def latent_fisher(self, theta) -> np.ndarray:
        """Fisher information G(theta) of the latent (complete-data) family"""
        theta = as_vector(theta)
        if self.latent == "simplex":
            q = self.latent_distribution(theta)
            return np.diag(1.0 / q[1:]) + 1.0 / q[0]
        if self.latent == "natural":
            q = self.latent_distribution(theta)
            centered = self.latent_stat - q @ self.latent_stat
            return (centered * q[:, None]).T @ centered
        return self.component.fisher(theta)

    def posterior(self, theta, atoms) -> np.ndarray:
        """q(y|x, theta) for each atom, shape (atoms, m)"""
        joint = self.latent_distribution(theta)[:, None] * self.emission[:, atoms]
        return (joint / joint.sum(axis=0)).T

    def posterior_covariance(self, theta, atoms) -> np.ndarray:
        """Cov_theta[S(Y) | x] for each atom (natural latent)"""
        post = self.posterior(theta, atoms)
        mean = post @ self.latent_stat
        second = np.einsum("ay,yi,yj->aij", post, self.latent_stat, self.latent_stat)
        return second - np.einsum("ai,aj->aij", mean, mean)

    def _probs(self, theta) -> np.ndarray:
        if self.latent == "fixed_weight":
            return self.weight * self.base_pmf + (1.0 - self.weight) * self.component.symbol_probs(theta)
        return self.latent_distribution(theta) @ self.emission

    def atom_log_density(self, theta, atoms):
        with np.errstate(divide="ignore"):
            return np.log(self._probs(theta)[atoms])

    def _responsibility(self, theta, atoms):
        g1 = self.component.symbol_probs(theta)[atoms]
        return (1.0 - self.weight) * g1 / self._probs(theta)[atoms]

    def atom_scores(self, theta, atoms):
        if self.latent == "simplex":
            return (self.directions[:, atoms] / self._probs(theta)[atoms]).T
        if self.latent == "natural":
            q = self.latent_distribution(theta)
            return self.posterior(theta, atoms) @ self.latent_stat - q @ self.latent_stat
        r = self._responsibility(theta, atoms)
        return r[:, None] * self.component.atom_scores(theta, atoms)

    def atom_hessians(self, theta, atoms):
        if self.latent == "simplex":
            s = self.atom_scores(theta, atoms)
            return -np.einsum("ai,aj->aij", s, s)
        if self.latent == "natural":
            return self.posterior_covariance(theta, atoms) - self.latent_fisher(theta)
        r = self._responsibility(theta, atoms)
        centered = self.component.atom_scores(theta, atoms)
        outer = np.einsum("ai,aj->aij", centered, centered)
        return (r * (1.0 - r))[:, None, None] * outer - r[:, None, None] * self.component.fisher(theta)

    def fisher(self, theta) -> np.ndarray:
        theta = as_vector(theta)
        p = self._probs(theta)
        atoms = np.arange(self.k)[p > 0]
        if self.latent == "simplex":
            dirs = self.directions[:, atoms]
            return (dirs / p[atoms]) @ dirs.T
        if self.latent == "natural":
            cov = self.posterior_covariance(theta, atoms)
            return self.latent_fisher(theta) - np.einsum("a,aij->ij", p[atoms], cov)
        r = self._responsibility(theta, atoms)
        centered = self.component.atom_scores(theta, atoms)
        spread = np.einsum("a,ai,aj->ij", p[atoms] * r * (1.0 - r), centered, centered)
        return (1.0 - self.weight) * self.component.fisher(theta) - spread

    def mle(self, xs, domain: Optional[ParamDomain] = None) -> MLEResult:
        domain = domain or self.domain
        obs = self.observe(xs)
        if obs.n == 0:
            raise DomainError("mle needs a nonempty sample")
        if self.latent != "simplex" or domain.shape != "simplex":
            return self._multistart_mle(obs, domain)
        if self.is_multinomial:
            return self._result(_capped_frequencies(obs.weights, domain.tau)[1:], obs, domain)
        if self.d == 1:
            lo, hi = domain.bounds()[0]
            slope = lambda t: float(self._score_obs(np.array([t]), obs)[0])
            with np.errstate(divide="ignore", invalid="ignore"):
                if slope(lo) <= 0:
                    theta = [lo]
                elif slope(hi) >= 0:
                    theta = [hi]
                else:
                    theta = [optimize.brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)]
            return self._result(theta, obs, domain)
        theta = self._ascend(domain.center(), obs, domain)
        return self._result(theta, obs, domain)


def _capped_frequencies(counts: np.ndarray, tau: float) -> np.ndarray:
    """argmax of sum c_i log p_i over the simplex with p_i >= tau (water-filling)"""
    counts = np.asarray(counts, dtype=float)
    clamped = np.zeros(counts.size, dtype=bool)
    while True:
        free = ~clamped
        mass = 1.0 - tau * clamped.sum()
        total = counts[free].sum()
        p = np.full(counts.size, tau)
        p[free] = counts[free] * mass / total if total > 0 else mass / free.sum()
        newly = free & (p < tau)
        if not newly.any():
            return p
        clamped |= newly


# ---- Contaminated Gaussian ----

class ContaminatedGaussianFamily(ModelFamily):
    """(1 - nu) N(theta, I) + nu N(theta, s^2 I), a robust-estimation location model"""

    finite = False

    def __init__(self, spec: FamilySpec):
        super().__init__(spec)
        self.nu = spec.contamination
        self.s2 = spec.spread ** 2
        self.shrink = 1.0 - 1.0 / self.s2
        self.fisher_scale = self._fisher_scale()

    def _log_components(self, sq):
        half_d = 0.5 * self.d
        lg0 = math.log(1.0 - self.nu) - 0.5 * sq - half_d * math.log(2.0 * math.pi)
        lg1 = math.log(self.nu) - 0.5 * sq / self.s2 - half_d * math.log(2.0 * math.pi * self.s2)
        return lg0, lg1

    def responsibility(self, sq) -> np.ndarray:
        """r(x|theta) as a function of the squared distance |x - theta|^2"""
        lg0, lg1 = self._log_components(np.asarray(sq, dtype=float))
        return np.exp(lg0 - np.logaddexp(lg0, lg1))

    def _weights(self, sq):
        r = self.responsibility(sq)
        return r, self.shrink * r + 1.0 / self.s2

    def atom_log_density(self, theta, atoms):
        sq = np.sum((atoms - theta) ** 2, axis=1)
        return np.logaddexp(*self._log_components(sq))

    def atom_scores(self, theta, atoms):
        z = atoms - theta
        _, w = self._weights(np.sum(z * z, axis=1))
        return z * w[:, None]

    def atom_hessians(self, theta, atoms):
        z = atoms - theta
        r, w = self._weights(np.sum(z * z, axis=1))
        q = r * (1.0 - r)
        outer = np.einsum("ai,aj->aij", z, z)
        return -w[:, None, None] * np.eye(self.d) + (self.shrink ** 2) * q[:, None, None] * outer

    def _fisher_integrand(self, sq):
        r, w = self._weights(sq)
        return w - (self.shrink ** 2) * r * (1.0 - r) * sq / self.d

    def _fisher_scale(self) -> float:
        """J = a I with a = E[w] - (1 - 1/s^2)^2 E[q |z|^2] / d, by quadrature"""
        nodes = GH_NODES
        previous = None
        while nodes <= GH_MAX_NODES:
            value = self._fisher_quadrature(nodes)
            if previous is not None and abs(value - previous) <= GH_RTOL * abs(value):
                return value
            previous = value
            nodes = 2 * nodes - 1
        raise NumericalError(f"Contaminated Gaussian Fisher quadrature did not reach rtol {GH_RTOL}")

    def _fisher_quadrature(self, nodes: int) -> float:
        if self.d == 1:
            z, w = hermegauss(nodes)
            w = w / math.sqrt(2.0 * math.pi)
            core = np.dot(w, self._fisher_integrand(z * z))
            tail = np.dot(w, self._fisher_integrand(self.s2 * z * z))
        else:
            t, w = roots_genlaguerre(nodes, 0.5 * self.d - 1.0)
            w = w / math.gamma(0.5 * self.d)
            core = np.dot(w, self._fisher_integrand(2.0 * t))
            tail = np.dot(w, self._fisher_integrand(2.0 * self.s2 * t))
        return float((1.0 - self.nu) * core + self.nu * tail)

    def fisher(self, theta) -> np.ndarray:
        return self.fisher_scale * np.eye(self.d)

    def critical_radius(self) -> float:
        """Distance c at which r(0|c) = 1/2 for d = 1"""
        if self.d != 1:
            raise ConfigurationError("critical radius is defined for d = 1")
        return math.sqrt((math.log(self.s2) + 2.0 * math.log((1.0 - self.nu) / self.nu)) / self.shrink)

    def _sample_points(self, theta, n, rng):
        scale = np.where(rng.random(n) < self.nu, math.sqrt(self.s2), 1.0)
        return theta + scale[:, None] * rng.standard_normal((n, self.d))

    def quadrature_nodes(self, theta):
        if self.d != 1:
            raise ConfigurationError("Gauss-Hermite expectations are one-dimensional")
        z, w = hermegauss(GH_NODES)
        w = w / math.sqrt(2.0 * math.pi)
        center = as_vector(theta)[0]
        nodes = np.concatenate([center + z, center + math.sqrt(self.s2) * z])
        weights = np.concatenate([(1.0 - self.nu) * w, self.nu * w])
        return nodes.reshape(-1, 1), weights


# ---- Construction and module-level operations ----

def build_family(spec: Union[FamilySpec, ModelFamily, str]) -> ModelFamily:
    """Build an immutable family from a spec, a preset name, or pass a built family through"""
    if isinstance(spec, ModelFamily):
        return spec
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigurationError(f"Unknown family preset '{spec}'; choose from {sorted(PRESETS)}")
        spec = PRESETS[spec]()
    if spec.kind == "exponential":
        if spec.finite:
            return FiniteExponentialFamily(spec)
        if spec.continuous_form == "gaussian":
            return GaussianFamily(spec)
        return GaussianLocationFamily(spec)
    if spec.kind == "curved":
        return CurvedFamily(spec)
    if spec.kind == "hidden_variable":
        return HiddenVariableFamily(spec)
    return ContaminatedGaussianFamily(spec)


def log_likelihood(family, theta, xs) -> float:
    return build_family(family).log_likelihood(theta, xs)


def score(family, theta, xs) -> np.ndarray:
    return build_family(family).score(theta, xs)


def fisher(family, theta) -> np.ndarray:
    family = build_family(family)
    return family.fisher(family.check_theta(theta))


def empirical_fisher(family, theta, xs) -> np.ndarray:
    return build_family(family).empirical_fisher(theta, xs)


def v_statistic(family, theta, xs) -> np.ndarray:
    family = build_family(family)
    return family.v_statistic(family.check_theta(theta), xs)


def mle(family, xs, domain: Optional[ParamDomain] = None) -> MLEResult:
    return build_family(family).mle(xs, domain)


def critical_radius(payload) -> float:
    """Critical radius of a contaminated Gaussian given as a spec or a built family"""
    family = build_family(payload)
    if not isinstance(family, ContaminatedGaussianFamily):
        raise ConfigurationError("critical_radius needs a contaminated Gaussian family")
    return family.critical_radius()


def latent_divergence_bound(family, theta_hat, theta, n: int) -> float:
    """n * D(q(.|theta_hat) || q(.|theta)) for the latent law of a hidden-variable family"""
    family = build_family(family)
    if not isinstance(family, HiddenVariableFamily):
        raise ConfigurationError("latent_divergence_bound needs a hidden-variable family")
    q_hat = family.latent_distribution(theta_hat)
    q = family.latent_distribution(theta)
    return float(n * np.sum(xlogy(q_hat, q_hat) - xlogy(q_hat, q)))


def max_log_likelihood(family, counts: np.ndarray, domain: Optional[ParamDomain] = None) -> np.ndarray:
    """max over the domain of log p(x^n|theta) for each row of a count matrix"""
    family = build_family(family)
    counts = np.atleast_2d(counts)
    values = np.empty(counts.shape[0])
    for i, row in enumerate(counts):
        if row.sum() == 0:
            values[i] = 0.0
            continue
        values[i] = family.mle(family.observe_counts(row), domain).log_likelihood
    return values
