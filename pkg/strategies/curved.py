"""
Composite strategy for curved exponential families

The second component mixes the ambient exponential family over a compact
box U_c with a uniform prior, so strings whose sufficient statistic lies
off the curve are still coded at the ambient rate.
"""
import logging
from typing import Optional

import numpy as np

from config import THEOREM5_R
from exceptions import ConfigurationError
from mixtures import BayesMixture, CompositeStrategy
from model_families import CurvedFamily, ParamDomain, build_family
from priors import Prior, PriorSpec

logger = logging.getLogger(__name__)

CURVE_SAMPLES = {1: 401, 2: 61}


def check_embedding_inside(family: CurvedFamily, domain: ParamDomain, ambient_domain: ParamDomain) -> None:
    """Raise unless phi(K) lies in the interior of U_c and U_c inside the ambient domain"""
    a_mat, b_vec = ambient_domain.halfspaces()
    points = np.vstack([domain.start_grid(CURVE_SAMPLES.get(domain.dim, 15)), domain.vertices()])
    images = np.array([family.phi(p) for p in points])
    slack = b_vec - images @ a_mat.T
    if np.min(slack) <= 1e-9:
        worst = points[int(np.argmin(slack.min(axis=1)))]
        raise ConfigurationError(
            f"phi(K) is not inside the interior of the ambient box: phi({worst.tolist()}) "
            f"= {family.phi(worst).tolist()}"
        )
    corners = ambient_domain.vertices()
    if not all(family.ambient.domain.contains(c) for c in corners):
        raise ConfigurationError("ambient box must lie inside the ambient parameter domain")


def build_theorem7_curved(family, domain: Optional[ParamDomain], n: int, ambient_domain: ParamDomain,
                          r: Optional[float] = None, epsilon: Optional[float] = None,
                          alpha_scale: Optional[float] = None, name: str = "theorem7") -> CompositeStrategy:
    family = build_family(family)
    if not isinstance(family, CurvedFamily):
        raise ConfigurationError("theorem7 strategy needs a curved family")
    domain = domain or family.domain
    r = THEOREM5_R if r is None else r
    if r <= 0 or n < 2:
        raise ConfigurationError(f"theorem7 needs r > 0 and n >= 2, got r={r}, n={n}")
    check_embedding_inside(family, domain, ambient_domain)
    weight = n ** -r

    ideal = Prior(PriorSpec(kind="ideal", n=n, epsilon=epsilon, alpha_scale=alpha_scale), family, domain)
    flat = Prior(PriorSpec(kind="uniform"), family.ambient, ambient_domain)
    children = [
        BayesMixture(family, ideal, name=f"{name}/ideal"),
        BayesMixture(family.ambient, flat, name=f"{name}/ambient"),
    ]
    logger.info(f"Built {name} for {family.name}: n={n}, ambient box {ambient_domain.lo}..{ambient_domain.hi}")
    return CompositeStrategy(children, [1.0 - weight, weight], name)
