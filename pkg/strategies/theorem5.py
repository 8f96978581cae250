"""
Two-part composite for general smooth families

(1 - n^{-r}) * ideal-prior mixture + n^{-r} * tilted-enlargement mixture.
The ideal-prior part is tight on good strings; the tilted part covers the
strings whose empirical Fisher information departs from J.
"""
import logging
from typing import Optional

from config import THEOREM5_R, TILT_HALF_WIDTH
from exceptions import ConfigurationError
from mixtures import BayesMixture, CompositeStrategy, TiltedMixture
from model_families import ParamDomain, build_family
from priors import Prior, PriorSpec

logger = logging.getLogger(__name__)


def build_theorem5(family, domain: Optional[ParamDomain], n: int, r: Optional[float] = None,
                   half_width: float = TILT_HALF_WIDTH, beta_nodes: Optional[int] = None,
                   epsilon: Optional[float] = None, alpha_scale: Optional[float] = None,
                   name: str = "theorem5") -> CompositeStrategy:
    family = build_family(family)
    domain = domain or family.domain
    r = THEOREM5_R if r is None else r
    if r <= 0 or n < 2:
        raise ConfigurationError(f"theorem5 needs r > 0 and n >= 2, got r={r}, n={n}")
    weight = n ** -r

    ideal = Prior(PriorSpec(kind="ideal", n=n, epsilon=epsilon, alpha_scale=alpha_scale), family, domain)
    jeffreys = Prior(PriorSpec(kind="jeffreys"), family, domain)
    children = [
        BayesMixture(family, ideal, name=f"{name}/ideal"),
        TiltedMixture(family, jeffreys, half_width, beta_nodes, name=f"{name}/tilted"),
    ]
    logger.info(f"Built {name} for {family.name}: n={n}, weights=({1 - weight:.6g}, {weight:.6g})")
    return CompositeStrategy(children, [1.0 - weight, weight], name)
