"""
Three-part composite for mixture families on the full simplex

(1 - 2w) * Jeffreys mixture over the whole simplex + w * tilted mixture
over the margin-tau simplex + w * Dirichlet(alpha) mixture. The Dirichlet
part puts extra mass near the faces, where Jeffreys alone pays about
(1/2) log 2 more than in the interior.
"""
import logging
from typing import Optional

from pydantic import ValidationError

from config import THEOREM8_ALPHA, THEOREM8_P, THEOREM8_R, TILT_HALF_WIDTH
from exceptions import ConfigurationError
from mixtures import BayesMixture, CompositeStrategy, TiltedMixture
from model_families import HiddenVariableFamily, ParamDomain, build_family
from priors import Prior, PriorSpec

logger = logging.getLogger(__name__)


def build_theorem8_simplex(family, n: int, r: Optional[float] = None, alpha: Optional[float] = None,
                           p: Optional[float] = None, half_width: float = TILT_HALF_WIDTH,
                           beta_nodes: Optional[int] = None, epsilon: Optional[float] = None,
                           alpha_scale: Optional[float] = None, mix_weight: Optional[float] = None,
                           tau: Optional[float] = None, name: str = "theorem8") -> CompositeStrategy:
    """
    Args:
        family: mixture family with a simplex latent
        n: string length
        r, alpha, p: need r < (1/2 - alpha)(1 - p)
        mix_weight: weight w of each boundary part, default n^{-r}
        tau: margin of the tilted part's simplex, default n^{-(1-p)}
        epsilon, alpha_scale: when given, the tilted part draws theta from
            the ideal prior on the margin simplex instead of Jeffreys
    """
    family = build_family(family)
    if not isinstance(family, HiddenVariableFamily) or family.latent != "simplex":
        raise ConfigurationError("theorem8 strategy needs a mixture family with a simplex latent")
    r = THEOREM8_R if r is None else r
    alpha = THEOREM8_ALPHA if alpha is None else alpha
    p = THEOREM8_P if p is None else p
    if not 0.0 < alpha < 0.5:
        raise ConfigurationError(f"theorem8 needs 0 < alpha < 1/2, got {alpha}")
    limit = (0.5 - alpha) * (1.0 - p)
    if not 0.0 < r < limit:
        raise ConfigurationError(f"theorem8 needs r < (1/2 - alpha)(1 - p) = {limit:.6g}, got r={r}")

    weight = n ** -r if mix_weight is None else mix_weight
    if 1.0 - 2.0 * weight <= 0.0:
        raise ConfigurationError(
            f"theorem8 weights (1 - 2w, w, w) need w < 1/2 but w = {weight:.6g} at n={n}, r={r}; "
            f"set mix_weight explicitly"
        )
    tau = n ** -(1.0 - p) if tau is None else tau
    try:
        inner = ParamDomain.simplex(family.d, tau)
    except ValidationError as e:
        raise ConfigurationError(f"theorem8 margin tau={tau:.6g} leaves no simplex interior: {e}")

    if epsilon is not None or alpha_scale is not None:
        tilt_spec = PriorSpec(kind="ideal", n=n, epsilon=epsilon, alpha_scale=alpha_scale)
    else:
        tilt_spec = PriorSpec(kind="jeffreys")
    full = ParamDomain.simplex(family.d)
    children = [
        BayesMixture(family, Prior(PriorSpec(kind="jeffreys"), family, full), name=f"{name}/main"),
        TiltedMixture(family, Prior(tilt_spec, family, inner), half_width, beta_nodes, name=f"{name}/tilted"),
        BayesMixture(family, Prior(PriorSpec(kind="dirichlet_alpha", alpha=alpha), family, full),
                     name=f"{name}/dirichlet"),
    ]
    logger.info(f"Built {name}: n={n}, w={weight:.6g}, tau={tau:.6g}, alpha={alpha}")
    return CompositeStrategy(children, [1.0 - 2.0 * weight, weight, weight], name)
