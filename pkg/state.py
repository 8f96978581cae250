"""
Result records for the minimax coding lab

This module defines the structured results that flow between the numeric
modules, the experiment runner and the CLI. Every record is a pydantic model
so reports serialize deterministically with model_dump_json(), which is what
makes repeated runs byte-identical.

The records cover:
- Maximum-likelihood estimates with tie and boundary flags
- Gaussian-mass factors of the ideal prior and their error bars
- Normalizer sandwiches and ball-mass bounds
- Laplace and Monte Carlo regret estimates
- Worst-case regret reports over enumerated count classes
- Per-class comparisons of a strategy against a baseline
"""
from typing import Any, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from utils import format_counts


class MLEResult(BaseModel):
    """Maximum-likelihood estimate over a parameter domain"""

    model_config = ConfigDict(frozen=True)

    theta: Tuple[float, ...] = Field(description="Maximizing parameter vector")
    log_likelihood: float = Field(description="Log-likelihood at theta in nats")
    multiple: bool = Field(
        default=False,
        description="True when two or more distinct local maxima tie within the tie tolerance",
    )
    boundary: bool = Field(
        default=False,
        description="True when the maximizer sits on the domain boundary (projected value)",
    )


class FactorEstimate(BaseModel):
    """Gaussian mass of the ideal-prior region at one parameter value"""

    value: float = Field(description="Standard Gaussian mass in [0, 1]", ge=0.0, le=1.0)
    stderr: float = Field(default=0.0, description="Monte Carlo standard error, 0 when exact")
    method: str = Field(description="'exact' or 'monte_carlo'")
    empty: bool = Field(default=False, description="True when the region is empty (theta outside K)")

    @property
    def interval(self) -> Tuple[float, float]:
        """Three-sigma interval around the estimate"""
        return (max(0.0, self.value - 3.0 * self.stderr), min(1.0, self.value + 3.0 * self.stderr))


class BallMassBound(BaseModel):
    """Lower bounds on the standard Gaussian mass of a centered ball"""

    bound: float = Field(description="Chernoff-type lower bound (0 when n*eps^2 < d)")
    simplified: Optional[float] = Field(
        default=None, description="1 - exp(-n eps^2/4 + d/2), only when n eps^2/d >= 2"
    )
    exact: float = Field(description="Exact mass from the chi-square CDF")


class NormalizerBounds(BaseModel):
    """Sandwich for the ideal-prior normalizer"""

    jeffreys: float = Field(description="C_J(K), the lower end of the sandwich")
    value: float = Field(description="Quadrature value of the ideal-prior normalizer")
    upper: float = Field(description="Upper end of the sandwich")
    rho: float = Field(description="Lower bound on the Gaussian-mass factor used near the boundary")
    rho_source: str = Field(description="'volume_ratio' when the cone bound applied, else 'observed'")
    interior_fraction: float = Field(description="Share of Jeffreys mass on nodes whose Fisher ball lies in K")


class LaplaceEstimate(BaseModel):
    """Laplace approximation to the pointwise regret of a Bayes mixture"""

    value: float = Field(description="Approximate regret in nats")
    correction: float = Field(description="(1/2) log(|J_hat| / |J|) at the MLE")
    boundary: bool = Field(default=False, description="True when the MLE is on the boundary (approximation invalid)")


class MCEstimate(BaseModel):
    """Monte Carlo estimate with standard error"""

    mean: float
    stderr: float
    trials: int
    reference: Optional[float] = Field(default=None, description="Asymptotic reference value for comparison")
    against: str = Field(default="true", description="'true' (redundancy) or 'mle' (pointwise regret)")


class CountClass(BaseModel):
    """A multiset of symbol counts with its exact multiplicity"""

    model_config = ConfigDict(frozen=True)

    counts: Tuple[int, ...]
    multiplicity: int = Field(description="n!/prod(c!) as an exact integer")

    @property
    def n(self) -> int:
        return sum(self.counts)


class ClassComparison(BaseModel):
    """Per-class regret of a strategy against a baseline, over the classes with one label"""

    label: str
    classes: int
    improved: int = Field(description="Classes where the strategy has strictly smaller regret")
    improved_fraction: float
    worst_loss: float = Field(description="Largest regret increase over the baseline, 0 if none")
    best_gain: float


class RegretReport(BaseModel):
    """Worst-case regret of one strategy at one string length"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int
    strategy: str
    max_regret_nats: float
    max_regret_bits: float
    argmax_counts: Tuple[int, ...]
    asymptotic_nats: float
    gap_nats: float
    num_classes: int = Field(description="Number of count classes over which the maximum was taken")
    good_fraction: Optional[float] = Field(default=None, description="Share of evaluated classes that are good strings")
    delta: float = Field(description="Good-string threshold used for good_fraction")
    strings: str = Field(description="'in_domain' or 'all'")
    table: Any = Field(default=None, exclude=True, description="Per-class pandas table")

    def csv_row(self) -> List[Any]:
        """Values in the regret-scan CSV column order"""
        return [
            self.n,
            self.strategy,
            self.max_regret_nats,
            self.max_regret_bits,
            format_counts(self.argmax_counts),
            self.asymptotic_nats,
            self.gap_nats,
            self.num_classes,
            self.good_fraction,
        ]
