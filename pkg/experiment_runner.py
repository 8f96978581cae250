"""
Experiment orchestration for regret scans and strategy comparisons

An experiment is a JSON document validated by ExperimentConfig before
anything is computed. The runner expands every strategy spec at every
string length (filling n where a construction depends on it), evaluates
the exact worst-case regret over count classes and collects one
RegretReport per (n, strategy), in config order.
"""
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn

from config import DEFAULT_THREADS, MC_SEED
from exceptions import ConfigurationError
from mixtures import StrategySpec, build_strategy, jeffreys_strategy
from model_families import FamilySpec, ModelFamily, ParamDomain, build_family
from priors import jeffreys_integral
from regret_lab import (
    compare_on_classes, improvement_summary, regret_table, shtarkov_log_constant, worst_case_regret, write_regret_csv,
)
from spec_loader import load_json
from state import ClassComparison, RegretReport

logger = logging.getLogger(__name__)


class ExperimentConfig(BaseModel):
    """A regret scan: one family, one domain, several strategies, several n"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: Union[FamilySpec, str] = Field(description="Family spec or preset name")
    domain: Optional[ParamDomain] = Field(default=None, description="Restricted set K; the family domain if omitted")
    strategies: List[StrategySpec] = Field(min_length=1)
    n: List[int] = Field(min_length=1, description="String lengths to scan")
    strings: Literal["in_domain", "all"] = "in_domain"
    delta: Optional[float] = Field(default=None, gt=0.0, description="Good-string threshold; n^(-1/2+gamma) if omitted")
    out: Optional[str] = Field(default=None, description="CSV output path")
    threads: int = Field(default=DEFAULT_THREADS, ge=1)
    seed: int = Field(default=MC_SEED, ge=0, lt=2 ** 64)


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    payload = load_json(path)
    try:
        config = ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        logger.error(f"Invalid experiment config {path}: {e.error_count()} error(s)")
        raise ConfigurationError(f"{path}: {e}")
    if any(n < 1 for n in config.n):
        raise ConfigurationError(f"{path}: every n must be at least 1")
    return config


def resolve_for_n(spec: StrategySpec, n: int, seed: int) -> StrategySpec:
    """Fill n (and the Monte Carlo seed of ideal priors) where the spec leaves them open"""
    update = {}
    if spec.n is None and spec.kind in ("nml", "theorem5", "theorem7", "theorem8"):
        update["n"] = n
    if spec.prior is not None and spec.prior.kind == "ideal":
        prior_update = {"mc_seed": seed}
        if spec.prior.n is None:
            prior_update["n"] = max(n, 2)
        update["prior"] = spec.prior.model_copy(update=prior_update)
    if spec.children:
        update["children"] = [resolve_for_n(child, n, seed) for child in spec.children]
    return spec.model_copy(update=update) if update else spec


class ExperimentRunner:
    """
    Runs regret scans and comparisons for one experiment config

    The family and the Jeffreys integral of K are built once; strategies
    are rebuilt per n because the composite weights depend on it.
    """

    def __init__(self, config: ExperimentConfig, threads: Optional[int] = None, seed: Optional[int] = None):
        self.config = config
        self.threads = threads or config.threads
        self.seed = config.seed if seed is None else seed
        self.family: ModelFamily = build_family(config.family)
        self.domain = config.domain or self.family.domain
        if self.domain.dim != self.family.d:
            raise ConfigurationError(f"domain dimension {self.domain.dim} does not match family d={self.family.d}")
        self._jeffreys: Optional[float] = None

    @property
    def jeffreys(self) -> float:
        if self._jeffreys is None:
            self._jeffreys = jeffreys_integral(self.family, self.domain)
            logger.info(f"C_J(K) = {self._jeffreys:.12g} for {self.family.name}")
        return self._jeffreys

    def strategy_for(self, spec: StrategySpec, n: int):
        spec = resolve_for_n(spec, n, self.seed)
        if spec.family is None and spec.domain is None:
            spec = spec.model_copy(update={"domain": self.domain})
        return build_strategy(spec, self.family)

    def evaluate(self, spec: StrategySpec, n: int) -> RegretReport:
        strategy = self.strategy_for(spec, n)
        return worst_case_regret(strategy, self.family, self.domain, n, strings=self.config.strings,
                                 delta=self.config.delta, threads=self.threads, jeffreys=self.jeffreys)

    def scan(self, show_progress: bool = True) -> List[RegretReport]:
        """One report per (n, strategy), n in config order then strategies in config order"""
        reports = []
        total = len(self.config.n) * len(self.config.strategies)
        with Progress(TextColumn("{task.description}"), BarColumn(), TextColumn("{task.completed}/{task.total}"),
                      TimeElapsedColumn(), disable=not show_progress, transient=True) as progress:
            task = progress.add_task("regret scan", total=total)
            for n in self.config.n:
                for spec in self.config.strategies:
                    progress.update(task, description=f"n={n} {spec.label}")
                    reports.append(self.evaluate(spec, n))
                    progress.advance(task)
        logger.info(f"Regret scan finished: {len(reports)} rows")
        return reports

    def run(self, out: Optional[Union[str, Path]] = None, show_progress: bool = True) -> List[RegretReport]:
        reports = self.scan(show_progress)
        target = out or self.config.out
        if target is not None:
            write_regret_csv(reports, target)
        return reports

    def compare(self, n: int) -> tuple:
        """Worst-case regrets of every strategy at one n and the Shtarkov constant on the same strings"""
        reports = [self.evaluate(spec, n) for spec in self.config.strategies]
        shtarkov = shtarkov_log_constant(self.family, self.domain, n, strings=self.config.strings,
                                         threads=self.threads)
        return reports, shtarkov

    def against_jeffreys(self, reports: List[RegretReport], n: int) -> List[ClassComparison]:
        """How often each strategy beats the plain Jeffreys mixture on the not-good classes of length n"""
        baseline = regret_table(jeffreys_strategy(self.family, self.domain), self.family, self.domain, n,
                                self.config.delta, self.threads)
        return [improvement_summary(compare_on_classes(report.table, baseline)) for report in reports]
