"""
Regret evaluation for coding strategies

Pointwise regret is log p(x^n | theta_hat_K) - log q(x^n). Because every
strategy in this lab is exchangeable, the worst case over strings of a
finite alphabet is a maximum over count classes, which is enumerated
exactly up to a guard on the number of classes. Beyond the guard, use
expected_regret_mc().
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Literal, Optional, Union

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from config import (
    DEFAULT_THREADS, ENUMERATION_GUARD, GOOD_STRING_GAMMA, MC_SEED, REGRET_CSV_COLUMNS, SIGNIFICANT_DIGITS,
)
from exceptions import ConfigurationError, DomainError, MinimaxError
from mixtures import BayesMixture, Strategy
from model_families import ModelFamily, ParamDomain, build_family, counts_dot_log
from priors import Prior, jeffreys_integral
from state import ClassComparison, CountClass, LaplaceEstimate, MCEstimate, RegretReport
from utils import (
    count_matrix, format_counts, log_det_spd, log_multinomial, multinomial_coefficient, nats_to_bits,
    spectral_norm,
)

logger = logging.getLogger(__name__)

StringSet = Literal["in_domain", "all"]


def default_delta(n: int, gamma: float = GOOD_STRING_GAMMA) -> float:
    """Good-string threshold n^{-1/2 + gamma}"""
    return n ** (-0.5 + gamma)


def enumerate_classes(n: int, k: int, limit: int = ENUMERATION_GUARD) -> List[CountClass]:
    return [CountClass(counts=tuple(int(c) for c in row), multiplicity=multinomial_coefficient(row))
            for row in count_matrix(n, k, limit)]


def asymptotic_minimax_value(d: int, n: float, jeffreys: float, expected: bool = False) -> float:
    """(d/2) log(n / 2 pi) + log C_J, or (d/2) log(n / 2 pi e) + log C_J for expected regret"""
    if jeffreys <= 0:
        raise DomainError("asymptotic_minimax_value needs C_J > 0")
    scale = 2.0 * math.pi * (math.e if expected else 1.0)
    return 0.5 * d * math.log(n / scale) + math.log(jeffreys)


# ---- Per-class evaluation ----

def _evaluate_chunk(family: ModelFamily, domain: ParamDomain, rows: np.ndarray, with_v: bool):
    same_domain = domain == family.domain
    out = []
    for row in rows:
        obs = family.observe_counts(row)
        restricted = family.mle(obs, domain)
        free = restricted if same_domain else family.mle(obs)
        outside = free.boundary and family.domain.shape == "clipped"
        in_domain = (not outside) and domain.contains(free.theta, tol=1e-9)
        v_norm = math.nan
        if with_v and in_domain and not restricted.boundary:
            try:
                v_norm = spectral_norm(family.v_statistic(np.array(restricted.theta), obs))
            except MinimaxError as e:
                logger.debug(f"V not available at {format_counts(row)}: {e}")
        out.append((restricted.log_likelihood, in_domain, restricted.theta, v_norm))
    return out


def evaluate_classes(family, domain: ParamDomain, classes: np.ndarray, with_v: bool = False,
                     threads: int = DEFAULT_THREADS) -> pd.DataFrame:
    """Restricted MLE, K-membership of the unrestricted MLE and optionally ||V||_s per class"""
    family = build_family(family)
    if threads > 1 and classes.shape[0] > threads:
        chunks = np.array_split(classes, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _evaluate_chunk(family, domain, c, with_v), chunks))
        results = [item for part in parts for item in part]
    else:
        results = _evaluate_chunk(family, domain, classes, with_v)
    return pd.DataFrame({
        "counts": [tuple(int(c) for c in row) for row in classes],
        "log_multiplicity": log_multinomial(classes),
        "max_log_likelihood": [r[0] for r in results],
        "in_domain": [r[1] for r in results],
        "theta_hat": [r[2] for r in results],
        "v_norm": [r[3] for r in results],
    })


def pointwise_regret(strategy: Strategy, family, domain: Optional[ParamDomain], xs) -> float:
    family = build_family(family)
    if len(xs) == 0:
        raise DomainError("pointwise regret needs a nonempty string")
    best = family.mle(xs, domain or family.domain)
    return best.log_likelihood - strategy.log_marginal(xs)


def regret_table(strategy: Strategy, family, domain: Optional[ParamDomain], n: int,
                 delta: Optional[float] = None, threads: int = DEFAULT_THREADS) -> pd.DataFrame:
    """Per-class regret table with good/not-good labels"""
    family = build_family(family)
    domain = domain or family.domain
    classes = count_matrix(n, family.k)
    table = evaluate_classes(family, domain, classes, with_v=True, threads=threads)
    table["log_q"] = strategy.log_marginal_counts(classes)
    table["regret"] = table["max_log_likelihood"] - table["log_q"]
    table["label"] = _labels(table, default_delta(n) if delta is None else delta)
    return table


def _labels(table: pd.DataFrame, delta: float) -> np.ndarray:
    good = table["in_domain"] & (table["v_norm"] <= delta)
    return np.where(~table["in_domain"], "outside", np.where(good, "good", "not_good"))


def worst_case_regret(strategy: Strategy, family, domain: Optional[ParamDomain], n: int,
                      strings: StringSet = "in_domain", delta: Optional[float] = None,
                      threads: int = DEFAULT_THREADS, jeffreys: Optional[float] = None) -> RegretReport:
    """
    Exact maximum of the pointwise regret over count classes

    strings='in_domain' takes the classes whose MLE lies in K; 'all' takes
    every class with the K-restricted MLE.
    """
    family = build_family(family)
    if not family.finite:
        raise ConfigurationError("worst-case regret is enumerated over finite alphabets only")
    domain = domain or family.domain
    delta = default_delta(n) if delta is None else delta
    table = regret_table(strategy, family, domain, n, delta, threads)
    selected = table if strings == "all" else table[table["in_domain"]]
    if selected.empty:
        raise DomainError(f"no count class of length {n} has its MLE inside K")
    best = selected["regret"].idxmax()
    jeffreys = jeffreys_integral(family, domain) if jeffreys is None else jeffreys
    asymptotic = asymptotic_minimax_value(family.d, n, jeffreys)
    max_regret = float(selected.loc[best, "regret"])
    report = RegretReport(
        n=n,
        strategy=strategy.name,
        max_regret_nats=max_regret,
        max_regret_bits=nats_to_bits(max_regret),
        argmax_counts=selected.loc[best, "counts"],
        asymptotic_nats=asymptotic,
        gap_nats=max_regret - asymptotic,
        num_classes=int(len(selected)),
        good_fraction=float((selected["label"] == "good").mean()),
        delta=delta,
        strings=strings,
        table=table,
    )
    logger.info(f"{strategy.name} n={n}: max regret {max_regret:.6f} nats at {format_counts(report.argmax_counts)}")
    return report


def shtarkov_log_constant(family, domain: Optional[ParamDomain], n: int, strings: StringSet = "all",
                          threads: int = DEFAULT_THREADS) -> float:
    """log c_{n,K} = log sum over strings of max_{theta in K} p(x^n|theta)"""
    family = build_family(family)
    if not family.finite:
        raise ConfigurationError("Shtarkov constants are enumerated over finite alphabets only")
    if n == 0:
        return 0.0
    domain = domain or family.domain
    table = evaluate_classes(family, domain, count_matrix(n, family.k), threads=threads)
    if strings == "in_domain":
        table = table[table["in_domain"]]
    return float(logsumexp(table["log_multiplicity"] + table["max_log_likelihood"]))


def laplace_regret_estimate(prior: Union[Prior, BayesMixture], family, domain: Optional[ParamDomain],
                            xs) -> LaplaceEstimate:
    """(d/2) log(n / 2 pi) + (1/2) log |J_hat(theta_hat)| - log w(theta_hat)"""
    if isinstance(prior, BayesMixture):
        prior = prior.prior
    family = build_family(family)
    domain = domain or family.domain
    best = family.mle(xs, domain)
    theta = np.array(best.theta)
    n = family.observe(xs).n
    log_det_hat = log_det_spd(family.empirical_fisher(theta, xs))
    correction = 0.5 * (log_det_hat - log_det_spd(family.fisher(theta)))
    value = 0.5 * family.d * math.log(n / (2.0 * math.pi)) + 0.5 * log_det_hat - prior.log_density(theta)
    if best.boundary:
        logger.warning(f"Laplace estimate at boundary MLE {best.theta} is not valid")
    return LaplaceEstimate(value=value, correction=correction, boundary=best.boundary)


def expected_regret_mc(strategy: Strategy, family, theta, n: int, trials: int, seed: int = MC_SEED,
                       against: Literal["true", "mle"] = "true",
                       domain: Optional[ParamDomain] = None) -> MCEstimate:
    """
    Monte Carlo mean of log p(x^n|ref) - log q(x^n) under x^n ~ p(.|theta)

    against='true' measures redundancy against the sampling parameter;
    against='mle' measures pointwise regret against the K-restricted MLE.
    NML over all strings is an equalizer only in the second sense: against
    the MLE every draw costs log c_{n,K} and the stderr is zero, against
    the true parameter the draws vary.
    """
    family = build_family(family)
    if trials < 1:
        raise DomainError("expected_regret_mc needs trials >= 1")
    domain = domain or family.domain
    theta = family.check_theta(theta)
    rng = np.random.default_rng(seed)
    if family.finite:
        counts = family.sample_counts(theta, n, trials, rng)
        unique, inverse = np.unique(counts, axis=0, return_inverse=True)
        log_q = strategy.log_marginal_counts(unique)
        if against == "true":
            reference = counts_dot_log(unique, family.symbol_log_probs(theta))
        else:
            reference = np.array([family.mle(family.observe_counts(row), domain).log_likelihood for row in unique])
        values = (reference - log_q)[inverse.ravel()]
    else:
        values = np.empty(trials)
        for t in range(trials):
            xs = family.sample(theta, n, rng)
            ref = family.log_likelihood(theta, xs) if against == "true" else family.mle(xs, domain).log_likelihood
            values[t] = ref - strategy.log_marginal(xs)
    stderr = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    reference_value = asymptotic_minimax_value(family.d, n, jeffreys_integral(family, domain), expected=True)
    return MCEstimate(mean=float(values.mean()), stderr=stderr, trials=trials,
                      reference=reference_value, against=against)


def classify_good_strings(family, domain: Optional[ParamDomain], n: int, delta: Optional[float] = None,
                          threads: int = DEFAULT_THREADS) -> pd.DataFrame:
    """Label each count class good, not_good or outside by ||V(x^n|theta_hat)||_s <= delta"""
    family = build_family(family)
    domain = domain or family.domain
    table = evaluate_classes(family, domain, count_matrix(n, family.k), with_v=True, threads=threads)
    table["label"] = _labels(table, default_delta(n) if delta is None else delta)
    return table


def compare_on_classes(table: pd.DataFrame, baseline: pd.DataFrame) -> pd.DataFrame:
    """Per-class regret beside a baseline; both tables come from regret_table() at the same n and K"""
    if list(table["counts"]) != list(baseline["counts"]):
        raise ConfigurationError("regret tables cover different count classes")
    frame = table[["counts", "label", "in_domain", "regret"]].copy()
    frame["baseline_regret"] = baseline["regret"].to_numpy()
    frame["improvement"] = frame["baseline_regret"] - frame["regret"]
    return frame


def improvement_summary(frame: pd.DataFrame, label: str = "not_good") -> ClassComparison:
    subset = frame[frame["label"] == label]
    if subset.empty:
        return ClassComparison(label=label, classes=0, improved=0, improved_fraction=math.nan,
                               worst_loss=0.0, best_gain=0.0)
    improved = int((subset["improvement"] > 0).sum())
    return ClassComparison(
        label=label,
        classes=int(len(subset)),
        improved=improved,
        improved_fraction=improved / len(subset),
        worst_loss=float(max(0.0, -subset["improvement"].min())),
        best_gain=float(subset["improvement"].max()),
    )


def reports_frame(reports: Iterable[RegretReport]) -> pd.DataFrame:
    rows = [report.csv_row() for report in reports]
    return pd.DataFrame(rows, columns=REGRET_CSV_COLUMNS)


def write_regret_csv(reports: Iterable[RegretReport], path) -> pd.DataFrame:
    """Write the regret-scan CSV (header row, UTF-8, 12 significant digits)"""
    frame = reports_frame(reports)
    frame.to_csv(path, index=False, encoding="utf-8", float_format=f"%.{SIGNIFICANT_DIGITS}g", lineterminator="\n")
    logger.info(f"Wrote {len(frame)} regret rows to {path}")
    return frame
