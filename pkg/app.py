"""
Minimax coding lab command line

This is the entry point for running the lab's experiments from a shell:
exact worst-case regret scans over count classes, Shtarkov constants,
side-by-side strategy comparisons, arithmetic coding of symbol files with
any finite-alphabet strategy, and two small demonstrations (the
contaminated Gaussian whose MLE is not unique, and the boundary behavior
of the ideal prior).

Commands:
- regret-scan: one CSV row per (n, strategy) from a JSON experiment config
- nml: log of the Shtarkov constant for a family and domain
- compare: worst-case regrets of several strategies beside log c_n
- compress / decompress: container files coded by a strategy spec
- demo-contaminated, demo-ideal-prior: printed demonstrations

Errors map to exit codes: 2 when the enumeration guard is exceeded, 64 for
invalid flags or configs, 65 for corrupt, truncated or mismatched
containers.
"""
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import click
import numpy as np
import typer
from rich.console import Console
from rich.logging import RichHandler

from arith_coding import HEADER_SIZE
from arith_coding import compress as compress_symbols
from arith_coding import decompress as decompress_symbols
from config import EXIT_DATA, EXIT_GUARD, EXIT_OK, EXIT_USAGE, LOG_LEVEL, MC_SEED
from exceptions import (
    CoderError, ConfigurationError, DomainError, EnumerationLimitError, MinimaxError,
)
from experiment_runner import ExperimentRunner, load_experiment
from mixtures import NMLStrategy, build_strategy
from model_families import ParamDomain, build_family, contaminated_gaussian
from priors import (
    default_alpha_scale, default_epsilon, ideal_prior_factor, ideal_prior_normalizer, jeffreys_integral,
    schedule_diagnostics,
)
from regret_lab import asymptotic_minimax_value, expected_regret_mc, shtarkov_log_constant
from spec_loader import detect_format, load_family_spec, load_strategy_spec, read_symbols, write_symbols
from ui_components import (
    console, render_class_comparisons, render_coding_summary, render_contaminated, render_factors, render_header,
    render_messages, render_normalizer_trend, render_regret_reports, render_schedule, render_shtarkov,
)
from utils import nats_to_bits

logger = logging.getLogger(__name__)

app = typer.Typer(add_completion=False, no_args_is_help=True,
                  help="Minimax universal coding lab: regret, NML and arithmetic coding")

_logging_ready = False


def setup_logging(level: str = LOG_LEVEL):
    """Installs a rich handler on the root logger once, writing to stderr"""
    global _logging_ready
    if _logging_ready:
        return
    logging.basicConfig(level=level.upper(), format="%(message)s", datefmt="[%X]",
                        handlers=[RichHandler(console=Console(stderr=True), show_path=False)])
    _logging_ready = True


def _family_from_option(family: str):
    """A preset name, or a path to a JSON family spec"""
    if family.endswith(".json") or Path(family).is_file():
        return build_family(load_family_spec(family))
    return build_family(family)


def _domain_from_options(family, lo: Optional[List[float]], hi: Optional[List[float]], tau: Optional[float]):
    if lo or hi:
        if not lo or not hi or len(lo) != len(hi) or len(lo) != family.d:
            raise ConfigurationError(f"--lo and --hi need {family.d} value(s) each")
        if family.domain.shape == "simplex":
            raise ConfigurationError("--lo/--hi apply to box domains; use --tau for simplex families")
        return ParamDomain.box(lo, hi)
    if tau is not None:
        if family.domain.shape != "simplex":
            raise ConfigurationError("--tau applies to simplex domains")
        return ParamDomain.simplex(family.d, tau)
    return family.domain


@app.command("regret-scan")
def regret_scan(
    config: Path = typer.Option(..., "--config", help="JSON experiment config"),
    out: Optional[Path] = typer.Option(None, "--out", help="CSV path (overrides the config)"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads for class evaluation"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, max=2 ** 64 - 1, help="Monte Carlo seed"),
):
    """Exact worst-case regret per (n, strategy), written as CSV"""
    experiment = load_experiment(config)
    runner = ExperimentRunner(experiment, threads=threads, seed=seed)
    if out is None and experiment.out is None:
        raise ConfigurationError("regret-scan needs --out or an 'out' entry in the config")
    reports = runner.run(out=out)
    render_regret_reports(reports)
    return EXIT_OK


@app.command("nml")
def nml(
    n: int = typer.Option(..., "--n", min=0, help="String length"),
    family: str = typer.Option("bernoulli_mean", "--family", help="Preset name or JSON family spec"),
    lo: Optional[List[float]] = typer.Option(None, "--lo", help="Lower corner of a box K (repeat per axis)"),
    hi: Optional[List[float]] = typer.Option(None, "--hi", help="Upper corner of a box K (repeat per axis)"),
    tau: Optional[float] = typer.Option(None, "--tau", min=0.0, help="Simplex floor for K"),
    strings: str = typer.Option("all", "--strings", help="'all' or 'in_domain'"),
    threads: int = typer.Option(1, "--threads", min=1),
    trials: int = typer.Option(0, "--trials", min=0, help="Monte Carlo draws of the NML regret at the center of K"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, max=2 ** 64 - 1, help="Monte Carlo seed"),
):
    """log c_{n,K} in nats and bits, optionally with a sampled check of the equalizer property"""
    if strings not in ("all", "in_domain"):
        raise ConfigurationError("--strings must be 'all' or 'in_domain'")
    built = _family_from_option(family)
    domain = _domain_from_options(built, lo, hi, tau)
    value = shtarkov_log_constant(built, domain, n, strings=strings, threads=threads)
    render_header(f"NML for {built.name}", f"K = {domain.shape}, strings = {strings}")
    if n > 0:
        asymptotic = asymptotic_minimax_value(built.d, n, jeffreys_integral(built, domain))
        render_shtarkov(n, value, asymptotic)
    else:
        console.print(f"log c_0 = {value:.12g} nats = {nats_to_bits(value):.12g} bits")
    if trials > 0 and n > 0:
        strategy = NMLStrategy(built, domain, n)
        estimate = expected_regret_mc(strategy, built, domain.center(), n, trials,
                                      seed=MC_SEED if seed is None else seed, against="mle", domain=domain)
        console.print(f"Sampled NML regret over {trials} draws: {estimate.mean:.12g} +/- {estimate.stderr:.3g} nats "
                      f"(log c_n over all strings = {strategy.log_constant:.12g})")
    return EXIT_OK


@app.command("compare")
def compare(
    config: Path = typer.Option(..., "--config", help="JSON experiment config"),
    n: Optional[int] = typer.Option(None, "--n", min=1, help="String length (first n of the config if omitted)"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, max=2 ** 64 - 1),
):
    """Worst-case regret of every configured strategy beside the Shtarkov constant"""
    experiment = load_experiment(config)
    runner = ExperimentRunner(experiment, threads=threads, seed=seed)
    length = n or experiment.n[0]
    reports, shtarkov = runner.compare(length)
    render_header(f"Strategies for {runner.family.name}, n={length}")
    render_regret_reports(reports)
    render_shtarkov(length, shtarkov, asymptotic_minimax_value(runner.family.d, length, runner.jeffreys))
    summaries = runner.against_jeffreys(reports, length)
    render_class_comparisons([(report.strategy, summary) for report, summary in zip(reports, summaries)])
    return EXIT_OK


@app.command("compress")
def compress(
    source: Path = typer.Argument(..., help="Symbol file"),
    target: Path = typer.Argument(..., help="Container file to write"),
    strategy: Path = typer.Option(..., "--strategy", help="JSON strategy spec (must name its family)"),
    fmt: Optional[str] = typer.Option(None, "--format", help="bits, digits or tokens; from the extension if omitted"),
):
    """Arithmetic-code a symbol file with a strategy"""
    spec = load_strategy_spec(strategy)
    built = build_strategy(spec)
    symbols = read_symbols(source, built.family, fmt)
    data = compress_symbols(built, spec, symbols)
    target.write_bytes(data)
    ideal = nats_to_bits(-built.log_marginal(symbols)) if symbols else 0.0
    payload_bits = 8 * (len(data) - HEADER_SIZE)
    render_coding_summary(str(source), len(symbols), payload_bits, ideal)
    return EXIT_OK


@app.command("decompress")
def decompress(
    source: Path = typer.Argument(..., help="Container file"),
    target: Path = typer.Argument(..., help="Symbol file to write"),
    strategy: Path = typer.Option(..., "--strategy", help="JSON strategy spec used for compression"),
    fmt: Optional[str] = typer.Option(None, "--format", help="bits, digits or tokens; from the extension if omitted"),
):
    """Invert compress; the strategy spec must match the container digest"""
    spec = load_strategy_spec(strategy)
    built = build_strategy(spec)
    try:
        data = source.read_bytes()
    except OSError as e:
        raise ConfigurationError(f"{source}: {e.strerror or e}")
    symbols = decompress_symbols(built, spec, data)
    write_symbols(target, symbols, fmt or detect_format(target))
    console.print(f"Decoded {len(symbols)} symbols to {target}")
    return EXIT_OK


def contaminated_report(log_spread_sq: float, contamination: float) -> dict:
    """Critical radius, single-point empirical Fisher at +-c and the MLE of (c, -c)"""
    family = build_family(contaminated_gaussian(math.exp(log_spread_sq), contamination))
    c = family.critical_radius()
    theta = np.zeros(1)
    fisher_plus = float(family.empirical_fisher(theta, [c])[0, 0])
    fisher_minus = float(family.empirical_fisher(theta, [-c])[0, 0])
    best = family.mle([c, -c])
    return {
        "log s^2": log_spread_sq,
        "nu": contamination,
        "critical radius c": c,
        "c^2": c * c,
        "J_hat_1(c) at theta=0": fisher_plus,
        "J_hat_1(-c) at theta=0": fisher_minus,
        "theta_hat": list(best.theta),
        "mirror maximizer": [-t for t in best.theta],
        "max log-likelihood": best.log_likelihood,
        "multiple maximizers": best.multiple,
    }


@app.command("demo-contaminated")
def demo_contaminated(
    log_spread_sq: float = typer.Option(5.0, "--log-spread-sq", help="log s^2 of the wide component"),
    contamination: float = typer.Option(0.01, "--nu", min=1e-12, max=1.0 - 1e-12, help="Contamination weight"),
):
    """Negative empirical Fisher information and a non-unique MLE"""
    report = contaminated_report(log_spread_sq, contamination)
    render_header("Contaminated Gaussian", f"s^2 = e^{log_spread_sq:g}, nu = {contamination:g}")
    if log_spread_sq < 4.0:
        logger.warning(f"log s^2 = {log_spread_sq:g} < 4: negative empirical Fisher information is not guaranteed")
    render_contaminated(report)
    return EXIT_OK


@app.command("demo-ideal-prior")
def demo_ideal_prior(
    family: str = typer.Option("bernoulli_mean", "--family", help="One-parameter preset or JSON family spec"),
    n: List[int] = typer.Option([100, 1000, 10000], "--n", min=2, help="String lengths (repeat)"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, max=2 ** 64 - 1),
):
    """Gaussian-mass factor inside and at the boundary, and the normalizer trend over n"""
    built = _family_from_option(family)
    domain = built.domain
    render_header(f"Ideal prior for {built.name}")
    largest = max(n)
    epsilon = default_epsilon(largest)
    wide_alpha = 100.0 * math.sqrt(largest) * epsilon
    lo, hi = domain.bounds()[0]
    center = domain.center()
    # just inside the first lower face; the Fisher information may blow up on it
    edge = center.copy()
    edge[0] = lo + 1e-6 * (hi - lo)
    extra = {} if seed is None else {"mc_seed": seed}
    rows = [
        ("interior", center.tolist(),
         ideal_prior_factor(built, domain, center, epsilon, default_alpha_scale(largest), largest, **extra)),
        ("boundary", edge.tolist(), ideal_prior_factor(built, domain, edge, epsilon, wide_alpha, largest, **extra)),
    ]
    render_factors(rows, title=f"Gaussian-mass factors at n={largest}")
    jeffreys = jeffreys_integral(built, domain)
    trend = []
    for length in sorted(n):
        eps, alpha_scale = default_epsilon(length), default_alpha_scale(length)
        normalizer = ideal_prior_normalizer(built, domain, eps, alpha_scale, length, **extra)
        trend.append((length, eps, alpha_scale, normalizer, jeffreys))
    render_normalizer_trend(trend)
    render_schedule([(row[0], schedule_diagnostics(row[0], row[1], row[2])) for row in trend])
    if len(trend) > 1:
        render_messages([f"C_ideal / C_J falls from {trend[0][3] / jeffreys:.6g} to {trend[-1][3] / jeffreys:.6g}"],
                        style="dim")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting"""
    setup_logging()
    command = typer.main.get_command(app)
    try:
        result = command.main(args=argv, prog_name="minimax-lab", standalone_mode=False)
    except click.exceptions.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        console.print("Aborted", style="red")
        return EXIT_USAGE
    except EnumerationLimitError as e:
        logger.error(str(e))
        return EXIT_GUARD
    except CoderError as e:
        logger.error(str(e))
        return EXIT_DATA
    except (ConfigurationError, DomainError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except MinimaxError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_DATA
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
