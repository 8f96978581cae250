"""
Terminal rendering for the minimax coding lab CLI
"""
from typing import Iterable, List, Sequence, Tuple

from rich.console import Console
from rich.table import Table

from state import ClassComparison, FactorEstimate, RegretReport
from utils import format_counts, format_number, nats_to_bits

console = Console()


def render_header(title: str, subtitle: str = ""):
    """Shows a command header"""
    console.rule(f"[bold]{title}")
    if subtitle:
        console.print(subtitle, style="dim")


def render_regret_reports(reports: Iterable[RegretReport], title: str = "Worst-case regret"):
    """Shows one row per (n, strategy)"""
    table = Table(title=title)
    for column in ("n", "strategy", "max regret (nats)", "max regret (bits)", "argmax counts",
                   "asymptotic (nats)", "gap (nats)", "classes", "good fraction"):
        table.add_column(column, justify="left" if column in ("strategy", "argmax counts") else "right")
    for report in reports:
        table.add_row(
            str(report.n),
            report.strategy,
            format_number(report.max_regret_nats),
            format_number(report.max_regret_bits),
            format_counts(report.argmax_counts),
            format_number(report.asymptotic_nats),
            format_number(report.gap_nats),
            str(report.num_classes),
            "" if report.good_fraction is None else format_number(report.good_fraction),
        )
    console.print(table)


def render_shtarkov(n: int, log_constant: float, asymptotic: float):
    table = Table(title=f"Shtarkov constant, n={n}")
    table.add_column("quantity")
    table.add_column("nats", justify="right")
    table.add_column("bits", justify="right")
    table.add_row("log c_n", format_number(log_constant), format_number(nats_to_bits(log_constant)))
    table.add_row("asymptotic", format_number(asymptotic), format_number(nats_to_bits(asymptotic)))
    table.add_row("gap", format_number(log_constant - asymptotic), format_number(nats_to_bits(log_constant - asymptotic)))
    console.print(table)


def render_factors(rows: Sequence[tuple], title: str = "Gaussian-mass factors"):
    """Rows of (label, theta, FactorEstimate)"""
    table = Table(title=title)
    for column in ("point", "theta", "factor", "stderr", "method"):
        table.add_column(column, justify="right" if column in ("factor", "stderr") else "left")
    for label, theta, estimate in rows:
        estimate: FactorEstimate
        table.add_row(label, format_counts_float(theta), format_number(estimate.value),
                      format_number(estimate.stderr), estimate.method)
    console.print(table)


def render_normalizer_trend(rows: Sequence[tuple]):
    """Rows of (n, epsilon, alpha_scale, normalizer, jeffreys)"""
    table = Table(title="Ideal-prior normalizer against C_J")
    for column in ("n", "epsilon", "alpha", "C_ideal", "C_J", "C_ideal / C_J"):
        table.add_column(column, justify="right")
    for n, epsilon, alpha_scale, normalizer, jeffreys in rows:
        table.add_row(str(n), format_number(epsilon), format_number(alpha_scale), format_number(normalizer),
                      format_number(jeffreys), format_number(normalizer / jeffreys))
    console.print(table)


def render_class_comparisons(rows: Sequence[Tuple[str, ClassComparison]], baseline: str = "jeffreys"):
    """One row per strategy with its not-good class counts"""
    table = Table(title=f"Against {baseline} on not-good classes")
    for column in ("strategy", "classes", "improved", "fraction", "worst loss (nats)", "best gain (nats)"):
        table.add_column(column, justify="left" if column == "strategy" else "right")
    for strategy, summary in rows:
        fraction = "" if summary.classes == 0 else format_number(summary.improved_fraction)
        table.add_row(strategy, str(summary.classes), str(summary.improved), fraction,
                      format_number(summary.worst_loss), format_number(summary.best_gain))
    console.print(table)


def render_schedule(rows: Sequence[tuple]):
    """Rows of (n, schedule diagnostics dict); each quantity should tend to its limit as n grows"""
    if not rows:
        return
    table = Table(title="Ideal-prior schedule")
    table.add_column("n", justify="right")
    keys = list(rows[0][1])
    for key in keys:
        table.add_column(key, justify="right")
    for n, diagnostics in rows:
        table.add_row(str(n), *(format_number(diagnostics[key]) for key in keys))
    console.print(table)


def render_contaminated(report: dict):
    """Shows the critical radius, empirical Fisher values and the MLE multiplicity"""
    table = Table(title="Contaminated Gaussian")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for key, value in report.items():
        if isinstance(value, bool):
            text = "yes" if value else "no"
        elif isinstance(value, (list, tuple)):
            text = format_counts_float(value)
        else:
            text = format_number(value)
        table.add_row(key, text)
    console.print(table)


def render_coding_summary(path: str, n: int, bits: int, ideal_bits: float):
    table = Table(title=f"Coded {path}")
    table.add_column("symbols", justify="right")
    table.add_column("payload bits", justify="right")
    table.add_column("-log2 q", justify="right")
    table.add_column("bits/symbol", justify="right")
    table.add_row(str(n), str(bits), format_number(ideal_bits), format_number(bits / n if n else 0.0))
    console.print(table)


def format_counts_float(values: Sequence[float]) -> str:
    return ", ".join(format_number(v) for v in values)


def render_messages(messages: List[str], style: str = "yellow"):
    for message in messages:
        console.print(message, style=style)
