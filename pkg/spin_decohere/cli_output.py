"""CLI output formatting and display utilities."""

from typing import Any, Dict

from rich.console import Console
from rich.table import Table

from spin_decohere.bench import AverageSummary, BenchReport, TrajectorySummary

console = Console()


def _scientific(value: float) -> str:
    return f"{value:.2e}"


def format_benchmark_table(report: BenchReport) -> Table:
    """Format the algorithm comparison as a table.

    Errors at round-off level show as MP, for machine precision.
    """
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Algorithm", style="cyan")
    table.add_column("Error", style="green", justify="right")
    table.add_column("Error (phase-free)", style="yellow", justify="right")
    table.add_column("Wall time [s]", style="blue", justify="right")

    for row in report.rows:
        if row.algorithm == "ED":
            error = phase_free = "-"
        else:
            error = "MP" if row.error < 1e-11 else _scientific(row.error)
            phase_free = _scientific(row.error_phase_free)
        table.add_row(row.algorithm, error, phase_free, f"{row.wall_seconds:.3f}")

    return table


def format_config_table(summary: Dict[str, Any]) -> Table:
    """Format resolved configuration settings as a two-column table."""
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="green")

    for key, value in summary.items():
        if isinstance(value, list):
            value = ", ".join(str(v) for v in value)
        table.add_row(key, "-" if value is None else str(value))

    return table


def print_benchmark_table(report: BenchReport) -> None:
    if not report.rows:
        console.print("No algorithms were run")
        return
    console.print(format_benchmark_table(report))
    for warning in report.warnings:
        print_warning(warning)


def print_config_table(summary: Dict[str, Any]) -> None:
    console.print(format_config_table(summary))


def print_trajectory_summary(summary: TrajectorySummary) -> None:
    print_success(
        f"{summary.label}: {summary.samples} samples written to "
        f"{summary.output_path} in {summary.wall_seconds:.2f}s "
        f"(final norm {summary.final_norm:.15f})"
    )


def print_average_summary(summary: AverageSummary) -> None:
    print_success(
        f"{summary.label}: averaged {summary.seeds} seeds over {summary.samples} "
        f"times, written to {summary.output_path}"
    )
    if summary.rms_to_exact is not None:
        print_info(f"RMS deviation from the closed form: {summary.rms_to_exact:.4g}")
    if summary.envelope_to_exact is not None:
        print_info(
            "RMS envelope deviation from the closed form: "
            f"{summary.envelope_to_exact:.4g}"
        )


def print_success(message: str) -> None:
    """Print a success message."""
    console.print(f"[green]✓[/green] {message}")


def print_info(message: str) -> None:
    """Print an info message."""
    console.print(f"[blue]ℹ[/blue] {message}")


def print_warning(message: str) -> None:
    """Print a warning message."""
    console.print(f"[yellow]⚠[/yellow] {message}")
