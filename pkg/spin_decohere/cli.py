#!/usr/bin/env python3
"""spin-decohere command-line interface.

Runs central-spin decoherence simulations described by a configuration file:
single trajectories, the algorithm comparison table against exact
diagonalization, and averages over bath realizations.

Example usage:
    $ spin-decohere run config/comparison.cfg
    $ spin-decohere run config/decay_revival.cfg --set algorithm=SP_PAIR_U4
    $ spin-decohere validate config/bath_average.cfg --set L=8
"""

import logging
from pathlib import Path
from typing import Optional, Tuple

import click
from rich.logging import RichHandler

# isort: off
from spin_decohere.cli_output import (
    console,
    print_average_summary,
    print_benchmark_table,
    print_config_table,
    print_info,
    print_trajectory_summary,
)

# isort: on
from spin_decohere import __version__
from spin_decohere.bench import (
    AverageSummary,
    BenchReport,
    TrajectorySummary,
    run as run_config,
)
from spin_decohere.config import RunConfig, load_run_config
from spin_decohere.errors import SpinDecohereError

logger = logging.getLogger("spin-decohere")


def configure_logging(quiet: bool = False, verbose: bool = False) -> None:
    """Route library logging through rich: WARNING by default."""
    level = logging.WARNING
    if verbose:
        level = logging.INFO
    if quiet:
        level = logging.ERROR
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    root.addHandler(
        RichHandler(console=console, show_path=False, rich_tracebacks=True)
    )
    root.setLevel(level)


def _to_click(error: SpinDecohereError) -> click.ClickException:
    exception = click.ClickException(str(error))
    exception.exit_code = error.exit_code
    return exception


def _load(config_file: str, overrides: Tuple[str, ...]) -> RunConfig:
    try:
        return load_run_config(Path(config_file), overrides)
    except SpinDecohereError as e:
        raise _to_click(e)


@click.group()
@click.version_option(version=__version__, prog_name="spin-decohere")
def cli():
    """Central-spin decoherence simulator."""
    pass


@cli.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="KEY=VALUE",
    help="Override a configuration key (repeatable)",
)
@click.option("--output", type=click.Path(dir_okay=False), help="Output CSV path")
@click.option("--quiet", is_flag=True, help="Only report errors")
@click.option("--verbose", is_flag=True, help="Log run progress")
def run(
    config_file: str,
    overrides: Tuple[str, ...],
    output: Optional[str],
    quiet: bool,
    verbose: bool,
) -> None:
    """Run the simulation described by CONFIG_FILE."""
    configure_logging(quiet=quiet, verbose=verbose)
    if output:
        overrides = overrides + (f"output={output}",)
    cfg = _load(config_file, overrides)
    try:
        result = run_config(cfg)
    except SpinDecohereError as e:
        raise _to_click(e)
    except OSError as e:
        raise click.ClickException(f"Failed to write results: {e}")

    if quiet:
        return
    if isinstance(result, BenchReport):
        print_benchmark_table(result)
        print_info(f"Results written to {cfg.output_path}")
    elif isinstance(result, AverageSummary):
        print_average_summary(result)
    elif isinstance(result, TrajectorySummary):
        print_trajectory_summary(result)


@cli.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="KEY=VALUE",
    help="Override a configuration key (repeatable)",
)
def validate(config_file: str, overrides: Tuple[str, ...]) -> None:
    """Check CONFIG_FILE and show the resolved settings without running."""
    configure_logging()
    cfg = _load(config_file, overrides)
    print_config_table(cfg.summary())


if __name__ == "__main__":
    cli()
