"""Command Line Interface for qudit-noise."""

import asyncio
import logging
import sys
from importlib import metadata
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from qudit_noise import __version__
from qudit_noise.application.commands.run_pipeline import PipelineKind, RunPipelineCommand
from qudit_noise.application.dtos.results import PipelineResultDTO
from qudit_noise.application.dtos.run_config import GlobalRunSettings, load_run_config
from qudit_noise.application.handlers.pipeline_handler import PipelineHandler
from qudit_noise.domain.exceptions import ConfigurationError, QuditNoiseError, StageError
from qudit_noise.infrastructure.config import get_config

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# Create Typer app
app = typer.Typer(
    name="qudit-noise",
    help="qudit-noise - Charge-noise modeling and analysis for transmon qudits",
    add_completion=False,
)

console = Console()
err_console = Console(stderr=True)


def version_callback(value: bool) -> None:
    """Show version and exit."""
    if value:
        console.print(f"qudit-noise version {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: bool = typer.Option(
        None,
        "--version",
        "-V",
        callback=version_callback,
        is_eager=True,
        help="Show version and exit.",
    ),
) -> None:
    """qudit-noise - Synthesize and analyse transmon charge-noise telemetry."""
    pass


def configure_logging(verbose: bool, quiet: bool, verbosity: str = "normal") -> None:
    """Install a RichHandler on the root logger.

    Command-line flags win over the run document, which wins over
    ``QUDIT_NOISE_LOG_LEVEL``.
    """
    if verbose:
        level = "DEBUG"
    elif quiet:
        level = "WARNING"
    else:
        level = {"verbose": "DEBUG", "quiet": "WARNING"}.get(verbosity, get_config().log_level)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def _read_document(config_path: Optional[Path]) -> Optional[str]:
    if config_path is None:
        return None
    try:
        return config_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read {config_path}: {e}", field="--config") from e


def _exit_code(error: QuditNoiseError) -> int:
    cause: BaseException = error.cause if isinstance(error, StageError) else error
    if isinstance(cause, (ConfigurationError, ValueError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def _format_value(value: object) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _render(result: PipelineResultDTO) -> None:
    if result.headline:
        headline = Table(title=f"{result.command} results", show_header=False)
        headline.add_column("Quantity", style="cyan")
        headline.add_column("Value", style="green")
        for key, value in result.headline.items():
            headline.add_row(key, _format_value(value))
        console.print(headline)

    if result.summary:
        summary = Table(title="Planted versus recovered")
        summary.add_column("Quantity", style="cyan")
        summary.add_column("Planted")
        summary.add_column("Recovered")
        summary.add_column("Tolerance")
        summary.add_column("Pass")
        for row in result.summary:
            verdict = {True: "[green]PASS[/green]", False: "[red]FAIL[/red]", None: "-"}
            summary.add_row(
                row.quantity,
                _format_value(row.planted),
                _format_value(row.recovered),
                row.tolerance,
                verdict[row.passed],
            )
        console.print(summary)

    for warning in result.warnings:
        console.print(f"[yellow]Warning:[/yellow] {warning}")
    for stage in result.manifest.failed_stages:
        console.print(f"[red]Stage failed:[/red] {stage}")

    console.print(
        f"\n[green]Done.[/green] {len(result.manifest.files)} files written to "
        f"[bold]{result.output_dir}[/bold]"
    )


def _run(
    kind: PipelineKind,
    config_path: Optional[Path],
    seed: Optional[int],
    out: Optional[Path],
    quick: bool,
    verbose: bool,
    quiet: bool,
) -> None:
    try:
        document: GlobalRunSettings = load_run_config(
            kind.config_model, _read_document(config_path)
        )
        configure_logging(verbose, quiet, document.verbosity)
        command = RunPipelineCommand.from_dto(
            kind, document, seed=seed, output_dir=out, quick=quick
        )
        handler = PipelineHandler()
        result = asyncio.run(handler.handle(command))
    except QuditNoiseError as e:
        code = _exit_code(e)
        label = "Configuration error" if code == EXIT_CONFIG else "Error"
        err_console.print(f"[red]{label}:[/red] {e}")
        raise typer.Exit(code)
    except ValueError as e:
        err_console.print(f"[red]Configuration error:[/red] {e}")
        raise typer.Exit(EXIT_CONFIG)

    _render(result)
    if not result.success:
        raise typer.Exit(EXIT_NUMERICAL)


ConfigOption = typer.Option(
    None,
    "--config",
    "-c",
    help="JSON run document; omitted fields take their defaults",
    exists=True,
    dir_okay=False,
    readable=True,
)
SeedOption = typer.Option(None, "--seed", "-s", min=0, help="Seed (overrides the run document)")
OutOption = typer.Option(None, "--out", "-o", help="Run directory (overrides the run document)")
QuickOption = typer.Option(False, "--quick", help="Divide durations by 100, widen tolerances")
VerboseOption = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level")
QuietOption = typer.Option(False, "--quiet", "-q", help="Log warnings and errors only")


@app.command()
def spectrum(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = OutOption,
    quick: bool = QuickOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Compute transmon levels over gate charge and the parity bands.

    Examples:
        qudit-noise spectrum
        qudit-noise spectrum -c device.json -o runs/spectrum
    """
    _run(PipelineKind.SPECTRUM, config, seed, out, quick, verbose, quiet)


@app.command()
def parity(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = OutOption,
    quick: bool = QuickOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Synthesize parity telemetry, decode it and fit the switching spectrum.

    Examples:
        qudit-noise parity --quick
        qudit-noise parity -c parity.json --seed 7
    """
    _run(PipelineKind.PARITY, config, seed, out, quick, verbose, quiet)


@app.command()
def charge(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = OutOption,
    quick: bool = QuickOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Synthesize offset-charge traces, select the model order and fit transitions."""
    _run(PipelineKind.CHARGE, config, seed, out, quick, verbose, quiet)


@app.command()
def fields(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = OutOption,
    quick: bool = QuickOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Map the induced-charge sensitivity of both device geometries."""
    _run(PipelineKind.FIELDS, config, seed, out, quick, verbose, quiet)


@app.command()
def reproduce(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = OutOption,
    quick: bool = QuickOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Run every pipeline into one directory and tabulate planted versus recovered values.

    Stage failures are recorded in the manifest and the remaining pipelines
    continue; the exit code is 3 if any stage failed.

    Examples:
        qudit-noise reproduce --quick
        qudit-noise reproduce --seed 1 -o runs/full
    """
    _run(PipelineKind.REPRODUCE, config, seed, out, quick, verbose, quiet)


@app.command()
def info() -> None:
    """Show version, numerical stack and resolved settings."""
    table = Table(title="qudit-noise Information")
    table.add_column("Property", style="cyan")
    table.add_column("Value", style="green")

    table.add_row("Version", __version__)
    table.add_row("Python", sys.version.split()[0])

    for package in ("numpy", "scipy", "scikit-learn", "numba", "pydantic"):
        try:
            table.add_row(package, metadata.version(package))
        except metadata.PackageNotFoundError:
            table.add_row(package, "[red]not installed[/red]")

    try:
        config = get_config()
    except ConfigurationError as e:
        err_console.print(f"[red]Configuration error:[/red] {e}")
        raise typer.Exit(EXIT_CONFIG)
    table.add_row("Output Root", str(config.output_dir))
    table.add_row("Log Level", config.log_level)
    table.add_row("Grid Budget", f"{config.max_grid_points:,} points")
    table.add_row("Workers", str(config.workers))

    console.print(table)
    console.print(
        Panel(
            "Run documents are JSON; see `docs/USAGE.md` for every field.",
            border_style="blue",
        )
    )


if __name__ == "__main__":
    app()
