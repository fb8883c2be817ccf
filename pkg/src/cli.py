"""Command-line entry point for steermetrics.

Subcommands:

* ``synth``: generate a synthetic corpus with ground truth.
* ``extract``: ingest drive logs and write interaction and baseline sequences.
* ``report``: compute metrics and the comparison report (``--all`` runs
  extract first).

Exit codes: 0 on success, 1 for I/O or data errors, 2 for configuration or
validation errors.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Annotated, TypeVar

import typer
from pydantic import BaseModel

from config import JOBS, LOG_LEVEL, TOOL_VERSION, load_model_file
from exceptions import SteerMetricsError
from models import LogFormat, PipelineConfig, SynthCorpusConfig
from pipeline import run_extract, run_report, run_synth
from utils.artifacts import resolve_inputs

__all__ = ["app", "main"]

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="steermetrics",
    help="Driver-distraction metrics from steering telemetry and touchscreen logs.",
    no_args_is_help=True,
    add_completion=False,
)

ModelT = TypeVar("ModelT", bound=BaseModel)


class ReportFormat(str, Enum):
    """Report file format."""

    CSV = "csv"
    JSON = "json"


ConfigOption = Annotated[
    Path | None, typer.Option("--config", "-c", help="JSON configuration file.")
]
InputOption = Annotated[
    str, typer.Option("--input", "-i", help="Drive log file, directory or glob pattern.")
]
OutOption = Annotated[Path, typer.Option("--out", "-o", help="Output directory.")]
SeedOption = Annotated[
    int | None, typer.Option("--seed", help="Random seed; overrides the config file.")
]
JobsOption = Annotated[
    int | None,
    typer.Option("--jobs", "-j", min=1, help="Worker processes (default: STEERMETRICS_JOBS or 1)."),
]
VerboseOption = Annotated[bool, typer.Option("--verbose", "-v", help="Enable debug logging.")]


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _load(path: Path | None, model: type[ModelT], default: ModelT | None = None) -> ModelT:
    if path is None:
        if default is None:
            raise typer.BadParameter("a config file is required", param_hint="--config")
        return default
    return load_model_file(path, model)


def _pipeline_config(path: Path | None, seed: int | None) -> PipelineConfig:
    cfg = _load(path, PipelineConfig, PipelineConfig())
    if seed is not None:
        cfg = cfg.model_copy(update={"rng_seed": seed})
    return cfg


def _fail(error: SteerMetricsError) -> typer.Exit:
    logger.error(error.message)
    return typer.Exit(code=error.exit_code)


@app.command()
def synth(
    config: ConfigOption = None,
    out: OutOption = Path("synth"),
    seed: SeedOption = None,
    format: Annotated[
        LogFormat, typer.Option("--format", "-f", help="Drive log format.")
    ] = LogFormat.JSONL,
    jobs: JobsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Generate a synthetic corpus: one drive log per drive plus truth.json."""
    _setup_logging(verbose)
    try:
        cfg = _load(config, SynthCorpusConfig)
        if seed is not None:
            cfg = cfg.model_copy(update={"rng_seed": seed})
        paths = run_synth(cfg, out, jobs or JOBS, format)
    except SteerMetricsError as e:
        raise _fail(e) from e
    typer.echo(f"{len(paths)} drive logs written to {out}")


@app.command()
def extract(
    input: InputOption,
    config: ConfigOption = None,
    out: OutOption = Path("out"),
    seed: SeedOption = None,
    jobs: JobsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Extract interaction sequences and sample matched baselines."""
    _setup_logging(verbose)
    try:
        cfg = _pipeline_config(config, seed)
        result = run_extract(resolve_inputs(input), cfg, out, jobs or JOBS)
    except SteerMetricsError as e:
        raise _fail(e) from e
    typer.echo(f"{len(result.interactions)} interaction sequences extracted")
    typer.echo(f"{len(result.baselines)} baseline sequences sampled")
    if result.manifest.counts.shortfall:
        typer.echo(f"baseline shortfall per duration bin: {result.manifest.counts.shortfall}")


@app.command()
def report(
    input: InputOption,
    config: ConfigOption = None,
    out: OutOption = Path("out"),
    sequences: Annotated[
        Path | None,
        typer.Option("--sequences", "-s", help="Directory with the sequence files (default: --out)."),
    ] = None,
    seed: SeedOption = None,
    format: Annotated[
        ReportFormat, typer.Option("--format", "-f", help="Report file format.")
    ] = ReportFormat.CSV,
    jobs: JobsOption = None,
    run_all: Annotated[
        bool, typer.Option("--all", help="Run extract first, writing sequences to --out.")
    ] = False,
    verbose: VerboseOption = False,
) -> None:
    """Estimate alpha, compute sequence metrics and write the comparison report."""
    _setup_logging(verbose)
    n_jobs = jobs or JOBS
    try:
        cfg = _pipeline_config(config, seed)
        inputs = resolve_inputs(input)
        drives = None
        sequences_dir = sequences or out
        if run_all:
            extracted = run_extract(inputs, cfg, out, n_jobs)
            drives, sequences_dir = extracted.drives, out
            typer.echo(f"{len(extracted.interactions)} interaction sequences extracted")
        result = run_report(sequences_dir, inputs, cfg, out, n_jobs, format.value, drives)
    except SteerMetricsError as e:
        raise _fail(e) from e

    typer.echo(f"alpha = {result.alpha.alpha:.6g} from {result.alpha.n_baseline_sequences} baselines")
    for effect in result.report.effect_sizes:
        typer.echo(
            f"d[{effect.metric}, {effect.condition}] = {effect.d:+.3f} "
            f"(n = {effect.n_interaction} / {effect.n_baseline})"
        )


@app.command()
def version() -> None:
    """Print the tool version."""
    typer.echo(TOOL_VERSION)


def main() -> None:
    """Run the steermetrics CLI."""
    app()


if __name__ == "__main__":
    main()
