"""Command-line entry point orchestrating the pipeline stages.

Exit codes: 0 success, 2 configuration error, 3 missing upstream artifact,
4 endpoint failure.
"""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click

from explpipe.core.errors import CorpusError
from explpipe.core.ingest import validate_run_dir
from explpipe.generation.client import EndpointError
from explpipe.filtering.backends import ScorerProtocolError
from explpipe.pipeline import stages as stage_mod
from explpipe.pipeline.config import ConfigError, RunConfig, apply_overrides, load_config
from explpipe.pipeline.stages import MissingUpstreamError, ValidationFailure

EXIT_CONFIG = 2
EXIT_UPSTREAM = 3
EXIT_ENDPOINT = 4


def _load(config_path, seed, backend, threshold, mode) -> RunConfig:
    cfg = load_config(config_path) if config_path else RunConfig()
    return apply_overrides(cfg, seed=seed, backend=backend, threshold=threshold, mode=mode)


def common_options(fn):
    @click.option("--config", "config_path", type=click.Path(), default=None, help="TOML run config.")
    @click.option("--run-dir", required=True, type=click.Path(), help="Run directory for artifacts.")
    @click.option("--force", is_flag=True, help="Re-run even when the manifest says up to date.")
    @click.option("--seed", type=int, default=None, help="Override the run seed.")
    @click.option(
        "--backend",
        type=str,
        default=None,
        help="Filter backend: nll, builtin, or external:<url>.",
    )
    @click.option("--threshold", type=click.Choice(["3of3", "2of3"]), default=None)
    @click.option(
        "--mode", type=click.Choice(["full", "explanation-only"]), default=None,
        help="Filter input mode.",
    )
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            click.echo(f"config error: {e}", err=True)
            sys.exit(EXIT_CONFIG)
        except MissingUpstreamError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_UPSTREAM)
        except (EndpointError, ScorerProtocolError) as e:
            click.echo(f"endpoint error: {e}", err=True)
            sys.exit(EXIT_ENDPOINT)
        except (ValidationFailure, CorpusError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(1)

    return wrapper


def _run_single(stage_fn, config_path, run_dir, force, seed, backend, threshold, mode):
    cfg = _load(config_path, seed, backend, threshold, mode)
    result = stage_fn(Path(run_dir), cfg, force)
    click.echo(result.describe())


def _make_stage_command(name: str, stage_fn, help_text: str):
    @cli.command(name=name, help=help_text)
    @common_options
    def command(config_path, run_dir, force, seed, backend, threshold, mode):
        _run_single(stage_fn, config_path, run_dir, force, seed, backend, threshold, mode)

    return command


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def cli(verbose):
    """Overgenerate-and-filter pipeline for free-text explanations."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


_make_stage_command("validate", stage_mod.stage_validate, "Ingest the corpus and check integrity.")
_make_stage_command("prompts", stage_mod.stage_prompts, "Dry-run prompt renders.")
_make_stage_command("generate", stage_mod.stage_generate, "Overgenerate explanation candidates.")
_make_stage_command(
    "predict-labels", stage_mod.stage_predict_labels, "Few-shot label prediction."
)
_make_stage_command(
    "annotate-synthetic",
    stage_mod.stage_annotate_synthetic,
    "Collect judgments from the in-repo synthetic annotators.",
)
_make_stage_command("aggregate", stage_mod.stage_aggregate, "Aggregate judgments into labels.")
_make_stage_command(
    "build-labels", stage_mod.stage_build_labels, "Build the filter training set."
)
_make_stage_command("train-filter", stage_mod.stage_train_filter, "Train the built-in filter.")
_make_stage_command("score", stage_mod.stage_score, "Score candidates with a backend.")
_make_stage_command("select", stage_mod.stage_select, "Select the top candidate per instance.")
_make_stage_command("evaluate", stage_mod.stage_evaluate, "Compute the metric suite.")
_make_stage_command("report", stage_mod.stage_report, "Render tables and per-item CSV.")


@cli.command(name="run", help="Run every stage in order.")
@common_options
def run_all(config_path, run_dir, force, seed, backend, threshold, mode):
    cfg = _load(config_path, seed, backend, threshold, mode)
    for result in stage_mod.run_pipeline(Path(run_dir), cfg, force):
        click.echo(result.describe())


@cli.command(name="check", help="Referential-integrity pass over a run directory.")
@click.option("--run-dir", required=True, type=click.Path(exists=True))
def check(run_dir):
    problems = validate_run_dir(run_dir)
    if problems:
        for p in problems:
            click.echo(p, err=True)
        sys.exit(1)
    click.echo("ok")


@cli.command(name="serve", help="Start the annotation service (and UI, if built).")
@click.option("--run-dir", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--admin-token", default=None, help="Defaults to EXPLPIPE_ADMIN_TOKEN.")
@click.option(
    "--static-dir",
    default=None,
    type=click.Path(),
    help="Directory of built UI assets to serve at /.",
)
def serve(run_dir, host, port, admin_token, static_dir):
    import uvicorn

    from explpipe.annotation.service import create_app
    from explpipe.annotation.studies import StudyStore

    run_path = Path(run_dir)
    run_path.mkdir(parents=True, exist_ok=True)
    store = StudyStore.open(run_path)
    if static_dir is None and Path("frontend/dist").is_dir():
        static_dir = "frontend/dist"
    app = create_app(store, admin_token=admin_token, static_dir=static_dir)
    click.echo(f"annotation service on http://{host}:{port} (run dir: {run_dir})")
    uvicorn.run(app, host=host, port=port, log_level="info")


def main():
    cli()


if __name__ == "__main__":
    main()
