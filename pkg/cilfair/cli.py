#!/usr/bin/env python3
import os
from typing import Callable, List, Optional

import click

from . import __version__
from .experiments import (PROBES, SWEEPS, check_dataset, run_ablation, run_benchmark, run_probe,
                          run_sweep, validate_probe, validate_sweep)
from .utils import ExperimentConfig, Settings, configure_logging, setup_logger
from .utils.errors import ConfigError, ParameterError, ParseError

logger = setup_logger(__name__)

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

VALIDATION_ERRORS = (ConfigError, ParameterError, ParseError)


def _fail(ctx, code: int, message: str):
    logger.error(message)
    click.echo(f"Error: {message}", err=True)
    ctx.exit(code)


def _load_config(ctx, config_path: str, check: Optional[Callable[[ExperimentConfig], None]] = None) -> ExperimentConfig:
    try:
        config = ExperimentConfig.from_file(config_path)
        check_dataset(config)
        if check is not None:
            check(config)
        return config
    except VALIDATION_ERRORS as e:
        _fail(ctx, EXIT_CONFIG, f"Configuration error: {e}")


def _prepare_output(ctx, out: Optional[str], config: ExperimentConfig, name: str, force: bool) -> str:
    settings: Settings = ctx.obj['settings']
    out_dir = out or config.output_dir or os.path.join(settings.output_dir, name)
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not force:
        _fail(ctx, EXIT_CONFIG, f"Output directory {out_dir} is not empty (use --force to overwrite)")
    if os.path.exists(out_dir) and not os.path.isdir(out_dir):
        _fail(ctx, EXIT_CONFIG, f"Output path {out_dir} is not a directory")
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _execute(ctx, label: str, action: Callable[[], List[str]]) -> None:
    try:
        paths = action()
    except Exception as e:
        logger.exception(f"{label} failed")
        _fail(ctx, EXIT_RUNTIME, f"{label} failed: {e}")
        return
    click.echo(f"✓ {label} finished")
    for path in paths:
        click.echo(f"  - {path}")


def _workers(ctx, jobs: Optional[int]) -> int:
    return jobs if jobs is not None else ctx.obj['settings'].jobs


output_options = [
    click.option('--out', 'out', type=click.Path(file_okay=False), help='Output directory'),
    click.option('--force', is_flag=True, help='Write into a non-empty output directory'),
    click.option('--jobs', type=click.IntRange(min=1), help='Parallel worker processes (overrides .env)'),
]


def with_output_options(func):
    for option in reversed(output_options):
        func = option(func)
    return func


@click.group()
@click.version_option(__version__, prog_name='cilfair')
@click.option('--env-file', type=click.Path(exists=True, dir_okay=False), help='Path to .env file')
@click.pass_context
def cli(ctx, env_file):
    """Fairness testing and repair for class-incremental learning"""
    ctx.ensure_object(dict)
    try:
        settings = Settings.from_env(env_file)
        settings.validate()
    except ConfigError as e:
        _fail(ctx, EXIT_CONFIG, f"Configuration error: {e}")
        return
    ctx.obj['settings'] = settings
    configure_logging(settings.log_dir, settings.log_level)


@cli.command()
@click.argument('config_path', type=click.Path(dir_okay=False))
@with_output_options
@click.option('--save-models', is_flag=True, help='Write a model checkpoint after every step')
@click.option('--export-divergences', is_flag=True, help='Write per-sample divergences of every repair step')
@click.pass_context
def run(ctx, config_path, out, force, jobs, save_models, export_divergences):
    """Run every configured method and seed over the incremental benchmark"""
    config = _load_config(ctx, config_path)
    out_dir = _prepare_output(ctx, out, config, 'run', force)
    _execute(ctx, "Benchmark run", lambda: run_benchmark(
        config, out_dir, _workers(ctx, jobs), save_models, export_divergences))


@cli.command()
@click.argument('kind', type=click.Choice(PROBES))
@click.argument('config_path', type=click.Path(dir_okay=False))
@with_output_options
@click.pass_context
def probe(ctx, kind, config_path, out, force, jobs):
    """Run one root-cause probe (imbalance, memory, mask, coverage-bias, distill, hard-sample)"""
    config = _load_config(ctx, config_path, lambda c: validate_probe(kind, c))
    out_dir = _prepare_output(ctx, out, config, f'probe_{kind}', force)
    _execute(ctx, f"Probe {kind}", lambda: run_probe(kind, config, out_dir, _workers(ctx, jobs)))


@cli.command()
@click.argument('param', type=click.Choice(SWEEPS))
@click.argument('config_path', type=click.Path(dir_okay=False))
@with_output_options
@click.pass_context
def sweep(ctx, param, config_path, out, force, jobs):
    """Sweep one hyperparameter of the repair method"""
    config = _load_config(ctx, config_path, lambda c: validate_sweep(param, c))
    out_dir = _prepare_output(ctx, out, config, f'sweep_{param}', force)
    _execute(ctx, f"Sweep {param}", lambda: run_sweep(param, config, out_dir, _workers(ctx, jobs)))


@cli.command()
@click.argument('config_path', type=click.Path(dir_okay=False))
@with_output_options
@click.pass_context
def ablate(ctx, config_path, out, force, jobs):
    """Compare the repair method against its ablated variants"""
    config = _load_config(ctx, config_path)
    out_dir = _prepare_output(ctx, out, config, 'ablation', force)
    _execute(ctx, "Ablation", lambda: run_ablation(config, out_dir, _workers(ctx, jobs)))


if __name__ == '__main__':
    cli()
