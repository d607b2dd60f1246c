"""
CLI module for triplewave.
Provides the command line interface to the geometry, experiment and norm pipelines.
"""

import json
import logging

import click
import yaml

from triplewave.cli.config import load_config
from triplewave.cli.pipelines import EXIT_USAGE, PipelineRunner
from triplewave.errors import ConfigError
from triplewave.utils.io import to_jsonable

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)


def print_yaml(data):
    """Print data as YAML."""
    print(yaml.safe_dump(to_jsonable(data), default_flow_style=False))


def print_json(data, indent=2):
    """Print data as JSON."""
    print(json.dumps(to_jsonable(data), indent=indent, sort_keys=True))


def _report(ctx, result):
    """Echo the outcome, print the result dict and exit with its code."""
    if result["success"]:
        click.echo(result["message"])
    else:
        click.echo(f"Failed: {result['message']}", err=True)
    if ctx.obj['output_format'] == 'json':
        print_json(result)
    else:
        print_yaml(result)
    ctx.exit(result["exit_code"])


@click.group()
@click.option(
    '--config',
    'config_path',
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help='Path to the YAML run configuration'
)
@click.option(
    '--out',
    type=click.Path(file_okay=False),
    default=None,
    help='Output directory (overrides output_dir in the config)'
)
@click.option(
    '--threads',
    type=click.IntRange(min=1),
    default=None,
    help='Cap on worker threads for ray tracing'
)
@click.option(
    '--output-format',
    type=click.Choice(['yaml', 'json']),
    default='yaml',
    help='Output format: yaml or json'
)
@click.option('--verbose', is_flag=True, help='Enable debug logging')
@click.pass_context
def cli(ctx, config_path, out, threads, output_format, verbose):
    """
    Numerical toolkit for triple interactions of conormal waves.

    Traces the flow-out of a triple intersection, runs matched semilinear
    wave experiments, detects the new front and checks the anisotropic
    norm estimates. Every command writes JSON reports under --out.
    """
    ctx.ensure_object(dict)
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = load_config(config_path)
    except ConfigError as e:
        click.echo(f"Invalid configuration: {e}", err=True)
        ctx.exit(EXIT_USAGE)

    ctx.obj['config'] = config
    ctx.obj['output_format'] = output_format
    ctx.obj['runner'] = PipelineRunner(config, out_dir=out, threads=threads)


@cli.command()
@click.pass_context
def rays(ctx):
    """
    Trace null bicharacteristics from Gamma and write them as CSV.
    """
    click.echo("Tracing rays...")
    _report(ctx, ctx.obj['runner'].run_rays())


@cli.command()
@click.pass_context
def flowout(ctx):
    """
    Build the flow-out mesh of Gamma and compare it with the closed-form Q.
    """
    click.echo("Assembling flow-out mesh...")
    _report(ctx, ctx.obj['runner'].run_flowout())


@cli.command()
@click.pass_context
def experiment(ctx):
    """
    Run the matched cubic, quadratic and linear solver runs and the discriminator.
    """
    config = ctx.obj['config']
    click.echo(f"Running triple-interaction experiment on {config.scenario.id} "
               f"({'x'.join(str(p) for p in config.grid.points)} grid)...")
    _report(ctx, ctx.obj['runner'].run_experiment())


@cli.command()
@click.pass_context
def norms(ctx):
    """
    Check the anisotropic norm thresholds and kernel integrals.
    """
    click.echo("Computing anisotropic norms...")
    _report(ctx, ctx.obj['runner'].run_norms())


@cli.command('verify-all')
@click.pass_context
def verify_all(ctx):
    """
    Run every configured pipeline and the order bookkeeping checks.
    """
    click.echo("Running all checks...")
    result = ctx.obj['runner'].verify_all()
    for name, item in result["results"].items():
        click.echo(f"  {name}: {'ok' if item['success'] else 'FAILED'} (exit {item['exit_code']})")
    _report(ctx, result)


def main():
    """Entry point for the CLI."""
    cli(obj={})


if __name__ == '__main__':
    main()
