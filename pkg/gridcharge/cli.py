"""Emissions-aware EV charging experiments.

Each command runs one stage of an experiment, or all of them:

\b
  ucp         dispatch the generation mix for one day
  charge      schedule one fleet at one trade-off weight λ
  montecarlo  compare charging policies over many seeded runs
  dump-lp     print a linear program in readable form

The experiment is read from --config, else from the file named by the
GRIDCHARGE_CONFIG environment variable, else from the bundled default.
"""
import logging
from importlib import import_module
from pathlib import Path

import click

from gridcharge.util._logging import setup as setup_logging
from gridcharge.util.click import common_params
from gridcharge.util.context import Context

log = logging.getLogger(__name__)

#: Modules providing one command each, as their ``cli`` attribute.
COMMAND_MODULES = (
    "gridcharge.model.ucp",
    "gridcharge.model.charging",
    "gridcharge.model.lp_core",
    "gridcharge.harness",
)


@click.group(help=__doc__)
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Experiment configuration file.",
)
@click.option("--local-data", type=Path, help="Base directory for outputs.")
@common_params("verbose")
@click.pass_context
def main(click_ctx, config, local_data, verbose):
    setup_logging(level="DEBUG" if verbose else "INFO", console=True)

    # Not Context.only(): under click.testing, fixtures may hold other instances
    context = Context.get_instance(-1)
    context.handle_cli_args(config=config, local_data=local_data)
    click_ctx.obj = context


@main.command(hidden=True)
@click.pass_obj
def debug(context):
    """Log the resolved configuration and output paths."""
    log.debug(f"config: {context.config_path}")
    log.debug(f"local data: {context.local_data}")


for _name in COMMAND_MODULES:
    main.add_command(import_module(_name).cli)
