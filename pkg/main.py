"""
Command-line entrypoint for the prethermal time-crystal simulator.
"""

import logging

import click

from commands.analyze import analyze_command
from commands.graph import graph_command
from commands.run import run_command, sweep_command
from commands.verify import verify_command
from config import settings


@click.group()
@click.version_option(settings.APP_VERSION, prog_name=settings.APP_NAME)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=None,
    help="Overrides PDTC_LOG_LEVEL.",
)
def cli(log_level):
    """Two-frequency driven dipolar spin simulator."""
    # Configure logging
    logging.basicConfig(
        level=(log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )
    logging.getLogger(__name__).debug(f"{settings.APP_NAME} {settings.APP_VERSION} starting")


cli.add_command(graph_command)
cli.add_command(run_command)
cli.add_command(sweep_command)
cli.add_command(analyze_command)
cli.add_command(verify_command)


if __name__ == "__main__":
    cli()
