"""
analyze: recompute derived products from series already on disk.
"""

import logging

import click

from commands.common import config_option, exit_codes, load_config, out_option, resolve_store
from services.sweep_service import SweepService
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


@click.command("analyze")
@config_option
@out_option
@exit_codes
def analyze_command(config_path, out_dir):
    """Rewrite lifetimes, heatmaps, spectra and fits of an existing run directory.

    Uses the echoed config.yaml of the run unless --config is given.
    """
    if out_dir is None:
        raise ConfigError("--out must name an existing run directory")
    store = resolve_store(None, out_dir)
    config = load_config(config_path) if config_path is not None else store.load_config()
    statuses = SweepService(store).analyze(config)
    resolved = sum(1 for status in statuses if status.lifetime is not None)
    click.echo(f"analyzed {len(statuses)} series ({resolved} with a lifetime) -> {store.root}")
