"""
run and sweep: execute configured cells and write the artifact set.
"""

import logging

import click

from commands.common import (
    config_option,
    exit_codes,
    load_config,
    out_option,
    resolve_store,
    seed_option,
    workers_option,
)
from schemas.response_schemas import RunManifest
from services.sweep_service import SweepService
from utils.errors import CellFailure

logger = logging.getLogger(__name__)


def report(manifest: RunManifest, root) -> None:
    failed = manifest.failed_cells
    click.echo(f"{len(manifest.cells) - len(failed)} cell(s) ok, {len(failed)} failed -> {root}")
    for cell in failed:
        click.echo(f"  cell {cell.index}: {cell.reason}", err=True)
    if failed:
        raise CellFailure(f"{len(failed)} of {len(manifest.cells)} cell(s) failed")


@click.command("run")
@config_option
@out_option
@seed_option
@exit_codes
def run_command(config_path, out_dir, seed_override):
    """Execute the first cell of the configuration only."""
    config = load_config(config_path, seed_override)
    store = resolve_store(config, out_dir)
    manifest = SweepService(store).execute(config, workers=1, limit=1)
    report(manifest, store.root)


@click.command("sweep")
@config_option
@out_option
@workers_option
@seed_option
@exit_codes
def sweep_command(config_path, out_dir, workers, seed_override):
    """Execute every cell of the sweep grid with a static partition over workers."""
    config = load_config(config_path, seed_override)
    store = resolve_store(config, out_dir)
    manifest = SweepService(store).execute(config, workers=workers)
    report(manifest, store.root)
