"""
graph: realize the configured random graphs without running any dynamics.
"""

import logging

import click

from commands.common import config_option, exit_codes, load_config, out_option, resolve_store, seed_option
from services.sweep_service import SweepService

logger = logging.getLogger(__name__)


@click.command("graph")
@config_option
@out_option
@seed_option
@exit_codes
def graph_command(config_path, out_dir, seed_override):
    """Generate graph files (positions, couplings, fields) for every graph seed."""
    config = load_config(config_path, seed_override)
    store = resolve_store(config, out_dir)
    store.prepare()
    contexts = SweepService(store).build_contexts(config)
    for seed, context in sorted(contexts.items()):
        line = f"seed {seed}: L={context.graph.L} median |b|={context.couplings.median_coupling:.6g}"
        if context.coupling_scale is not None:
            line += f" J={context.coupling_scale:.6g}"
        click.echo(f"{line} -> {store.graph_path(seed)}")
