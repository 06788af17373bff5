"""
Options and error handling shared by every subcommand.
"""

import functools
import logging
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from config import settings
from schemas.request_schemas import RunConfig
from store.artifact_store import ArtifactStore
from utils.errors import ConfigError, PdtcError
from utils.file_utils import FileManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CELL_FAILURE = 1
EXIT_CONFIG_ERROR = 2

config_option = click.option(
    "--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="YAML run configuration."
)
out_option = click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
workers_option = click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel worker count.")
seed_option = click.option("--seed-override", "seed_override", type=int, default=None, help="Derive all seeds from S.")


def load_config(config_path: Optional[Path], seed_override: Optional[int] = None) -> RunConfig:
    if config_path is None:
        raise ConfigError("--config is required")
    config = FileManager.load_run_config(config_path)
    if seed_override is not None:
        config = config.with_seed_override(seed_override)
        logger.info(f"Seeds derived from override {seed_override}")
    return config


def resolve_store(config: Optional[RunConfig], out_dir: Optional[Path]) -> ArtifactStore:
    if out_dir is not None:
        return ArtifactStore(out_dir)
    if config is not None and config.output_dir:
        return ArtifactStore(Path(config.output_dir))
    return ArtifactStore(settings.output_dir)


def exit_codes(command):
    """Translate library errors into the documented exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (ConfigError, ValidationError) as e:
            logger.error(f"Configuration error: {e}")
            click.echo(f"config error: {e}", err=True)
            raise SystemExit(EXIT_CONFIG_ERROR)
        except PdtcError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"error: {e}", err=True)
            raise SystemExit(e.exit_code)

    return wrapper
