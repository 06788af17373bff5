"""
verify: run the invariant battery and print measured defects.
"""

import click

from commands.common import EXIT_CELL_FAILURE, exit_codes
from services.verify_service import VerifyService


@click.command("verify")
@click.option("--seed", type=int, default=None, help="Seed for the random instances.")
@exit_codes
def verify_command(seed):
    """Compare closed forms and the Krylov engine against dense references."""
    report = VerifyService(seed=seed).run()
    click.echo(report.to_text())
    if not report.passed:
        raise SystemExit(EXIT_CELL_FAILURE)
