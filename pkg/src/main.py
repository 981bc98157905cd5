import logging
import sys

import click

from engine.anonymity_engine import AnonymityEngine
from engine.errors import GroupAnonymityError
from utils.logging_config import configure_logging
from utils.run_config import MODES, load_run_config

logger = logging.getLogger(__name__)

VERIFY_FAILED = 4

config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False),
    help="Run configuration (YAML)."
)


def _report_progress(percent, message):
    logger.debug("%3d%% %s", percent, message)


def _run(action):
    """Run a command body, turning library errors into their exit codes."""
    try:
        return action()
    except GroupAnonymityError as e:
        click.secho(f"Error: {e}", fg="red", err=True)
        sys.exit(e.exit_code)


@click.group()
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
def cli(verbose):
    """Group anonymity masking of microfile distributions with wavelets."""
    configure_logging("DEBUG" if verbose else None)


@cli.command("mask")
@config_option
@click.option("--mode", type=click.Choice(MODES), help="Override the configured mode.")
@click.option("--seed", type=int, help="Seed for record selection.")
@click.option("--offset", type=float, help="Non-positive offset applied before rescaling.")
@click.option("--rounding", type=click.Choice(["nearest", "sum-preserving"]), help="Integer rounding mode.")
@click.option("--emit-plot", "plot_path", type=click.Path(dir_okay=False), help="Write plot-ready CSV series.")
@click.option("--emit-chart", "chart_path", type=click.Path(dir_okay=False), help="Write a PNG chart.")
@click.option("--out-dir", type=click.Path(file_okay=False), help="Directory for the report and run record.")
def cmd_mask(config_path, mode, seed, offset, rounding, plot_path, chart_path, out_dir):
    """Mask a group's distribution and write the masked microfile, report and run record."""
    def action():
        config = load_run_config(config_path, {
            "mode": mode, "seed": seed, "offset": offset, "rounding": rounding,
            "plot_path": plot_path, "chart_path": chart_path, "out_dir": out_dir,
        })
        outcome = AnonymityEngine().run_mask(config, progress_callback=_report_progress)
        click.echo(outcome["report"], nl=False)
        for name, path in outcome["paths"].items():
            click.echo(f"{name}: {path}")

    _run(action)


@cli.command("inspect")
@config_option
@click.option("--mode", type=click.Choice(MODES), help="Override the configured mode.")
@click.option("--emit-plot", "plot_path", type=click.Path(dir_okay=False), help="Write signal, A_k and D_1..D_k as CSV.")
@click.option("--emit-chart", "chart_path", type=click.Path(dir_okay=False), help="Write a PNG decomposition chart.")
def cmd_inspect(config_path, mode, plot_path, chart_path):
    """Print a signal's wavelet decomposition and its extremal coefficients."""
    def action():
        config = load_run_config(config_path, {"mode": mode, "plot_path": plot_path, "chart_path": chart_path})
        outcome = AnonymityEngine().run_inspect(config, progress_callback=_report_progress)
        click.echo(outcome["report"], nl=False)
        for name, path in outcome["paths"].items():
            click.echo(f"{name}: {path}")

    _run(action)


@cli.command("verify")
@click.argument("original", type=click.Path(exists=True, dir_okay=False))
@click.argument("masked", type=click.Path(exists=True, dir_okay=False))
@config_option
@click.option("--record", "record_path", type=click.Path(exists=True, dir_okay=False),
              help="Run record with the expected masked counts.")
def cmd_verify(original, masked, config_path, record_path):
    """Check a masked microfile against its original; exit 0 only on a pass."""
    def action():
        config = load_run_config(config_path)
        outcome = AnonymityEngine().run_verify(config, original, masked, record_path)
        click.echo(outcome["report"], nl=False)
        if not outcome["passed"]:
            sys.exit(VERIFY_FAILED)

    _run(action)


def main():
    cli(prog_name="groupanon")


if __name__ == "__main__":
    main()
