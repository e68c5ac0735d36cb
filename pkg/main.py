import importlib
import logging
import os
import sys
from pathlib import Path

import click

from cogs.utils.errors import (
    ConfigError,
    ExperimentError,
    FlatlandError,
    FormatError,
    ShapeError,
    StrError,
    TrainingDiverged,
)

log = logging.getLogger(__name__)

COGS = Path(__file__).resolve().parent / "cogs"


class Cli(click.Group):
    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.load_extensions()

    def load_extensions(self):
        for filename in sorted(os.listdir(COGS)):
            if filename.endswith(".py") and not filename.startswith("_"):
                module = importlib.import_module(f"cogs.{filename[:-3]}")
                module.setup(self)

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except StrError as error:
            self.on_command_error(error)
            ctx.exit(1)

    def on_command_error(self, error: StrError):
        if isinstance(error, TrainingDiverged):
            message = f"Training diverged: {error}"
        elif isinstance(error, ConfigError):
            message = f"Configuration error: {error}"
        elif isinstance(error, FormatError):
            message = f"File format error: {error}"
        elif isinstance(error, ShapeError):
            message = f"Shape mismatch: {error}"
        elif isinstance(error, (FlatlandError, ExperimentError)):
            message = str(error)
        else:
            message = f"{type(error).__name__}: {error}"
        log.debug("Command failed", exc_info=error)
        click.echo(message, err=True)


@click.group(cls=Cli)
def cli():
    """Spatial routing and occupancy fusion on the flatland testbed."""
    logging.basicConfig(
        level=os.getenv("FLATROUTE_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


if __name__ == "__main__":
    cli()
