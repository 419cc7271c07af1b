"""Command-line entry point: render one CSV into one image."""

import sys

import click

from . import __version__
from .csvdata import CsvError
from .render import KINDS, PlotJob, render


@click.command()
@click.version_option(__version__)
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", required=True, type=click.Choice(KINDS))
@click.option("--x", "x_col", required=True, help="x (or azimuthal) column")
@click.option("--y", "y_col", required=True, help="y (or radial) column")
@click.option("--value", default="I", show_default=True)
@click.option("--out", required=True, help="output image path")
@click.option("--title", default="")
@click.option("--clamp", default="0:1.2", show_default=True,
              help="display range lo:hi; values outside saturate")
def render_cmd(input_path, kind, x_col, y_col, value, out, title, clamp):
    """Render a sweep CSV as a heatmap, line family, or polar map."""
    try:
        lo, hi = (float(s) for s in clamp.split(":"))
    except ValueError:
        click.echo(f"error: bad clamp {clamp!r}; expected lo:hi", err=True)
        sys.exit(1)
    job = PlotJob(input=input_path, kind=kind, x=x_col, y=y_col,
                  value=value, out=out, title=title, clamp=(lo, hi))
    try:
        summary = render(job)
    except (CsvError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {summary['out']} ({summary['rows']} rows)")
